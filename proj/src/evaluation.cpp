#include "xmrt/evaluation.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "xmrt/errors.hpp"

namespace xmrt {

void RelevanceMap::validate() const {
    for (std::size_t q = 0; q < relevant.size(); ++q) {
        if (relevant[q].empty()) throw DataError("query " + std::to_string(q) + " has no relevant items");
        std::unordered_set<std::size_t> seen;
        for (std::size_t id : relevant[q]) {
            if (id >= gallery_size) {
                throw DataError("query " + std::to_string(q) + " lists gallery id " + std::to_string(id) +
                                " outside a gallery of " + std::to_string(gallery_size));
            }
            if (!seen.insert(id).second) {
                throw DataError("query " + std::to_string(q) + " lists gallery id " + std::to_string(id) + " twice");
            }
        }
    }
}

RelevanceMap RelevanceMap::one_to_one(std::size_t n) {
    RelevanceMap r;
    r.gallery_size = n;
    r.relevant.resize(n);
    for (std::size_t q = 0; q < n; ++q) r.relevant[q] = {q};
    return r;
}

std::string to_string(AnnotationMode mode) { return mode == AnnotationMode::single ? "single" : "multiple"; }

AnnotationMode parse_annotation_mode(std::string_view name) {
    if (name == "single") return AnnotationMode::single;
    if (name == "multiple") return AnnotationMode::multiple;
    throw ConfigError("unknown annotation mode '" + std::string(name) + "'");
}

std::vector<std::size_t> rank_gallery(std::span<const double> scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

double average_precision_at_k(std::span<const std::size_t> ranking, std::span<const std::size_t> relevant,
                              std::size_t k) {
    if (k < 1) throw ContractError("k must be at least 1");
    if (relevant.empty()) throw DataError("average precision needs at least one relevant item");
    const std::unordered_set<std::size_t> rel(relevant.begin(), relevant.end());
    const std::size_t depth = std::min(k, ranking.size());
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t r = 0; r < depth; ++r) {
        if (rel.contains(ranking[r])) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(r + 1);
        }
    }
    return sum / static_cast<double>(std::min(rel.size(), k));
}

double recall_at_k(std::span<const std::size_t> ranking, std::span<const std::size_t> relevant, std::size_t k) {
    if (k < 1) throw ContractError("k must be at least 1");
    if (relevant.empty()) throw DataError("recall needs at least one relevant item");
    const std::unordered_set<std::size_t> rel(relevant.begin(), relevant.end());
    const std::size_t depth = std::min(k, ranking.size());
    std::size_t hits = 0;
    for (std::size_t r = 0; r < depth; ++r) hits += rel.contains(ranking[r]) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(rel.size());
}

namespace {

void check_dims(const DenseMatrix& sim, const RelevanceMap& relevance) {
    if (sim.rows() != relevance.gallery_size || sim.cols() != relevance.query_count()) {
        throw ContractError("similarity is " + std::to_string(sim.rows()) + "x" + std::to_string(sim.cols()) +
                            " but relevance describes " + std::to_string(relevance.gallery_size) + " gallery items x " +
                            std::to_string(relevance.query_count()) + " queries");
    }
    relevance.validate();
}

}  // namespace

MetricsReport evaluate(const DenseMatrix& sim, const RelevanceMap& relevance, AnnotationMode mode) {
    check_dims(sim, relevance);
    MetricsReport report;
    report.query_count = relevance.query_count();
    if (report.query_count == 0) return report;
    std::vector<double> column(sim.rows());
    for (std::size_t q = 0; q < sim.cols(); ++q) {
        for (std::size_t i = 0; i < sim.rows(); ++i) column[i] = sim(i, q);
        const auto ranking = rank_gallery(column);
        std::span<const std::size_t> rel = relevance.relevant[q];
        if (mode == AnnotationMode::single) rel = rel.first(1);
        report.map_at_10 += average_precision_at_k(ranking, rel, 10);
        report.map_at_16 += average_precision_at_k(ranking, rel, 16);
        report.r_at_1 += recall_at_k(ranking, rel, 1);
        report.r_at_5 += recall_at_k(ranking, rel, 5);
        report.r_at_10 += recall_at_k(ranking, rel, 10);
    }
    const double n = static_cast<double>(report.query_count);
    report.map_at_10 /= n;
    report.map_at_16 /= n;
    report.r_at_1 /= n;
    report.r_at_5 /= n;
    report.r_at_10 /= n;
    return report;
}

double map_at_16(const DenseMatrix& sim, const RelevanceMap& relevance) {
    return evaluate(sim, relevance, AnnotationMode::multiple).map_at_16;
}

RelevanceMap parse_relevance(std::string_view text, std::size_t gallery_size) {
    RelevanceMap r;
    r.gallery_size = gallery_size;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line[0] == '#') continue;
        std::istringstream fields(line);
        std::vector<std::size_t> ids;
        std::string tok;
        while (fields >> tok) {
            std::size_t used = 0;
            unsigned long long v = 0;
            try {
                v = std::stoull(tok, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != tok.size() || tok[0] == '-') {
                throw DataError("relevance line " + std::to_string(lineno) + ": '" + tok + "' is not a gallery index");
            }
            ids.push_back(static_cast<std::size_t>(v));
        }
        if (ids.empty()) continue;
        r.relevant.push_back(std::move(ids));
    }
    r.validate();
    return r;
}

RelevanceMap load_relevance(const std::filesystem::path& path, std::size_t gallery_size) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open relevance file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_relevance(buf.str(), gallery_size);
}

std::string format_relevance(const RelevanceMap& relevance) {
    std::ostringstream out;
    out << "# one query per line: paired gallery index first, then other relevant indices\n";
    for (const auto& ids : relevance.relevant) {
        for (std::size_t k = 0; k < ids.size(); ++k) out << (k ? " " : "") << ids[k];
        out << '\n';
    }
    return out.str();
}

}  // namespace xmrt
