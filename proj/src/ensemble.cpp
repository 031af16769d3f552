#include "xmrt/ensemble.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "xmrt/errors.hpp"

namespace xmrt {

std::string to_string(ModelSlot slot) {
    switch (slot) {
        case ModelSlot::passt: return "PaSST";
        case ModelSlot::eat: return "EAT";
        case ModelSlot::beats: return "BEATs";
    }
    return "unknown";
}

ModelSlot parse_model_slot(std::string_view name) {
    if (name == "PaSST" || name == "passt") return ModelSlot::passt;
    if (name == "EAT" || name == "eat") return ModelSlot::eat;
    if (name == "BEATs" || name == "beats") return ModelSlot::beats;
    throw ConfigError("unknown model slot '" + std::string(name) + "'");
}

std::string to_string(Strategy strategy) {
    return strategy == Strategy::system_first ? "system-first" : "model-first";
}

Strategy parse_strategy(std::string_view name) {
    if (name == "system-first") return Strategy::system_first;
    if (name == "model-first") return Strategy::model_first;
    throw ConfigError("unknown ensemble strategy '" + std::string(name) + "'");
}

namespace {

constexpr double kWeightSumTolerance = 1e-6;

void check_convex(std::span<const double> w, const std::string& what) {
    double sum = 0.0;
    for (double x : w) {
        if (!(x >= 0.0) || !std::isfinite(x)) throw ContractError(what + ": weights must be finite and nonnegative");
        sum += x;
    }
    if (std::abs(sum - 1.0) > kWeightSumTolerance) {
        throw ContractError(what + ": weights sum to " + std::to_string(sum) + ", expected 1");
    }
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace

std::vector<double> EnsembleSpec::weights() const {
    std::vector<double> w;
    w.reserve(members.size());
    for (const auto& m : members) w.push_back(m.weight);
    return w;
}

void EnsembleSpec::validate() const {
    if (members.empty()) throw ContractError("ensemble has no members");
    check_convex(weights(), "ensemble '" + name + "'");
}

DenseMatrix weighted_sum(std::span<const DenseMatrix> matrices, std::span<const double> weights) {
    if (matrices.empty()) throw ContractError("nothing to fuse");
    if (matrices.size() != weights.size()) {
        throw ContractError("fusing " + std::to_string(matrices.size()) + " matrices with " +
                            std::to_string(weights.size()) + " weights");
    }
    const auto& first = matrices.front();
    for (const auto& m : matrices) {
        if (m.rows() != first.rows() || m.cols() != first.cols()) throw ContractError("fused matrices differ in shape");
    }
    DenseMatrix out(first.rows(), first.cols());
    auto dst = out.values();
    bool started = false;
    for (std::size_t i = 0; i < matrices.size(); ++i) {
        if (weights[i] == 0.0) continue;
        const auto src = matrices[i].values();
        if (!started) {
            for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = weights[i] * src[k];
            started = true;
        } else {
            for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += weights[i] * src[k];
        }
    }
    return out;
}

DenseMatrix fuse(std::span<const DenseMatrix> matrices, const EnsembleSpec& spec) {
    spec.validate();
    if (spec.members.size() != matrices.size()) {
        throw ContractError("ensemble '" + spec.name + "' has " + std::to_string(spec.members.size()) +
                            " members but " + std::to_string(matrices.size()) + " matrices were given");
    }
    return weighted_sum(matrices, spec.weights());
}

const std::vector<CoefficientRow>& published_coefficients() {
    static const std::vector<CoefficientRow> table{
        {"E1", {0.2275, 0.07, 0.06, 0, 0.12, 0.045, 0.325, 0, 0.045, 0.0975, 0.01, 0}, Strategy::system_first},
        {"E2", {0.2275, 0.0875, 0.04, 0, 0.15, 0.03, 0.325, 0, 0.03, 0.0975, 0.0125, 0}, Strategy::system_first},
        {"E3", {0.225, 0.175, 0.1, 0.03, 0.01, 0.01, 0.195, 0.045, 0.06, 0.09, 0.03, 0.03}, Strategy::model_first},
        {"E4", {0.18, 0.14, 0.08, 0.09, 0.03, 0.03, 0.13, 0.03, 0.04, 0.15, 0.05, 0.05}, Strategy::model_first},
    };
    return table;
}

std::vector<EnsembleSpec> load_coefficients(std::span<const CoefficientRow> table) {
    std::vector<EnsembleSpec> specs;
    for (const auto& row : table) {
        if (row.weights.size() != kTableColumns) {
            throw DataError("coefficient row '" + row.name + "' has " + std::to_string(row.weights.size()) +
                            " entries, expected " + std::to_string(kTableColumns));
        }
        EnsembleSpec spec{row.name, {}, row.strategy};
        double sum = 0.0;
        for (std::size_t s = 0; s < kTableSystems.size(); ++s)
            for (std::size_t m = 0; m < kTableModels.size(); ++m) {
                const double w = row.weights[s * kTableModels.size() + m];
                if (!(w >= 0.0) || !std::isfinite(w)) {
                    throw DataError("coefficient row '" + row.name + "' has a negative or non-finite weight");
                }
                sum += w;
                spec.members.push_back({kTableSystems[s], kTableModels[m], w});
            }
        if (std::abs(sum - 1.0) > kWeightSumTolerance) {
            throw DataError("coefficient row '" + row.name + "' sums to " + format_double(sum) + ", expected 1");
        }
        specs.push_back(std::move(spec));
    }
    return specs;
}

std::vector<CoefficientRow> parse_weight_table(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::vector<CoefficientRow> rows;
    bool header = false;
    bool with_strategy = false;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, '\t')) fields.push_back(f);
        if (!header) {
            with_strategy = fields.size() == kTableColumns + 2 && fields.back() == "strategy";
            if (fields.size() != kTableColumns + 1 && !with_strategy) {
                throw DataError("weight table header must have " + std::to_string(kTableColumns + 1) + " columns");
            }
            for (std::size_t c = 0; c < kTableColumns; ++c) {
                const std::string expected = "SID" + std::to_string(kTableSystems[c / kTableModels.size()]) + "/" +
                                             to_string(kTableModels[c % kTableModels.size()]);
                if (fields[c + 1] != expected) {
                    throw DataError("weight table column " + std::to_string(c + 1) + " is '" + fields[c + 1] +
                                    "', expected '" + expected + "'");
                }
            }
            header = true;
            continue;
        }
        if (fields.size() != kTableColumns + 1 + (with_strategy ? 1 : 0)) {
            throw DataError("weight table line " + std::to_string(lineno) + " has " + std::to_string(fields.size()) +
                            " fields");
        }
        CoefficientRow row{fields[0], {}, Strategy::system_first};
        if (with_strategy) {
            try {
                row.strategy = parse_strategy(fields.back());
            } catch (const ConfigError& e) {
                throw DataError("weight table line " + std::to_string(lineno) + ": " + e.what());
            }
            fields.pop_back();
        }
        for (std::size_t c = 1; c < fields.size(); ++c) {
            double v = 0.0;
            const auto* b = fields[c].data();
            const auto res = std::from_chars(b, b + fields[c].size(), v);
            if (res.ec != std::errc{} || res.ptr != b + fields[c].size()) {
                throw DataError("weight table line " + std::to_string(lineno) + ": bad number '" + fields[c] + "'");
            }
            row.weights.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    if (!header) throw DataError("weight table has no header");
    return rows;
}

std::string format_weight_table(std::span<const CoefficientRow> rows) {
    std::ostringstream out;
    out << "ensemble";
    for (int s : kTableSystems)
        for (ModelSlot m : kTableModels) out << "\tSID" << s << "/" << to_string(m);
    out << "\tstrategy\n";
    for (const auto& row : rows) {
        out << row.name;
        for (double w : row.weights) out << '\t' << format_double(w);
        out << '\t' << to_string(row.strategy) << '\n';
    }
    return out.str();
}

std::vector<CoefficientRow> load_weight_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open weight table " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_weight_table(buf.str());
}

void GridSearchConfig::validate() const {
    const auto divides_one = [](double s) {
        if (!(s > 0.0) || s > 1.0) return false;
        const double units = std::round(1.0 / s);
        return std::abs(units * s - 1.0) < 1e-9;
    };
    if (!divides_one(step)) throw ConfigError("grid step must divide 1 exactly");
    if (refine) {
        if (!divides_one(refine_step) || refine_step > step) throw ConfigError("refine_step must divide 1 and not exceed step");
        const double ratio = step / refine_step;
        if (std::abs(ratio - std::round(ratio)) > 1e-9) throw ConfigError("step must be a multiple of refine_step");
    }
    if (max_members < 1) throw ConfigError("max_members must be positive");
}

namespace {

// Number of integer vectors with lo <= c <= hi componentwise and sum == total.
double count_points(std::span<const std::size_t> lo, std::span<const std::size_t> hi, std::size_t total) {
    std::vector<double> ways(total + 1, 0.0);
    ways[0] = 1.0;
    for (std::size_t i = 0; i < lo.size(); ++i) {
        std::vector<double> next(total + 1, 0.0);
        for (std::size_t s = 0; s <= total; ++s) {
            if (ways[s] == 0.0) continue;
            for (std::size_t c = lo[i]; c <= hi[i] && s + c <= total; ++c) next[s + c] += ways[s];
        }
        ways = std::move(next);
    }
    return ways[total];
}

// Visits every bounded composition of `total` in ascending lexicographic order.
void enumerate(std::span<const std::size_t> lo, std::span<const std::size_t> hi, std::size_t total,
               const std::function<void(const std::vector<std::size_t>&)>& visit) {
    const std::size_t m = lo.size();
    std::vector<std::size_t> min_tail(m + 1, 0), max_tail(m + 1, 0);
    for (std::size_t i = m; i-- > 0;) {
        min_tail[i] = min_tail[i + 1] + lo[i];
        max_tail[i] = max_tail[i + 1] + hi[i];
    }
    std::vector<std::size_t> counts(m, 0);
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t remaining) {
        if (i + 1 == m) {
            if (remaining >= lo[i] && remaining <= hi[i]) {
                counts[i] = remaining;
                visit(counts);
            }
            return;
        }
        for (std::size_t c = lo[i]; c <= hi[i] && c <= remaining; ++c) {
            const std::size_t rest = remaining - c;
            if (rest < min_tail[i + 1] || rest > max_tail[i + 1]) continue;
            counts[i] = c;
            rec(i + 1, rest);
        }
    };
    if (m > 0) rec(0, total);
}

struct BoundedSearch {
    std::span<const DenseMatrix> matrices;
    const RelevanceMap& validation;
    std::vector<std::size_t> best;
    double best_objective = -1.0;
    std::size_t evaluated = 0;

    void run(std::span<const std::size_t> lo, std::span<const std::size_t> hi, std::size_t units) {
        std::vector<double> w(matrices.size());
        enumerate(lo, hi, units, [&](const std::vector<std::size_t>& counts) {
            for (std::size_t i = 0; i < counts.size(); ++i) w[i] = static_cast<double>(counts[i]) / static_cast<double>(units);
            const double obj = map_at_16(weighted_sum(matrices, w), validation);
            ++evaluated;
            if (obj > best_objective) {
                best_objective = obj;
                best = counts;
            }
        });
    }
};

void check_budget(double points, const GridSearchConfig& cfg) {
    if (points > static_cast<double>(cfg.max_grid_points)) {
        throw ConfigError("grid search would evaluate " + format_double(points) + " weight vectors (budget " +
                          std::to_string(cfg.max_grid_points) + "); use a coarser step or fewer members");
    }
}

}  // namespace

GridSearchResult grid_search(std::span<const DenseMatrix> matrices, const RelevanceMap& validation,
                             const GridSearchConfig& cfg) {
    cfg.validate();
    const std::size_t m = matrices.size();
    if (m < 1) throw ContractError("grid search needs at least one member");
    if (m > cfg.max_members) {
        throw ConfigError("grid search over " + std::to_string(m) + " members exceeds max_members " +
                          std::to_string(cfg.max_members));
    }
    validation.validate();
    const auto units = static_cast<std::size_t>(std::llround(1.0 / cfg.step));
    std::vector<std::size_t> lo(m, 0), hi(m, units);
    check_budget(count_points(lo, hi, units), cfg);

    BoundedSearch search{matrices, validation, {}, -1.0, 0};
    search.run(lo, hi, units);
    std::size_t final_units = units;

    if (cfg.refine) {
        const auto ratio = static_cast<std::size_t>(std::llround(cfg.step / cfg.refine_step));
        const std::size_t fine_units = units * ratio;
        std::vector<std::size_t> flo(m), fhi(m);
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t centre = search.best[i] * ratio;
            flo[i] = centre >= ratio ? centre - ratio : 0;
            fhi[i] = std::min(centre + ratio, fine_units);
        }
        check_budget(count_points(flo, fhi, fine_units), cfg);
        BoundedSearch fine{matrices, validation, {}, -1.0, 0};
        fine.run(flo, fhi, fine_units);
        search.evaluated += fine.evaluated;
        search.best = fine.best;
        search.best_objective = fine.best_objective;
        final_units = fine_units;
    }

    GridSearchResult result;
    result.evaluated = search.evaluated;
    result.weights.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        result.weights[i] = static_cast<double>(search.best[i]) / static_cast<double>(final_units);
    }
    result.objective = search.best_objective;
    return result;
}

const DenseMatrix& MemberGrid::at(std::size_t system, std::size_t model) const {
    return matrices.at(system * models.size() + model);
}

void MemberGrid::validate() const {
    if (system_ids.empty() || models.empty()) throw ContractError("member grid is empty");
    if (matrices.size() != system_ids.size() * models.size()) {
        throw ContractError("member grid needs " + std::to_string(system_ids.size() * models.size()) +
                            " matrices, got " + std::to_string(matrices.size()));
    }
}

namespace {

std::size_t group_count(Strategy s, std::size_t systems, std::size_t models) {
    return s == Strategy::system_first ? models : systems;
}

std::size_t group_size(Strategy s, std::size_t systems, std::size_t models) {
    return s == Strategy::system_first ? systems : models;
}

// Flat (system-major) index of member k of group g.
std::size_t flat_index(Strategy s, std::size_t g, std::size_t k, std::size_t models) {
    return s == Strategy::system_first ? k * models + g : g * models + k;
}

void check_hierarchy(Strategy s, const HierarchicalWeights& w, std::size_t systems, std::size_t models) {
    const std::size_t groups = group_count(s, systems, models);
    const std::size_t size = group_size(s, systems, models);
    if (w.within.size() != groups || w.across.size() != groups) {
        throw ContractError("hierarchical weights need " + std::to_string(groups) + " groups for " + to_string(s));
    }
    for (const auto& g : w.within) {
        if (g.size() != size) throw ContractError("each group needs " + std::to_string(size) + " inner weights");
        check_convex(g, "inner weights");
    }
    check_convex(w.across, "group weights");
}

}  // namespace

std::vector<double> flatten_weights(Strategy strategy, const HierarchicalWeights& w, std::size_t systems,
                                    std::size_t models) {
    check_hierarchy(strategy, w, systems, models);
    std::vector<double> flat(systems * models, 0.0);
    for (std::size_t g = 0; g < w.across.size(); ++g)
        for (std::size_t k = 0; k < w.within[g].size(); ++k)
            flat[flat_index(strategy, g, k, models)] = w.across[g] * w.within[g][k];
    return flat;
}

HierarchicalWeights factor_weights(Strategy strategy, std::span<const double> flat, std::size_t systems,
                                   std::size_t models) {
    if (flat.size() != systems * models) throw ContractError("flat weight count does not match the grid");
    check_convex(flat, "flat weights");
    const std::size_t groups = group_count(strategy, systems, models);
    const std::size_t size = group_size(strategy, systems, models);
    HierarchicalWeights w;
    w.across.assign(groups, 0.0);
    w.within.assign(groups, std::vector<double>(size, 0.0));
    for (std::size_t g = 0; g < groups; ++g) {
        double sum = 0.0;
        for (std::size_t k = 0; k < size; ++k) sum += flat[flat_index(strategy, g, k, models)];
        w.across[g] = sum;
        for (std::size_t k = 0; k < size; ++k) {
            // An unused group gets uniform inner weights.
            w.within[g][k] = sum > 0.0 ? flat[flat_index(strategy, g, k, models)] / sum : 1.0 / static_cast<double>(size);
        }
    }
    return w;
}

namespace {

std::vector<DenseMatrix> group_members(const MemberGrid& grid, Strategy strategy, std::size_t g) {
    const std::size_t size = group_size(strategy, grid.systems(), grid.model_count());
    std::vector<DenseMatrix> members;
    members.reserve(size);
    for (std::size_t k = 0; k < size; ++k) {
        members.push_back(grid.matrices[flat_index(strategy, g, k, grid.model_count())]);
    }
    return members;
}

}  // namespace

DenseMatrix apply_strategy(const MemberGrid& grid, Strategy strategy, const HierarchicalWeights& weights) {
    grid.validate();
    check_hierarchy(strategy, weights, grid.systems(), grid.model_count());
    std::vector<DenseMatrix> fused_groups;
    for (std::size_t g = 0; g < weights.across.size(); ++g) {
        fused_groups.push_back(weighted_sum(group_members(grid, strategy, g), weights.within[g]));
    }
    return weighted_sum(fused_groups, weights.across);
}

StrategySearchResult search_strategy(const MemberGrid& grid, const RelevanceMap& validation, Strategy strategy,
                                     const GridSearchConfig& cfg, std::string name) {
    grid.validate();
    const std::size_t groups = group_count(strategy, grid.systems(), grid.model_count());
    StrategySearchResult result;
    std::vector<DenseMatrix> fused_groups;
    for (std::size_t g = 0; g < groups; ++g) {
        auto members = group_members(grid, strategy, g);
        std::vector<double> inner{1.0};
        if (members.size() > 1) inner = grid_search(members, validation, cfg).weights;
        fused_groups.push_back(weighted_sum(members, inner));
        result.weights.within.push_back(std::move(inner));
    }
    result.weights.across = groups > 1 ? grid_search(fused_groups, validation, cfg).weights : std::vector<double>{1.0};

    const auto flat = flatten_weights(strategy, result.weights, grid.systems(), grid.model_count());
    result.spec = EnsembleSpec{std::move(name), {}, strategy};
    for (std::size_t s = 0; s < grid.systems(); ++s)
        for (std::size_t m = 0; m < grid.model_count(); ++m)
            result.spec.members.push_back({grid.system_ids[s], grid.models[m], flat[s * grid.model_count() + m]});
    result.objective = map_at_16(fuse(grid.matrices, result.spec), validation);
    return result;
}

}  // namespace xmrt
