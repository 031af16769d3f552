#include "xmrt/augmentation.hpp"

#include <fstream>
#include <sstream>

#include "xmrt/errors.hpp"

namespace xmrt {

void AugmentationConfig::validate() const {
    if (!(word_edit_probability >= 0.0 && word_edit_probability <= 1.0)) {
        throw ConfigError("word_edit_probability must lie in [0, 1]");
    }
    if (!(word_feature_scale >= 0.0)) throw ConfigError("word_feature_scale must be nonnegative");
}

AugmentedCaption augment_caption(std::span<const std::string> tokens, const AugmentationConfig& cfg,
                                 std::mt19937_64& rng) {
    if (tokens.empty()) throw DataError("cannot augment an empty caption");
    cfg.validate();
    AugmentedCaption out{{tokens.begin(), tokens.end()}, WordEdit::none, 0};

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (!(unit(rng) < cfg.word_edit_probability)) return out;

    std::uniform_int_distribution<std::size_t> pick(0, tokens.size() - 1);
    const std::size_t pos = pick(rng);
    const bool delete_word = std::bernoulli_distribution(0.5)(rng);
    out.position = pos;
    if (delete_word) {
        if (tokens.size() == 1) return out;
        out.tokens.erase(out.tokens.begin() + static_cast<std::ptrdiff_t>(pos));
        out.edit = WordEdit::deletion;
        return out;
    }
    const auto it = cfg.synonyms.find(tokens[pos]);
    if (it == cfg.synonyms.end() || it->second.empty()) return out;
    std::uniform_int_distribution<std::size_t> choose(0, it->second.size() - 1);
    out.tokens[pos] = it->second[choose(rng)];
    out.edit = WordEdit::replacement;
    return out;
}

MixedPair mix_pairs(const MixablePair& a, const MixablePair& b) {
    if (a.audio.size() != b.audio.size() || a.text.size() != b.text.size()) {
        throw ContractError("mix_pairs: feature widths differ");
    }
    MixedPair out;
    out.audio.resize(a.audio.size());
    for (std::size_t k = 0; k < a.audio.size(); ++k) out.audio[k] = 0.5 * a.audio[k] + 0.5 * b.audio[k];
    out.text.resize(a.text.size());
    for (std::size_t k = 0; k < a.text.size(); ++k) out.text[k] = 0.5 * a.text[k] + 0.5 * b.text[k];
    out.caption.assign(a.caption.begin(), a.caption.end());
    out.caption.emplace_back("and");
    out.caption.insert(out.caption.end(), b.caption.begin(), b.caption.end());
    return out;
}

std::vector<double> word_vector(std::string_view word, std::size_t dim) {
    // FNV-1a; stable across platforms and runs.
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : word) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    std::vector<double> v(dim);
    std::uint64_t state = h;
    for (auto& x : v) {
        // splitmix64
        state += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        z ^= z >> 31;
        x = static_cast<double>(z >> 11) * 0x1.0p-53 * 2.0 - 1.0;
    }
    return v;
}

std::vector<double> bag_of_words(std::span<const std::string> tokens, std::size_t dim) {
    std::vector<double> acc(dim, 0.0);
    if (tokens.empty()) return acc;
    for (const auto& t : tokens) {
        const auto v = word_vector(t, dim);
        for (std::size_t k = 0; k < dim; ++k) acc[k] += v[k];
    }
    for (double& x : acc) x /= static_cast<double>(tokens.size());
    return acc;
}

std::vector<std::string> split_words(std::string_view caption) {
    std::vector<std::string> words;
    std::istringstream in{std::string(caption)};
    std::string w;
    while (in >> w) words.push_back(w);
    return words;
}

std::string join_words(std::span<const std::string> tokens) {
    std::string out;
    for (const auto& t : tokens) {
        if (!out.empty()) out += ' ';
        out += t;
    }
    return out;
}

SynonymTable parse_synonyms(std::string_view text) {
    SynonymTable table;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw DataError("synonym line " + std::to_string(lineno) + " has no tab separator");
        }
        const std::string head = line.substr(0, tab);
        std::stringstream rest(line.substr(tab + 1));
        std::string syn;
        auto& list = table[head];
        while (std::getline(rest, syn, ',')) {
            if (!syn.empty()) list.push_back(syn);
        }
    }
    return table;
}

SynonymTable load_synonyms(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open synonym table " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_synonyms(buf.str());
}

}  // namespace xmrt
