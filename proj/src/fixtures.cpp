#include "xmrt/fixtures.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <random>

#include "xmrt/errors.hpp"

namespace xmrt {

void FixtureConfig::validate() const {
    if (n_items < 8) throw ConfigError("fixtures need at least 8 items");
    if (d_latent == 0 || d_latent > d_audio || d_latent > d_text) {
        throw ConfigError("fixture latent width must lie in [1, min(d_audio, d_text)]");
    }
    if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be nonnegative");
}

namespace {

DenseMatrix gaussian(std::size_t rows, std::size_t cols, double scale, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    DenseMatrix m(rows, cols);
    for (double& v : m.values()) v = scale * dist(rng);
    return m;
}

// Small vocabulary keyed by sign patterns of the latent, so that items with
// nearby latents tend to share words.
std::vector<std::string> caption_for(std::span<const double> z) {
    static const std::array<const char*, 8> sources{"dog", "bird", "engine", "rain", "crowd", "door", "water", "bell"};
    static const std::array<const char*, 4> actions{"barks", "chirps", "rumbles", "rings"};
    static const std::array<const char*, 2> manners{"softly", "loudly"};
    static const std::array<const char*, 4> places{"outside", "indoors", "nearby", "far away"};
    const auto bit = [&](std::size_t k) -> std::size_t { return z[k % z.size()] > 0.0 ? 1 : 0; };
    std::vector<std::string> words{"a", sources[bit(0) | bit(1) << 1 | bit(2) << 2], actions[bit(3) | bit(4) << 1],
                                   manners[bit(5)]};
    const std::string place = places[bit(6) | bit(7) << 1];
    for (auto& w : split_words(place)) words.push_back(w);
    return words;
}

SynonymTable fixture_synonyms() {
    return {{"dog", {"puppy", "hound"}},  {"bird", {"songbird"}}, {"engine", {"motor"}},
            {"rain", {"drizzle"}},        {"crowd", {"audience"}}, {"barks", {"yelps"}},
            {"rumbles", {"roars"}},       {"softly", {"quietly", "gently"}},
            {"loudly", {"noisily"}},      {"nearby", {"close"}}};
}

}  // namespace

Fixture generate_fixtures(const FixtureConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    Fixture f;
    const double map_scale = 1.0 / std::sqrt(static_cast<double>(cfg.d_latent));
    f.audio_map = gaussian(cfg.d_audio, cfg.d_latent, map_scale, rng);
    f.text_map = gaussian(cfg.d_text, cfg.d_latent, map_scale, rng);
    f.latents = gaussian(cfg.n_items, cfg.d_latent, 1.0, rng);

    std::normal_distribution<double> noise(0.0, 1.0);
    const auto project = [&](const DenseMatrix& map, std::size_t item) {
        std::vector<double> out(map.rows());
        const auto z = f.latents.row(item);
        for (std::size_t r = 0; r < map.rows(); ++r) {
            double acc = 0.0;
            for (std::size_t k = 0; k < z.size(); ++k) acc += map(r, k) * z[k];
            out[r] = acc + cfg.noise_sigma * noise(rng);
        }
        return out;
    };

    const std::size_t n_train = cfg.n_items * 70 / 100;
    const std::size_t n_val = cfg.n_items * 15 / 100;
    std::vector<double> audio, text;
    auto& c = f.corpus;
    for (std::size_t k = 0; k < cfg.n_items; ++k) {
        const auto a = project(f.audio_map, k);
        const auto t = project(f.text_map, k);
        audio.insert(audio.end(), a.begin(), a.end());
        text.insert(text.end(), t.begin(), t.end());
        char id[32];
        std::snprintf(id, sizeof(id), "%05zu", k);
        c.audio_ids.push_back(std::string("audio_") + id);
        c.caption_ids.push_back(std::string("caption_") + id);
        c.audio_split.push_back(k < n_train ? Split::train : k < n_train + n_val ? Split::val : Split::test);
        c.caption_audio.push_back(k);
        c.captions.push_back(caption_for(f.latents.row(k)));
    }
    c.audio_features = DenseMatrix(cfg.n_items, cfg.d_audio, std::move(audio));
    c.caption_features = DenseMatrix(cfg.n_items, cfg.d_text, std::move(text));
    f.synonyms = fixture_synonyms();
    c.validate();
    return f;
}

RelevanceMap fixture_relevance(const Fixture& fixture, Split split, double threshold) {
    const SplitView view = split_view(fixture.corpus, split);
    const auto& z = fixture.latents;
    const auto cosine = [&](std::size_t a, std::size_t b) {
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (std::size_t k = 0; k < z.cols(); ++k) {
            dot += z(a, k) * z(b, k);
            na += z(a, k) * z(a, k);
            nb += z(b, k) * z(b, k);
        }
        return dot / std::sqrt(na * nb);
    };
    RelevanceMap r = paired_relevance(view);
    for (std::size_t q = 0; q < view.captions.size(); ++q) {
        // Fixture captions share the latent of their audio item.
        const std::size_t query_item = fixture.corpus.caption_audio[view.captions[q]];
        for (std::size_t g = 0; g < view.audio.size(); ++g) {
            if (g == r.relevant[q].front()) continue;
            if (cosine(query_item, view.audio[g]) >= threshold) r.relevant[q].push_back(g);
        }
    }
    return r;
}

void write_fixtures(const std::filesystem::path& dir, const Fixture& fixture, double multi_relevance_threshold) {
    write_manifest(dir, fixture.corpus);
    {
        std::ofstream out(dir / "synonyms.tsv", std::ios::trunc);
        if (!out) throw IoError("cannot write synonyms.tsv");
        out << "# word<TAB>comma-separated synonyms\n";
        for (const auto& [word, syns] : fixture.synonyms) {
            out << word << '\t';
            for (std::size_t k = 0; k < syns.size(); ++k) out << (k ? "," : "") << syns[k];
            out << '\n';
        }
    }
    for (Split s : {Split::val, Split::test}) {
        const auto path = dir / ("relevance_" + to_string(s) + ".tsv");
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw IoError("cannot write " + path.string());
        out << format_relevance(fixture_relevance(fixture, s, multi_relevance_threshold));
    }
}

}  // namespace xmrt
