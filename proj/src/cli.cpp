#include "xmrt/cli.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "xmrt/checkpoint.hpp"
#include "xmrt/clustering.hpp"
#include "xmrt/config.hpp"
#include "xmrt/dataset.hpp"
#include "xmrt/encoders.hpp"
#include "xmrt/ensemble.hpp"
#include "xmrt/evaluation.hpp"
#include "xmrt/fixtures.hpp"
#include "xmrt/tensor_file.hpp"
#include "xmrt/trainer.hpp"

namespace xmrt {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string fmt(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void require_exists(const Path& p, const std::string& role) {
    if (!fs::exists(p)) throw ConfigError(role + " not found: " + p.string());
}

void write_text(const Path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

std::string read_text(const Path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Corpus load_corpus(const RunConfig& cfg) {
    const Path manifest = cfg.manifest_path();
    require_exists(manifest, "manifest");
    return load_manifest(manifest);
}

ModelParams load_params(const Path& dir, const std::string& role) {
    require_exists(dir, role);
    return load_checkpoint(dir);
}

SynonymTable load_default_synonyms(const RunConfig& cfg) {
    if (cfg.synonyms) {
        const Path p = cfg.resolve(*cfg.synonyms);
        require_exists(p, "synonym table");
        return load_synonyms(p);
    }
    const Path beside = cfg.manifest_path().parent_path() / "synonyms.tsv";
    if (fs::exists(beside)) return load_synonyms(beside);
    return {};
}

// ---- gen-fixtures ----------------------------------------------------------

int cmd_gen_fixtures(const RunConfig& cfg, std::ostream& out) {
    FixtureConfig fc = cfg.fixtures;
    fc.seed = cfg.seed;
    const Fixture fixture = generate_fixtures(fc);
    const Path dir = cfg.resolve(cfg.out_dir) / "fixtures";
    write_fixtures(dir, fixture, fc.multi_relevance_threshold);
    out << "fixtures: " << fixture.corpus.audio_count() << " items written to " << dir.string() << "\n";
    return kExitOk;
}

// ---- cluster labels file ---------------------------------------------------
//
//   # clusters <K>
//   caption_id  audio_id  caption_label  audio_label

struct LabelTable {
    std::size_t clusters = 0;
    std::map<std::string, std::pair<std::size_t, std::size_t>> by_caption;
};

std::string format_labels(std::size_t clusters, const std::vector<std::string>& caption_ids,
                          const std::vector<std::string>& audio_ids, std::span<const std::size_t> caption_audio,
                          const PseudoLabels& labels) {
    std::ostringstream s;
    s << "# clusters " << clusters << "\n";
    s << "caption_id\taudio_id\tcaption_label\taudio_label\n";
    for (std::size_t c = 0; c < caption_ids.size(); ++c) {
        const std::size_t a = caption_audio[c];
        s << caption_ids[c] << '\t' << audio_ids[a] << '\t' << labels.caption[c] << '\t' << labels.audio[a] << '\n';
    }
    return s.str();
}

LabelTable load_labels(const Path& path) {
    std::istringstream in(read_text(path));
    LabelTable table;
    std::string line;
    bool header = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line.rfind("# clusters ", 0) == 0) {
            table.clusters = std::stoul(line.substr(11));
            continue;
        }
        if (line[0] == '#') continue;
        if (!header) {
            header = true;
            continue;
        }
        std::istringstream fields(line);
        std::string caption, audio;
        std::size_t cl = 0, al = 0;
        if (!(fields >> caption >> audio >> cl >> al))
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed label row");
        table.by_caption[caption] = {cl, al};
    }
    if (table.clusters == 0) throw DataError(path.string() + ": missing '# clusters' line");
    return table;
}

// ---- training stages -------------------------------------------------------

std::string format_step_log(const StageResult& r) {
    std::ostringstream s;
    s << "step\tlr\tl_sup\tl_dist\tl_cls_audio\tl_cls_text\ttotal\n";
    for (std::size_t i = 0; i < r.step_log.size(); ++i) {
        const LossBreakdown& b = r.step_log[i];
        s << i + 1 << '\t' << fmt(lr_at_step(r.schedule, i + 1)) << '\t' << fmt(b.l_sup) << '\t' << fmt(b.l_dist)
          << '\t' << fmt(b.l_cls_audio) << '\t' << fmt(b.l_cls_text) << '\t' << fmt(b.total) << '\n';
    }
    return s.str();
}

std::string format_epoch_log(const StageResult& r) {
    std::ostringstream s;
    s << "epoch\tl_sup\tl_dist\tl_cls_audio\tl_cls_text\ttotal\n";
    for (std::size_t i = 0; i < r.epoch_means.size(); ++i) {
        const LossBreakdown& b = r.epoch_means[i];
        s << i + 1 << '\t' << fmt(b.l_sup) << '\t' << fmt(b.l_dist) << '\t' << fmt(b.l_cls_audio) << '\t'
          << fmt(b.l_cls_text) << '\t' << fmt(b.total) << '\n';
    }
    return s.str();
}

const StageSection& stage_section(const RunConfig& cfg, Stage stage) {
    switch (stage) {
        case Stage::pretrain: return cfg.pretrain;
        case Stage::finetune: return cfg.finetune;
        case Stage::refinetune: return cfg.refinetune;
    }
    throw ContractError("unknown stage");
}

int cmd_train(const RunConfig& cfg, Stage stage, std::ostream& out) {
    const StageSection& section = stage_section(cfg, stage);
    section.stage.validate();

    const Corpus corpus = load_corpus(cfg);
    const SplitView train = split_view(corpus, Split::train);
    TrainingSet set = training_pairs(corpus, train);
    std::vector<std::string> pair_captions;
    for (std::size_t c : train.captions) pair_captions.push_back(corpus.caption_ids[c]);

    if (cfg.import_pairs && section.stage.augmentation) {
        const Path p = cfg.resolve(*cfg.import_pairs);
        require_exists(p, "imported pairs manifest");
        const Corpus imported = load_manifest(p);
        append_imported_pairs(set, imported);
        pair_captions.insert(pair_captions.end(), imported.caption_ids.begin(), imported.caption_ids.end());
    }

    // Starting point: the previous stage unless configured otherwise.
    ModelParams params;
    std::optional<Path> init = section.init ? std::optional<Path>(cfg.resolve(*section.init)) : std::nullopt;
    if (!init && stage == Stage::finetune) init = cfg.checkpoint_dir(Stage::pretrain);
    if (!init && stage == Stage::refinetune) init = cfg.checkpoint_dir(Stage::finetune);
    if (init) {
        params = load_params(*init, "initial checkpoint");
    } else {
        params = init_params(corpus.audio_features.cols(), corpus.caption_features.cols(), cfg.embedding_dim,
                             std::nullopt, cfg.seed);
    }

    std::vector<ModelParams> teachers;
    if (section.stage.distill) {
        std::vector<Path> paths;
        if (section.teachers) {
            for (const Path& t : *section.teachers) paths.push_back(cfg.resolve(t));
        } else {
            paths.push_back(cfg.checkpoint_dir(stage == Stage::refinetune ? Stage::finetune : Stage::pretrain));
        }
        for (const Path& t : paths) teachers.push_back(load_params(t, "teacher checkpoint"));
    }

    std::optional<PairLabels> labels;
    if (section.stage.cluster) {
        const Path p = section.labels ? cfg.resolve(*section.labels) : cfg.resolve(cfg.out_dir) / "cluster" / "labels.tsv";
        require_exists(p, "pseudo-label file");
        const LabelTable table = load_labels(p);
        PairLabels pl;
        pl.clusters = table.clusters;
        for (const std::string& id : pair_captions) {
            const auto it = table.by_caption.find(id);
            if (it == table.by_caption.end()) throw DataError("no pseudo-label for caption " + id);
            pl.text.push_back(it->second.first);
            pl.audio.push_back(it->second.second);
        }
        labels = std::move(pl);
    }

    TrainerOptions opts = cfg.trainer_options();
    opts.augmentation.synonyms = load_default_synonyms(cfg);

    const StageResult result =
        run_stage(section.stage, std::move(params), set, opts, teachers, labels ? &*labels : nullptr);

    const Path dir = cfg.stage_dir(stage);
    save_checkpoint(cfg.checkpoint_dir(stage), result.params);
    write_text(dir / "steps.tsv", format_step_log(result));
    write_text(dir / "epochs.tsv", format_epoch_log(result));

    out << to_string(stage) << ": " << result.step_log.size() << " steps";
    if (!result.epoch_means.empty()) out << ", final epoch loss " << fmt(result.epoch_means.back().total);
    out << "\n";
    return kExitOk;
}

// ---- cluster ---------------------------------------------------------------

DenseMatrix normalized_rows(const DenseMatrix& m) {
    std::vector<double> v(m.values().begin(), m.values().end());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        double norm = 0.0;
        for (std::size_t c = 0; c < m.cols(); ++c) norm += v[r * m.cols() + c] * v[r * m.cols() + c];
        norm = std::sqrt(norm);
        if (norm == 0.0) throw DomainError("caption embedding " + std::to_string(r) + " has zero norm");
        for (std::size_t c = 0; c < m.cols(); ++c) v[r * m.cols() + c] /= norm;
    }
    return DenseMatrix(m.rows(), m.cols(), std::move(v));
}

int cmd_cluster(const RunConfig& cfg, std::ostream& out) {
    const Corpus corpus = load_corpus(cfg);

    // Every caption of the corpus, then any imported captions.
    std::vector<std::string> caption_ids = corpus.caption_ids;
    std::vector<std::string> audio_ids = corpus.audio_ids;
    std::vector<std::size_t> caption_audio = corpus.caption_audio;
    std::vector<double> features(corpus.caption_features.values().begin(), corpus.caption_features.values().end());
    if (cfg.import_pairs) {
        const Path p = cfg.resolve(*cfg.import_pairs);
        require_exists(p, "imported pairs manifest");
        const Corpus imported = load_manifest(p);
        if (imported.caption_features.cols() != corpus.caption_features.cols())
            throw DataError("imported captions have a different feature width");
        const std::size_t offset = audio_ids.size();
        caption_ids.insert(caption_ids.end(), imported.caption_ids.begin(), imported.caption_ids.end());
        audio_ids.insert(audio_ids.end(), imported.audio_ids.begin(), imported.audio_ids.end());
        for (std::size_t a : imported.caption_audio) caption_audio.push_back(offset + a);
        features.insert(features.end(), imported.caption_features.values().begin(),
                        imported.caption_features.values().end());
    }
    const DenseMatrix caption_features(caption_ids.size(), corpus.caption_features.cols(), std::move(features));

    DenseMatrix embeddings;
    if (cfg.cluster_embeddings) {
        const Path p = cfg.resolve(*cfg.cluster_embeddings);
        require_exists(p, "caption embeddings");
        embeddings = load_matrix(p);
        if (embeddings.rows() != caption_ids.size())
            throw DataError("embedding file has " + std::to_string(embeddings.rows()) + " rows for " +
                            std::to_string(caption_ids.size()) + " captions");
    } else {
        const Path ckpt = cfg.cluster_checkpoint ? cfg.resolve(*cfg.cluster_checkpoint)
                                                 : cfg.checkpoint_dir(Stage::finetune);
        const ModelParams params = load_params(ckpt, "clustering checkpoint");
        embeddings = encode(params.text_encoder, caption_features);
    }

    ClusterConfig cc = cfg.clustering;
    cc.seed = cfg.seed;
    const ClusterAssignment assignment = cluster_embeddings(normalized_rows(embeddings), cc);
    const PseudoLabels labels = build_pseudo_labels(assignment, caption_audio, audio_ids.size());

    const Path dir = cfg.resolve(cfg.out_dir) / "cluster";
    write_text(dir / "labels.tsv", format_labels(labels.clusters, caption_ids, audio_ids, caption_audio, labels));
    save_tensor(dir / "probabilities.xmrt", assignment.probabilities);
    out << "cluster: " << labels.clusters << " clusters over " << caption_ids.size() << " captions\n";
    return kExitOk;
}

// ---- evaluate / report -----------------------------------------------------

ordered_json metrics_json(const MetricsReport& m) {
    ordered_json j;
    j["map_at_10"] = m.map_at_10;
    j["map_at_16"] = m.map_at_16;
    j["r_at_1"] = m.r_at_1;
    j["r_at_5"] = m.r_at_5;
    j["r_at_10"] = m.r_at_10;
    j["query_count"] = m.query_count;
    return j;
}

RelevanceMap relevance_or_identity(const std::optional<Path>& path, const DenseMatrix& sim) {
    if (path) {
        require_exists(*path, "relevance file");
        return load_relevance(*path, sim.rows());
    }
    if (sim.rows() != sim.cols())
        throw ConfigError("a relevance file is required for a non-square similarity matrix");
    return RelevanceMap::one_to_one(sim.rows());
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
    DenseMatrix sim;
    RelevanceMap relevance;
    std::optional<Path> rel_path;
    if (cfg.evaluate.relevance) rel_path = cfg.resolve(*cfg.evaluate.relevance);

    if (cfg.evaluate.similarity) {
        const Path p = cfg.resolve(*cfg.evaluate.similarity);
        require_exists(p, "similarity matrix");
        sim = load_matrix(p);
        relevance = relevance_or_identity(rel_path, sim);
    } else {
        if (!cfg.evaluate.checkpoint) throw ConfigError("evaluate needs 'similarity' or 'checkpoint'");
        const ModelParams params = load_params(cfg.resolve(*cfg.evaluate.checkpoint), "checkpoint");
        const Corpus corpus = load_corpus(cfg);
        const SplitView view = split_view(corpus, cfg.evaluate.split);
        sim = cosine_similarity_matrix(encode(params.audio_encoder, gallery_features(corpus, view)),
                                       encode(params.text_encoder, query_features(corpus, view)));
        if (!rel_path) {
            const auto it = cfg.relevance.find(cfg.evaluate.split);
            if (it != cfg.relevance.end()) rel_path = cfg.resolve(it->second);
        }
        if (rel_path) {
            require_exists(*rel_path, "relevance file");
            relevance = load_relevance(*rel_path, sim.rows());
        } else {
            relevance = paired_relevance(view);
        }
    }

    const Path dir = cfg.resolve(cfg.out_dir) / "evaluate";
    fs::create_directories(dir);
    ordered_json report;
    report["split"] = to_string(cfg.evaluate.split);
    for (AnnotationMode mode : {AnnotationMode::multiple, AnnotationMode::single}) {
        if (cfg.evaluate.mode != "both" && cfg.evaluate.mode != to_string(mode)) continue;
        const MetricsReport m = evaluate(sim, relevance, mode);
        report[to_string(mode)] = metrics_json(m);
        out << to_string(mode) << ": mAP@10 " << fmt(m.map_at_10) << "  mAP@16 " << fmt(m.map_at_16) << "  R@1 "
            << fmt(m.r_at_1) << "  R@5 " << fmt(m.r_at_5) << "  R@10 " << fmt(m.r_at_10) << "\n";
    }
    if (!cfg.evaluate.similarity) save_tensor(dir / "similarity.xmrt", sim);
    write_text(dir / "metrics.json", report.dump(2) + "\n");
    return kExitOk;
}

int cmd_report(const RunConfig& cfg, std::ostream& out) {
    if (cfg.report.entries.empty()) throw ConfigError("report.entries is empty");
    std::optional<Path> rel_path;
    if (cfg.report.relevance) rel_path = cfg.resolve(*cfg.report.relevance);

    ordered_json report = ordered_json::array();
    std::ostringstream tsv;
    tsv << "system\tmap_at_16\tmap_at_10\tsingle_map_at_10\tsingle_r_at_1\tsingle_r_at_5\tsingle_r_at_10\n";
    for (const ReportEntry& entry : cfg.report.entries) {
        const Path p = cfg.resolve(entry.similarity);
        require_exists(p, "similarity matrix for " + entry.name);
        const DenseMatrix sim = load_matrix(p);
        const RelevanceMap relevance = relevance_or_identity(rel_path, sim);
        const MetricsReport multi = evaluate(sim, relevance, AnnotationMode::multiple);
        const MetricsReport single = evaluate(sim, relevance, AnnotationMode::single);
        ordered_json row;
        row["name"] = entry.name;
        row["multiple"] = metrics_json(multi);
        row["single"] = metrics_json(single);
        report.push_back(std::move(row));
        tsv << entry.name << '\t' << fmt(multi.map_at_16) << '\t' << fmt(multi.map_at_10) << '\t'
            << fmt(single.map_at_10) << '\t' << fmt(single.r_at_1) << '\t' << fmt(single.r_at_5) << '\t'
            << fmt(single.r_at_10) << '\n';
    }
    const Path dir = cfg.resolve(cfg.out_dir) / "report";
    write_text(dir / "report.json", report.dump(2) + "\n");
    write_text(dir / "report.tsv", tsv.str());
    out << tsv.str();
    return kExitOk;
}

// ---- ensembles -------------------------------------------------------------

using MemberKey = std::pair<int, ModelSlot>;

std::map<MemberKey, DenseMatrix> load_member_matrices(const RunConfig& cfg, bool apply) {
    if (cfg.ensemble.members.empty()) throw ConfigError("ensemble.members is empty");
    std::map<MemberKey, DenseMatrix> matrices;
    for (const EnsembleMemberSource& m : cfg.ensemble.members) {
        const Path p = cfg.resolve(apply && m.apply_similarity ? *m.apply_similarity : m.similarity);
        require_exists(p, "similarity matrix");
        if (!matrices.emplace(MemberKey{m.system, m.model}, load_matrix(p)).second)
            throw ConfigError("ensemble member SID " + std::to_string(m.system) + "/" + to_string(m.model) +
                              " listed twice");
    }
    return matrices;
}

MemberGrid member_grid(std::map<MemberKey, DenseMatrix> matrices) {
    std::set<int> systems;
    std::set<ModelSlot> models;
    for (const auto& [key, _] : matrices) {
        systems.insert(key.first);
        models.insert(key.second);
    }
    MemberGrid grid;
    grid.system_ids.assign(systems.begin(), systems.end());
    grid.models.assign(models.begin(), models.end());
    for (int s : grid.system_ids)
        for (ModelSlot m : grid.models) {
            const auto it = matrices.find({s, m});
            if (it == matrices.end())
                throw ConfigError("ensemble members must form a full systems x models grid; missing SID " +
                                  std::to_string(s) + "/" + to_string(m));
            grid.matrices.push_back(std::move(it->second));
        }
    grid.validate();
    return grid;
}

bool is_published_layout(const MemberGrid& grid) {
    return std::equal(grid.system_ids.begin(), grid.system_ids.end(), kTableSystems.begin(), kTableSystems.end()) &&
           std::equal(grid.models.begin(), grid.models.end(), kTableModels.begin(), kTableModels.end());
}

int cmd_ensemble_search(const RunConfig& cfg, std::ostream& out) {
    const MemberGrid grid = member_grid(load_member_matrices(cfg, false));
    std::optional<Path> rel_path;
    if (cfg.ensemble.validation_relevance) rel_path = cfg.resolve(*cfg.ensemble.validation_relevance);
    const RelevanceMap validation = relevance_or_identity(rel_path, grid.matrices.front());

    ordered_json runs = ordered_json::array();
    std::vector<CoefficientRow> rows;
    for (const EnsembleRun& run : cfg.ensemble.runs) {
        const StrategySearchResult result = search_strategy(grid, validation, run.strategy, run.grid, run.name);
        ordered_json j;
        j["name"] = run.name;
        j["strategy"] = to_string(run.strategy);
        j["objective_map_at_16"] = result.objective;
        ordered_json members = ordered_json::array();
        for (const EnsembleMember& m : result.spec.members)
            members.push_back({{"system", m.system}, {"model", to_string(m.model)}, {"weight", m.weight}});
        j["members"] = std::move(members);
        j["within"] = result.weights.within;
        j["across"] = result.weights.across;
        runs.push_back(std::move(j));
        rows.push_back({run.name, result.spec.weights(), run.strategy});
        out << run.name << " (" << to_string(run.strategy) << "): mAP@16 " << fmt(result.objective) << "\n";
    }

    const Path dir = cfg.resolve(cfg.out_dir) / "ensemble";
    write_text(dir / "search.json", runs.dump(2) + "\n");
    if (is_published_layout(grid)) write_text(dir / "weights.tsv", format_weight_table(rows));
    return kExitOk;
}

int cmd_ensemble_apply(const RunConfig& cfg, std::ostream& out) {
    std::vector<CoefficientRow> table;
    const std::string source = cfg.ensemble.weights_table.value_or("");
    if (source == "published") {
        table = published_coefficients();
    } else {
        const Path p = source.empty() ? cfg.resolve(cfg.out_dir) / "ensemble" / "weights.tsv" : cfg.resolve(source);
        require_exists(p, "weight table");
        table = load_weight_table(p);
    }
    if (!cfg.ensemble.apply_rows.empty()) {
        std::vector<CoefficientRow> chosen;
        for (const std::string& name : cfg.ensemble.apply_rows) {
            const auto it = std::find_if(table.begin(), table.end(), [&](const auto& r) { return r.name == name; });
            if (it == table.end()) throw ConfigError("weight table has no row '" + name + "'");
            chosen.push_back(*it);
        }
        table = std::move(chosen);
    }

    const std::map<MemberKey, DenseMatrix> matrices = load_member_matrices(cfg, true);
    const Path dir = cfg.resolve(cfg.out_dir) / "ensemble";
    fs::create_directories(dir);
    for (const EnsembleSpec& spec : load_coefficients(table)) {
        std::vector<DenseMatrix> ordered;
        for (const EnsembleMember& m : spec.members) {
            const auto it = matrices.find({m.system, m.model});
            if (it == matrices.end())
                throw ConfigError("no similarity matrix for SID " + std::to_string(m.system) + "/" +
                                  to_string(m.model));
            ordered.push_back(it->second);
        }
        save_tensor(dir / ("fused_" + spec.name + ".xmrt"), fuse(ordered, spec));
        out << "fused " << spec.name << "\n";
    }
    return kExitOk;
}

// ---- dispatch --------------------------------------------------------------

struct CommonFlags {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
};

RunConfig resolve_config(const CommonFlags& flags) {
    RunConfig cfg = load_run_config(flags.config);
    if (const char* env = std::getenv("XMRT_SEED"); env && *env) {
        std::uint64_t seed = 0;
        const std::string_view text(env);
        const auto res = std::from_chars(text.data(), text.data() + text.size(), seed);
        if (res.ec != std::errc() || res.ptr != text.data() + text.size())
            throw ConfigSchemaError("XMRT_SEED is not a nonnegative integer: " + std::string(text));
        cfg.seed = seed;
    }
    if (flags.seed) cfg.seed = *flags.seed;
    if (!flags.out.empty()) cfg.out_dir = fs::absolute(flags.out);
    return cfg;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Cross-modal audio-text retrieval toolkit", "xmrt"};
    app.require_subcommand(1, 1);

    CommonFlags flags;
    using Handler = std::function<int(const RunConfig&, std::ostream&)>;
    std::vector<std::pair<CLI::App*, Handler>> commands;
    const auto add = [&](const std::string& name, const std::string& help, Handler handler) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", flags.config, "Run configuration (JSON)")->required();
        sub->add_option("--out", flags.out, "Output directory, overrides the config");
        sub->add_option("--seed", flags.seed, "Seed, overrides XMRT_SEED and the config");
        commands.emplace_back(sub, std::move(handler));
    };
    add("gen-fixtures", "Write a synthetic planted-alignment corpus", cmd_gen_fixtures);
    add("pretrain", "Contrastive pretraining", [](const RunConfig& c, std::ostream& o) {
        return cmd_train(c, Stage::pretrain, o);
    });
    add("finetune", "Finetuning with optional distillation and augmentation", [](const RunConfig& c, std::ostream& o) {
        return cmd_train(c, Stage::finetune, o);
    });
    add("refinetune", "Re-finetuning with cluster classification heads", [](const RunConfig& c, std::ostream& o) {
        return cmd_train(c, Stage::refinetune, o);
    });
    add("cluster", "Cluster caption embeddings into pseudo-labels", cmd_cluster);
    add("evaluate", "Retrieval metrics for a checkpoint or similarity matrix", cmd_evaluate);
    add("ensemble-search", "Search ensemble weights on validation similarities", cmd_ensemble_search);
    add("ensemble-apply", "Fuse similarity matrices with a weight table", cmd_ensemble_apply);
    add("report", "Metrics table for several similarity matrices", cmd_report);

    std::vector<const char*> argv{"xmrt"};
    for (const std::string& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "xmrt: " << e.what() << "\n";
        return kExitUsage;
    }

    for (const auto& [sub, handler] : commands) {
        if (!sub->parsed()) continue;
        try {
            const RunConfig cfg = resolve_config(flags);
            return handler(cfg, out);
        } catch (const ConfigSchemaError& e) {
            err << "xmrt " << sub->get_name() << ": " << e.what() << "\n";
            return kExitUsage;
        } catch (const Error& e) {
            err << "xmrt " << sub->get_name() << ": " << e.what() << "\n";
            return kExitModuleError;
        } catch (const std::exception& e) {
            err << "xmrt " << sub->get_name() << ": " << e.what() << "\n";
            return kExitModuleError;
        }
    }
    return kExitUsage;
}

int cli_main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return cli_dispatch(args, std::cout, std::cerr);
}

}  // namespace xmrt
