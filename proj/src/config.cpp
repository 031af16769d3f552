#include "xmrt/config.hpp"

#include <algorithm>
#include <concepts>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace xmrt {

namespace {

using nlohmann::json;

class Section {
public:
    Section(const json& node, std::string where) : node_(node), where_(std::move(where)) {
        if (!node_.is_object()) throw ConfigSchemaError(where_ + ": expected an object");
    }

    void allow(std::initializer_list<std::string_view> keys) const {
        for (const auto& item : node_.items()) {
            if (std::find(keys.begin(), keys.end(), item.key()) == keys.end())
                throw ConfigSchemaError(where_ + ": unknown key '" + item.key() + "'");
        }
    }

    bool has(const char* key) const { return node_.contains(key) && !node_.at(key).is_null(); }

    Section child(const char* key) const { return Section(node_.at(key), path(key)); }

    const json& raw(const char* key) const { return node_.at(key); }

    std::string path(std::string_view key) const { return where_ + "." + std::string(key); }

    void read(const char* key, double& out) const {
        if (!has(key)) return;
        const json& v = node_.at(key);
        if (!v.is_number()) throw ConfigSchemaError(path(key) + ": expected a number");
        out = v.get<double>();
    }

    void read(const char* key, bool& out) const {
        if (!has(key)) return;
        const json& v = node_.at(key);
        if (!v.is_boolean()) throw ConfigSchemaError(path(key) + ": expected true or false");
        out = v.get<bool>();
    }

    template <std::unsigned_integral T>
    void read(const char* key, T& out) const {
        if (!has(key)) return;
        out = static_cast<T>(unsigned_value(node_.at(key), path(key)));
    }

    void read(const char* key, std::string& out) const {
        if (!has(key)) return;
        out = string_value(node_.at(key), path(key));
    }

    void read(const char* key, std::optional<std::string>& out) const {
        if (!has(key)) return;
        out = string_value(node_.at(key), path(key));
    }

    static std::uint64_t unsigned_value(const json& v, const std::string& where) {
        if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
            throw ConfigSchemaError(where + ": expected a nonnegative integer");
        return v.get<std::uint64_t>();
    }

    static std::string string_value(const json& v, const std::string& where) {
        if (!v.is_string()) throw ConfigSchemaError(where + ": expected a string");
        return v.get<std::string>();
    }

private:
    const json& node_;
    std::string where_;
};

template <class E>
E parse_enum(E (*parse)(std::string_view), const json& v, const std::string& where) {
    const std::string text = Section::string_value(v, where);
    try {
        return parse(text);
    } catch (const Error& e) {
        throw ConfigSchemaError(where + ": " + e.what());
    }
}

void read_path(const Section& s, const char* key, std::optional<Path>& out) {
    if (!s.has(key)) return;
    out = Path(Section::string_value(s.raw(key), s.path(key)));
}

void read_stage(const Section& s, Stage stage, StageSection& out) {
    s.allow({"epochs", "batch_size", "augmentation", "distill", "cluster", "init", "teachers", "labels"});
    out.stage.stage = stage;
    s.read("epochs", out.stage.epochs);
    s.read("batch_size", out.stage.batch_size);
    s.read("augmentation", out.stage.augmentation);
    s.read("distill", out.stage.distill);
    s.read("cluster", out.stage.cluster);
    read_path(s, "init", out.init);
    read_path(s, "labels", out.labels);
    if (s.has("teachers")) {
        const json& list = s.raw("teachers");
        if (!list.is_array()) throw ConfigSchemaError(s.path("teachers") + ": expected a list of paths");
        std::vector<Path> teachers;
        for (const json& t : list) teachers.emplace_back(Section::string_value(t, s.path("teachers")));
        out.teachers = std::move(teachers);
    }
}

void read_grid(const Section& s, GridSearchConfig& grid) {
    s.read("step", grid.step);
    s.read("refine", grid.refine);
    s.read("refine_step", grid.refine_step);
    s.read("max_grid_points", grid.max_grid_points);
}

void parse_ensemble(const Section& s, RunConfig& cfg) {
    s.allow({"members", "validation_relevance", "step", "refine", "refine_step", "max_grid_points", "runs",
             "weights_table", "apply_rows"});
    GridSearchConfig defaults;
    read_grid(s, defaults);
    read_path(s, "validation_relevance", cfg.ensemble.validation_relevance);
    s.read("weights_table", cfg.ensemble.weights_table);

    if (s.has("members")) {
        const json& list = s.raw("members");
        if (!list.is_array()) throw ConfigSchemaError(s.path("members") + ": expected a list");
        for (std::size_t i = 0; i < list.size(); ++i) {
            Section m(list[i], s.path("members") + "[" + std::to_string(i) + "]");
            m.allow({"system", "model", "similarity", "apply_similarity"});
            EnsembleMemberSource src;
            std::size_t system = 0;
            m.read("system", system);
            src.system = static_cast<int>(system);
            if (!m.has("model") || !m.has("similarity"))
                throw ConfigSchemaError(m.path("") + " needs 'model' and 'similarity'");
            src.model = parse_enum(parse_model_slot, m.raw("model"), m.path("model"));
            src.similarity = Section::string_value(m.raw("similarity"), m.path("similarity"));
            read_path(m, "apply_similarity", src.apply_similarity);
            cfg.ensemble.members.push_back(std::move(src));
        }
    }

    if (s.has("runs")) {
        const json& list = s.raw("runs");
        if (!list.is_array()) throw ConfigSchemaError(s.path("runs") + ": expected a list");
        for (std::size_t i = 0; i < list.size(); ++i) {
            Section r(list[i], s.path("runs") + "[" + std::to_string(i) + "]");
            r.allow({"name", "strategy", "step", "refine", "refine_step", "max_grid_points"});
            EnsembleRun run;
            run.grid = defaults;
            r.read("name", run.name);
            if (r.has("strategy")) run.strategy = parse_enum(parse_strategy, r.raw("strategy"), r.path("strategy"));
            read_grid(r, run.grid);
            if (run.name.empty()) run.name = to_string(run.strategy);
            cfg.ensemble.runs.push_back(std::move(run));
        }
    } else {
        for (Strategy strategy : {Strategy::system_first, Strategy::model_first})
            cfg.ensemble.runs.push_back({to_string(strategy), strategy, defaults});
    }

    if (s.has("apply_rows")) {
        const json& list = s.raw("apply_rows");
        if (!list.is_array()) throw ConfigSchemaError(s.path("apply_rows") + ": expected a list of names");
        for (const json& name : list) cfg.ensemble.apply_rows.push_back(Section::string_value(name, s.path("apply_rows")));
    }
}

}  // namespace

Path RunConfig::resolve(const Path& p) const { return p.is_absolute() ? p : base_dir / p; }

Path RunConfig::manifest_path() const {
    return manifest ? resolve(*manifest) : resolve(out_dir) / "fixtures" / "manifest.tsv";
}

Path RunConfig::stage_dir(Stage stage) const { return resolve(out_dir) / to_string(stage); }

Path RunConfig::checkpoint_dir(Stage stage) const { return stage_dir(stage) / "checkpoint"; }

TrainerOptions RunConfig::trainer_options() const {
    TrainerOptions opts;
    opts.loss = loss;
    opts.optimizer = optimizer;
    opts.peak_lr = peak_lr;
    opts.floor_lr = floor_lr;
    opts.warmup_fraction = warmup_fraction;
    opts.augmentation = augmentation;
    opts.augmentation.rng_seed = seed;
    opts.seed = seed;
    return opts;
}

RunConfig parse_run_config(std::string_view json_text, const Path& base_dir) {
    json root;
    try {
        root = json::parse(json_text.begin(), json_text.end(), nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigSchemaError(std::string("config is not valid JSON: ") + e.what());
    }

    RunConfig cfg;
    cfg.base_dir = base_dir;
    cfg.finetune.stage = {Stage::finetune, 20, 16, true, true, false};
    cfg.refinetune.stage = {Stage::refinetune, 20, 16, true, true, true};
    cfg.pretrain.stage.stage = Stage::pretrain;

    Section top(root, "config");
    top.allow({"seed", "out", "data", "fixtures", "model", "loss", "optimizer", "schedule", "augmentation", "stages",
               "clustering", "evaluate", "ensemble", "report"});
    top.read("seed", cfg.seed);
    if (top.has("out")) cfg.out_dir = Section::string_value(top.raw("out"), top.path("out"));

    if (top.has("data")) {
        Section s = top.child("data");
        s.allow({"manifest", "relevance", "import_pairs"});
        read_path(s, "manifest", cfg.manifest);
        read_path(s, "import_pairs", cfg.import_pairs);
        if (s.has("relevance")) {
            Section r = s.child("relevance");
            r.allow({"train", "val", "test"});
            for (Split split : {Split::train, Split::val, Split::test}) {
                std::optional<Path> p;
                read_path(r, to_string(split).c_str(), p);
                if (p) cfg.relevance[split] = *p;
            }
        }
    }

    if (top.has("fixtures")) {
        Section s = top.child("fixtures");
        s.allow({"n_items", "d_latent", "d_audio", "d_text", "noise_sigma", "multi_relevance_threshold"});
        s.read("n_items", cfg.fixtures.n_items);
        s.read("d_latent", cfg.fixtures.d_latent);
        s.read("d_audio", cfg.fixtures.d_audio);
        s.read("d_text", cfg.fixtures.d_text);
        s.read("noise_sigma", cfg.fixtures.noise_sigma);
        s.read("multi_relevance_threshold", cfg.fixtures.multi_relevance_threshold);
    }

    if (top.has("model")) {
        Section s = top.child("model");
        s.allow({"embedding_dim"});
        s.read("embedding_dim", cfg.embedding_dim);
    }

    if (top.has("loss")) {
        Section s = top.child("loss");
        s.allow({"tau", "lambda1", "lambda2"});
        s.read("tau", cfg.loss.tau);
        s.read("lambda1", cfg.loss.lambda1);
        s.read("lambda2", cfg.loss.lambda2);
    }

    if (top.has("optimizer")) {
        Section s = top.child("optimizer");
        s.allow({"beta1", "beta2", "eps", "weight_decay"});
        s.read("beta1", cfg.optimizer.beta1);
        s.read("beta2", cfg.optimizer.beta2);
        s.read("eps", cfg.optimizer.eps);
        s.read("weight_decay", cfg.optimizer.weight_decay);
    }

    if (top.has("schedule")) {
        Section s = top.child("schedule");
        s.allow({"peak_lr", "floor_lr", "warmup_fraction"});
        s.read("peak_lr", cfg.peak_lr);
        s.read("floor_lr", cfg.floor_lr);
        s.read("warmup_fraction", cfg.warmup_fraction);
    }

    if (top.has("augmentation")) {
        Section s = top.child("augmentation");
        s.allow({"word_edit_probability", "synonyms", "mix_count", "word_feature_scale"});
        s.read("word_edit_probability", cfg.augmentation.word_edit_probability);
        s.read("mix_count", cfg.augmentation.mix_count);
        s.read("word_feature_scale", cfg.augmentation.word_feature_scale);
        read_path(s, "synonyms", cfg.synonyms);
    }

    if (top.has("stages")) {
        Section s = top.child("stages");
        s.allow({"pretrain", "finetune", "refinetune"});
        if (s.has("pretrain")) read_stage(s.child("pretrain"), Stage::pretrain, cfg.pretrain);
        if (s.has("finetune")) read_stage(s.child("finetune"), Stage::finetune, cfg.finetune);
        if (s.has("refinetune")) read_stage(s.child("refinetune"), Stage::refinetune, cfg.refinetune);
    }

    if (top.has("clustering")) {
        Section s = top.child("clustering");
        s.allow({"reduced_dim", "min_cluster_size", "neighborhood_radius", "checkpoint", "embeddings"});
        s.read("reduced_dim", cfg.clustering.reduced_dim);
        s.read("min_cluster_size", cfg.clustering.min_cluster_size);
        s.read("neighborhood_radius", cfg.clustering.neighborhood_radius);
        read_path(s, "checkpoint", cfg.cluster_checkpoint);
        read_path(s, "embeddings", cfg.cluster_embeddings);
        if (cfg.cluster_checkpoint && cfg.cluster_embeddings)
            throw ConfigSchemaError("config.clustering: give either 'checkpoint' or 'embeddings', not both");
    }
    cfg.clustering.seed = cfg.seed;

    if (top.has("evaluate")) {
        Section s = top.child("evaluate");
        s.allow({"similarity", "checkpoint", "split", "relevance", "mode"});
        read_path(s, "similarity", cfg.evaluate.similarity);
        read_path(s, "checkpoint", cfg.evaluate.checkpoint);
        read_path(s, "relevance", cfg.evaluate.relevance);
        if (s.has("split")) cfg.evaluate.split = parse_enum(parse_split, s.raw("split"), s.path("split"));
        s.read("mode", cfg.evaluate.mode);
        if (cfg.evaluate.mode != "both" && cfg.evaluate.mode != "multiple" && cfg.evaluate.mode != "single")
            throw ConfigSchemaError("config.evaluate.mode: expected 'multiple', 'single' or 'both'");
        if (cfg.evaluate.similarity && cfg.evaluate.checkpoint)
            throw ConfigSchemaError("config.evaluate: give either 'similarity' or 'checkpoint', not both");
    }

    if (top.has("ensemble")) {
        parse_ensemble(top.child("ensemble"), cfg);
    } else {
        for (Strategy strategy : {Strategy::system_first, Strategy::model_first})
            cfg.ensemble.runs.push_back({to_string(strategy), strategy, {}});
    }

    if (top.has("report")) {
        Section s = top.child("report");
        s.allow({"entries", "relevance"});
        read_path(s, "relevance", cfg.report.relevance);
        if (s.has("entries")) {
            const json& list = s.raw("entries");
            if (!list.is_array()) throw ConfigSchemaError(s.path("entries") + ": expected a list");
            for (std::size_t i = 0; i < list.size(); ++i) {
                Section e(list[i], s.path("entries") + "[" + std::to_string(i) + "]");
                e.allow({"name", "similarity"});
                if (!e.has("name") || !e.has("similarity"))
                    throw ConfigSchemaError(e.path("") + " needs 'name' and 'similarity'");
                ReportEntry entry;
                e.read("name", entry.name);
                entry.similarity = Section::string_value(e.raw("similarity"), e.path("similarity"));
                cfg.report.entries.push_back(std::move(entry));
            }
        }
    }

    // Value checks reuse the module validators and surface as config errors.
    cfg.loss.validate();
    cfg.optimizer.validate();
    cfg.augmentation.validate();
    cfg.clustering.validate();
    for (const StageSection* st : {&cfg.pretrain, &cfg.finetune, &cfg.refinetune}) st->stage.validate();
    if (cfg.embedding_dim < 2) throw ConfigError("model.embedding_dim must be at least 2");
    if (!(cfg.peak_lr > 0.0) || !(cfg.floor_lr >= 0.0) || cfg.floor_lr > cfg.peak_lr)
        throw ConfigError("schedule: need peak_lr > 0 and 0 <= floor_lr <= peak_lr");
    if (!(cfg.warmup_fraction >= 0.0 && cfg.warmup_fraction < 1.0))
        throw ConfigError("schedule.warmup_fraction must lie in [0, 1)");
    for (const EnsembleRun& run : cfg.ensemble.runs) run.grid.validate();
    return cfg;
}

RunConfig load_run_config(const Path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigSchemaError("cannot read config " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    Path base = path.parent_path();
    if (base.empty()) base = ".";
    return parse_run_config(text.str(), base);
}

}  // namespace xmrt
