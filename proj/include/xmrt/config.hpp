#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xmrt/augmentation.hpp"
#include "xmrt/clustering.hpp"
#include "xmrt/dataset.hpp"
#include "xmrt/ensemble.hpp"
#include "xmrt/errors.hpp"
#include "xmrt/fixtures.hpp"
#include "xmrt/losses.hpp"
#include "xmrt/optimizer.hpp"
#include "xmrt/trainer.hpp"

namespace xmrt {

// Malformed config file: unreadable, invalid JSON, unknown key, wrong type.
class ConfigSchemaError : public ConfigError {
public:
    explicit ConfigSchemaError(const std::string& what) : ConfigError(what) {}
};

using Path = std::filesystem::path;

struct StageSection {
    StageConfig stage;
    std::optional<Path> init;           // starting checkpoint
    std::optional<std::vector<Path>> teachers;
    std::optional<Path> labels;         // pseudo-label file (refinetune)
};

struct EnsembleMemberSource {
    int system = 0;
    ModelSlot model = ModelSlot::passt;
    Path similarity;                    // validation-split similarity
    std::optional<Path> apply_similarity;
};

struct EnsembleRun {
    std::string name;
    Strategy strategy = Strategy::system_first;
    GridSearchConfig grid;
};

struct ReportEntry {
    std::string name;
    Path similarity;
};

// Everything a CLI invocation needs. Relative paths are resolved against the
// config file's directory; unset output-derived paths default into out_dir.
struct RunConfig {
    Path base_dir = ".";
    std::uint64_t seed = 0;
    Path out_dir = "out";

    std::optional<Path> manifest;
    std::map<Split, Path> relevance;
    std::optional<Path> import_pairs;

    FixtureConfig fixtures;
    std::size_t embedding_dim = 16;

    LossConfig loss;
    AdamWConfig optimizer;
    double peak_lr = 5e-3;
    double floor_lr = 1e-7;
    double warmup_fraction = 0.1;

    AugmentationConfig augmentation;
    std::optional<Path> synonyms;

    StageSection pretrain;
    StageSection finetune;
    StageSection refinetune;

    ClusterConfig clustering;
    std::optional<Path> cluster_checkpoint;
    std::optional<Path> cluster_embeddings;

    struct {
        std::optional<Path> similarity;
        std::optional<Path> checkpoint;
        Split split = Split::test;
        std::optional<Path> relevance;
        std::string mode = "both";
    } evaluate;

    struct {
        std::vector<EnsembleMemberSource> members;
        std::optional<Path> validation_relevance;
        std::vector<EnsembleRun> runs;
        std::optional<std::string> weights_table;  // path, or "published"
        std::vector<std::string> apply_rows;
    } ensemble;

    struct {
        std::vector<ReportEntry> entries;
        std::optional<Path> relevance;
    } report;

    Path resolve(const Path& p) const;
    Path manifest_path() const;
    Path stage_dir(Stage stage) const;
    Path checkpoint_dir(Stage stage) const;
    TrainerOptions trainer_options() const;
};

RunConfig parse_run_config(std::string_view json_text, const Path& base_dir);
RunConfig load_run_config(const Path& path);

}  // namespace xmrt
