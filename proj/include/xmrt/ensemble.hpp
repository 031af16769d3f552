#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xmrt/core_math.hpp"
#include "xmrt/evaluation.hpp"

namespace xmrt {

// Audio-model slots of the fused systems.
enum class ModelSlot { passt, eat, beats };

std::string to_string(ModelSlot slot);
ModelSlot parse_model_slot(std::string_view name);

// system-first: fuse across systems within each model, then across models.
// model-first: fuse across models within each system, then across systems.
enum class Strategy { system_first, model_first };

std::string to_string(Strategy strategy);
Strategy parse_strategy(std::string_view name);

struct EnsembleMember {
    int system = 0;
    ModelSlot model = ModelSlot::passt;
    double weight = 0.0;
};

struct EnsembleSpec {
    std::string name;
    std::vector<EnsembleMember> members;
    Strategy strategy = Strategy::system_first;

    std::vector<double> weights() const;
    // Nonnegative weights summing to one within 1e-6.
    void validate() const;
};

// Elementwise sum_i w_i M_i. Zero-weight members are skipped, so one-hot
// weights reproduce the selected matrix exactly.
DenseMatrix weighted_sum(std::span<const DenseMatrix> matrices, std::span<const double> weights);

DenseMatrix fuse(std::span<const DenseMatrix> matrices, const EnsembleSpec& spec);

inline constexpr std::array<int, 4> kTableSystems{2, 3, 4, 5};
inline constexpr std::array<ModelSlot, 3> kTableModels{ModelSlot::passt, ModelSlot::eat, ModelSlot::beats};
inline constexpr std::size_t kTableColumns = kTableSystems.size() * kTableModels.size();

// One row of a coefficient table: 12 weights ordered system-major
// (SID 2 PaSST, SID 2 EAT, SID 2 BEATs, SID 3 PaSST, ...).
struct CoefficientRow {
    std::string name;
    std::vector<double> weights;
    Strategy strategy = Strategy::system_first;
};

// The four submitted combinations E1-E4.
const std::vector<CoefficientRow>& published_coefficients();

std::vector<EnsembleSpec> load_coefficients(std::span<const CoefficientRow> table);

// Tab-separated: header "ensemble  SID2/PaSST  SID2/EAT ... [strategy]", then one
// row per ensemble. Without the strategy column rows default to system-first.
std::vector<CoefficientRow> parse_weight_table(std::string_view text);
std::string format_weight_table(std::span<const CoefficientRow> rows);
std::vector<CoefficientRow> load_weight_table(const std::filesystem::path& path);

struct GridSearchConfig {
    double step = 0.01;
    std::size_t max_members = 12;
    std::size_t max_grid_points = 2'000'000;
    bool refine = false;
    double refine_step = 0.0025;

    void validate() const;
};

struct GridSearchResult {
    std::vector<double> weights;
    double objective = 0.0;  // mAP@16 of weighted_sum(matrices, weights)
    std::size_t evaluated = 0;
};

// Exhaustive search of the weight simplex at `step` for the best mAP@16;
// ties go to the lexicographically smallest weight vector.
GridSearchResult grid_search(std::span<const DenseMatrix> matrices, const RelevanceMap& validation,
                             const GridSearchConfig& cfg);

// Similarity matrices of a systems x models grid, stored system-major.
struct MemberGrid {
    std::vector<int> system_ids;
    std::vector<ModelSlot> models;
    std::vector<DenseMatrix> matrices;

    std::size_t systems() const { return system_ids.size(); }
    std::size_t model_count() const { return models.size(); }
    const DenseMatrix& at(std::size_t system, std::size_t model) const;
    void validate() const;
};

// `within[g]` weights the members of group g; `across` weights the groups.
// Groups are models for system-first and systems for model-first.
struct HierarchicalWeights {
    std::vector<std::vector<double>> within;
    std::vector<double> across;
};

std::vector<double> flatten_weights(Strategy strategy, const HierarchicalWeights& w, std::size_t systems,
                                    std::size_t models);

HierarchicalWeights factor_weights(Strategy strategy, std::span<const double> flat, std::size_t systems,
                                   std::size_t models);

// Two-stage fusion in the order the strategy prescribes.
DenseMatrix apply_strategy(const MemberGrid& grid, Strategy strategy, const HierarchicalWeights& weights);

struct StrategySearchResult {
    EnsembleSpec spec;
    HierarchicalWeights weights;
    double objective = 0.0;  // mAP@16 of fuse(grid.matrices, spec)
};

// Factored search: each group's inner weights first, then the weights across groups.
StrategySearchResult search_strategy(const MemberGrid& grid, const RelevanceMap& validation, Strategy strategy,
                                     const GridSearchConfig& cfg, std::string name = {});

}  // namespace xmrt
