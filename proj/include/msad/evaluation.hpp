#pragma once

#include "msad/dataset.hpp"
#include "msad/fusion.hpp"
#include "msad/score_map.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace msad {

/// Scores of one test sample in one modality.
struct SampleScore {
    double raw = 0.0;
    double normalized = 0.0;
    /// Patch grid (images, grid_rows x grid_cols) or one score per point (clouds).
    std::vector<double> local;
    int grid_rows = 0, grid_cols = 0;
    /// Source image size; 0 for point clouds.
    int width = 0, height = 0;
};

/// Sample key ("defect/id") -> score, for one category and modality.
using SampleScoreTable = std::map<std::string, SampleScore>;

nlohmann::json score_table_to_json(const SampleScoreTable& table);
SampleScoreTable score_table_from_json(const nlohmann::json& doc);

/// One object-level configuration: a modality subset, fused by the gating unit or a fixed
/// rule. Single-modality subsets always use the normalized score directly.
struct FusionConfig {
    ModalitySubset subset;
    bool gated = true;
    FusionRule rule = FusionRule::Max;

    std::string label() const { return subset.label(); }
};

/// All single, dual and triple configurations over `available`.
std::vector<FusionConfig> standard_configs(ModalitySubset available, bool gated, FusionRule rule = FusionRule::Max);

struct CategoryArtifacts {
    std::string name;
    std::map<Modality, SampleScoreTable> scores;
    std::map<std::string, GatingModel> gates;  // keyed by subset label
};

struct KeyedScores {
    std::vector<std::string> keys;
    std::vector<double> scores;
};

/// Fused object score of every test sample scored in all modalities of the configuration.
KeyedScores object_scores(const CategoryArtifacts& artifacts, const FusionConfig& config);

struct LocalizationMetrics {
    double auroc = 0.0, f1_max = 0.0, aupr = 0.0;
    std::size_t samples = 0;
    std::size_t elements = 0;  // pixels or points
};

struct CategoryRow {
    std::string category;
    std::map<std::string, double> object_auroc;  // config label -> AUROC
    std::map<Modality, LocalizationMetrics> localization;
};

struct EvalReport {
    std::vector<std::string> configs;
    std::vector<Modality> modalities;
    std::vector<CategoryRow> rows;
    CategoryRow mean;  // arithmetic mean of the category rows that define each entry
};

struct EvalOptions {
    double map_sigma = kDefaultMapSigma;
    bool localization = true;
};

/// Object AUROC per category and configuration against labels derived from the ground
/// truth, plus per-modality pixel (images) or point (clouds) localization metrics.
/// Every test sample of a category must be scored in every modality a configuration uses.
EvalReport evaluate(const DatasetIndex& index, const std::vector<CategoryArtifacts>& artifacts,
                    const std::vector<FusionConfig>& configs, const EvalOptions& options = {});

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& doc);
std::string report_to_text(const EvalReport& report);
std::string report_to_csv(const EvalReport& report);

}  // namespace msad
