#pragma once

#include "msad/evaluation.hpp"
#include "msad/fusion.hpp"
#include "msad/image_features.hpp"
#include "msad/memory_bank.hpp"
#include "msad/pc_features.hpp"
#include "msad/registration.hpp"
#include "msad/synth.hpp"

#include <json.hpp>

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace msad {

inline constexpr std::string_view kVersion = "0.1.0";

enum class FeatureMode { Handcrafted, Import };

/// Everything a pipeline run depends on. Loaded from one JSON file; CLI flags override.
struct RunConfig {
    std::filesystem::path dataset = "data";
    std::filesystem::path out = "msad_out";
    ModalitySubset modalities{{Modality::Rgb, Modality::Infrared, Modality::Pointcloud}};
    std::vector<std::string> categories;  // empty = all
    std::array<FeatureMode, 3> feature_mode{FeatureMode::Handcrafted, FeatureMode::Handcrafted,
                                            FeatureMode::Handcrafted};
    /// Root of precomputed MSFT files for imported modalities, laid out like <out>/features.
    std::filesystem::path import_root;
    std::string gt_dir = "GT";
    ImageFeatureOptions image;
    std::size_t k_normals = 16;
    std::size_t k_fpfh = 16;
    double coreset_ratio = 0.1;
    std::uint64_t seed = 0;
    bool gated = true;                    // --fusion gate
    FusionRule rule = FusionRule::Max;    // --fusion max|mean when not gated
    GatingOptions gating;
    double map_sigma = kDefaultMapSigma;
    bool export_maps = true;
    bool localization = true;
    synth::SynthConfig synth;

    /// Throws ParameterError on values outside their documented ranges.
    void validate() const;
    FeatureMode mode(Modality m) const { return feature_mode[static_cast<int>(m)]; }
};

nlohmann::json run_config_to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);

/// FNV-1a 64 of the canonical JSON form, as 16 hex digits.
std::string config_hash(const RunConfig& config);

/// Output locations under config.out.
struct OutputLayout {
    std::filesystem::path root;

    std::filesystem::path feature_file(const SampleRef& ref, Modality m) const;
    std::filesystem::path bank_file(const std::string& category, Modality m) const;
    std::filesystem::path training_scores_file(const std::string& category, Modality m) const;
    std::filesystem::path score_file(const std::string& category, Modality m) const;
    std::filesystem::path map_file(const SampleRef& ref, Modality m) const;
    std::filesystem::path gate_file(const std::string& category, ModalitySubset subset) const;
    std::filesystem::path report_dir() const { return root / "report"; }
    std::filesystem::path manifest_file(std::string_view command) const;
};

synth::Manifest cmd_synth(const RunConfig& config);

struct AlignParams {
    IcpOptions icp;
    double dedup_radius = kDefaultDedupRadius;
};

/// Registers src onto dst and writes transform.txt, aligned.xyz, merged.xyz and icp.json
/// to out_dir.
IcpResult cmd_align(const std::filesystem::path& src, const std::filesystem::path& dst,
                    const std::optional<std::filesystem::path>& init, const AlignParams& params,
                    const std::filesystem::path& out_dir);

/// Per-sample feature maps for every split of every selected modality.
void cmd_extract(const RunConfig& config);
/// Coreset memory bank and self-excluded training scores per category and modality.
void cmd_build_bank(const RunConfig& config);
/// Object and local scores of every test sample; exports score maps.
void cmd_score(const RunConfig& config);
/// Gating models for every multi-modality subset of the selection.
void cmd_fit_gate(const RunConfig& config);
/// Report over all single, dual and triple configurations of the selection.
EvalReport cmd_evaluate(const RunConfig& config);
/// Re-renders the text and CSV report from <results>/report/report.json; returns the text.
std::string cmd_report(const std::filesystem::path& results_dir);

/// Loads what cmd_score and cmd_fit_gate wrote for one category.
CategoryArtifacts load_category_artifacts(const RunConfig& config, const std::string& category, bool with_gates);

/// Dataset index restricted to the configured categories and modalities.
DatasetIndex scan_for(const RunConfig& config);

}  // namespace msad
