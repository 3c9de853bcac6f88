#pragma once

#include "msad/feature_map.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace msad {

/// Read-only row-major view of n x dim float features.
struct FeatureMatrixView {
    std::span<const float> values;
    std::uint32_t dim = 0;

    std::size_t rows() const { return dim ? values.size() / dim : 0; }
    std::span<const float> row(std::size_t i) const { return values.subspan(i * dim, dim); }
};

/// Squared Euclidean distance accumulated in double over four interleaved lanes
/// (dimension k in lane k % 4), combined as (s0 + s1) + (s2 + s3).
double squared_distance(std::span<const float> a, std::span<const float> b);

/// First pick used by coreset_select for a given seed and row count.
std::size_t coreset_start_index(std::uint64_t seed, std::size_t n);

/// Number of vectors kept for a ratio: ceil(ratio * n), at least 1.
std::size_t coreset_size(double ratio, std::size_t n);

/// Greedy k-center selection from an explicit first index: each further pick maximizes
/// its distance to the already selected set, ties to the lower index.
std::vector<std::size_t> greedy_k_center(const FeatureMatrixView& features, std::size_t k, std::size_t start);

/// Greedy k-center with ceil(ratio * n) picks, first index derived from the seed.
/// ratio must lie in (0, 1]; NaN features are rejected.
std::vector<std::size_t> coreset_select(const FeatureMatrixView& features, double ratio, std::uint64_t seed);

/// Covering radius of a selection: max over rows of the distance to the nearest selected row.
double coverage_radius(const FeatureMatrixView& features, std::span<const std::size_t> selected);

/// Median / interquartile range of training object scores.
struct RobustScaler {
    double median = 0.0;
    double iqr = 1.0;
    bool degenerate = false;  // iqr <= 0 or too few scores; normalization then only centers

    double normalize(double raw) const { return degenerate ? raw - median : (raw - median) / iqr; }
    static RobustScaler fit(std::span<const double> scores);
};

/// Linear-interpolation quantile (numpy "linear") of unsorted values, q in [0, 1].
double quantile(std::vector<double> values, double q);

struct MemoryBank {
    Modality modality = Modality::Rgb;
    std::uint32_t dim = 0;
    std::vector<float> vectors;
    double coreset_ratio = 1.0;
    std::uint64_t seed = 0;
    std::uint32_t source_samples = 0;
    std::uint64_t source_vectors = 0;
    RobustScaler scaler;

    std::size_t size() const { return dim ? vectors.size() / dim : 0; }
    FeatureMatrixView view() const { return {vectors, dim}; }

    friend bool operator==(const MemoryBank& a, const MemoryBank& b) {
        return a.modality == b.modality && a.dim == b.dim && a.vectors == b.vectors &&
               a.coreset_ratio == b.coreset_ratio && a.seed == b.seed && a.source_samples == b.source_samples &&
               a.source_vectors == b.source_vectors && a.scaler.median == b.scaler.median &&
               a.scaler.iqr == b.scaler.iqr && a.scaler.degenerate == b.scaler.degenerate;
    }
};

struct NearestResult {
    std::size_t index = 0;
    double distance = 0.0;
};

/// Exact nearest bank vector; ties go to the lower index.
NearestResult nearest_neighbor(const FeatureMatrixView& bank, std::span<const float> query);

struct ScoreResult {
    double object_score = 0.0;      // max over patches of the nearest-neighbour distance
    double normalized_score = 0.0;  // object_score after the bank's robust scaler
    std::size_t argmax_patch = 0;
    std::size_t nearest_bank_index = 0;
    std::vector<double> patch_scores;
};

/// Per-patch nearest-neighbour distances and their maximum.
ScoreResult score_sample(const MemoryBank& bank, const PatchFeatureMap& features);

struct BankConfig {
    double coreset_ratio = 0.1;
    std::uint64_t seed = 0;
};

/// Bank under construction: the selected vectors keep the index of the training sample
/// they came from so training samples can be scored without matching themselves.
struct ProvenancedBank {
    FeatureMatrixView vectors;
    std::span<const std::uint32_t> source;
};

/// Object score of every training sample against the bank with its own vectors excluded.
/// Needs at least two training samples.
std::vector<double> compute_training_scores(const ProvenancedBank& bank, std::span<const PatchFeatureMap> training);

struct BankBuild {
    MemoryBank bank;
    /// Self-excluded training scores (empty when only one training sample was given).
    std::vector<double> training_scores;
};

/// Concatenates training features, selects the coreset and fits the robust scaler.
BankBuild build_bank(std::span<const PatchFeatureMap> training, const BankConfig& config);

/// MSBK layout, little-endian: "MSBK", u32 version, u32 modality, u64 M, u32 dim,
/// f64 ratio, u64 seed, u32 source samples, u64 source vectors, f64 median, f64 iqr,
/// u8 degenerate, then M * dim float32 values.
void save_bank(const MemoryBank& bank, const std::filesystem::path& path);
MemoryBank load_bank(const std::filesystem::path& path);

}  // namespace msad
