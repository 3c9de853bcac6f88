#pragma once

#include "msad/feature_map.hpp"
#include "msad/point_cloud.hpp"

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace msad {

using NeighborLists = std::vector<std::vector<std::size_t>>;

/// Exact k nearest neighbours of every point (self excluded), sorted by distance with
/// ties broken by lower index. Requires k < N.
NeighborLists knn_graph(const std::vector<Point3>& points, std::size_t k);

struct NormalField {
    std::vector<Point3> normals;
    bool oriented = false;
    Point3 viewpoint = Point3::Zero();
};

/// Default orientation viewpoint: centroid + (0, 0, 10 * bounding diameter).
Point3 default_viewpoint(const std::vector<Point3>& points);

/// PCA normals over each point and its k nearest neighbours, flipped to face the
/// viewpoint. Throws DataError on a neighbourhood of coincident points.
NormalField estimate_normals(const std::vector<Point3>& points, std::size_t k,
                             std::optional<Point3> viewpoint = std::nullopt);

inline constexpr std::size_t kFpfhBins = 11;
inline constexpr std::size_t kFpfhDim = 3 * kFpfhBins;
using Histogram33 = std::array<double, kFpfhDim>;

/// Darboux-frame pair features of one (source, target) pair.
struct PairFeature {
    double alpha = 0.0;  // v . n_t, in [-1, 1]
    double phi = 0.0;    // u . d, in [-1, 1]
    double theta = 0.0;  // atan2(w . n_t, u . n_t), in [-pi, pi]
};

/// Orders the pair so the source normal makes the smaller angle with the connecting
/// line (ties: lower index is the source) and evaluates the three angles.
PairFeature pair_feature(std::size_t i, std::size_t j, const std::vector<Point3>& points,
                         const std::vector<Point3>& normals);

/// Simplified point feature histogram: alpha, phi, theta histograms of 11 uniform bins
/// each, every block normalized to 100 percent.
Histogram33 compute_spfh(std::size_t point_index, const std::vector<Point3>& points,
                         const std::vector<Point3>& normals, std::span<const std::size_t> neighbors);

struct FpfhOptions {
    std::size_t k_normals = 16;
    std::size_t k_fpfh = 16;
    std::optional<Point3> viewpoint;
};

/// FPFH(p) = SPFH(p) + (1/k) sum_i SPFH(p_i) / |p - p_i|, with each block rescaled to sum 100.
std::vector<Histogram33> compute_fpfh_descriptors(const std::vector<Point3>& points, const FpfhOptions& options = {});

/// FPFH as an ungridded N x 33 feature map.
PatchFeatureMap compute_fpfh(const std::vector<Point3>& points, const FpfhOptions& options = {});

/// Raw point features: coordinates relative to the cloud centroid (N x 3, ungridded).
PatchFeatureMap raw_point_features(const std::vector<Point3>& points);

}  // namespace msad
