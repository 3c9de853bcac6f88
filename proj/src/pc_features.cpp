#include "msad/pc_features.hpp"

#include "msad/kdtree.hpp"
#include "msad/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace msad {
namespace {

std::size_t bin_of(double value, double lo, double hi) {
    double t = (value - lo) / (hi - lo) * static_cast<double>(kFpfhBins);
    auto b = static_cast<long>(std::floor(t));
    return static_cast<std::size_t>(std::clamp<long>(b, 0, static_cast<long>(kFpfhBins) - 1));
}

void normalize_blocks(Histogram33& h) {
    for (std::size_t block = 0; block < 3; ++block) {
        double sum = 0.0;
        for (std::size_t b = 0; b < kFpfhBins; ++b) sum += h[block * kFpfhBins + b];
        if (sum <= 0.0) continue;
        for (std::size_t b = 0; b < kFpfhBins; ++b) h[block * kFpfhBins + b] *= 100.0 / sum;
    }
}

}  // namespace

NeighborLists knn_graph(const std::vector<Point3>& points, std::size_t k) {
    if (k >= points.size())
        throw ParameterError("knn_graph: k=" + std::to_string(k) + " must be smaller than the point count " +
                             std::to_string(points.size()));
    KdTree3 tree(points);
    NeighborLists lists(points.size());
    parallel_for(points.size(), [&](std::size_t i) {
        auto nn = tree.knn(points[i], k, i);
        auto& out = lists[i];
        out.reserve(k);
        for (const auto& n : nn) out.push_back(n.index);
    });
    return lists;
}

Point3 default_viewpoint(const std::vector<Point3>& points) {
    return centroid(points) + Point3(0.0, 0.0, 10.0 * bounding_diameter(points));
}

NormalField estimate_normals(const std::vector<Point3>& points, std::size_t k, std::optional<Point3> viewpoint) {
    if (k < 3) throw ParameterError("estimate_normals: k must be at least 3");
    auto graph = knn_graph(points, k);
    NormalField field;
    field.viewpoint = viewpoint.value_or(default_viewpoint(points));
    field.oriented = true;
    field.normals.resize(points.size());
    parallel_for(points.size(), [&](std::size_t i) {
        Point3 mean = points[i];
        for (auto j : graph[i]) mean += points[j];
        mean /= static_cast<double>(graph[i].size() + 1);
        Eigen::Matrix3d cov = (points[i] - mean) * (points[i] - mean).transpose();
        for (auto j : graph[i]) cov += (points[j] - mean) * (points[j] - mean).transpose();
        if (cov.trace() <= 0.0)
            throw DataError("estimate_normals: degenerate neighbourhood (coincident points) at point " +
                            std::to_string(i));
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
        Point3 n = solver.eigenvectors().col(0).normalized();
        if (n.dot(field.viewpoint - points[i]) < 0.0) n = -n;
        field.normals[i] = n;
    });
    return field;
}

PairFeature pair_feature(std::size_t i, std::size_t j, const std::vector<Point3>& points,
                         const std::vector<Point3>& normals) {
    Point3 d = points[j] - points[i];
    double len = d.norm();
    if (len == 0.0)
        throw DataError("compute_spfh: zero-length connecting vector between points " + std::to_string(i) + " and " +
                        std::to_string(j));
    d /= len;
    // Larger |cos| means a smaller angle between the normal and the (undirected) line.
    double cos_i = std::abs(normals[i].dot(d));
    double cos_j = std::abs(normals[j].dot(d));
    bool i_is_source = cos_i > cos_j || (cos_i == cos_j && i < j);
    std::size_t s = i_is_source ? i : j;
    std::size_t t = i_is_source ? j : i;
    if (!i_is_source) d = -d;

    const Point3& u = normals[s];
    const Point3& nt = normals[t];
    Point3 v = d.cross(u);
    double vn = v.norm();
    if (vn < 1e-12) {
        // Line parallel to the source normal: any perpendicular completes the frame.
        Point3 axis = std::abs(u.x()) < 0.9 ? Point3::UnitX() : Point3::UnitY();
        v = axis.cross(u).normalized();
    } else {
        v /= vn;
    }
    Point3 w = u.cross(v);
    return {v.dot(nt), u.dot(d), std::atan2(w.dot(nt), u.dot(nt))};
}

Histogram33 compute_spfh(std::size_t point_index, const std::vector<Point3>& points, const std::vector<Point3>& normals,
                         std::span<const std::size_t> neighbors) {
    if (neighbors.empty()) throw ParameterError("compute_spfh: at least one neighbour required");
    Histogram33 h{};
    const double inc = 100.0 / static_cast<double>(neighbors.size());
    for (auto j : neighbors) {
        auto f = pair_feature(point_index, j, points, normals);
        h[bin_of(f.alpha, -1.0, 1.0)] += inc;
        h[kFpfhBins + bin_of(f.phi, -1.0, 1.0)] += inc;
        h[2 * kFpfhBins + bin_of(f.theta, -std::numbers::pi, std::numbers::pi)] += inc;
    }
    return h;
}

std::vector<Histogram33> compute_fpfh_descriptors(const std::vector<Point3>& points, const FpfhOptions& options) {
    if (points.size() < 2) throw ParameterError("compute_fpfh: need at least two points");
    auto normals = estimate_normals(points, options.k_normals, options.viewpoint);
    auto graph = knn_graph(points, options.k_fpfh);

    std::vector<Histogram33> spfh(points.size());
    parallel_for(points.size(), [&](std::size_t i) { spfh[i] = compute_spfh(i, points, normals.normals, graph[i]); });

    std::vector<Histogram33> fpfh(points.size());
    parallel_for(points.size(), [&](std::size_t i) {
        Histogram33 acc{};
        const double inv_k = 1.0 / static_cast<double>(graph[i].size());
        for (auto j : graph[i]) {
            double w = inv_k / (points[i] - points[j]).norm();
            for (std::size_t b = 0; b < kFpfhDim; ++b) acc[b] += w * spfh[j][b];
        }
        for (std::size_t b = 0; b < kFpfhDim; ++b) acc[b] += spfh[i][b];
        normalize_blocks(acc);
        fpfh[i] = acc;
    });
    return fpfh;
}

PatchFeatureMap compute_fpfh(const std::vector<Point3>& points, const FpfhOptions& options) {
    auto desc = compute_fpfh_descriptors(points, options);
    PatchFeatureMap map(Modality::Pointcloud, 0, 0, desc.size(), static_cast<std::uint32_t>(kFpfhDim));
    for (std::size_t i = 0; i < desc.size(); ++i)
        for (std::size_t b = 0; b < kFpfhDim; ++b) map.values[i * kFpfhDim + b] = static_cast<float>(desc[i][b]);
    return map;
}

PatchFeatureMap raw_point_features(const std::vector<Point3>& points) {
    if (points.empty()) throw ParameterError("raw_point_features: empty cloud");
    Point3 c = centroid(points);
    PatchFeatureMap map(Modality::Pointcloud, 0, 0, points.size(), 3);
    for (std::size_t i = 0; i < points.size(); ++i)
        for (int a = 0; a < 3; ++a) map.values[i * 3 + a] = static_cast<float>(points[i][a] - c[a]);
    return map;
}

}  // namespace msad
