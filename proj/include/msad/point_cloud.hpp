#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace msad {

using Point3 = Eigen::Vector3d;

/// Point cloud in millimeters with optional per-point binary labels.
struct PointCloudData {
    std::vector<Point3> points;
    std::optional<std::vector<std::uint8_t>> labels;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
};

/// Parses whitespace separated "x y z" lines ('#' comments ignored) or ASCII PLY with
/// x/y/z vertex properties. Format is chosen from the content, not the extension.
PointCloudData load_point_cloud(const std::filesystem::path& path);

/// Writes "x y z" lines with round-trip precision.
void save_point_cloud_xyz(const PointCloudData& cloud, const std::filesystem::path& path);

/// Writes ASCII PLY with double x/y/z properties.
void save_point_cloud_ply(const PointCloudData& cloud, const std::filesystem::path& path);

/// Reads 0-based anomalous point indices, one per line. Duplicates are tolerated.
std::vector<std::uint8_t> load_point_labels(const std::filesystem::path& path, std::size_t n_points);

/// Writes the indices of labeled points, one per line, ascending.
void save_point_labels(const std::vector<std::uint8_t>& labels, const std::filesystem::path& path);

Point3 centroid(const std::vector<Point3>& points);

/// Length of the axis-aligned bounding box diagonal.
double bounding_diameter(const std::vector<Point3>& points);

}  // namespace msad
