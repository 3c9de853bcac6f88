#pragma once

#include "msad/point_cloud.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <vector>

namespace msad {

/// x -> rotation * x + translation, with rotation orthonormal and det(rotation) = +1.
struct RigidTransform {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    static RigidTransform identity() { return {}; }

    Point3 apply(const Point3& p) const { return rotation * p + translation; }
    std::vector<Point3> apply(const std::vector<Point3>& points) const;
    RigidTransform inverse() const;
    /// (*this) after `first`: x -> this(first(x)).
    RigidTransform compose(const RigidTransform& first) const;
    /// Rotation angle in radians, from the trace.
    double angle() const;
};

/// Closed-form least-squares rigid fit of src onto dst (SVD of the cross-covariance with
/// reflection correction). Requires equal counts >= 3, not all collinear.
RigidTransform best_rigid_transform(const std::vector<Point3>& src, const std::vector<Point3>& dst);

struct IcpOptions {
    int max_iterations = 100;
    /// Stop once the RMSE improvement of an iteration drops below this (mm).
    double tolerance = 1e-10;
};

struct IcpResult {
    RigidTransform transform;
    double rmse = 0.0;
    int iterations = 0;
    bool converged = false;
    /// RMSE before the first update followed by the RMSE after each accepted update.
    std::vector<double> rmse_trace;
};

/// Point-to-point ICP from `init`: exact nearest-neighbour correspondences from the
/// transformed source to dst, then a closed-form refit, until the RMSE improvement falls
/// below the tolerance or max_iterations is reached. The reported trace never increases.
IcpResult icp_align(const std::vector<Point3>& src, const std::vector<Point3>& dst,
                    const RigidTransform& init = RigidTransform::identity(), const IcpOptions& options = {});

inline constexpr double kDefaultDedupRadius = 0.05;  // mm, scanner resolution

/// a followed by t(b), dropping points of t(b) within dedup_radius of some point of a.
std::vector<Point3> merge_scans(const std::vector<Point3>& a, const std::vector<Point3>& b, const RigidTransform& t,
                                double dedup_radius = kDefaultDedupRadius);

/// Text form: 12 numbers, rotation row-major then translation.
void save_transform(const RigidTransform& t, const std::filesystem::path& path);
RigidTransform load_transform(const std::filesystem::path& path);

}  // namespace msad
