#include "msad/registration.hpp"

#include "msad/core.hpp"
#include "msad/kdtree.hpp"
#include "msad/parallel.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

namespace msad {

std::vector<Point3> RigidTransform::apply(const std::vector<Point3>& points) const {
    std::vector<Point3> out(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) out[i] = apply(points[i]);
    return out;
}

RigidTransform RigidTransform::inverse() const {
    RigidTransform inv;
    inv.rotation = rotation.transpose();
    inv.translation = -(inv.rotation * translation);
    return inv;
}

RigidTransform RigidTransform::compose(const RigidTransform& first) const {
    RigidTransform out;
    out.rotation = rotation * first.rotation;
    out.translation = rotation * first.translation + translation;
    return out;
}

double RigidTransform::angle() const {
    Eigen::Vector3d axis(rotation(2, 1) - rotation(1, 2), rotation(0, 2) - rotation(2, 0),
                         rotation(1, 0) - rotation(0, 1));
    return std::atan2(0.5 * axis.norm(), 0.5 * (rotation.trace() - 1.0));
}

RigidTransform best_rigid_transform(const std::vector<Point3>& src, const std::vector<Point3>& dst) {
    if (src.size() != dst.size()) throw ParameterError("best_rigid_transform: point counts differ");
    if (src.size() < 3) throw DataError("best_rigid_transform: degenerate configuration (fewer than 3 points)");

    Point3 cs = centroid(src);
    Point3 cd = centroid(dst);
    Eigen::Matrix3d spread = Eigen::Matrix3d::Zero();
    Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();
    for (std::size_t i = 0; i < src.size(); ++i) {
        Point3 a = src[i] - cs;
        spread += a * a.transpose();
        cross += a * (dst[i] - cd).transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(spread, Eigen::EigenvaluesOnly);
    auto ev = eig.eigenvalues();  // ascending
    if (!(ev(2) > 0.0) || ev(1) <= 1e-12 * ev(2))
        throw DataError("best_rigid_transform: degenerate configuration (collinear or coincident points)");

    Eigen::JacobiSVD<Eigen::Matrix3d> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d u = svd.matrixU();
    Eigen::Matrix3d v = svd.matrixV();
    Eigen::Matrix3d fix = Eigen::Matrix3d::Identity();
    if ((v * u.transpose()).determinant() < 0.0) fix(2, 2) = -1.0;

    RigidTransform t;
    t.rotation = v * fix * u.transpose();
    t.translation = cd - t.rotation * cs;
    return t;
}

IcpResult icp_align(const std::vector<Point3>& src, const std::vector<Point3>& dst, const RigidTransform& init,
                    const IcpOptions& options) {
    if (src.empty() || dst.empty()) throw ParameterError("icp_align: both clouds must be nonempty");
    if (options.max_iterations < 1) throw ParameterError("icp_align: max_iterations must be at least 1");
    KdTree3 tree(dst);

    // Transformed source plus its nearest dst points under transform t; returns the RMSE.
    auto correspond = [&](const RigidTransform& t, std::vector<Point3>& moved, std::vector<Point3>& matched) {
        moved = t.apply(src);
        matched.resize(src.size());
        std::vector<double> sq(src.size());
        parallel_for(src.size(), [&](std::size_t i) {
            auto nn = tree.nearest(moved[i]);
            matched[i] = dst[nn.index];
            sq[i] = nn.distance_sq;
        });
        double sum = 0.0;
        for (double s : sq) sum += s;
        return std::sqrt(sum / static_cast<double>(src.size()));
    };

    IcpResult result;
    result.transform = init;
    std::vector<Point3> moved, matched, next_moved, next_matched;
    double prev = correspond(init, moved, matched);
    result.rmse_trace.push_back(prev);

    for (int it = 1; it <= options.max_iterations; ++it) {
        result.iterations = it;
        RigidTransform step = best_rigid_transform(moved, matched);
        RigidTransform candidate = step.compose(result.transform);
        double cur = correspond(candidate, next_moved, next_matched);
        if (cur > prev) {
            // Only reachable through rounding once the fit is exact; keep the better pose.
            result.converged = true;
            break;
        }
        result.transform = candidate;
        result.rmse_trace.push_back(cur);
        std::swap(moved, next_moved);
        std::swap(matched, next_matched);
        double improvement = prev - cur;
        prev = cur;
        if (improvement < options.tolerance) {
            result.converged = true;
            break;
        }
    }
    result.rmse = prev;
    return result;
}

std::vector<Point3> merge_scans(const std::vector<Point3>& a, const std::vector<Point3>& b, const RigidTransform& t,
                                double dedup_radius) {
    std::vector<Point3> out = a;
    if (b.empty()) return out;
    KdTree3 tree(a);
    for (const auto& p : b) {
        Point3 q = t.apply(p);
        if (dedup_radius > 0.0 && !a.empty() && tree.any_within(q, dedup_radius)) continue;
        out.push_back(q);
    }
    return out;
}

void save_transform(const RigidTransform& t, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write transform " + path.string());
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (int r = 0; r < 3; ++r)
        out << t.rotation(r, 0) << ' ' << t.rotation(r, 1) << ' ' << t.rotation(r, 2) << '\n';
    out << t.translation.x() << ' ' << t.translation.y() << ' ' << t.translation.z() << '\n';
}

RigidTransform load_transform(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open transform " + path.string());
    double v[12];
    for (double& x : v)
        if (!(in >> x)) throw DataError("transform file must contain 12 numbers: " + path.string());
    std::string extra;
    if (in >> extra) throw DataError("transform file has trailing content: " + path.string());
    RigidTransform t;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) t.rotation(r, c) = v[r * 3 + c];
    t.translation = Eigen::Vector3d(v[9], v[10], v[11]);
    Eigen::Matrix3d err = t.rotation.transpose() * t.rotation - Eigen::Matrix3d::Identity();
    if (err.cwiseAbs().maxCoeff() > 1e-6 || std::abs(t.rotation.determinant() - 1.0) > 1e-6)
        throw DataError("transform rotation is not orthonormal with det +1: " + path.string());
    return t;
}

}  // namespace msad
