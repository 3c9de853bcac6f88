#include "msad/core.hpp"
#include "msad/registration.hpp"
#include "test_util.hpp"

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include <numbers>
#include <random>

using namespace msad;
using msad::testing::TempDir;
using msad::testing::write_text;

namespace {

// Asymmetric lumpy closed surface, so the rigid alignment is unique.
std::vector<Point3> lumpy_cloud(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::vector<Point3> pts;
    while (pts.size() < n) {
        Point3 d(g(rng), g(rng), g(rng));
        if (d.norm() < 1e-9) continue;
        d.normalize();
        double r = 1.0 + 0.3 * d.x() * d.x() + 0.2 * std::sin(3 * d.y()) + 0.15 * d.z() * d.x();
        pts.push_back(Point3(3.0 * d.x(), 2.0 * d.y(), 1.2 * d.z()) * r);
    }
    return pts;
}

RigidTransform random_rigid(std::mt19937_64& rng, double max_angle, double max_shift) {
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::Vector3d axis(g(rng), g(rng), g(rng));
    Eigen::Vector3d dir(g(rng), g(rng), g(rng));
    RigidTransform t;
    t.rotation = Eigen::AngleAxisd(max_angle * u(rng), axis.normalized()).toRotationMatrix();
    t.translation = dir.normalized() * (max_shift * u(rng));
    return t;
}

double max_abs_diff(const RigidTransform& a, const RigidTransform& b) {
    return std::max((a.rotation - b.rotation).cwiseAbs().maxCoeff(),
                    (a.translation - b.translation).cwiseAbs().maxCoeff());
}

}  // namespace

TEST(RigidTransform, ComposeInverseAndAngle) {
    std::mt19937_64 rng(2);
    auto a = random_rigid(rng, 1.0, 5.0);
    auto b = random_rigid(rng, 1.0, 5.0);
    Point3 p(0.3, -1.2, 4.0);
    EXPECT_TRUE(a.compose(b).apply(p).isApprox(a.apply(b.apply(p)), 1e-12));
    EXPECT_LT(max_abs_diff(a.compose(a.inverse()), RigidTransform::identity()), 1e-12);
    RigidTransform r;
    r.rotation = Eigen::AngleAxisd(0.4, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
    EXPECT_NEAR(r.angle(), 0.4, 1e-12);
}

TEST(BestRigid, IdenticalSetsGiveIdentity) {
    auto pts = lumpy_cloud(50, 1);
    auto t = best_rigid_transform(pts, pts);
    EXPECT_LT(max_abs_diff(t, RigidTransform::identity()), 1e-12);
}

TEST(BestRigid, RecoversRandomTransform) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        auto pts = lumpy_cloud(40, 100 + trial);
        auto truth = random_rigid(rng, std::numbers::pi, 50.0);
        auto t = best_rigid_transform(pts, truth.apply(pts));
        EXPECT_LT(max_abs_diff(t, truth), 1e-9) << trial;
        EXPECT_NEAR(t.rotation.determinant(), 1.0, 1e-12);
    }
}

TEST(BestRigid, PlanarInputNeedsReflectionFix) {
    // Coplanar points admit a reflection with the same fit; the result must stay proper.
    std::vector<Point3> pts{{0, 0, 0}, {1, 0, 0}, {0, 2, 0}, {3, 1, 0}, {1, 1, 0}};
    RigidTransform truth;
    truth.rotation = Eigen::AngleAxisd(2.5, Eigen::Vector3d(1, -1, 0.5).normalized()).toRotationMatrix();
    truth.translation = Eigen::Vector3d(1, 2, 3);
    auto t = best_rigid_transform(pts, truth.apply(pts));
    EXPECT_LT(max_abs_diff(t, truth), 1e-9);
}

TEST(BestRigid, DegenerateInputsRejected) {
    std::vector<Point3> two{{0, 0, 0}, {1, 0, 0}};
    EXPECT_THROW(best_rigid_transform(two, two), DataError);
    std::vector<Point3> line{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {5, 0, 0}};
    EXPECT_THROW(best_rigid_transform(line, line), DataError);
    std::vector<Point3> three{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    EXPECT_THROW(best_rigid_transform(three, two), ParameterError);
}

TEST(Icp, AlignedCloudsStopAfterOneIteration) {
    auto pts = lumpy_cloud(500, 4);
    auto r = icp_align(pts, pts);
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.iterations, 1);
    EXPECT_EQ(r.rmse, 0.0);
    EXPECT_LT(max_abs_diff(r.transform, RigidTransform::identity()), 1e-12);
}

TEST(Icp, RecoversSmallPerturbations) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        auto dst = lumpy_cloud(1000, 200 + trial);
        double diam = bounding_diameter(dst);
        auto truth = random_rigid(rng, 15.0 * std::numbers::pi / 180.0, 0.05 * diam);
        auto src = truth.inverse().apply(dst);
        auto r = icp_align(src, dst);
        EXPECT_TRUE(r.converged);
        EXPECT_LE(r.rmse, 1e-6 * diam) << trial;
        EXPECT_LT(max_abs_diff(r.transform, truth), 1e-6) << trial;
        for (std::size_t i = 1; i < r.rmse_trace.size(); ++i) EXPECT_LE(r.rmse_trace[i], r.rmse_trace[i - 1]);
        EXPECT_EQ(r.rmse_trace.back(), r.rmse);
    }
}

TEST(Icp, InitialGuessIsUsed) {
    std::mt19937_64 rng(6);
    auto dst = lumpy_cloud(800, 7);
    RigidTransform truth = random_rigid(rng, 1.5, 10.0);  // too large for identity start
    auto src = truth.inverse().apply(dst);
    auto r = icp_align(src, dst, truth);
    EXPECT_LT(r.rmse_trace.front(), 1e-9);
    EXPECT_LT(max_abs_diff(r.transform, truth), 1e-9);
}

TEST(Icp, DisjointCloudsHitIterationCapWithMonotoneTrace) {
    auto a = lumpy_cloud(300, 8);
    auto b = lumpy_cloud(300, 9);
    RigidTransform far;
    far.translation = Eigen::Vector3d(1000, 0, 0);
    b = far.apply(b);
    IcpOptions opt;
    opt.max_iterations = 3;
    opt.tolerance = 1e-12;
    auto r = icp_align(a, b, RigidTransform::identity(), opt);
    EXPECT_FALSE(r.converged);
    EXPECT_EQ(r.iterations, 3);
    ASSERT_EQ(r.rmse_trace.size(), 4u);
    for (std::size_t i = 1; i < r.rmse_trace.size(); ++i) EXPECT_LE(r.rmse_trace[i], r.rmse_trace[i - 1]);
}

TEST(Icp, InvalidArgumentsRejected) {
    auto a = lumpy_cloud(10, 1);
    EXPECT_THROW(icp_align({}, a), ParameterError);
    IcpOptions opt;
    opt.max_iterations = 0;
    EXPECT_THROW(icp_align(a, a, RigidTransform::identity(), opt), ParameterError);
}

TEST(Merge, EmptySecondScanLeavesFirst) {
    auto a = lumpy_cloud(100, 1);
    EXPECT_EQ(merge_scans(a, {}, RigidTransform::identity()), a);
}

TEST(Merge, IdenticalScanFullyDeduplicated) {
    auto a = lumpy_cloud(100, 1);
    EXPECT_EQ(merge_scans(a, a, RigidTransform::identity(), 0.01), a);
    EXPECT_EQ(merge_scans(a, a, RigidTransform::identity(), 0.0).size(), 200u);
}

TEST(Merge, HemispheresRelatedByFlipCoverSphere) {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> g;
    std::vector<Point3> upper, lower_local;
    while (upper.size() < 500) {
        Point3 p(g(rng), g(rng), g(rng));
        p.normalize();
        if (p.z() > 0.2) upper.push_back(p);
    }
    // The second scan sees the lower hemisphere in its own frame, which is flipped by 180 deg about x.
    RigidTransform flip;
    flip.rotation = Eigen::AngleAxisd(std::numbers::pi, Eigen::Vector3d::UnitX()).toRotationMatrix();
    while (lower_local.size() < 400) {
        Point3 p(g(rng), g(rng), g(rng));
        p.normalize();
        if (p.z() < -0.2) lower_local.push_back(flip.inverse().apply(p));
    }
    auto merged = merge_scans(upper, lower_local, flip, 0.01);
    EXPECT_LE(merged.size(), upper.size() + lower_local.size());
    std::size_t above = 0, below = 0;
    for (const auto& p : merged) {
        EXPECT_NEAR(p.norm(), 1.0, 1e-12);
        (p.z() > 0 ? above : below)++;
    }
    EXPECT_EQ(above, 500u);
    EXPECT_EQ(below, 400u);
}

TEST(TransformFile, RoundTripAndValidation) {
    TempDir dir("tf");
    std::mt19937_64 rng(13);
    auto t = random_rigid(rng, 2.0, 30.0);
    save_transform(t, dir / "t.txt");
    auto back = load_transform(dir / "t.txt");
    EXPECT_EQ(back.rotation, t.rotation);
    EXPECT_EQ(back.translation, t.translation);

    write_text(dir / "short.txt", "1 0 0 0 1 0 0 0 1 0 0\n");
    write_text(dir / "long.txt", "1 0 0 0 1 0 0 0 1 0 0 0 7\n");
    write_text(dir / "skew.txt", "2 0 0 0 1 0 0 0 1 0 0 0\n");
    write_text(dir / "mirror.txt", "-1 0 0 0 1 0 0 0 1 0 0 0\n");
    EXPECT_THROW(load_transform(dir / "short.txt"), DataError);
    EXPECT_THROW(load_transform(dir / "long.txt"), DataError);
    EXPECT_THROW(load_transform(dir / "skew.txt"), DataError);
    EXPECT_THROW(load_transform(dir / "mirror.txt"), DataError);
}
