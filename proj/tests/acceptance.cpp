// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "msad/evaluation.hpp"
#include "msad/memory_bank.hpp"
#include "msad/metrics.hpp"
#include "msad/parallel.hpp"
#include "msad/pc_features.hpp"
#include "msad/pipeline.hpp"
#include "msad/registration.hpp"

#include <Eigen/Geometry>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>

using namespace msad;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;
};

class Check {
public:
    void require(bool ok, const std::string& what) {
        if (!ok && failures_++ < 5) first_ += (first_.empty() ? "" : "; ") + what;
    }
    bool ok() const { return failures_ == 0; }
    std::string failures() const { return std::to_string(failures_) + " failure(s): " + first_; }

private:
    int failures_ = 0;
    std::string first_;
};

std::string format_num(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// ---------------------------------------------------------------- criterion 1

double plain_distance(std::span<const float> a, std::span<const float> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        double d = static_cast<double>(a[k]) - static_cast<double>(b[k]);
        s += d * d;
    }
    return std::sqrt(s);
}

Verdict scoring_oracle() {
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<int> patches(1, 500), bank_rows(1, 2000), dims(1, 64);
    std::uniform_real_distribution<float> value(-1.0f, 1.0f);
    Check check;
    double worst = 0.0;
    for (int inst = 0; inst < 200; ++inst) {
        auto p = static_cast<std::size_t>(patches(rng));
        auto m = static_cast<std::size_t>(bank_rows(rng));
        auto d = static_cast<std::uint32_t>(dims(rng));
        MemoryBank bank;
        bank.modality = Modality::Pointcloud;
        bank.dim = d;
        bank.vectors.resize(m * d);
        for (auto& v : bank.vectors) v = value(rng);
        PatchFeatureMap features(Modality::Pointcloud, 0, 0, p, d);
        for (auto& v : features.values) v = value(rng);
        // Duplicate some bank rows into the query so exact zeros and ties occur.
        for (std::size_t i = 0; i < std::min<std::size_t>(p, 3); ++i) {
            auto src = bank.view().row(rng() % m);
            std::copy(src.begin(), src.end(), features.row(i).begin());
        }

        auto result = score_sample(bank, features);
        double object = -1.0;
        for (std::size_t i = 0; i < p; ++i) {
            double best = INFINITY;
            for (std::size_t j = 0; j < m; ++j) best = std::min(best, plain_distance(features.row(i), bank.view().row(j)));
            double err = std::abs(result.patch_scores[i] - best);
            worst = std::max(worst, err);
            check.require(err <= 1e-9, "instance " + std::to_string(inst) + " patch " + std::to_string(i));
            object = std::max(object, best);
        }
        double err = std::abs(result.object_score - object);
        worst = std::max(worst, err);
        check.require(err <= 1e-9, "instance " + std::to_string(inst) + " object score");
    }
    if (!check.ok()) return {false, check.failures()};
    return {true, "200 instances, max |error| " + format_num("%.2e", worst) + " <= 1e-9"};
}

// ---------------------------------------------------------------- criterion 2

double optimal_k_center_radius(const FeatureMatrixView& f, std::size_t k) {
    std::size_t n = f.rows();
    double best = INFINITY;
    std::vector<std::size_t> pick;
    std::function<void(std::size_t)> recurse = [&](std::size_t from) {
        if (pick.size() == k) {
            best = std::min(best, coverage_radius(f, pick));
            return;
        }
        for (std::size_t i = from; i < n; ++i) {
            pick.push_back(i);
            recurse(i + 1);
            pick.pop_back();
        }
    };
    recurse(0);
    return best;
}

Verdict coreset_properties() {
    std::mt19937_64 rng(202);
    Check check;

    // Full ratio: coreset bank scores equal the uncompressed bank's scores exactly.
    int exact_cases = 0;
    for (int inst = 0; inst < 20; ++inst) {
        std::uint32_t d = 1 + rng() % 16;
        std::size_t samples = 2 + rng() % 4, per = 5 + rng() % 40;
        std::normal_distribution<float> g;
        std::vector<PatchFeatureMap> training;
        MemoryBank full;
        full.modality = Modality::Pointcloud;
        full.dim = d;
        for (std::size_t s = 0; s < samples; ++s) {
            PatchFeatureMap map(Modality::Pointcloud, 0, 0, per, d);
            for (auto& v : map.values) v = g(rng);
            full.vectors.insert(full.vectors.end(), map.values.begin(), map.values.end());
            training.push_back(std::move(map));
        }
        auto built = build_bank(training, {1.0, rng()});
        check.require(built.bank.size() == full.size(), "ratio 1 bank size");
        PatchFeatureMap query(Modality::Pointcloud, 0, 0, 60, d);
        for (auto& v : query.values) v = g(rng);
        auto a = score_sample(built.bank, query);
        auto b = score_sample(full, query);
        check.require(a.object_score == b.object_score && a.patch_scores == b.patch_scores,
                      "ratio 1 scores differ in instance " + std::to_string(inst));
        ++exact_cases;
    }

    // Greedy k-center is a 2-approximation of the optimal covering radius.
    int approx_cases = 0;
    double worst_ratio = 0.0;
    for (int inst = 0; inst < 600; ++inst) {
        std::size_t n = 1 + rng() % 12;
        std::size_t k = 1 + rng() % std::min<std::size_t>(3, n);
        std::uint32_t d = 1 + rng() % 4;
        std::vector<float> values(n * d);
        bool lattice = inst % 3 == 0;  // integer coordinates give many equal distances
        std::uniform_real_distribution<float> u(-3.0f, 3.0f);
        for (auto& v : values) v = lattice ? static_cast<float>(static_cast<int>(rng() % 4)) : u(rng);
        FeatureMatrixView view{values, d};
        double opt = optimal_k_center_radius(view, k);
        for (std::size_t start = 0; start < n; ++start) {
            auto sel = greedy_k_center(view, k, start);
            double greedy = coverage_radius(view, sel);
            check.require(greedy <= 2.0 * opt, "instance " + std::to_string(inst) + " start " + std::to_string(start) +
                                                   ": greedy " + format_num("%.17g", greedy) + " > 2 x " + format_num("%.17g", opt));
            if (opt > 0) worst_ratio = std::max(worst_ratio, greedy / opt);
            ++approx_cases;
        }
    }
    if (!check.ok()) return {false, check.failures()};
    return {true, std::to_string(exact_cases) + " exact full-ratio banks; " + std::to_string(approx_cases) +
                      " greedy runs, worst radius ratio " + format_num("%.3f", worst_ratio) + " <= 2"};
}

// ---------------------------------------------------------------- criterion 3

struct Instance {
    std::vector<double> scores;
    std::vector<std::uint8_t> labels;
    LabeledScores view() const { return {scores, labels}; }
};

double auroc_pairs(const Instance& in) {
    double wins = 0, pairs = 0;
    for (std::size_t i = 0; i < in.scores.size(); ++i)
        for (std::size_t j = 0; j < in.scores.size(); ++j) {
            if (!in.labels[i] || in.labels[j]) continue;
            pairs += 1;
            if (in.scores[i] > in.scores[j]) wins += 1;
            if (in.scores[i] == in.scores[j]) wins += 0.5;
        }
    return wins / pairs;
}

double f1_sweep(const Instance& in) {
    std::set<double> thresholds(in.scores.begin(), in.scores.end());
    double best = 0;
    for (double t : thresholds) {
        double tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < in.scores.size(); ++i) {
            bool pred = in.scores[i] >= t;
            tp += pred && in.labels[i];
            fp += pred && !in.labels[i];
            fn += !pred && in.labels[i];
        }
        if (tp > 0) best = std::max(best, 2 * tp / (2 * tp + fp + fn));
    }
    return best;
}

double ap_sweep(const Instance& in) {
    std::set<double, std::greater<>> thresholds(in.scores.begin(), in.scores.end());
    double positives = 0;
    for (auto l : in.labels) positives += l;
    double prev = 0, ap = 0;
    for (double t : thresholds) {
        double tp = 0, pred = 0;
        for (std::size_t i = 0; i < in.scores.size(); ++i)
            if (in.scores[i] >= t) {
                pred++;
                tp += in.labels[i];
            }
        ap += (tp / positives - prev) * (tp / pred);
        prev = tp / positives;
    }
    return ap;
}

Verdict metric_oracles() {
    std::mt19937_64 rng(303);
    Check check;
    double worst = 0.0;
    for (int inst = 0; inst < 500; ++inst) {
        std::size_t n = 2 + rng() % 99;
        int levels = inst % 3 == 0 ? 1'000'000 : 2 + static_cast<int>(rng() % 5);
        Instance in;
        std::bernoulli_distribution coin(0.05 + 0.9 * (rng() % 100) / 100.0);
        for (std::size_t i = 0; i < n; ++i) {
            in.scores.push_back(static_cast<double>(rng() % levels) * 0.1);
            in.labels.push_back(coin(rng));
        }
        // Both classes must be present: one forced positive and one forced negative.
        std::size_t pos = rng() % n;
        in.labels[pos] = 1;
        in.labels[(pos + 1 + rng() % (n - 1)) % n] = 0;

        Instance flipped = in;
        for (auto& l : flipped.labels) l = 1 - l;
        double a = auroc(in.view());
        double errs[3] = {std::abs(a - auroc_pairs(in)), std::abs(f1_max(in.view()) - f1_sweep(in)),
                          std::abs(aupr(in.view()) - ap_sweep(in))};
        for (double e : errs) {
            worst = std::max(worst, e);
            check.require(e <= 1e-9, "instance " + std::to_string(inst) + " oracle mismatch " + format_num("%.3g", e));
        }
        check.require(a + auroc(flipped.view()) == 1.0, "instance " + std::to_string(inst) + " antisymmetry");
    }
    if (!check.ok()) return {false, check.failures()};
    return {true, "500 instances, max |error| " + format_num("%.2e", worst) + " <= 1e-9, antisymmetry exact"};
}

// ---------------------------------------------------------------- criterion 4

std::vector<Point3> lumpy_cloud(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::vector<Point3> pts;
    while (pts.size() < n) {
        Point3 d(g(rng), g(rng), g(rng));
        if (d.norm() < 1e-9) continue;
        d.normalize();
        double r = 1.0 + 0.3 * d.x() * d.x() + 0.2 * std::sin(3 * d.y()) + 0.15 * d.z() * d.x();
        pts.push_back(Point3(30.0 * d.x(), 20.0 * d.y(), 12.0 * d.z()) * r);
    }
    return pts;
}

double diameter(const std::vector<Point3>& pts) {
    Point3 lo = pts[0], hi = pts[0];
    for (const auto& p : pts) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return (hi - lo).norm();
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

Verdict icp_recovery() {
    std::mt19937_64 rng(404);
    Check check;
    double worst_rmse = 0.0, worst_t = 0.0;
    int max_iter = 0;
    for (int run = 0; run < 100; ++run) {
        auto dst = lumpy_cloud(2000, 4000 + run);
        double diam = diameter(dst);
        auto truth = random_rigid(rng, 15.0 * std::numbers::pi / 180.0, 0.05 * diam);
        // src is dst moved by truth.inverse(), so ICP must recover truth.
        auto src = truth.inverse().apply(dst);
        auto r = icp_align(src, dst);
        double terr = std::max((r.transform.rotation - truth.rotation).cwiseAbs().maxCoeff(),
                               (r.transform.translation - truth.translation).cwiseAbs().maxCoeff());
        worst_rmse = std::max(worst_rmse, r.rmse / diam);
        worst_t = std::max(worst_t, terr);
        max_iter = std::max(max_iter, r.iterations);
        std::string tag = "run " + std::to_string(run);
        check.require(r.rmse <= 1e-6 * diam, tag + " rmse " + format_num("%.3g", r.rmse));
        check.require(terr <= 1e-6, tag + " transform error " + format_num("%.3g", terr));
        for (std::size_t i = 1; i < r.rmse_trace.size(); ++i)
            check.require(r.rmse_trace[i] <= r.rmse_trace[i - 1], tag + " trace increases");
    }
    if (!check.ok()) return {false, check.failures()};
    return {true, "100 runs, N=2000, max rmse/diameter " + format_num("%.2e", worst_rmse) + ", max transform error " +
                      format_num("%.2e", worst_t) + ", <= " + std::to_string(max_iter) + " iterations, traces monotone"};
}

// ---------------------------------------------------------------- criterion 5

Verdict fpfh_geometry() {
    Check check;
    std::vector<Point3> grid;
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 20; ++x) grid.emplace_back(0.5 * x, 0.5 * y, 0.0);
    FpfhOptions opt{16, 16, std::nullopt};
    auto field = estimate_normals(grid, opt.k_normals);
    auto nbrs = knn_graph(grid, opt.k_fpfh);
    double max_angle = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (auto j : nbrs[i]) {
            auto f = pair_feature(i, j, grid, field.normals);
            max_angle = std::max({max_angle, std::abs(f.alpha), std::abs(f.phi), std::abs(f.theta)});
        }
    check.require(max_angle == 0.0, "planar Darboux angles not zero: " + format_num("%.3g", max_angle));

    auto desc = compute_fpfh_descriptors(grid, opt);
    constexpr std::size_t centre = kFpfhBins / 2;
    double spread = 0.0;
    for (const auto& h : desc) {
        for (std::size_t b = 0; b < 3; ++b)
            check.require(std::abs(h[b * kFpfhBins + centre] - 100.0) <= 1e-9, "planar mass outside central bins");
        for (std::size_t k = 0; k < kFpfhDim; ++k) spread = std::max(spread, std::abs(h[k] - desc[0][k]));
    }
    check.require(spread <= 1e-6, "planar FPFH vectors differ by " + format_num("%.3g", spread));

    // Rigid invariance on an irregular curved patch (no exact bin-edge ties).
    std::mt19937_64 rng(505);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    std::vector<Point3> cloud;
    for (int i = 0; i < 800; ++i) {
        double x = u(rng), y = u(rng);
        cloud.emplace_back(x, y, 0.6 * std::sin(0.7 * x) * std::cos(0.5 * y) + 0.05 * x * y);
    }
    auto base = compute_fpfh_descriptors(cloud, opt);
    double worst_rel = 0.0;
    for (int t = 0; t < 20; ++t) {
        auto tr = random_rigid(rng, std::numbers::pi, 50.0);
        FpfhOptions topt = opt;
        topt.viewpoint = tr.apply(default_viewpoint(cloud));
        auto moved = compute_fpfh_descriptors(tr.apply(cloud), topt);
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            double diff = 0.0, scale = 0.0;
            for (std::size_t k = 0; k < kFpfhDim; ++k) {
                diff = std::max(diff, std::abs(moved[i][k] - base[i][k]));
                scale = std::max(scale, std::abs(base[i][k]));
            }
            worst_rel = std::max(worst_rel, diff / scale);
            check.require(diff <= 1e-6 * scale, "transform " + std::to_string(t) + " point " + std::to_string(i) +
                                                    " relative change " + format_num("%.3g", diff / scale));
        }
    }
    if (!check.ok()) return {false, check.failures()};
    return {true, "planar angles 0, central-bin mass 100%, spread " + format_num("%.1e", spread) +
                      "; 20 transforms, max relative change " + format_num("%.2e", worst_rel) + " <= 1e-6"};
}

// ---------------------------------------------------------------- criterion 6

Verdict ocsvm_properties() {
    Check check;
    std::mt19937_64 rng(606);
    std::normal_distribution<double> g;
    double worst_kkt = 0.0, worst_far = 0.0;
    std::string fractions;
    for (std::size_t n : {50u, 200u})
        for (double nu : {0.1, 0.5})
            for (std::size_t d = 1; d <= 3; ++d) {
                std::vector<std::vector<double>> train(n, std::vector<double>(d));
                for (auto& v : train)
                    for (auto& x : v) x = g(rng);
                std::vector<Modality> mods(kAllModalities.begin(), kAllModalities.begin() + static_cast<long>(d));
                GatingOptions opt;
                opt.nu = nu;
                auto model = fit_gating(train, ModalitySubset(mods), opt);
                std::string tag = "n=" + std::to_string(n) + " nu=" + format_num("%.1f", nu) + " d=" + std::to_string(d);

                worst_kkt = std::max(worst_kkt, model.kkt_residual);
                check.require(model.kkt_residual <= 1e-6, tag + " kkt residual " + format_num("%.3g", model.kkt_residual));

                // Outliers: training points strictly outside the learned region. Margin support
                // vectors sit on the boundary with |S| at solver rounding (~1e-11), so the
                // boundary is resolved at 1e-9, ten times the solver tolerance.
                std::size_t outside = 0;
                for (const auto& v : train) outside += gate_score(model, v) > 1e-9;
                double frac = static_cast<double>(outside) / static_cast<double>(n);
                check.require(frac <= nu + 5.0 / static_cast<double>(n), tag + " outlier fraction " + format_num("%.3f", frac));
                if (d == 2) fractions += (fractions.empty() ? "" : ", ") + tag + " -> " + format_num("%.3f", frac);

                std::vector<double> far(d, 0.0);
                far[0] = 1e4;
                double gap = std::abs(gate_score(model, far) - model.rho);
                worst_far = std::max(worst_far, gap);
                check.require(gap <= 1e-6, tag + " far-field gap " + format_num("%.3g", gap));
            }
    if (!check.ok()) return {false, check.failures()};
    return {true, "outlier fractions (" + fractions + ") <= nu + 5/n; max kkt " + format_num("%.1e", worst_kkt) +
                      "; max far-field gap " + format_num("%.1e", worst_far)};
}

// ---------------------------------------------------------------- criterion 7

Verdict fusion_ordering(const fs::path& work) {
    RunConfig config;
    config.dataset = work / "data";
    config.out = work / "out";
    config.localization = false;
    config.export_maps = false;
    cmd_synth(config);
    cmd_extract(config);
    cmd_build_bank(config);
    cmd_score(config);
    cmd_fit_gate(config);
    auto report = cmd_evaluate(config);
    const auto& mean = report.mean.object_auroc;

    // Restricted AUROC: normal samples against abnormal samples the modality cannot see.
    auto index = scan_for(config);
    std::map<Modality, double> restricted;
    for (auto m : kAllModalities) {
        double sum = 0.0;
        for (const auto& cat : index.categories) {
            auto art = load_category_artifacts(config, cat.name, false);
            Instance in;
            for (const auto& t : cat.test) {
                auto labels = modality_labels(t);
                bool anomalous = derive_object_label(labels) == ObjectLabel::Anomalous;
                if (anomalous && labels[m].value_or(false)) continue;
                in.scores.push_back(art.scores.at(m).at(t.ref.key()).normalized);
                in.labels.push_back(anomalous);
            }
            sum += auroc(in.view());
        }
        restricted[m] = sum / static_cast<double>(index.categories.size());
    }

    Check check;
    std::ostringstream detail;
    double best_single = 0.0, best_dual = 0.0;
    for (const auto& label : report.configs) {
        double v = mean.at(label);
        detail << label << "=" << format_num("%.3f", v) << " ";
        std::size_t parts = std::count(label.begin(), label.end(), '+') + 1;
        if (parts == 1) {
            best_single = std::max(best_single, v);
            check.require(v <= 0.80, label + " overall AUROC " + format_num("%.3f", v) + " > 0.80");
        } else if (parts == 2) {
            best_dual = std::max(best_dual, v);
        }
    }
    for (auto [m, v] : restricted) {
        detail << "restricted " << modality_short_name(m) << "=" << format_num("%.3f", v) << " ";
        check.require(std::abs(v - 0.5) <= 0.15,
                      std::string(modality_short_name(m)) + " restricted AUROC " + format_num("%.3f", v) + " outside 0.5 +/- 0.15");
    }
    double triple = mean.at("rgb+ir+pc");
    check.require(triple >= best_single, "triple below a single configuration");
    check.require(triple >= best_dual, "triple below a dual configuration");
    check.require(triple >= 0.90, "triple AUROC " + format_num("%.3f", triple) + " < 0.90");
    if (!check.ok()) return {false, check.failures() + " [" + detail.str() + "]"};
    return {true, detail.str() + "(singles <= 0.80, restricted 0.5 +/- 0.15, triple >= all and >= 0.90)"};
}

// ---------------------------------------------------------------- criterion 8

std::map<std::string, std::string> file_tree(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        auto rel = fs::relative(e.path(), root).generic_string();
        if (rel.rfind("manifests/", 0) == 0) continue;  // wall-clock timings and paths
        std::ifstream in(e.path(), std::ios::binary);
        out[rel] = {std::istreambuf_iterator<char>(in), {}};
    }
    return out;
}

Verdict determinism(const fs::path& work) {
    RunConfig base;
    base.synth.categories = {"det_a", "det_b"};
    base.synth.train_count = 10;
    base.synth.test_normal = 4;
    base.synth.test_abnormal = 8;
    base.synth.rgb_width = 128;
    base.synth.rgb_height = 96;
    base.synth.ir_width = 64;
    base.synth.ir_height = 48;
    base.synth.cloud_points = 512;
    base.image.working_resolution = 112;
    base.image.grid_rows = base.image.grid_cols = 14;

    std::vector<std::map<std::string, std::string>> trees;
    const std::size_t workers[] = {1, 3, 3};
    for (std::size_t run = 0; run < 3; ++run) {
        set_worker_count(workers[run]);
        RunConfig c = base;
        c.dataset = work / ("data" + std::to_string(run));
        c.out = work / ("out" + std::to_string(run));
        cmd_synth(c);
        cmd_extract(c);
        cmd_build_bank(c);
        cmd_score(c);
        cmd_fit_gate(c);
        cmd_evaluate(c);
        auto data = file_tree(c.dataset);
        auto out = file_tree(c.out);
        for (auto& [k, v] : data) out["data/" + k] = std::move(v);
        trees.push_back(std::move(out));
    }
    set_worker_count(0);

    Check check;
    std::map<std::string, int> kinds;
    for (const auto& [path, bytes] : trees[0]) kinds[path.substr(0, path.find('/'))]++;
    for (std::size_t run = 1; run < trees.size(); ++run) {
        check.require(trees[run].size() == trees[0].size(), "file count differs in run " + std::to_string(run));
        for (const auto& [path, bytes] : trees[0]) {
            auto it = trees[run].find(path);
            check.require(it != trees[run].end() && it->second == bytes,
                          path + " differs between workers 1 and " + std::to_string(workers[run]));
        }
    }
    for (const char* required : {"banks", "scores", "gates", "report"})
        check.require(kinds.count(required) > 0, std::string("no ") + required + " written");
    if (!check.ok()) return {false, check.failures()};
    std::ostringstream detail;
    detail << trees[0].size() << " files bitwise identical across workers 1/3/3 (";
    bool first = true;
    for (const auto& [k, n] : kinds) {
        detail << (first ? "" : ", ") << k << " " << n;
        first = false;
    }
    detail << ")";
    return {true, detail.str()};
}

}  // namespace

// Optional arguments select criteria by number; no arguments runs all of them.
int main(int argc, char** argv) {
    spdlog::set_level(spdlog::level::warn);
    auto work = fs::temp_directory_path() / ("msad_acceptance_" + std::to_string(std::random_device{}()));
    fs::create_directories(work);

    struct Criterion {
        int id;
        const char* name;
        double limit_s;
        std::function<Verdict()> run;
    };
    std::vector<Criterion> criteria{
        {1, "scoring oracle equivalence", 30, scoring_oracle},
        {2, "coreset identity and 2-approximation", 10, coreset_properties},
        {3, "metric oracles", 10, metric_oracles},
        {4, "ICP recovery", 60, icp_recovery},
        {5, "FPFH geometry", 30, fpfh_geometry},
        {6, "OCSVM properties", 20, ocsvm_properties},
        {7, "fusion ordering on the default synthetic dataset", 300, [&] { return fusion_ordering(work / "c7"); }},
        {8, "determinism across worker counts", 0, [&] { return determinism(work / "c8"); }},
    };

    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
    int failed = 0, ran = 0;
    for (const auto& c : criteria) {
        if (!selected.empty() && !selected.count(c.id)) continue;
        ++ran;
        auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::string timing = format_num("%.1fs", secs);
        if (c.limit_s > 0) {
            timing += format_num(" (limit %.0fs)", c.limit_s);
            if (secs >= c.limit_s) {
                v.pass = false;
                v.detail += "; runtime over limit";
            }
        }
        failed += !v.pass;
        std::printf("criterion %d: %s - %s [%s] %s\n", c.id, v.pass ? "PASS" : "FAIL", c.name, timing.c_str(),
                    v.detail.c_str());
        std::fflush(stdout);
    }
    std::error_code ec;
    fs::remove_all(work, ec);
    std::printf("%d/%d criteria passed\n", ran - failed, ran);
    return failed ? 1 : 0;
}
