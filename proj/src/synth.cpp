#include "msad/synth.hpp"

#include "msad/parallel.hpp"

#include <Eigen/Geometry>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

namespace msad::synth {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;
// Field of view shared by both cameras, millimetres (4:3). It lies inside the top face of
// every category's object for every pose, so images show surface only.
constexpr double kFovWidth = 16.0;
constexpr double kFovHeight = 12.0;
constexpr std::uint8_t kRgbBackground = 25;
constexpr double kMinScanNormalZ = 0.35;
constexpr std::uint8_t kIrBackground = 15;

std::uint64_t splitmix(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double signed_pow(double base, double e) { return std::copysign(std::pow(std::abs(base), e), base); }

std::uint8_t quantize(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

std::string format_id(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%03zu", i);
    return buf;
}

// World top-view coordinates of a pixel centre.
std::pair<double, double> pixel_to_world(double px, double py, int width, int height) {
    return {(px / width - 0.5) * kFovWidth, (0.5 - py / height) * kFovHeight};
}

}  // namespace

std::string_view defect_kind_name(DefectKind kind) {
    switch (kind) {
    case DefectKind::SurfaceBlob: return "surface_blob";
    case DefectKind::ThermalSpot: return "thermal_spot";
    case DefectKind::GeometricDent: return "geometric_dent";
    case DefectKind::CrossModal: return "cross_modal";
    }
    return "?";
}

DefectKind parse_defect_kind(std::string_view text) {
    for (auto k : {DefectKind::SurfaceBlob, DefectKind::ThermalSpot, DefectKind::GeometricDent, DefectKind::CrossModal})
        if (defect_kind_name(k) == text) return k;
    throw ParameterError("unknown defect kind '" + std::string(text) + "'");
}

DefectSpec DefectSpec::exclusive(DefectKind kind, double magnitude, double extent) {
    DefectSpec spec;
    spec.kind = kind;
    spec.magnitude = magnitude;
    spec.extent = extent;
    switch (kind) {
    case DefectKind::SurfaceBlob: spec.visibility = ModalitySubset({Modality::Rgb}); break;
    case DefectKind::ThermalSpot: spec.visibility = ModalitySubset({Modality::Infrared}); break;
    case DefectKind::GeometricDent: spec.visibility = ModalitySubset({Modality::Pointcloud}); break;
    case DefectKind::CrossModal: throw ParameterError("cross_modal defects need an explicit visibility set");
    }
    return spec;
}

void DefectSpec::validate() const {
    if (visibility.empty()) throw ParameterError("defect visibility set must not be empty");
    if (!(magnitude > 0.0)) throw ParameterError("defect magnitude must be positive");
    if (!(extent > 0.0)) throw ParameterError("defect extent must be positive");
    auto only = [&](Modality m) { return visibility == ModalitySubset({m}); };
    if ((kind == DefectKind::SurfaceBlob && !only(Modality::Rgb)) ||
        (kind == DefectKind::ThermalSpot && !only(Modality::Infrared)) ||
        (kind == DefectKind::GeometricDent && !only(Modality::Pointcloud)))
        throw ParameterError(std::string(defect_kind_name(kind)) + " must be visible in exactly its own modality");
}

std::string DefectSpec::directory_name() const {
    if (kind != DefectKind::CrossModal) return std::string(defect_kind_name(kind));
    std::string name = "cross";
    for (auto m : visibility.members()) name += "_" + std::string(modality_short_name(m));
    return name;
}

std::vector<DefectMixEntry> SynthConfig::effective_mix() const {
    if (!defect_mix.empty()) return defect_mix;
    std::vector<DefectMixEntry> mix;
    for (auto k : {DefectKind::SurfaceBlob, DefectKind::ThermalSpot, DefectKind::GeometricDent})
        mix.push_back({DefectSpec::exclusive(k), 1.0 / 3.0});
    return mix;
}

void SynthConfig::validate() const {
    if (categories.empty()) throw ParameterError("synth: at least one category is required");
    for (const auto& c : categories)
        if (c.empty() || c.find('/') != std::string::npos) throw ParameterError("synth: invalid category name '" + c + "'");
    if (train_count < 1) throw ParameterError("synth: train count must be at least 1");
    if (test_normal < 0 || test_abnormal < 0) throw ParameterError("synth: test counts must be non-negative");
    if (test_normal + test_abnormal < 1) throw ParameterError("synth: at least one test sample is required");
    if (noise.rgb < 0 || noise.ir < 0 || noise.pc < 0) throw ParameterError("synth: noise levels must be non-negative");
    if (rgb_width < 8 || rgb_height < 8 || ir_width < 8 || ir_height < 8)
        throw ParameterError("synth: image resolution must be at least 8x8");
    if (cloud_points < 16) throw ParameterError("synth: cloud point count must be at least 16");
    if (pose_jitter_deg < 0 || pose_shift_mm < 0) throw ParameterError("synth: pose ranges must be non-negative");
    if (test_abnormal > 0) {
        double total = 0.0;
        for (const auto& e : effective_mix()) {
            e.spec.validate();
            if (!(e.weight > 0.0)) throw ParameterError("synth: defect mix weights must be positive");
            total += e.weight;
        }
        if (!(total > 0.0)) throw ParameterError("synth: empty defect mix");
    }
}

json config_to_json(const SynthConfig& c) {
    json mix = json::array();
    for (const auto& e : c.effective_mix()) {
        json vis = json::array();
        for (auto m : e.spec.visibility.members()) vis.push_back(std::string(modality_name(m)));
        mix.push_back({{"kind", std::string(defect_kind_name(e.spec.kind))},
                       {"visibility", vis},
                       {"magnitude", e.spec.magnitude},
                       {"extent", e.spec.extent},
                       {"weight", e.weight}});
    }
    return {{"categories", c.categories},
            {"train_count", c.train_count},
            {"test_normal", c.test_normal},
            {"test_abnormal", c.test_abnormal},
            {"defect_mix", mix},
            {"noise", {{"rgb", c.noise.rgb}, {"ir", c.noise.ir}, {"pc", c.noise.pc}}},
            {"seed", c.seed},
            {"rgb_resolution", {c.rgb_width, c.rgb_height}},
            {"ir_resolution", {c.ir_width, c.ir_height}},
            {"cloud_points", c.cloud_points},
            {"pose_jitter_deg", c.pose_jitter_deg},
            {"pose_shift_mm", c.pose_shift_mm}};
}

SynthConfig config_from_json(const json& doc) {
    SynthConfig c;
    try {
        c.categories = doc.value("categories", c.categories);
        c.train_count = doc.value("train_count", c.train_count);
        c.test_normal = doc.value("test_normal", c.test_normal);
        c.test_abnormal = doc.value("test_abnormal", c.test_abnormal);
        c.seed = doc.value("seed", c.seed);
        c.cloud_points = doc.value("cloud_points", c.cloud_points);
        c.pose_jitter_deg = doc.value("pose_jitter_deg", c.pose_jitter_deg);
        c.pose_shift_mm = doc.value("pose_shift_mm", c.pose_shift_mm);
        if (doc.contains("noise")) {
            const auto& n = doc.at("noise");
            c.noise.rgb = n.value("rgb", c.noise.rgb);
            c.noise.ir = n.value("ir", c.noise.ir);
            c.noise.pc = n.value("pc", c.noise.pc);
        }
        if (doc.contains("rgb_resolution")) {
            c.rgb_width = doc.at("rgb_resolution").at(0).get<int>();
            c.rgb_height = doc.at("rgb_resolution").at(1).get<int>();
        }
        if (doc.contains("ir_resolution")) {
            c.ir_width = doc.at("ir_resolution").at(0).get<int>();
            c.ir_height = doc.at("ir_resolution").at(1).get<int>();
        }
        if (doc.contains("defect_mix")) {
            for (const auto& e : doc.at("defect_mix")) {
                DefectMixEntry entry;
                entry.spec.kind = parse_defect_kind(e.at("kind").get<std::string>());
                std::vector<Modality> vis;
                if (e.contains("visibility"))
                    for (const auto& m : e.at("visibility")) vis.push_back(parse_modality(m.get<std::string>()));
                if (vis.empty() && entry.spec.kind != DefectKind::CrossModal)
                    entry.spec = DefectSpec::exclusive(entry.spec.kind);
                else
                    entry.spec.visibility = ModalitySubset(vis);
                entry.spec.magnitude = e.value("magnitude", entry.spec.magnitude);
                entry.spec.extent = e.value("extent", entry.spec.extent);
                entry.weight = e.value("weight", 1.0);
                c.defect_mix.push_back(entry);
            }
        }
    } catch (const json::exception& e) {
        throw ParameterError(std::string("malformed synth config: ") + e.what());
    }
    c.validate();
    return c;
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
    if (spare_) {
        double v = *spare_;
        spare_.reset();
        return v;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * kPi * u2);
    return r * std::cos(2.0 * kPi * u2);
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    std::uint64_t state = seed;
    std::uint64_t h = splitmix(state);
    for (auto v : {a, b, c}) {
        state = h ^ (v * 0xD6E8FEB86659FD93ULL);
        h = splitmix(state);
    }
    return h;
}

// Superellipsoid (a, b, c, e1 = eps_ns, e2 = eps_ew):
//   (|x/a|^(2/e2) + |y/b|^(2/e2))^(e2/e1) + |z/c|^(2/e1) = 1
double CategoryParams::radial(double x, double y) const {
    double g = std::pow(std::abs(x / half_x), 2.0 / eps_ew) + std::pow(std::abs(y / half_y), 2.0 / eps_ew);
    return std::pow(g, eps_ew / 2.0);
}

double CategoryParams::top_height(double x, double y) const {
    double g = std::pow(std::abs(x / half_x), 2.0 / eps_ew) + std::pow(std::abs(y / half_y), 2.0 / eps_ew);
    double rest = 1.0 - std::pow(g, eps_ew / eps_ns);
    return rest <= 0.0 ? 0.0 : half_z * std::pow(rest, eps_ns / 2.0);
}

Point3 CategoryParams::surface_normal(const Point3& p) const {
    const double e1 = eps_ns, e2 = eps_ew;
    double ax = std::abs(p.x() / half_x), ay = std::abs(p.y() / half_y);
    double g = std::pow(ax, 2.0 / e2) + std::pow(ay, 2.0 / e2);
    Point3 n = Point3::Zero();
    if (g > 0.0) {
        double outer = (e2 / e1) * std::pow(g, e2 / e1 - 1.0) * (2.0 / e2);
        n.x() = outer * std::pow(ax, 2.0 / e2 - 1.0) * std::copysign(1.0, p.x()) / half_x;
        n.y() = outer * std::pow(ay, 2.0 / e2 - 1.0) * std::copysign(1.0, p.y()) / half_y;
    }
    double az = std::abs(p.z() / half_z);
    if (az > 0.0) n.z() = (2.0 / e1) * std::pow(az, 2.0 / e1 - 1.0) * std::copysign(1.0, p.z()) / half_z;
    double len = n.norm();
    if (!(len > 0.0) || !std::isfinite(len)) return Point3(0, 0, p.z() >= 0 ? 1.0 : -1.0);
    return n / len;
}

CategoryParams CategoryParams::derive(std::uint64_t seed, std::size_t category_index, std::size_t cloud_points) {
    Rng rng(stream_seed(seed, 0xCA7E, category_index));
    CategoryParams p;
    p.half_x = rng.uniform(16.0, 20.0);
    p.half_y = rng.uniform(12.0, 15.0);
    p.half_z = rng.uniform(5.0, 8.0);
    p.eps_ns = rng.uniform(0.6, 1.0);
    p.eps_ew = rng.uniform(0.4, 0.8);
    for (auto& c : p.base_color) c = rng.uniform(80.0, 170.0);
    for (auto& c : p.stripe_color) c = rng.uniform(20.0, 45.0);
    p.stripe_period = rng.uniform(3.0, 6.0);
    p.stripe_angle = rng.uniform(0.0, kPi);
    p.thermal_base = rng.uniform(90.0, 130.0);
    p.thermal_slope = rng.uniform(15.0, 35.0);
    p.thermal_bump = rng.uniform(20.0, 40.0);

    // Area-uniform sample: triangulate the parametric surface, pick triangles by area.
    constexpr int kRings = 120, kSectors = 240;
    auto surf = [&](double eta, double omega) {
        double ce = signed_pow(std::cos(eta), p.eps_ns), se = signed_pow(std::sin(eta), p.eps_ns);
        return Point3(p.half_x * ce * signed_pow(std::cos(omega), p.eps_ew),
                      p.half_y * ce * signed_pow(std::sin(omega), p.eps_ew), p.half_z * se);
    };
    std::vector<Point3> grid;
    grid.reserve((kRings + 1) * kSectors);
    for (int r = 0; r <= kRings; ++r)
        for (int s = 0; s < kSectors; ++s)
            grid.push_back(surf(-kPi / 2 + kPi * r / kRings, -kPi + 2 * kPi * s / kSectors));
    std::vector<std::array<std::size_t, 3>> tris;
    std::vector<double> cumulative;
    double total = 0.0;
    // Only the part an overhead scanner sees: facets whose outward normal points upward.
    // Closed-surface sides would make viewpoint-oriented normals flip under noise.
    auto add = [&](std::size_t a, std::size_t b, std::size_t c) {
        Point3 cross = (grid[b] - grid[a]).cross(grid[c] - grid[a]);
        double area = 0.5 * cross.norm();
        if (!(area > 0.0)) return;
        Point3 mid = (grid[a] + grid[b] + grid[c]) / 3.0;
        if (mid.z() <= 0.0 || p.surface_normal(mid).z() < kMinScanNormalZ) return;
        total += area;
        tris.push_back({a, b, c});
        cumulative.push_back(total);
    };
    for (int r = 0; r < kRings; ++r)
        for (int s = 0; s < kSectors; ++s) {
            std::size_t i00 = r * kSectors + s, i01 = r * kSectors + (s + 1) % kSectors;
            std::size_t i10 = i00 + kSectors, i11 = i01 + kSectors;
            add(i00, i01, i11);
            add(i00, i11, i10);
        }
    p.base_points.reserve(cloud_points);
    for (std::size_t i = 0; i < cloud_points; ++i) {
        double pick = rng.uniform() * total;
        auto t = std::min<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin(),
                                       tris.size() - 1);
        double u = rng.uniform(), v = rng.uniform();
        if (u + v > 1.0) {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        const auto& tri = tris[t];
        p.base_points.push_back(grid[tri[0]] + u * (grid[tri[1]] - grid[tri[0]]) + v * (grid[tri[2]] - grid[tri[0]]));
    }
    return p;
}

Point3 Pose::to_world(const Point3& p) const {
    double c = std::cos(angle), s = std::sin(angle);
    return {c * p.x() - s * p.y() + tx, s * p.x() + c * p.y() + ty, p.z()};
}

std::pair<double, double> Pose::to_object(double x, double y) const {
    double c = std::cos(angle), s = std::sin(angle);
    double dx = x - tx, dy = y - ty;
    return {c * dx + s * dy, -s * dx + c * dy};
}

namespace {

// Top-view render; pixels whose centre lies near the outline are 2x2 supersampled.
// `shade` returns false outside the object.
template <typename Shade>
ImageData render(int width, int height, int channels, std::uint8_t background, const CategoryParams& params,
                 const Pose& pose, Shade shade) {
    ImageData img(width, height, channels);
    // The radial function is 1-homogeneous, so its gradient is at most ~sqrt(2) / min axis.
    const double margin = 2.0 * std::max(kFovWidth / width, kFovHeight / height) / std::min(params.half_x, params.half_y);
    std::array<double, 3> acc{}, value{};
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            auto [wx, wy] = pixel_to_world(x + 0.5, y + 0.5, width, height);
            auto [ox, oy] = pose.to_object(wx, wy);
            if (std::abs(params.radial(ox, oy) - 1.0) > margin) {
                if (!shade(ox, oy, value)) value.fill(background);
                for (int c = 0; c < channels; ++c) img.at(x, y, c) = quantize(value[c]);
                continue;
            }
            acc.fill(0.0);
            for (int sy = 0; sy < 2; ++sy)
                for (int sx = 0; sx < 2; ++sx) {
                    auto [sxw, syw] = pixel_to_world(x + 0.25 + 0.5 * sx, y + 0.25 + 0.5 * sy, width, height);
                    auto [sox, soy] = pose.to_object(sxw, syw);
                    if (!shade(sox, soy, value)) value.fill(background);
                    for (int c = 0; c < channels; ++c) acc[c] += value[c];
                }
            for (int c = 0; c < channels; ++c) img.at(x, y, c) = quantize(0.25 * acc[c]);
        }
    return img;
}

void add_noise(ImageData& img, double sigma, Rng& rng) {
    if (sigma <= 0.0) return;
    for (auto& v : img.pixels) v = quantize(v + sigma * rng.normal());
}

}  // namespace

SynthObject generate_object(const SynthConfig& config, const CategoryParams& params, Rng& rng) {
    SynthObject obj;
    const double jitter = config.pose_jitter_deg * kPi / 180.0;
    obj.pose.angle = rng.uniform(-jitter, jitter);
    obj.pose.tx = rng.uniform(-config.pose_shift_mm, config.pose_shift_mm);
    obj.pose.ty = rng.uniform(-config.pose_shift_mm, config.pose_shift_mm);

    const double sc = std::cos(params.stripe_angle), ss = std::sin(params.stripe_angle);
    obj.rgb = render(config.rgb_width, config.rgb_height, 3, kRgbBackground, params, obj.pose,
                     [&](double x, double y, std::array<double, 3>& out) {
                         double r = params.radial(x, y);
                         if (r >= 1.0) return false;
                         double shading = 0.7 + 0.3 * std::sqrt(1.0 - r * r);
                         double stripe = std::sin(2.0 * kPi * (x * sc + y * ss) / params.stripe_period);
                         for (int c = 0; c < 3; ++c)
                             out[c] = shading * (params.base_color[c] + params.stripe_color[c] * stripe);
                         return true;
                     });
    obj.ir = render(config.ir_width, config.ir_height, 1, kIrBackground, params, obj.pose,
                    [&](double x, double y, std::array<double, 3>& out) {
                        if (!params.inside(x, y)) return false;
                        double g = std::pow(std::abs(x / params.half_x), 2.0) + std::pow(std::abs(y / params.half_y), 2.0);
                        out[0] = params.thermal_base + params.thermal_slope * x / params.half_x +
                                 params.thermal_bump * std::max(0.0, 1.0 - g);
                        return true;
                    });
    add_noise(obj.rgb, config.noise.rgb, rng);
    add_noise(obj.ir, config.noise.ir, rng);

    obj.cloud.points.reserve(params.base_points.size());
    for (const auto& p : params.base_points) {
        Point3 w = obj.pose.to_world(p);
        if (config.noise.pc > 0.0)
            for (int k = 0; k < 3; ++k) w[k] += config.noise.pc * rng.normal();
        obj.cloud.points.push_back(w);
    }
    return obj;
}

namespace {

// Perturbs pixels whose centre lies within `extent` of the defect centre (object frame).
template <typename Change>
ImageData perturb_image(ImageData& img, const Pose& pose, double cx, double cy, double extent, Change change) {
    ImageData mask(img.width, img.height, 1, 0);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            auto [wx, wy] = pixel_to_world(x + 0.5, y + 0.5, img.width, img.height);
            auto [ox, oy] = pose.to_object(wx, wy);
            if (std::hypot(ox - cx, oy - cy) >= extent) continue;
            bool changed = false;
            for (int c = 0; c < img.channels; ++c) {
                std::uint8_t before = img.at(x, y, c);
                img.at(x, y, c) = change(before, c);
                changed |= img.at(x, y, c) != before;
            }
            if (changed) mask.at(x, y) = 255;
        }
    return mask;
}

bool any_set(const std::vector<std::uint8_t>& v) {
    return std::any_of(v.begin(), v.end(), [](std::uint8_t x) { return x != 0; });
}

}  // namespace

GroundTruth inject_defect(SynthObject& object, const DefectSpec& spec, const SynthConfig& config,
                          const CategoryParams& params, Rng& rng) {
    spec.validate();

    // Centre on the upper surface such that the whole disc stays in view for any pose.
    const double jitter = config.pose_jitter_deg * kPi / 180.0;
    const double sway = std::hypot(kFovWidth, kFovHeight) / 2.0 * std::sin(jitter);
    const double ux = kFovWidth / 2.0 - config.pose_shift_mm - sway - spec.extent;
    const double uy = kFovHeight / 2.0 - config.pose_shift_mm - sway - spec.extent;
    if (ux <= 0.0 || uy <= 0.0)
        throw ParameterError("defect extent " + std::to_string(spec.extent) + " mm exceeds the object bounds");
    const double cx = rng.uniform(-ux, ux), cy = rng.uniform(-uy, uy);
    if (!params.inside(cx, cy)) throw ParameterError("defect centre falls outside the object");

    GroundTruth gt;
    for (auto m : kAllModalities) gt.labels[m] = false;

    if (spec.visibility.contains(Modality::Rgb)) {
        const double delta = spec.magnitude * std::max(config.noise.rgb, 2.0);
        std::array<double, 3> dir{};
        for (auto& d : dir) d = rng.uniform() < 0.5 ? -1.0 : 1.0;
        gt.rgb_mask = perturb_image(object.rgb, object.pose, cx, cy, spec.extent, [&](std::uint8_t v, int c) {
            double moved = v + dir[c] * delta;
            if (moved < 0.0 || moved > 255.0) moved = v - dir[c] * delta;  // reflect away from saturation
            return quantize(moved);
        });
        gt.labels[Modality::Rgb] = any_set(gt.rgb_mask->pixels);
    }
    if (spec.visibility.contains(Modality::Infrared)) {
        const double delta = spec.magnitude * std::max(config.noise.ir, 2.0);
        gt.ir_mask = perturb_image(object.ir, object.pose, cx, cy, spec.extent, [&](std::uint8_t v, int) {
            double moved = v + delta;
            if (moved > 255.0) moved = v - delta;
            return quantize(moved);
        });
        gt.labels[Modality::Infrared] = any_set(gt.ir_mask->pixels);
    }
    if (spec.visibility.contains(Modality::Pointcloud)) {
        const double depth = spec.magnitude * std::max(config.noise.pc, 0.02);
        const Point3 centre(cx, cy, params.top_height(cx, cy));
        const Point3 normal = params.surface_normal(centre);
        const double c = std::cos(object.pose.angle), s = std::sin(object.pose.angle);
        const Point3 world_normal(c * normal.x() - s * normal.y(), s * normal.x() + c * normal.y(), normal.z());
        std::vector<std::uint8_t> labels(object.cloud.size(), 0);
        for (std::size_t i = 0; i < object.cloud.size(); ++i) {
            Point3& w = object.cloud.points[i];
            auto [ox, oy] = object.pose.to_object(w.x(), w.y());
            if (w.z() <= 0.0) continue;
            double d = (Point3(ox, oy, w.z()) - centre).norm();
            if (d >= spec.extent) continue;
            double t = 1.0 - (d / spec.extent) * (d / spec.extent);
            Point3 moved = w - depth * t * t * world_normal;
            if (moved != w) {
                w = moved;
                labels[i] = 1;
            }
        }
        gt.labels[Modality::Pointcloud] = any_set(labels);
        gt.point_labels = std::move(labels);
    }
    if (derive_object_label(gt.labels) != ObjectLabel::Anomalous)
        throw Error("defect at (" + std::to_string(cx) + ", " + std::to_string(cy) + ") changed no modality");
    return gt;
}

json manifest_to_json(const Manifest& manifest) {
    json samples = json::array();
    for (const auto& s : manifest.samples) {
        json labels = json::object();
        for (auto m : kAllModalities)
            if (s.labels[m]) labels[std::string(modality_name(m))] = *s.labels[m] ? 1 : 0;
        json vis = json::array();
        for (auto m : s.visibility.members()) vis.push_back(std::string(modality_name(m)));
        samples.push_back({{"category", s.category},
                           {"split", s.split == Split::Train ? "train" : "test"},
                           {"defect", s.defect},
                           {"id", s.id},
                           {"labels", labels},
                           {"visibility", vis},
                           {"object_label", s.object_label == ObjectLabel::Anomalous ? 1 : 0}});
    }
    return {{"config", config_to_json(manifest.config)}, {"samples", samples}};
}

Manifest manifest_from_json(const json& doc) {
    Manifest out;
    try {
        out.config = config_from_json(doc.at("config"));
        for (const auto& s : doc.at("samples")) {
            ManifestSample ms;
            ms.category = s.at("category").get<std::string>();
            ms.split = s.at("split").get<std::string>() == "train" ? Split::Train : Split::Test;
            ms.defect = s.at("defect").get<std::string>();
            ms.id = s.at("id").get<std::string>();
            for (const auto& [k, v] : s.at("labels").items()) ms.labels[parse_modality(k)] = v.get<int>() != 0;
            std::vector<Modality> vis;
            for (const auto& m : s.at("visibility")) vis.push_back(parse_modality(m.get<std::string>()));
            ms.visibility = ModalitySubset(vis);
            ms.object_label = s.at("object_label").get<int>() ? ObjectLabel::Anomalous : ObjectLabel::Normal;
            out.samples.push_back(std::move(ms));
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed manifest: ") + e.what());
    }
    return out;
}

namespace {

// Largest-remainder allocation of `total` over weights; ties go to the earlier entry.
std::vector<std::size_t> allocate(const std::vector<DefectMixEntry>& mix, std::size_t total) {
    double sum = 0.0;
    for (const auto& e : mix) sum += e.weight;
    std::vector<std::size_t> counts(mix.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t used = 0;
    for (std::size_t i = 0; i < mix.size(); ++i) {
        double exact = mix[i].weight / sum * static_cast<double>(total);
        counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        used += counts[i];
        remainders.push_back({exact - static_cast<double>(counts[i]), i});
    }
    std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; used < total; ++r, ++used) ++counts[remainders[r % remainders.size()].second];
    return counts;
}

struct Job {
    std::size_t category = 0;
    Split split = Split::Train;
    std::string defect{kGoodDefect};
    std::string id;
    std::optional<DefectSpec> spec;
    std::uint64_t seed = 0;
};

void ensure_dir(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw Error("cannot create directory " + p.string() + ": " + ec.message());
}

}  // namespace

Manifest generate_dataset(const SynthConfig& config, const fs::path& root) {
    config.validate();
    const auto mix = config.effective_mix();
    std::vector<CategoryParams> params;
    for (std::size_t c = 0; c < config.categories.size(); ++c)
        params.push_back(CategoryParams::derive(config.seed, c, config.cloud_points));

    std::vector<Job> jobs;
    for (std::size_t c = 0; c < config.categories.size(); ++c) {
        for (int i = 0; i < config.train_count; ++i)
            jobs.push_back({c, Split::Train, std::string(kGoodDefect), format_id(i), std::nullopt,
                            stream_seed(config.seed, c, 0, i)});
        for (int i = 0; i < config.test_normal; ++i)
            jobs.push_back({c, Split::Test, std::string(kGoodDefect), format_id(i), std::nullopt,
                            stream_seed(config.seed, c, 1, i)});
        auto counts = config.test_abnormal > 0 ? allocate(mix, config.test_abnormal) : std::vector<std::size_t>{};
        std::size_t k = 0;
        for (std::size_t e = 0; e < counts.size(); ++e)
            for (std::size_t i = 0; i < counts[e]; ++i, ++k)
                jobs.push_back({c, Split::Test, mix[e].spec.directory_name(), format_id(i), mix[e].spec,
                                stream_seed(config.seed, c, 2, k)});
    }

    for (const auto& name : config.categories)
        for (auto m : kAllModalities) {
            auto base = root / name / std::string(modality_name(m));
            ensure_dir(base / "train");
            ensure_dir(base / "test");
        }
    // Directories are created up front so workers only write files.
    for (const auto& job : jobs) {
        if (job.split == Split::Train) continue;
        for (auto m : kAllModalities) {
            auto base = root / config.categories[job.category] / std::string(modality_name(m));
            ensure_dir(base / "test" / job.defect);
            if (job.spec && job.spec->visibility.contains(m)) ensure_dir(base / "GT" / job.defect);
        }
    }

    std::vector<ManifestSample> samples(jobs.size());
    parallel_for(jobs.size(), [&](std::size_t j) {
        const Job& job = jobs[j];
        const auto& cp = params[job.category];
        Rng rng(job.seed);
        SynthObject obj = generate_object(config, cp, rng);
        std::optional<GroundTruth> gt;
        if (job.spec) gt = inject_defect(obj, *job.spec, config, cp, rng);

        const fs::path cat = root / config.categories[job.category];
        auto data_dir = [&](Modality m) {
            auto d = cat / std::string(modality_name(m));
            return job.split == Split::Train ? d / "train" : d / "test" / job.defect;
        };
        auto gt_dir = [&](Modality m) { return cat / std::string(modality_name(m)) / "GT" / job.defect; };
        save_image(obj.rgb, data_dir(Modality::Rgb) / (job.id + ".png"));
        save_image(obj.ir, data_dir(Modality::Infrared) / (job.id + ".png"));
        save_point_cloud_xyz(obj.cloud, data_dir(Modality::Pointcloud) / (job.id + ".xyz"));

        ManifestSample& ms = samples[j];
        ms.category = config.categories[job.category];
        ms.split = job.split;
        ms.defect = job.defect;
        ms.id = job.id;
        for (auto m : kAllModalities) ms.labels[m] = false;
        if (gt) {
            ms.labels = gt->labels;
            ms.visibility = job.spec->visibility;
            if (gt->rgb_mask) {
                save_image(*gt->rgb_mask, gt_dir(Modality::Rgb) / (job.id + ".png"));
            }
            if (gt->ir_mask) {
                save_image(*gt->ir_mask, gt_dir(Modality::Infrared) / (job.id + ".png"));
            }
            if (gt->point_labels) {
                save_point_labels(*gt->point_labels, gt_dir(Modality::Pointcloud) / (job.id + ".txt"));
            }
        }
        ms.object_label = derive_object_label(ms.labels);
    });

    Manifest manifest{config, std::move(samples)};
    std::ofstream out(root / "manifest.json");
    if (!out) throw Error("cannot write " + (root / "manifest.json").string());
    out << manifest_to_json(manifest).dump(2) << '\n';
    spdlog::info("synth: wrote {} samples in {} categories to {}", manifest.samples.size(), config.categories.size(),
                 root.string());
    return manifest;
}

}  // namespace msad::synth
