#pragma once

#include "msad/core.hpp"
#include "msad/image.hpp"
#include "msad/point_cloud.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace msad::synth {

enum class DefectKind { SurfaceBlob, ThermalSpot, GeometricDent, CrossModal };

std::string_view defect_kind_name(DefectKind kind);
DefectKind parse_defect_kind(std::string_view text);

struct DefectSpec {
    DefectKind kind = DefectKind::SurfaceBlob;
    ModalitySubset visibility;
    /// Change per visible modality, in multiples of that modality's noise std
    /// (floored at 2 grey levels for images and 0.02 mm for clouds).
    double magnitude = 5.0;
    /// Radius of the affected region in millimetres.
    double extent = 3.0;

    /// Canonical spec for an exclusive kind (visibility fixed by the kind).
    static DefectSpec exclusive(DefectKind kind, double magnitude = 5.0, double extent = 3.0);
    /// Throws ParameterError when visibility is empty, magnitude <= 0 or extent <= 0.
    void validate() const;
    /// Directory name, e.g. "surface_blob" or "cross_rgb_pc".
    std::string directory_name() const;
};

struct DefectMixEntry {
    DefectSpec spec;
    double weight = 1.0;
};

struct NoiseLevels {
    double rgb = 3.0;     // grey levels
    double ir = 2.0;      // grey levels
    double pc = 0.2;      // millimetres
};

struct SynthConfig {
    std::vector<std::string> categories{"synth_a", "synth_b", "synth_c"};
    int train_count = 60;
    int test_normal = 10;
    int test_abnormal = 30;
    std::vector<DefectMixEntry> defect_mix;  // empty = one third per exclusive kind
    NoiseLevels noise;
    std::uint64_t seed = 7;
    int rgb_width = 320, rgb_height = 240;
    int ir_width = 160, ir_height = 120;
    std::size_t cloud_points = 1024;
    double pose_jitter_deg = 4.0;  // uniform in-plane rotation range (+/-)
    double pose_shift_mm = 1.0;    // uniform translation range (+/-)

    std::vector<DefectMixEntry> effective_mix() const;
    void validate() const;
};

nlohmann::json config_to_json(const SynthConfig& config);
SynthConfig config_from_json(const nlohmann::json& doc);

/// Deterministic parameters of one synthetic category.
struct CategoryParams {
    double half_x = 16.0, half_y = 11.0, half_z = 7.0;  // superellipsoid semi-axes (mm)
    double eps_ns = 1.0, eps_ew = 1.0;                   // superellipsoid shape exponents
    std::array<double, 3> base_color{150, 110, 80};
    std::array<double, 3> stripe_color{40, 30, 20};
    double stripe_period = 4.0;  // mm
    double stripe_angle = 0.3;   // rad
    double thermal_base = 120.0, thermal_slope = 35.0, thermal_bump = 40.0;
    /// Object-frame sample of the upward-facing surface, shared by every sample.
    std::vector<Point3> base_points;

    static CategoryParams derive(std::uint64_t seed, std::size_t category_index, std::size_t cloud_points);

    /// Outline radial function: 1-homogeneous in (x, y), < 1 inside, 1 on the outline.
    double radial(double x, double y) const;
    /// Whether top-view object coordinates (mm) fall inside the object outline.
    bool inside(double x, double y) const { return radial(x, y) < 1.0; }
    /// Height of the upper surface above (x, y), which must be inside().
    double top_height(double x, double y) const;
    /// Outward unit normal of the surface at an on-surface point.
    Point3 surface_normal(const Point3& p) const;
};

struct Pose {
    double angle = 0.0;  // rotation about +z (rad)
    double tx = 0.0, ty = 0.0;

    Point3 to_world(const Point3& p) const;
    /// World top-view coordinates to object coordinates.
    std::pair<double, double> to_object(double x, double y) const;
};

struct SynthObject {
    ImageData rgb;
    ImageData ir;
    PointCloudData cloud;
    Pose pose;
};

struct GroundTruth {
    std::optional<ImageData> rgb_mask;
    std::optional<ImageData> ir_mask;
    std::optional<std::vector<std::uint8_t>> point_labels;
    ModalityLabels labels;
};

/// Random stream; explicit so outputs do not depend on standard-library distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    double uniform();                         // [0, 1)
    double uniform(double lo, double hi);
    double normal();                          // standard normal (Box-Muller)
    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
    std::optional<double> spare_;
};

/// Mixes (seed, stream ids) into an independent stream seed.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

/// Renders one defect-free object: textured top view (RGB), smooth thermal field (IR)
/// and the category's surface sample, all under one random pose, plus sensor noise.
SynthObject generate_object(const SynthConfig& config, const CategoryParams& params, Rng& rng);

/// Perturbs only the modalities in spec.visibility at a random surface location and
/// returns ground truth for exactly those modalities: masks mark changed pixels, point
/// labels mark displaced points.
GroundTruth inject_defect(SynthObject& object, const DefectSpec& spec, const SynthConfig& config,
                          const CategoryParams& params, Rng& rng);

struct ManifestSample {
    std::string category;
    Split split = Split::Train;
    std::string defect{kGoodDefect};
    std::string id;
    ModalityLabels labels;
    ModalitySubset visibility;
    ObjectLabel object_label = ObjectLabel::Normal;
};

struct Manifest {
    SynthConfig config;
    std::vector<ManifestSample> samples;
};

nlohmann::json manifest_to_json(const Manifest& manifest);
Manifest manifest_from_json(const nlohmann::json& doc);

/// Writes the dataset under root in the <category>/<Modality>/{train,test,GT} layout plus
/// root/manifest.json, and returns the manifest.
Manifest generate_dataset(const SynthConfig& config, const std::filesystem::path& root);

}  // namespace msad::synth
