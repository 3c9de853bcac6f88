#pragma once

#include <filesystem>
#include <span>
#include <vector>

namespace msad {

inline constexpr double kDefaultMapSigma = 4.0;

/// Dense width x height score image from a rows x cols patch-score grid: bilinear
/// upsampling (pixel-centre aligned, edges clamped) followed by a separable Gaussian of
/// standard deviation sigma pixels (kernel radius ceil(4 sigma), clamped borders).
/// sigma = 0 skips the smoothing.
std::vector<double> render_score_map(std::span<const double> patch_scores, int rows, int cols, int width, int height,
                                     double sigma = kDefaultMapSigma);

/// Normalized 1-D Gaussian taps for offsets -radius..radius.
std::vector<double> gaussian_kernel(double sigma);

/// Writes the map as a 16-bit PGM scaled to [min, max] plus `<path>.json` holding min/max.
void export_score_map(std::span<const double> map, int width, int height, const std::filesystem::path& path);

/// "index score" lines, one per point.
void export_point_scores(std::span<const double> scores, const std::filesystem::path& path);

}  // namespace msad
