#pragma once

#include "msad/feature_map.hpp"
#include "msad/image.hpp"

namespace msad {

/// Rec.601 luma (0.299 R + 0.587 G + 0.114 B) rounded half up; 1-channel input is returned as is.
ImageData to_luminance(const ImageData& image);

/// Bilinear resampling with pixel-centre alignment and edge clamping. Output samples are
/// rounded half up, so a 2x2 {0,255} checkerboard becomes a single 128.
ImageData resize_bilinear(const ImageData& image, int width, int height);

struct ImageFeatureOptions {
    int working_resolution = 224;
    int grid_rows = 28;
    int grid_cols = 28;
};

inline constexpr int kOrientationBins = 8;

/// Feature dimension for an image with `channels` channels: mean and std per channel plus
/// the orientation histogram.
constexpr std::uint32_t image_feature_dim(int channels) {
    return static_cast<std::uint32_t>(2 * channels + kOrientationBins);
}

/// Resizes to working_resolution^2 and describes each grid cell by per-channel mean and
/// standard deviation followed by an 8-bin gradient orientation histogram. Gradients are
/// central differences on luminance; bin k is centred on k*45 degrees (bin 0 = +x) and
/// accumulates gradient magnitude divided by the cell's pixel count.
PatchFeatureMap extract_patch_features(const ImageData& image, Modality modality,
                                       const ImageFeatureOptions& options = {});

}  // namespace msad
