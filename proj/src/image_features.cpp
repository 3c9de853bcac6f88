#include "msad/image_features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace msad {
namespace {

std::uint8_t round_to_byte(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

std::vector<double> luminance_plane(const ImageData& image) {
    std::vector<double> out(image.pixel_count());
    if (image.channels == 1) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = image.pixels[i];
    } else {
        for (std::size_t i = 0; i < out.size(); ++i) {
            const auto* p = &image.pixels[i * 3];
            out[i] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
        }
    }
    return out;
}

}  // namespace

ImageData to_luminance(const ImageData& image) {
    if (image.channels == 1) return image;
    if (image.channels != 3) throw ParameterError("to_luminance: channels must be 1 or 3");
    ImageData out(image.width, image.height, 1);
    auto plane = luminance_plane(image);
    for (std::size_t i = 0; i < plane.size(); ++i) out.pixels[i] = round_to_byte(plane[i]);
    return out;
}

ImageData resize_bilinear(const ImageData& image, int width, int height) {
    if (width < 1 || height < 1) throw ParameterError("resize_bilinear: target must be at least 1x1");
    if (image.width == width && image.height == height) return image;
    ImageData out(width, height, image.channels);
    double sx = static_cast<double>(image.width) / width;
    double sy = static_cast<double>(image.height) / height;

    struct Tap {
        int i0, i1;
        double f;
    };
    auto taps = [](int n_out, int n_in, double scale) {
        std::vector<Tap> t(static_cast<std::size_t>(n_out));
        for (int o = 0; o < n_out; ++o) {
            double s = std::clamp((o + 0.5) * scale - 0.5, 0.0, static_cast<double>(n_in - 1));
            int i0 = static_cast<int>(std::floor(s));
            int i1 = std::min(i0 + 1, n_in - 1);
            t[o] = {i0, i1, s - i0};
        }
        return t;
    };
    auto tx = taps(width, image.width, sx);
    auto ty = taps(height, image.height, sy);
    for (int y = 0; y < height; ++y) {
        const auto& ry = ty[y];
        for (int x = 0; x < width; ++x) {
            const auto& rx = tx[x];
            for (int c = 0; c < image.channels; ++c) {
                double top = image.at(rx.i0, ry.i0, c) * (1.0 - rx.f) + image.at(rx.i1, ry.i0, c) * rx.f;
                double bottom = image.at(rx.i0, ry.i1, c) * (1.0 - rx.f) + image.at(rx.i1, ry.i1, c) * rx.f;
                out.at(x, y, c) = round_to_byte(top * (1.0 - ry.f) + bottom * ry.f);
            }
        }
    }
    return out;
}

PatchFeatureMap extract_patch_features(const ImageData& image, Modality modality, const ImageFeatureOptions& options) {
    if (image.width < 1 || image.height < 1) throw ParameterError("extract_patch_features: empty image");
    if (image.channels != 1 && image.channels != 3)
        throw ParameterError("extract_patch_features: channels must be 1 or 3");
    const int res = options.working_resolution;
    if (res < 1) throw ParameterError("extract_patch_features: working resolution must be positive");
    if (options.grid_rows < 1 || options.grid_cols < 1)
        throw ParameterError("extract_patch_features: grid must be at least 1x1");
    if (options.grid_rows > res || options.grid_cols > res)
        throw ParameterError("extract_patch_features: grid larger than working resolution");

    ImageData work = resize_bilinear(image, res, res);
    auto lum = luminance_plane(work);
    const int ch = work.channels;
    const auto dim = image_feature_dim(ch);
    const auto rows = static_cast<std::uint32_t>(options.grid_rows);
    const auto cols = static_cast<std::uint32_t>(options.grid_cols);
    PatchFeatureMap map(modality, rows, cols, static_cast<std::size_t>(rows) * cols, dim);

    auto L = [&](int x, int y) {
        x = std::clamp(x, 0, res - 1);
        y = std::clamp(y, 0, res - 1);
        return lum[static_cast<std::size_t>(y) * res + x];
    };
    constexpr double kBinWidth = 2.0 * std::numbers::pi / kOrientationBins;

    for (std::uint32_t r = 0; r < rows; ++r) {
        const int y0 = static_cast<int>(r * res / rows);
        const int y1 = static_cast<int>((r + 1) * res / rows);
        for (std::uint32_t c = 0; c < cols; ++c) {
            const int x0 = static_cast<int>(c * res / cols);
            const int x1 = static_cast<int>((c + 1) * res / cols);
            const double n = static_cast<double>((y1 - y0) * (x1 - x0));
            auto feat = map.row(static_cast<std::size_t>(r) * cols + c);

            for (int k = 0; k < ch; ++k) {
                double sum = 0.0;
                for (int y = y0; y < y1; ++y)
                    for (int x = x0; x < x1; ++x) sum += work.at(x, y, k);
                double mean = sum / n;
                double ss = 0.0;
                for (int y = y0; y < y1; ++y)
                    for (int x = x0; x < x1; ++x) {
                        double d = work.at(x, y, k) - mean;
                        ss += d * d;
                    }
                feat[k] = static_cast<float>(mean);
                feat[ch + k] = static_cast<float>(std::sqrt(ss / n));
            }

            double hist[kOrientationBins] = {};
            for (int y = y0; y < y1; ++y) {
                for (int x = x0; x < x1; ++x) {
                    double gx = 0.5 * (L(x + 1, y) - L(x - 1, y));
                    double gy = 0.5 * (L(x, y + 1) - L(x, y - 1));
                    double mag = std::hypot(gx, gy);
                    if (mag == 0.0) continue;
                    double theta = std::atan2(gy, gx);
                    int bin = static_cast<int>(std::floor(theta / kBinWidth + 0.5));
                    bin = ((bin % kOrientationBins) + kOrientationBins) % kOrientationBins;
                    hist[bin] += mag;
                }
            }
            for (int b = 0; b < kOrientationBins; ++b) feat[2 * ch + b] = static_cast<float>(hist[b] / n);
        }
    }
    return map;
}

}  // namespace msad
