#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace msad {

/// 8-bit interleaved image, row-major, 1 or 3 channels.
struct ImageData {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<std::uint8_t> pixels;

    ImageData() = default;
    ImageData(int w, int h, int c, std::uint8_t fill = 0);

    std::uint8_t& at(int x, int y, int c = 0) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t at(int x, int y, int c = 0) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

    friend bool operator==(const ImageData&, const ImageData&) = default;
};

/// Decodes PNG (any bit depth; 16-bit is reduced to 8-bit, alpha dropped) or binary PPM/PGM.
ImageData load_image(const std::filesystem::path& path);

/// Loads a single-channel mask binarized at 128 to {0, 255}. When `reference` is given the
/// mask must have the same width and height.
ImageData load_mask(const std::filesystem::path& path,
                    std::optional<std::pair<int, int>> reference = std::nullopt);

/// Binarizes in place: values >= 128 become 255, others 0. Multi-channel input is reduced
/// to its first channel.
ImageData binarize_mask(const ImageData& image);

/// Writes PNG for .png paths, otherwise binary PPM (3 channels) or PGM (1 channel).
void save_image(const ImageData& image, const std::filesystem::path& path);

/// Writes a 16-bit binary PGM (maxval 65535, big-endian samples).
void save_pgm16(int width, int height, std::span<const std::uint16_t> samples,
                const std::filesystem::path& path);

}  // namespace msad
