#include "msad/image.hpp"

#include "msad/core.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>

namespace msad {
namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::string lower_ext(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

ImageData load_png(const std::filesystem::path& path) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) throw DataError("cannot open image " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("libpng initialisation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DataError("libpng initialisation failed");
    }

    ImageData image;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("corrupt PNG " + path.string());
    }
    png_init_io(png, file.get());
    png_read_info(png, info);

    png_byte color = png_get_color_type(png, info);
    png_byte depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    bool has_trns = png_get_valid(png, info, PNG_INFO_tRNS) != 0;
    if (has_trns) png_set_tRNS_to_alpha(png);
    if ((color & PNG_COLOR_MASK_ALPHA) || has_trns) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    int channels = png_get_channels(png, info);
    image = ImageData(static_cast<int>(png_get_image_width(png, info)),
                      static_cast<int>(png_get_image_height(png, info)), channels);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("unsupported PNG channel layout in " + path.string());
    }
    rows.resize(static_cast<std::size_t>(image.height));
    for (int y = 0; y < image.height; ++y)
        rows[y] = image.pixels.data() + static_cast<std::size_t>(y) * image.width * channels;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return image;
}

void save_png(const ImageData& image, const std::filesystem::path& path) {
    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) throw DataError("cannot write image " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("libpng initialisation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw DataError("libpng initialisation failed");
    }
    std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("PNG encoding failed for " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
                 image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < image.height; ++y)
        rows[y] = const_cast<png_bytep>(image.pixels.data() +
                                        static_cast<std::size_t>(y) * image.width * image.channels);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// Reads the next header token of a netpbm file, skipping whitespace and '#' comments.
long read_pnm_int(std::istream& in, const std::filesystem::path& path) {
    int c = in.get();
    while (in && (std::isspace(c) || c == '#')) {
        if (c == '#')
            while (in && c != '\n') c = in.get();
        c = in.get();
    }
    if (!in || !std::isdigit(c)) throw DataError("malformed PNM header in " + path.string());
    long v = 0;
    while (in && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        c = in.get();
    }
    return v;
}

ImageData load_pnm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open image " + path.string());
    char magic[2] = {0, 0};
    in.read(magic, 2);
    if (magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6'))
        throw DataError("unsupported image format (expected PNG or binary PPM/PGM): " + path.string());
    int channels = magic[1] == '6' ? 3 : 1;
    long w = read_pnm_int(in, path);
    long h = read_pnm_int(in, path);
    long maxval = read_pnm_int(in, path);
    if (w < 1 || h < 1 || maxval < 1 || maxval > 65535) throw DataError("invalid PNM header in " + path.string());
    ImageData image(static_cast<int>(w), static_cast<int>(h), channels);
    std::size_t count = image.pixels.size();
    if (maxval < 256) {
        in.read(reinterpret_cast<char*>(image.pixels.data()), static_cast<std::streamsize>(count));
        if (in.gcount() != static_cast<std::streamsize>(count)) throw DataError("truncated PNM payload in " + path.string());
        if (maxval != 255)
            for (auto& p : image.pixels) p = static_cast<std::uint8_t>((p * 255 + maxval / 2) / maxval);
    } else {
        std::vector<unsigned char> raw(count * 2);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (in.gcount() != static_cast<std::streamsize>(raw.size())) throw DataError("truncated PNM payload in " + path.string());
        for (std::size_t i = 0; i < count; ++i) {
            long v = (raw[2 * i] << 8) | raw[2 * i + 1];
            image.pixels[i] = static_cast<std::uint8_t>((v * 255 + maxval / 2) / maxval);
        }
    }
    return image;
}

void save_pnm(const ImageData& image, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write image " + path.string());
    out << (image.channels == 3 ? "P6" : "P5") << '\n' << image.width << ' ' << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
    if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace

ImageData::ImageData(int w, int h, int c, std::uint8_t fill)
    : width(w), height(h), channels(c), pixels(static_cast<std::size_t>(w) * h * c, fill) {}

ImageData load_image(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw DataError("image not found: " + path.string());
    unsigned char sig[8] = {0};
    {
        std::ifstream in(path, std::ios::binary);
        in.read(reinterpret_cast<char*>(sig), 8);
    }
    if (png_sig_cmp(sig, 0, 8) == 0) return load_png(path);
    return load_pnm(path);
}

ImageData binarize_mask(const ImageData& image) {
    ImageData out(image.width, image.height, 1);
    for (std::size_t i = 0; i < out.pixels.size(); ++i)
        out.pixels[i] = image.pixels[i * image.channels] >= 128 ? 255 : 0;
    return out;
}

ImageData load_mask(const std::filesystem::path& path, std::optional<std::pair<int, int>> reference) {
    ImageData mask = binarize_mask(load_image(path));
    if (reference && (mask.width != reference->first || mask.height != reference->second)) {
        throw DataError("mask size " + std::to_string(mask.width) + "x" + std::to_string(mask.height) +
                        " does not match image size " + std::to_string(reference->first) + "x" +
                        std::to_string(reference->second) + ": " + path.string());
    }
    return mask;
}

void save_image(const ImageData& image, const std::filesystem::path& path) {
    if (image.channels != 1 && image.channels != 3) throw ParameterError("save_image: channels must be 1 or 3");
    if (lower_ext(path) == ".png")
        save_png(image, path);
    else
        save_pnm(image, path);
}

void save_pgm16(int width, int height, std::span<const std::uint16_t> samples, const std::filesystem::path& path) {
    if (samples.size() != static_cast<std::size_t>(width) * height)
        throw ParameterError("save_pgm16: sample count does not match size");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write image " + path.string());
    out << "P5\n" << width << ' ' << height << "\n65535\n";
    std::vector<unsigned char> raw(samples.size() * 2);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        raw[2 * i] = static_cast<unsigned char>(samples[i] >> 8);
        raw[2 * i + 1] = static_cast<unsigned char>(samples[i] & 0xFF);
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

}  // namespace msad
