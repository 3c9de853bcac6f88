#include "msad/score_map.hpp"

#include "msad/core.hpp"
#include "msad/image.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

namespace msad {

std::vector<double> gaussian_kernel(double sigma) {
    int radius = static_cast<int>(std::ceil(4.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
        k[static_cast<std::size_t>(i + radius)] = v;
        sum += v;
    }
    for (auto& v : k) v /= sum;
    return k;
}

std::vector<double> render_score_map(std::span<const double> patch_scores, int rows, int cols, int width, int height,
                                     double sigma) {
    if (rows < 1 || cols < 1)
        throw ParameterError("render_score_map: a patch grid is required (point clouds use per-point scores)");
    if (patch_scores.size() != static_cast<std::size_t>(rows) * cols)
        throw ParameterError("render_score_map: score count does not match the grid");
    if (width < 1 || height < 1) throw ParameterError("render_score_map: output size must be positive");
    if (sigma < 0.0) throw ParameterError("render_score_map: sigma must be non-negative");

    auto taps = [](int n_out, int n_in) {
        std::vector<std::pair<int, double>> t(static_cast<std::size_t>(n_out));
        double scale = static_cast<double>(n_in) / n_out;
        for (int o = 0; o < n_out; ++o) {
            double s = std::clamp((o + 0.5) * scale - 0.5, 0.0, static_cast<double>(n_in - 1));
            int i0 = static_cast<int>(std::floor(s));
            t[o] = {i0, s - i0};
        }
        return t;
    };
    auto tx = taps(width, cols);
    auto ty = taps(height, rows);
    auto grid = [&](int r, int c) { return patch_scores[static_cast<std::size_t>(r) * cols + c]; };

    std::vector<double> map(static_cast<std::size_t>(width) * height);
    for (int y = 0; y < height; ++y) {
        auto [r0, fy] = ty[y];
        int r1 = std::min(r0 + 1, rows - 1);
        for (int x = 0; x < width; ++x) {
            auto [c0, fx] = tx[x];
            int c1 = std::min(c0 + 1, cols - 1);
            double top = grid(r0, c0) * (1.0 - fx) + grid(r0, c1) * fx;
            double bottom = grid(r1, c0) * (1.0 - fx) + grid(r1, c1) * fx;
            map[static_cast<std::size_t>(y) * width + x] = top * (1.0 - fy) + bottom * fy;
        }
    }
    if (sigma == 0.0) return map;

    auto kernel = gaussian_kernel(sigma);
    const int radius = static_cast<int>(kernel.size() / 2);
    std::vector<double> tmp(map.size());
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[static_cast<std::size_t>(k + radius)] *
                       map[static_cast<std::size_t>(y) * width + std::clamp(x + k, 0, width - 1)];
            tmp[static_cast<std::size_t>(y) * width + x] = acc;
        }
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[static_cast<std::size_t>(k + radius)] *
                       tmp[static_cast<std::size_t>(std::clamp(y + k, 0, height - 1)) * width + x];
            map[static_cast<std::size_t>(y) * width + x] = acc;
        }
    return map;
}

void export_score_map(std::span<const double> map, int width, int height, const std::filesystem::path& path) {
    if (map.empty()) throw ParameterError("export_score_map: empty map");
    auto [lo_it, hi_it] = std::minmax_element(map.begin(), map.end());
    double lo = *lo_it, hi = *hi_it;
    std::vector<std::uint16_t> samples(map.size());
    double range = hi - lo;
    for (std::size_t i = 0; i < map.size(); ++i)
        samples[i] = range > 0 ? static_cast<std::uint16_t>(std::lround((map[i] - lo) / range * 65535.0)) : 0;
    save_pgm16(width, height, samples, path);
    nlohmann::json side{{"min", lo}, {"max", hi}, {"width", width}, {"height", height}};
    std::ofstream out(path.string() + ".json");
    out << side.dump(2) << '\n';
}

void export_point_scores(std::span<const double> scores, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write point scores " + path.string());
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (std::size_t i = 0; i < scores.size(); ++i) out << i << ' ' << scores[i] << '\n';
}

}  // namespace msad
