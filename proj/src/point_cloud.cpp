#include "msad/point_cloud.hpp"

#include "msad/core.hpp"

#include <spdlog/spdlog.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>

namespace msad {
namespace {

std::string context(const std::filesystem::path& path, std::size_t line) {
    return path.string() + ":" + std::to_string(line);
}

std::vector<std::string> split_ws(const std::string& line) {
    std::istringstream ss(line);
    std::vector<std::string> tokens;
    std::string t;
    while (ss >> t) tokens.push_back(t);
    return tokens;
}

double parse_double(const std::string& token, const std::filesystem::path& path, std::size_t line) {
    double v = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) throw DataError(context(path, line) + ": malformed number '" + token + "'");
    if (!std::isfinite(v)) throw DataError(context(path, line) + ": non-finite coordinate");
    return v;
}

PointCloudData parse_xyz(std::istream& in, const std::filesystem::path& path) {
    PointCloudData cloud;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto tokens = split_ws(line);
        if (tokens.empty()) continue;
        if (tokens.size() != 3)
            throw DataError(context(path, lineno) + ": expected 3 coordinates, found " + std::to_string(tokens.size()));
        cloud.points.emplace_back(parse_double(tokens[0], path, lineno), parse_double(tokens[1], path, lineno),
                                  parse_double(tokens[2], path, lineno));
    }
    return cloud;
}

PointCloudData parse_ply(std::istream& in, const std::filesystem::path& path) {
    std::string line;
    std::size_t lineno = 1;  // "ply" already consumed
    bool ascii = false;
    bool in_vertex = false;
    bool seen_vertex = false;
    std::size_t vertex_count = 0;
    std::size_t lines_before_vertices = 0;  // rows of elements declared ahead of "vertex"
    std::vector<std::string> vertex_props;
    while (true) {
        if (!std::getline(in, line)) throw DataError(path.string() + ": PLY header not terminated");
        ++lineno;
        auto tokens = split_ws(line);
        if (tokens.empty()) continue;
        if (tokens[0] == "end_header") break;
        if (tokens[0] == "format") {
            if (tokens.size() < 2 || tokens[1] != "ascii")
                throw DataError(context(path, lineno) + ": only ASCII PLY is supported");
            ascii = true;
        } else if (tokens[0] == "element") {
            if (tokens.size() != 3) throw DataError(context(path, lineno) + ": malformed element line");
            std::size_t count = std::stoul(tokens[2]);
            in_vertex = tokens[1] == "vertex";
            if (in_vertex) {
                vertex_count = count;
                seen_vertex = true;
            } else if (!seen_vertex) {
                lines_before_vertices += count;
            }
        } else if (tokens[0] == "property" && in_vertex) {
            if (tokens.size() >= 2 && tokens[1] == "list")
                throw DataError(context(path, lineno) + ": list property in vertex element");
            if (tokens.size() != 3) throw DataError(context(path, lineno) + ": malformed property line");
            vertex_props.push_back(tokens[2]);
        }
    }
    if (!ascii) throw DataError(path.string() + ": PLY format line missing");
    if (!seen_vertex) throw DataError(path.string() + ": PLY has no vertex element");
    int ix = -1, iy = -1, iz = -1;
    for (std::size_t i = 0; i < vertex_props.size(); ++i) {
        if (vertex_props[i] == "x") ix = static_cast<int>(i);
        if (vertex_props[i] == "y") iy = static_cast<int>(i);
        if (vertex_props[i] == "z") iz = static_cast<int>(i);
    }
    if (ix < 0 || iy < 0 || iz < 0) throw DataError(path.string() + ": PLY vertex element lacks x/y/z");

    for (std::size_t skipped = 0; skipped < lines_before_vertices; ++skipped) {
        if (!std::getline(in, line)) throw DataError(path.string() + ": truncated PLY body");
        ++lineno;
    }
    PointCloudData cloud;
    cloud.points.reserve(vertex_count);
    while (cloud.points.size() < vertex_count) {
        if (!std::getline(in, line)) throw DataError(path.string() + ": truncated PLY vertex list");
        ++lineno;
        auto tokens = split_ws(line);
        if (tokens.empty()) continue;
        if (tokens.size() != vertex_props.size())
            throw DataError(context(path, lineno) + ": expected " + std::to_string(vertex_props.size()) + " values");
        cloud.points.emplace_back(parse_double(tokens[ix], path, lineno), parse_double(tokens[iy], path, lineno),
                                  parse_double(tokens[iz], path, lineno));
    }
    return cloud;
}

}  // namespace

PointCloudData load_point_cloud(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open point cloud " + path.string());
    std::string first;
    auto start = in.tellg();
    std::getline(in, first);
    auto tokens = split_ws(first);
    PointCloudData cloud;
    if (!tokens.empty() && tokens[0] == "ply") {
        cloud = parse_ply(in, path);
    } else {
        in.clear();
        in.seekg(start);
        cloud = parse_xyz(in, path);
    }
    if (cloud.points.empty()) throw DataError(path.string() + ": point cloud has zero points");
    return cloud;
}

void save_point_cloud_xyz(const PointCloudData& cloud, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write point cloud " + path.string());
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& p : cloud.points) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
    if (!out) throw DataError("write failed for " + path.string());
}

void save_point_cloud_ply(const PointCloudData& cloud, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write point cloud " + path.string());
    out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
        << "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& p : cloud.points) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
    if (!out) throw DataError("write failed for " + path.string());
}

std::vector<std::uint8_t> load_point_labels(const std::filesystem::path& path, std::size_t n_points) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open point labels " + path.string());
    std::vector<std::uint8_t> labels(n_points, 0);
    std::string line;
    std::size_t lineno = 0;
    std::size_t duplicates = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto tokens = split_ws(line);
        if (tokens.empty()) continue;
        if (tokens.size() != 1) throw DataError(context(path, lineno) + ": expected one index per line");
        long long idx = 0;
        const auto& t = tokens[0];
        auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), idx);
        if (ec != std::errc() || ptr != t.data() + t.size())
            throw DataError(context(path, lineno) + ": malformed index '" + t + "'");
        if (idx < 0) throw DataError(context(path, lineno) + ": negative point index");
        if (static_cast<std::size_t>(idx) >= n_points)
            throw DataError(context(path, lineno) + ": point index " + t + " out of range (n=" +
                            std::to_string(n_points) + ")");
        if (labels[idx]) ++duplicates;
        labels[idx] = 1;
    }
    if (duplicates) spdlog::warn("{}: {} duplicate point indices ignored", path.string(), duplicates);
    return labels;
}

void save_point_labels(const std::vector<std::uint8_t>& labels, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write point labels " + path.string());
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i]) out << i << '\n';
}

Point3 centroid(const std::vector<Point3>& points) {
    Point3 c = Point3::Zero();
    if (points.empty()) return c;
    for (const auto& p : points) c += p;
    return c / static_cast<double>(points.size());
}

double bounding_diameter(const std::vector<Point3>& points) {
    if (points.empty()) return 0.0;
    Point3 lo = points.front(), hi = points.front();
    for (const auto& p : points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return (hi - lo).norm();
}

}  // namespace msad
