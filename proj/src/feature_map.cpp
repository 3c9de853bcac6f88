#include "msad/feature_map.hpp"

#include "msad/binary_io.hpp"

#include <cmath>
#include <fstream>

namespace msad {

namespace binio {

void write_floats(std::ostream& out, const float* data, std::size_t count) {
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(float)));
    } else {
        for (std::size_t i = 0; i < count; ++i) put(out, data[i]);
    }
}

void read_floats(std::istream& in, float* data, std::size_t count, const std::string& what) {
    auto bytes = static_cast<std::streamsize>(count * sizeof(float));
    in.read(reinterpret_cast<char*>(data), bytes);
    if (in.gcount() != bytes) throw DataError("truncated payload in " + what);
    if constexpr (std::endian::native == std::endian::big) {
        for (std::size_t i = 0; i < count; ++i) {
            std::uint32_t u;
            std::memcpy(&u, data + i, 4);
            u = __builtin_bswap32(u);
            std::memcpy(data + i, &u, 4);
        }
    }
}

}  // namespace binio

PatchFeatureMap::PatchFeatureMap(Modality m, std::uint32_t rows, std::uint32_t cols, std::size_t count,
                                 std::uint32_t d)
    : modality(m), grid_rows(rows), grid_cols(cols), dim(d), values(count * d, 0.0f) {}

void PatchFeatureMap::validate() const {
    if (dim == 0) throw DataError("feature map has zero dimension");
    if (values.size() % dim != 0) throw DataError("feature map size is not a multiple of its dimension");
    if ((grid_rows == 0) != (grid_cols == 0)) throw DataError("feature map grid must be fully set or (0,0)");
    if (gridded() && count() != static_cast<std::size_t>(grid_rows) * grid_cols)
        throw DataError("feature map grid " + std::to_string(grid_rows) + "x" + std::to_string(grid_cols) +
                        " inconsistent with " + std::to_string(count()) + " rows");
    for (float v : values)
        if (!std::isfinite(v)) throw DataError("feature map contains non-finite values");
}

void write_feature_matrix(const PatchFeatureMap& map, const std::filesystem::path& path) {
    map.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write feature file " + path.string());
    out.write("MSFT", 4);
    binio::put<std::uint32_t>(out, kFeatureFileVersion);
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(map.modality));
    binio::put<std::uint32_t>(out, map.grid_rows);
    binio::put<std::uint32_t>(out, map.grid_cols);
    binio::put<std::uint64_t>(out, map.count());
    binio::put<std::uint32_t>(out, map.dim);
    binio::write_floats(out, map.values.data(), map.values.size());
    if (!out) throw DataError("write failed for " + path.string());
}

PatchFeatureMap read_feature_matrix(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open feature file " + path.string());
    const std::string what = path.string();
    char magic[4] = {0, 0, 0, 0};
    in.read(magic, 4);
    if (in.gcount() != 4 || std::string(magic, 4) != "MSFT") throw DataError("not a MSFT file: " + what);
    auto version = binio::get<std::uint32_t>(in, what);
    if (version != kFeatureFileVersion) throw DataError("unsupported MSFT version " + std::to_string(version));
    auto modality = binio::get<std::uint32_t>(in, what);
    if (modality > 2) throw DataError("invalid modality id in " + what);
    auto rows = binio::get<std::uint32_t>(in, what);
    auto cols = binio::get<std::uint32_t>(in, what);
    auto count = binio::get<std::uint64_t>(in, what);
    auto dim = binio::get<std::uint32_t>(in, what);
    if (dim == 0) throw DataError("zero feature dimension in " + what);
    if ((rows == 0) != (cols == 0)) throw DataError("grid must be fully set or (0,0) in " + what);
    if (rows != 0 && static_cast<std::uint64_t>(rows) * cols != count)
        throw DataError("grid " + std::to_string(rows) + "x" + std::to_string(cols) + " inconsistent with " +
                        std::to_string(count) + " rows in " + what);

    // Reject impossible sizes before allocating.
    auto here = in.tellg();
    in.seekg(0, std::ios::end);
    auto remaining = static_cast<std::uint64_t>(in.tellg() - here);
    in.seekg(here);
    if (remaining < count * dim * sizeof(float)) throw DataError("truncated payload in " + what);

    PatchFeatureMap map(static_cast<Modality>(modality), rows, cols, count, dim);
    binio::read_floats(in, map.values.data(), map.values.size(), what);
    for (float v : map.values)
        if (!std::isfinite(v)) throw DataError("non-finite (NaN/Inf) feature entries in " + what);
    return map;
}

}  // namespace msad
