#pragma once

#include "msad/core.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace msad {

/// Feature vectors of one sample: a rows x cols patch grid (image modalities) or an
/// unordered set with rows = cols = 0 (one vector per cloud point). Row-major float storage.
struct PatchFeatureMap {
    Modality modality = Modality::Rgb;
    std::uint32_t grid_rows = 0;
    std::uint32_t grid_cols = 0;
    std::uint32_t dim = 0;
    std::vector<float> values;

    PatchFeatureMap() = default;
    PatchFeatureMap(Modality m, std::uint32_t rows, std::uint32_t cols, std::size_t count, std::uint32_t d);

    std::size_t count() const { return dim ? values.size() / dim : 0; }
    bool gridded() const { return grid_rows != 0 || grid_cols != 0; }
    std::span<const float> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
    std::span<float> row(std::size_t i) { return {values.data() + i * dim, dim}; }

    /// Throws DataError unless the shape is consistent and every value finite.
    void validate() const;

    friend bool operator==(const PatchFeatureMap&, const PatchFeatureMap&) = default;
};

inline constexpr std::uint32_t kFeatureFileVersion = 1;

/// MSFT layout, little-endian: "MSFT", u32 version, u32 modality, u32 grid rows,
/// u32 grid cols, u64 row count, u32 dim, then row count * dim float32 values.
void write_feature_matrix(const PatchFeatureMap& map, const std::filesystem::path& path);
PatchFeatureMap read_feature_matrix(const std::filesystem::path& path);

}  // namespace msad
