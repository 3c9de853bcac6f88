#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace msad {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed, missing or inconsistent input data (files, feature maps, banks).
class DataError : public Error {
public:
    using Error::Error;
};

/// Parameter outside its documented range.
class ParameterError : public Error {
public:
    using Error::Error;
};

enum class Modality : std::uint8_t { Rgb = 0, Infrared = 1, Pointcloud = 2 };

inline constexpr std::array<Modality, 3> kAllModalities{Modality::Rgb, Modality::Infrared,
                                                        Modality::Pointcloud};

/// Serialization name: "RGB", "Infrared" or "Pointcloud" (also the dataset directory name).
std::string_view modality_name(Modality m);

/// Accepts serialization names and the short CLI aliases "rgb", "ir", "pc".
Modality parse_modality(std::string_view text);

/// Parses a comma separated list such as "rgb,ir,pc"; result is in canonical order, deduplicated.
std::vector<Modality> parse_modality_list(std::string_view text);

/// Short alias used in file names and reports: "rgb", "ir", "pc".
std::string_view modality_short_name(Modality m);

inline bool is_image_modality(Modality m) { return m != Modality::Pointcloud; }

/// A subset of modalities in canonical (rgb, infrared, pointcloud) order.
class ModalitySubset {
public:
    ModalitySubset() = default;
    explicit ModalitySubset(const std::vector<Modality>& members);

    bool contains(Modality m) const { return (mask_ >> static_cast<int>(m)) & 1U; }
    std::vector<Modality> members() const;
    std::size_t size() const;
    bool empty() const { return mask_ == 0; }
    std::uint8_t mask() const { return mask_; }
    /// "rgb+ir+pc" style label.
    std::string label() const;

    /// All non-empty subsets of this one, singles first then pairs then the full set.
    std::vector<ModalitySubset> nonempty_subsets() const;

    friend bool operator==(const ModalitySubset&, const ModalitySubset&) = default;

private:
    std::uint8_t mask_ = 0;
};

/// Per-modality binary labels; std::nullopt marks an absent modality.
struct ModalityLabels {
    std::array<std::optional<bool>, 3> labels{};

    std::optional<bool>& operator[](Modality m) { return labels[static_cast<int>(m)]; }
    const std::optional<bool>& operator[](Modality m) const { return labels[static_cast<int>(m)]; }
};

enum class ObjectLabel : std::uint8_t { Normal = 0, Anomalous = 1 };

/// Object is anomalous iff any present modality label is positive.
/// Throws DataError when no modality is present.
ObjectLabel derive_object_label(const ModalityLabels& labels);

enum class Split : std::uint8_t { Train, Test };

inline constexpr std::string_view kGoodDefect = "good";

struct SampleRef {
    std::string category;
    Split split = Split::Train;
    std::string defect{kGoodDefect};
    std::string id;
    std::array<std::optional<std::filesystem::path>, 3> paths{};

    const std::optional<std::filesystem::path>& path(Modality m) const {
        return paths[static_cast<int>(m)];
    }
    bool has(Modality m) const { return path(m).has_value(); }
    /// Key that identifies the sample within its category and split, e.g. "crack/003".
    std::string key() const;
};

}  // namespace msad
