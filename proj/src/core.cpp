#include "msad/core.hpp"

#include <algorithm>
#include <bit>
#include <cctype>

namespace msad {

std::string_view modality_name(Modality m) {
    switch (m) {
    case Modality::Rgb: return "RGB";
    case Modality::Infrared: return "Infrared";
    case Modality::Pointcloud: return "Pointcloud";
    }
    return "?";
}

std::string_view modality_short_name(Modality m) {
    switch (m) {
    case Modality::Rgb: return "rgb";
    case Modality::Infrared: return "ir";
    case Modality::Pointcloud: return "pc";
    }
    return "?";
}

Modality parse_modality(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "rgb") return Modality::Rgb;
    if (lower == "ir" || lower == "infrared") return Modality::Infrared;
    if (lower == "pc" || lower == "pointcloud" || lower == "point_cloud") return Modality::Pointcloud;
    throw ParameterError("unknown modality '" + std::string(text) + "'");
}

std::vector<Modality> parse_modality_list(std::string_view text) {
    std::vector<Modality> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto comma = text.find(',', pos);
        if (comma == std::string_view::npos) comma = text.size();
        auto token = text.substr(pos, comma - pos);
        while (!token.empty() && std::isspace(static_cast<unsigned char>(token.front()))) token.remove_prefix(1);
        while (!token.empty() && std::isspace(static_cast<unsigned char>(token.back()))) token.remove_suffix(1);
        if (!token.empty()) out.push_back(parse_modality(token));
        pos = comma + 1;
    }
    if (out.empty()) throw ParameterError("empty modality list");
    return ModalitySubset(out).members();
}

ModalitySubset::ModalitySubset(const std::vector<Modality>& members) {
    for (auto m : members) mask_ |= static_cast<std::uint8_t>(1U << static_cast<int>(m));
}

std::vector<Modality> ModalitySubset::members() const {
    std::vector<Modality> out;
    for (auto m : kAllModalities)
        if (contains(m)) out.push_back(m);
    return out;
}

std::size_t ModalitySubset::size() const {
    return static_cast<std::size_t>(std::popcount(static_cast<unsigned>(mask_)));
}

std::string ModalitySubset::label() const {
    std::string out;
    for (auto m : members()) {
        if (!out.empty()) out += '+';
        out += modality_short_name(m);
    }
    return out;
}

std::vector<ModalitySubset> ModalitySubset::nonempty_subsets() const {
    std::vector<ModalitySubset> out;
    for (std::size_t want = 1; want <= size(); ++want) {
        for (unsigned mask = 1; mask < 8; ++mask) {
            if ((mask & mask_) != mask || static_cast<std::size_t>(std::popcount(mask)) != want) continue;
            ModalitySubset s;
            s.mask_ = static_cast<std::uint8_t>(mask);
            out.push_back(s);
        }
    }
    return out;
}

ObjectLabel derive_object_label(const ModalityLabels& labels) {
    bool any_present = false;
    bool any_positive = false;
    for (const auto& l : labels.labels) {
        if (!l) continue;
        any_present = true;
        any_positive = any_positive || *l;
    }
    if (!any_present) throw DataError("derive_object_label: no modality present");
    return any_positive ? ObjectLabel::Anomalous : ObjectLabel::Normal;
}

std::string SampleRef::key() const { return defect + "/" + id; }

}  // namespace msad
