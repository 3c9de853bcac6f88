#include "msad/fusion.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <numeric>
#include <set>

namespace msad {

std::string_view fusion_rule_name(FusionRule r) {
    switch (r) {
    case FusionRule::Max: return "max";
    case FusionRule::Mean: return "mean";
    case FusionRule::Single: return "single";
    }
    return "?";
}

FusionRule parse_fusion_rule(std::string_view text) {
    if (text == "max") return FusionRule::Max;
    if (text == "mean") return FusionRule::Mean;
    if (text == "single") return FusionRule::Single;
    throw ParameterError("unknown fusion rule '" + std::string(text) + "'");
}

double rule_fuse(std::span<const double> v, FusionRule rule) {
    if (v.empty()) throw ParameterError("rule_fuse: empty score vector");
    switch (rule) {
    case FusionRule::Max: return *std::max_element(v.begin(), v.end());
    case FusionRule::Mean: return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    case FusionRule::Single:
        if (v.size() != 1) throw ParameterError("rule_fuse: 'single' needs exactly one score");
        return v.front();
    }
    return 0.0;
}

AssembledScores assemble_score_vectors(const std::map<Modality, ScoreTable>& tables, ModalitySubset subset) {
    if (subset.empty()) throw ParameterError("assemble_score_vectors: empty modality subset");
    auto members = subset.members();
    std::vector<const ScoreTable*> used;
    for (auto m : members) {
        auto it = tables.find(m);
        if (it == tables.end())
            throw DataError("assemble_score_vectors: no scores for modality " + std::string(modality_name(m)));
        used.push_back(&it->second);
    }
    std::set<std::string> all_keys;
    for (const auto* t : used)
        for (const auto& [k, v] : *t) all_keys.insert(k);

    AssembledScores out;
    for (const auto& key : all_keys) {
        std::vector<double> v;
        v.reserve(used.size());
        for (const auto* t : used) {
            auto it = t->find(key);
            if (it == t->end()) break;
            v.push_back(it->second);
        }
        if (v.size() != used.size()) {
            out.dropped.push_back(key);
            continue;
        }
        out.keys.push_back(key);
        out.vectors.push_back(std::move(v));
    }
    if (out.keys.empty())
        throw DataError("assemble_score_vectors: no sample is scored in every modality of " + subset.label());
    if (!out.dropped.empty())
        spdlog::warn("{}: dropped {} sample(s) missing a modality score (first: {})", subset.label(),
                     out.dropped.size(), out.dropped.front());
    return out;
}

}  // namespace msad
