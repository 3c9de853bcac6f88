#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace msad {

/// Parallel score / binary label arrays. Labels are 0 (normal) or 1 (anomalous).
struct LabeledScores {
    std::span<const double> scores;
    std::span<const std::uint8_t> labels;
};

/// Area under the ROC curve from a descending sweep with tie groups integrated as
/// trapezoids, i.e. the Mann-Whitney statistic with half credit for ties. Needs both
/// classes. auroc(s, l) + auroc(s, 1 - l) == 1 holds exactly.
double auroc(LabeledScores data);

/// Maximum F1 over thresholds at every unique score (prediction: score >= threshold).
double f1_max(LabeledScores data);

/// Non-interpolated average precision: sum over descending tie groups of
/// (recall_k - recall_{k-1}) * precision_k.
double aupr(LabeledScores data);

}  // namespace msad
