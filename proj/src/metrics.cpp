#include "msad/metrics.hpp"

#include "msad/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace msad {
namespace {

struct Group {
    std::uint64_t pos = 0;
    std::uint64_t neg = 0;
};

// Tie groups in descending score order.
std::vector<Group> sweep(LabeledScores data, const char* who) {
    if (data.scores.size() != data.labels.size())
        throw ParameterError(std::string(who) + ": scores and labels differ in length");
    if (data.scores.size() < 2) throw ParameterError(std::string(who) + ": need at least two samples");
    for (double s : data.scores)
        if (!std::isfinite(s)) throw DataError(std::string(who) + ": non-finite score");
    std::vector<std::size_t> order(data.scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return data.scores[a] > data.scores[b]; });
    std::vector<Group> groups;
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (k == 0 || data.scores[order[k]] != data.scores[order[k - 1]]) groups.emplace_back();
        if (data.labels[order[k]])
            ++groups.back().pos;
        else
            ++groups.back().neg;
    }
    return groups;
}

}  // namespace

double auroc(LabeledScores data) {
    auto groups = sweep(data, "auroc");
    std::uint64_t p = 0, n = 0;
    for (const auto& g : groups) {
        p += g.pos;
        n += g.neg;
    }
    if (p == 0 || n == 0) throw DataError("auroc: both classes must be present");
    // Twice the trapezoidal area in units of 1/(P N); exact in integers.
    std::uint64_t twice_area = 0, pos_above = 0;
    for (const auto& g : groups) {
        twice_area += g.neg * (2 * pos_above + g.pos);
        pos_above += g.pos;
    }
    const std::uint64_t full = 2 * p * n;
    const double denom = static_cast<double>(full);
    // Evaluating the smaller side directly keeps the label-swap identity exact.
    if (2 * twice_area <= full) return static_cast<double>(twice_area) / denom;
    return 1.0 - static_cast<double>(full - twice_area) / denom;
}

double f1_max(LabeledScores data) {
    auto groups = sweep(data, "f1_max");
    std::uint64_t p = 0;
    for (const auto& g : groups) p += g.pos;
    if (p == 0) throw DataError("f1_max: no positive labels");
    double best = 0.0;
    std::uint64_t tp = 0, fp = 0;
    for (const auto& g : groups) {
        tp += g.pos;
        fp += g.neg;
        double f1 = 2.0 * static_cast<double>(tp) / static_cast<double>(tp + fp + p);
        best = std::max(best, f1);
    }
    return best;
}

double aupr(LabeledScores data) {
    auto groups = sweep(data, "aupr");
    std::uint64_t p = 0;
    for (const auto& g : groups) p += g.pos;
    if (p == 0) throw DataError("aupr: no positive labels");
    double area = 0.0;
    std::uint64_t tp = 0, fp = 0;
    for (const auto& g : groups) {
        tp += g.pos;
        fp += g.neg;
        if (g.pos == 0) continue;
        double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        area += static_cast<double>(g.pos) / static_cast<double>(p) * precision;
    }
    return area;
}

}  // namespace msad
