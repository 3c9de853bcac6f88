#include "msad/memory_bank.hpp"

#include "msad/binary_io.hpp"
#include "msad/parallel.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace msad {
namespace {

constexpr std::uint32_t kBankVersion = 1;
constexpr std::size_t kBlock = 2048;

// Four interleaved partial sums (dimension k goes to lane k % 4), combined as
// (s0 + s1) + (s2 + s3). Fixed order, so results are reproducible and vectorizable.
struct Lanes {
    double s[4] = {0.0, 0.0, 0.0, 0.0};

    void add(const float* a, const float* b, std::uint32_t begin, std::uint32_t end) {
        std::uint32_t k = begin;
        for (; k + 4 <= end; k += 4)
            for (int l = 0; l < 4; ++l) {
                double d = static_cast<double>(a[k + l]) - static_cast<double>(b[k + l]);
                s[l] += d * d;
            }
        for (; k < end; ++k) {
            double d = static_cast<double>(a[k]) - static_cast<double>(b[k]);
            s[k % 4] += d * d;
        }
    }
    double total() const { return (s[0] + s[1]) + (s[2] + s[3]); }
};

inline double distance_sq(const float* a, const float* b, std::uint32_t dim) {
    Lanes lanes;
    lanes.add(a, b, 0, dim);
    return lanes.total();
}

// Same sum as distance_sq, abandoned once a partial total exceeds `bound`; completed
// sums are bitwise identical to distance_sq.
inline double bounded_distance_sq(const float* a, const float* b, std::uint32_t dim, double bound) {
    Lanes lanes;
    for (std::uint32_t k = 0; k < dim; k += 16) {
        lanes.add(a, b, k, std::min(dim, k + 16));
        if (lanes.total() > bound) return lanes.total();
    }
    return lanes.total();
}

template <typename Skip>
NearestResult nearest_impl(const FeatureMatrixView& bank, std::span<const float> query, Skip skip) {
    const std::size_t m = bank.rows();
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_idx = m;
    const float* q = query.data();
    for (std::size_t j = 0; j < m; ++j) {
        if (skip(j)) continue;
        double s = bounded_distance_sq(q, bank.values.data() + j * bank.dim, bank.dim, best);
        if (s < best) {
            best = s;
            best_idx = j;
        }
    }
    if (best_idx == m) throw DataError("nearest_neighbor: empty bank");
    return {best_idx, std::sqrt(best)};
}

void check_features(const FeatureMatrixView& f) {
    for (float v : f.values)
        if (std::isnan(v)) throw DataError("coreset_select: NaN feature values");
}

}  // namespace

double squared_distance(std::span<const float> a, std::span<const float> b) {
    return distance_sq(a.data(), b.data(), static_cast<std::uint32_t>(a.size()));
}

std::size_t coreset_start_index(std::uint64_t seed, std::size_t n) {
    // splitmix64 finalizer: portable, unlike std::uniform_int_distribution.
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return static_cast<std::size_t>(z % n);
}

std::size_t coreset_size(double ratio, std::size_t n) {
    auto k = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n) - 1e-9));
    return std::clamp<std::size_t>(k, 1, n);
}

std::vector<std::size_t> greedy_k_center(const FeatureMatrixView& features, std::size_t k, std::size_t start) {
    const std::size_t n = features.rows();
    if (n == 0) throw DataError("greedy_k_center: no features");
    if (start >= n) throw ParameterError("greedy_k_center: start index out of range");
    k = std::min(k, n);
    std::vector<std::size_t> selected;
    selected.reserve(k);
    std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());  // squared
    std::vector<char> taken(n, 0);

    const std::size_t blocks = (n + kBlock - 1) / kBlock;
    std::vector<std::pair<double, std::size_t>> block_best(blocks);
    std::size_t pick = start;
    while (true) {
        selected.push_back(pick);
        taken[pick] = 1;
        if (selected.size() == k) break;
        auto center = features.row(pick);
        parallel_for(blocks, [&](std::size_t b) {
            std::size_t begin = b * kBlock, end = std::min(n, begin + kBlock);
            double best = -1.0;
            std::size_t best_idx = n;
            for (std::size_t i = begin; i < end; ++i) {
                if (taken[i]) continue;
                double d = distance_sq(features.values.data() + i * features.dim, center.data(), features.dim);
                if (d < min_dist[i]) min_dist[i] = d;
                if (min_dist[i] > best) {
                    best = min_dist[i];
                    best_idx = i;
                }
            }
            block_best[b] = {best, best_idx};
        });
        double best = -1.0;
        std::size_t best_idx = n;
        for (const auto& [d, i] : block_best)
            if (i < n && d > best) {  // blocks are in index order, so strict > keeps the lower index
                best = d;
                best_idx = i;
            }
        pick = best_idx;
    }
    return selected;
}

std::vector<std::size_t> coreset_select(const FeatureMatrixView& features, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0) || ratio > 1.0) throw ParameterError("coreset_select: ratio must lie in (0, 1]");
    const std::size_t n = features.rows();
    if (n == 0) throw DataError("coreset_select: no features");
    check_features(features);
    return greedy_k_center(features, coreset_size(ratio, n), coreset_start_index(seed, n));
}

double coverage_radius(const FeatureMatrixView& features, std::span<const std::size_t> selected) {
    double radius = 0.0;
    for (std::size_t i = 0; i < features.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (auto s : selected) best = std::min(best, squared_distance(features.row(i), features.row(s)));
        radius = std::max(radius, std::sqrt(best));
    }
    return radius;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw ParameterError("quantile: empty input");
    std::sort(values.begin(), values.end());
    double pos = q * static_cast<double>(values.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    auto hi = std::min(lo + 1, values.size() - 1);
    double frac = pos - static_cast<double>(lo);
    return values[lo] + (values[hi] - values[lo]) * frac;
}

RobustScaler RobustScaler::fit(std::span<const double> scores) {
    RobustScaler s;
    if (scores.empty()) {
        s.degenerate = true;
        return s;
    }
    std::vector<double> v(scores.begin(), scores.end());
    s.median = quantile(v, 0.5);
    s.iqr = quantile(v, 0.75) - quantile(v, 0.25);
    s.degenerate = !(s.iqr > 0.0);
    return s;
}

NearestResult nearest_neighbor(const FeatureMatrixView& bank, std::span<const float> query) {
    if (bank.rows() == 0) throw DataError("nearest_neighbor: empty bank");
    if (query.size() != bank.dim) throw DataError("nearest_neighbor: dimension mismatch");
    return nearest_impl(bank, query, [](std::size_t) { return false; });
}

ScoreResult score_sample(const MemoryBank& bank, const PatchFeatureMap& features) {
    if (bank.size() == 0) throw DataError("score_sample: empty bank");
    if (features.dim != bank.dim)
        throw DataError("score_sample: feature dimension " + std::to_string(features.dim) +
                        " does not match bank dimension " + std::to_string(bank.dim));
    if (features.count() == 0) throw DataError("score_sample: no feature vectors");
    const auto view = bank.view();
    const std::size_t n = features.count();
    std::vector<NearestResult> nn(n);
    parallel_for(n, [&](std::size_t i) {
        nn[i] = nearest_impl(view, features.row(i), [](std::size_t) { return false; });
    });
    ScoreResult r;
    r.patch_scores.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        r.patch_scores[i] = nn[i].distance;
        if (i == 0 || nn[i].distance > r.object_score) {
            r.object_score = nn[i].distance;
            r.argmax_patch = i;
            r.nearest_bank_index = nn[i].index;
        }
    }
    r.normalized_score = bank.scaler.normalize(r.object_score);
    return r;
}

std::vector<double> compute_training_scores(const ProvenancedBank& bank, std::span<const PatchFeatureMap> training) {
    if (training.size() < 2)
        throw DataError("compute_training_scores: need at least two training samples (self-exclusion would empty the bank)");
    if (bank.source.size() != bank.vectors.rows()) throw ParameterError("compute_training_scores: provenance size mismatch");
    std::vector<double> scores(training.size(), 0.0);
    for (std::size_t s = 0; s < training.size(); ++s) {
        const auto& map = training[s];
        if (map.dim != bank.vectors.dim) throw DataError("compute_training_scores: dimension mismatch");
        const auto self = static_cast<std::uint32_t>(s);
        if (std::none_of(bank.source.begin(), bank.source.end(), [&](std::uint32_t src) { return src != self; }))
            throw DataError("compute_training_scores: training sample " + std::to_string(s) +
                            " contributed every bank vector; self-exclusion leaves the bank empty");
        std::vector<double> patch(map.count());
        parallel_for(map.count(), [&](std::size_t i) {
            patch[i] = nearest_impl(bank.vectors, map.row(i), [&](std::size_t j) { return bank.source[j] == self; })
                           .distance;
        });
        scores[s] = *std::max_element(patch.begin(), patch.end());
    }
    return scores;
}

BankBuild build_bank(std::span<const PatchFeatureMap> training, const BankConfig& config) {
    if (training.empty()) throw DataError("build_bank: no training samples");
    const auto dim = training.front().dim;
    const auto modality = training.front().modality;
    std::size_t total = 0;
    for (std::size_t s = 0; s < training.size(); ++s) {
        if (training[s].dim != dim)
            throw DataError("build_bank: dimension mismatch (sample " + std::to_string(s) + " has " +
                            std::to_string(training[s].dim) + ", expected " + std::to_string(dim) + ")");
        total += training[s].count();
    }
    std::vector<float> all;
    std::vector<std::uint32_t> source;
    all.reserve(total * dim);
    source.reserve(total);
    for (std::size_t s = 0; s < training.size(); ++s) {
        all.insert(all.end(), training[s].values.begin(), training[s].values.end());
        source.insert(source.end(), training[s].count(), static_cast<std::uint32_t>(s));
    }
    FeatureMatrixView full{all, dim};
    auto selected = coreset_select(full, config.coreset_ratio, config.seed);

    BankBuild out;
    auto& bank = out.bank;
    bank.modality = modality;
    bank.dim = dim;
    bank.coreset_ratio = config.coreset_ratio;
    bank.seed = config.seed;
    bank.source_samples = static_cast<std::uint32_t>(training.size());
    bank.source_vectors = total;
    bank.vectors.reserve(selected.size() * dim);
    std::vector<std::uint32_t> selected_source;
    selected_source.reserve(selected.size());
    for (auto idx : selected) {
        auto row = full.row(idx);
        bank.vectors.insert(bank.vectors.end(), row.begin(), row.end());
        selected_source.push_back(source[idx]);
    }

    if (training.size() >= 2) {
        out.training_scores = compute_training_scores({bank.view(), selected_source}, training);
        bank.scaler = RobustScaler::fit(out.training_scores);
    } else {
        spdlog::warn("build_bank: single training sample, score scaler left degenerate");
        bank.scaler = RobustScaler{0.0, 1.0, true};
    }
    if (bank.scaler.degenerate) spdlog::warn("build_bank: training score IQR is zero, scaler only centers");
    return out;
}

void save_bank(const MemoryBank& bank, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write bank " + path.string());
    out.write("MSBK", 4);
    binio::put<std::uint32_t>(out, kBankVersion);
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(bank.modality));
    binio::put<std::uint64_t>(out, bank.size());
    binio::put<std::uint32_t>(out, bank.dim);
    binio::put<double>(out, bank.coreset_ratio);
    binio::put<std::uint64_t>(out, bank.seed);
    binio::put<std::uint32_t>(out, bank.source_samples);
    binio::put<std::uint64_t>(out, bank.source_vectors);
    binio::put<double>(out, bank.scaler.median);
    binio::put<double>(out, bank.scaler.iqr);
    binio::put<std::uint8_t>(out, bank.scaler.degenerate ? 1 : 0);
    binio::write_floats(out, bank.vectors.data(), bank.vectors.size());
    if (!out) throw DataError("write failed for " + path.string());
}

MemoryBank load_bank(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw DataError("bank not found: " + path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open bank " + path.string());
    const std::string what = path.string();
    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() != 4 || std::string(magic, 4) != "MSBK") throw DataError("not a MSBK file: " + what);
    if (binio::get<std::uint32_t>(in, what) != kBankVersion) throw DataError("unsupported MSBK version in " + what);
    MemoryBank bank;
    auto modality = binio::get<std::uint32_t>(in, what);
    if (modality > 2) throw DataError("invalid modality id in " + what);
    bank.modality = static_cast<Modality>(modality);
    auto m = binio::get<std::uint64_t>(in, what);
    bank.dim = binio::get<std::uint32_t>(in, what);
    bank.coreset_ratio = binio::get<double>(in, what);
    bank.seed = binio::get<std::uint64_t>(in, what);
    bank.source_samples = binio::get<std::uint32_t>(in, what);
    bank.source_vectors = binio::get<std::uint64_t>(in, what);
    bank.scaler.median = binio::get<double>(in, what);
    bank.scaler.iqr = binio::get<double>(in, what);
    bank.scaler.degenerate = binio::get<std::uint8_t>(in, what) != 0;
    if (m == 0 || bank.dim == 0) throw DataError("empty bank in " + what);
    bank.vectors.resize(m * bank.dim);
    binio::read_floats(in, bank.vectors.data(), bank.vectors.size(), what);
    for (float v : bank.vectors)
        if (!std::isfinite(v)) throw DataError("non-finite bank entries in " + what);
    return bank;
}

}  // namespace msad
