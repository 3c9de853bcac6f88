#include "msad/memory_bank.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <set>

using namespace msad;
using msad::testing::TempDir;

namespace {

PatchFeatureMap random_map(std::size_t rows, std::uint32_t dim, std::mt19937_64& rng, double offset = 0.0) {
    std::normal_distribution<float> g;
    PatchFeatureMap m(Modality::Rgb, 0, 0, rows, dim);
    for (auto& v : m.values) v = g(rng) + static_cast<float>(offset);
    return m;
}

double oracle_distance(std::span<const float> a, std::span<const float> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        double d = static_cast<double>(a[k]) - static_cast<double>(b[k]);
        s += d * d;
    }
    return std::sqrt(s);
}

MemoryBank bank_from(const PatchFeatureMap& m) {
    MemoryBank b;
    b.modality = m.modality;
    b.dim = m.dim;
    b.vectors = m.values;
    return b;
}

}  // namespace

TEST(Distance, MatchesPlainSum) {
    std::mt19937_64 rng(1);
    for (std::uint32_t d : {1u, 3u, 4u, 7u, 17u, 64u, 333u}) {
        auto a = random_map(1, d, rng), b = random_map(1, d, rng);
        double got = squared_distance(a.row(0), b.row(0));
        double want = oracle_distance(a.row(0), b.row(0));
        EXPECT_NEAR(got, want * want, 1e-12 * want * want) << d;
        EXPECT_EQ(squared_distance(a.row(0), a.row(0)), 0.0);
    }
}

// --- coreset ------------------------------------------------------------------

TEST(Coreset, SizeUsesCeiling) {
    EXPECT_EQ(coreset_size(0.25, 10), 3u);
    EXPECT_EQ(coreset_size(0.1, 784), 79u);
    EXPECT_EQ(coreset_size(1.0, 5), 5u);
    EXPECT_EQ(coreset_size(1e-9, 5), 1u);
    EXPECT_EQ(coreset_size(0.1, 10), 1u);  // 0.1 * 10 is exactly 1 despite rounding
}

TEST(Coreset, RatioOneSelectsEverything) {
    std::mt19937_64 rng(2);
    auto m = random_map(37, 5, rng);
    auto sel = coreset_select({m.values, m.dim}, 1.0, 9);
    std::set<std::size_t> s(sel.begin(), sel.end());
    EXPECT_EQ(s.size(), 37u);
    EXPECT_EQ(*s.rbegin(), 36u);
}

TEST(Coreset, OneDimensionalFarthestPoint) {
    std::vector<float> v{0.f, 1.f, 10.f};
    auto sel = greedy_k_center({v, 1}, 2, 0);
    EXPECT_EQ(sel, (std::vector<std::size_t>{0, 2}));
    auto three = greedy_k_center({v, 1}, 3, 0);
    EXPECT_EQ(three, (std::vector<std::size_t>{0, 2, 1}));
}

TEST(Coreset, TiesGoToLowerIndex) {
    std::vector<float> v{0.f, -2.f, 2.f, 2.f};
    EXPECT_EQ(greedy_k_center({v, 1}, 2, 0), (std::vector<std::size_t>{0, 1}));
}

TEST(Coreset, MatchesNaiveGreedy) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        auto m = random_map(300 + trial * 13, 6, rng);
        FeatureMatrixView view{m.values, m.dim};
        std::size_t n = view.rows(), k = 25;
        std::size_t start = trial % n;
        std::vector<std::size_t> expect{start};
        while (expect.size() < k) {
            double best = -1;
            std::size_t arg = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (std::find(expect.begin(), expect.end(), i) != expect.end()) continue;
                double d = std::numeric_limits<double>::infinity();
                for (auto s : expect) d = std::min(d, oracle_distance(view.row(i), view.row(s)));
                if (d > best) {
                    best = d;
                    arg = i;
                }
            }
            expect.push_back(arg);
        }
        EXPECT_EQ(greedy_k_center(view, k, start), expect) << trial;
    }
}

TEST(Coreset, SeedDeterminesStartAndRejectsBadInput) {
    std::mt19937_64 rng(4);
    auto m = random_map(100, 4, rng);
    FeatureMatrixView view{m.values, m.dim};
    auto a = coreset_select(view, 0.2, 11);
    EXPECT_EQ(a, coreset_select(view, 0.2, 11));
    EXPECT_EQ(a.front(), coreset_start_index(11, 100));
    EXPECT_LT(coreset_start_index(12345, 100), 100u);
    EXPECT_THROW(coreset_select(view, 0.0, 1), ParameterError);
    EXPECT_THROW(coreset_select(view, 1.5, 1), ParameterError);
    m.values[7] = std::numeric_limits<float>::quiet_NaN();
    EXPECT_THROW(coreset_select({m.values, m.dim}, 0.5, 1), DataError);
}

TEST(Coreset, CoverageRadiusOfFullSetIsZero) {
    std::mt19937_64 rng(5);
    auto m = random_map(20, 3, rng);
    FeatureMatrixView view{m.values, m.dim};
    std::vector<std::size_t> all(20);
    for (std::size_t i = 0; i < 20; ++i) all[i] = i;
    EXPECT_EQ(coverage_radius(view, all), 0.0);
    std::vector<float> line{0.f, 1.f, 10.f};
    std::vector<std::size_t> sel{0, 2};
    EXPECT_DOUBLE_EQ(coverage_radius({line, 1}, sel), 1.0);
}

// --- nearest neighbour and scoring --------------------------------------------

TEST(Nearest, ExactMatchAndTies) {
    std::mt19937_64 rng(6);
    auto bank = random_map(50, 8, rng);
    FeatureMatrixView view{bank.values, bank.dim};
    auto r = nearest_neighbor(view, bank.row(17));
    EXPECT_EQ(r.index, 17u);
    EXPECT_EQ(r.distance, 0.0);

    std::vector<float> pts{1.f, 0.f, -1.f, 0.f, 0.f, 1.f};
    std::vector<float> q{0.f, 0.f};
    EXPECT_EQ(nearest_neighbor({pts, 2}, q).index, 0u);
}

TEST(Nearest, MatchesLinearScanOracle) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        auto bank = random_map(200, 12, rng);
        auto q = random_map(1, 12, rng);
        FeatureMatrixView view{bank.values, bank.dim};
        std::size_t best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < 200; ++i) {
            double d = oracle_distance(view.row(i), q.row(0));
            if (d < bd) {
                bd = d;
                best = i;
            }
        }
        auto r = nearest_neighbor(view, q.row(0));
        EXPECT_EQ(r.index, best);
        EXPECT_NEAR(r.distance, bd, 1e-9);
    }
}

TEST(Score, FeaturesInBankScoreZero) {
    std::mt19937_64 rng(8);
    auto m = random_map(30, 6, rng);
    auto r = score_sample(bank_from(m), m);
    EXPECT_EQ(r.object_score, 0.0);
    for (double p : r.patch_scores) EXPECT_EQ(p, 0.0);
}

TEST(Score, MatchesDoubleLoopOracle) {
    std::mt19937_64 rng(9);
    auto bank = bank_from(random_map(20, 8, rng));
    auto q = random_map(5, 8, rng);
    auto r = score_sample(bank, q);
    double obj = -1;
    for (std::size_t i = 0; i < 5; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < 20; ++j)
            best = std::min(best, oracle_distance(q.row(i), bank.view().row(j)));
        EXPECT_NEAR(r.patch_scores[i], best, 1e-9);
        obj = std::max(obj, best);
    }
    EXPECT_NEAR(r.object_score, obj, 1e-9);
}

TEST(Score, DisplacedPatchIsArgmax) {
    std::mt19937_64 rng(10);
    auto m = random_map(40, 4, rng);
    auto q = m;
    for (int k = 0; k < 4; ++k) q.row(23)[k] += 100.f;
    auto r = score_sample(bank_from(m), q);
    EXPECT_EQ(r.argmax_patch, 23u);
    EXPECT_EQ(r.object_score, r.patch_scores[23]);
    EXPECT_GT(r.object_score, 150.0);
    for (std::size_t i = 0; i < 40; ++i)
        if (i != 23) EXPECT_EQ(r.patch_scores[i], 0.0);
}

TEST(Score, NormalizedUsesScaler) {
    std::mt19937_64 rng(11);
    auto bank = bank_from(random_map(10, 3, rng));
    bank.scaler = {1.0, 2.0, false};
    auto q = random_map(4, 3, rng);
    auto r = score_sample(bank, q);
    EXPECT_DOUBLE_EQ(r.normalized_score, (r.object_score - 1.0) / 2.0);
}

TEST(Score, ShapeErrors) {
    std::mt19937_64 rng(12);
    auto bank = bank_from(random_map(10, 3, rng));
    EXPECT_THROW(score_sample(bank, random_map(4, 5, rng)), DataError);
    EXPECT_THROW(score_sample(MemoryBank{}, random_map(4, 3, rng)), DataError);
}

// --- training scores and bank construction ------------------------------------

TEST(TrainingScores, IdenticalSamplesScoreZero) {
    std::mt19937_64 rng(13);
    auto m = random_map(25, 4, rng);
    std::vector<PatchFeatureMap> training{m, m};
    auto b = build_bank(training, {1.0, 0});
    ASSERT_EQ(b.training_scores.size(), 2u);
    EXPECT_EQ(b.training_scores[0], 0.0);
    EXPECT_EQ(b.training_scores[1], 0.0);
}

TEST(TrainingScores, DisjointClustersScoreInterClusterDistance) {
    std::mt19937_64 rng(14);
    auto a = random_map(15, 3, rng, 0.0);
    auto b = random_map(12, 3, rng, 20.0);
    std::vector<PatchFeatureMap> training{a, b};
    auto build = build_bank(training, {1.0, 0});
    // Sample s may only match the other sample's vectors.
    auto max_of_min = [](const PatchFeatureMap& from, const PatchFeatureMap& to) {
        double worst = 0.0;
        for (std::size_t i = 0; i < from.count(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < to.count(); ++j) best = std::min(best, oracle_distance(from.row(i), to.row(j)));
            worst = std::max(worst, best);
        }
        return worst;
    };
    EXPECT_NEAR(build.training_scores[0], max_of_min(a, b), 1e-9);
    EXPECT_NEAR(build.training_scores[1], max_of_min(b, a), 1e-9);
}

TEST(TrainingScores, SelfExclusionWithCoreset) {
    std::mt19937_64 rng(15);
    std::vector<PatchFeatureMap> training;
    for (int s = 0; s < 5; ++s) training.push_back(random_map(40, 4, rng));
    auto build = build_bank(training, {0.3, 3});
    // Oracle: rebuild provenance of the coreset rows by value lookup.
    const auto view = build.bank.view();
    for (std::size_t s = 0; s < training.size(); ++s) {
        double worst = 0.0;
        for (std::size_t i = 0; i < training[s].count(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < view.rows(); ++j) {
                bool own = false;
                for (std::size_t p = 0; p < training[s].count() && !own; ++p)
                    own = std::equal(view.row(j).begin(), view.row(j).end(), training[s].row(p).begin());
                if (!own) best = std::min(best, oracle_distance(training[s].row(i), view.row(j)));
            }
            worst = std::max(worst, best);
        }
        EXPECT_NEAR(build.training_scores[s], worst, 1e-9) << s;
    }
    auto scaler = RobustScaler::fit(build.training_scores);
    EXPECT_EQ(build.bank.scaler.median, scaler.median);
    EXPECT_EQ(build.bank.scaler.iqr, scaler.iqr);
}

TEST(TrainingScores, SingleSampleRejected) {
    std::mt19937_64 rng(16);
    auto m = random_map(10, 3, rng);
    std::vector<PatchFeatureMap> one{m};
    std::vector<std::uint32_t> src(10, 0);
    EXPECT_THROW(compute_training_scores({{m.values, m.dim}, src}, one), DataError);
}

TEST(BuildBank, ConcatenatesAtRatioOne) {
    std::mt19937_64 rng(17);
    std::vector<PatchFeatureMap> training{random_map(784, 4, rng), random_map(784, 4, rng)};
    auto b = build_bank(training, {1.0, 0});
    EXPECT_EQ(b.bank.size(), 1568u);
    EXPECT_EQ(b.bank.source_vectors, 1568u);
    EXPECT_EQ(b.bank.source_samples, 2u);
}

TEST(BuildBank, SingleSampleUsesCeilAndDegenerateScaler) {
    std::mt19937_64 rng(18);
    std::vector<PatchFeatureMap> training{random_map(784, 4, rng)};
    auto b = build_bank(training, {0.1, 0});
    EXPECT_EQ(b.bank.size(), 79u);
    EXPECT_TRUE(b.training_scores.empty());
    EXPECT_TRUE(b.bank.scaler.degenerate);
    EXPECT_EQ(b.bank.scaler.normalize(3.5), 3.5);
}

TEST(BuildBank, DeterministicForSeed) {
    std::mt19937_64 rng(19);
    std::vector<PatchFeatureMap> training;
    for (int s = 0; s < 4; ++s) training.push_back(random_map(100, 6, rng));
    auto a = build_bank(training, {0.1, 5});
    auto b = build_bank(training, {0.1, 5});
    EXPECT_EQ(a.bank, b.bank);
    EXPECT_EQ(a.training_scores, b.training_scores);
}

TEST(BuildBank, RatioOneReproducesFullBankScores) {
    std::mt19937_64 rng(20);
    std::vector<PatchFeatureMap> training;
    for (int s = 0; s < 3; ++s) training.push_back(random_map(50, 5, rng));
    auto b = build_bank(training, {1.0, 2});
    MemoryBank full;
    full.dim = 5;
    for (const auto& t : training) full.vectors.insert(full.vectors.end(), t.values.begin(), t.values.end());
    auto q = random_map(30, 5, rng);
    auto r1 = score_sample(b.bank, q), r2 = score_sample(full, q);
    EXPECT_EQ(r1.patch_scores, r2.patch_scores);
    EXPECT_EQ(r1.object_score, r2.object_score);
}

TEST(BuildBank, DimensionMismatchRejected) {
    std::mt19937_64 rng(21);
    std::vector<PatchFeatureMap> training{random_map(10, 4, rng), random_map(10, 5, rng)};
    EXPECT_THROW(build_bank(training, {}), DataError);
    EXPECT_THROW(build_bank({}, {}), DataError);
}

// --- scaler -------------------------------------------------------------------

TEST(Scaler, QuantilesAreLinear) {
    EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 0.5), 2.5);
    EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 0.25), 1.75);
    EXPECT_DOUBLE_EQ(quantile({7}, 0.9), 7.0);
    EXPECT_THROW(quantile({}, 0.5), ParameterError);
    std::vector<double> s{1, 2, 3, 4, 5};
    auto sc = RobustScaler::fit(s);
    EXPECT_DOUBLE_EQ(sc.median, 3.0);
    EXPECT_DOUBLE_EQ(sc.iqr, 2.0);
    EXPECT_DOUBLE_EQ(sc.normalize(7.0), 2.0);
    std::vector<double> flat{2, 2, 2};
    auto d = RobustScaler::fit(flat);
    EXPECT_TRUE(d.degenerate);
    EXPECT_DOUBLE_EQ(d.normalize(5.0), 3.0);
}

// --- persistence --------------------------------------------------------------

TEST(BankFile, RoundTripAndErrors) {
    TempDir dir("bank");
    std::mt19937_64 rng(22);
    std::vector<PatchFeatureMap> training{random_map(60, 7, rng), random_map(60, 7, rng), random_map(60, 7, rng)};
    training[0].modality = training[1].modality = training[2].modality = Modality::Infrared;
    auto b = build_bank(training, {0.25, 4}).bank;
    save_bank(b, dir / "a.msbk");
    auto back = load_bank(dir / "a.msbk");
    EXPECT_EQ(back, b);
    EXPECT_EQ(back.modality, Modality::Infrared);

    try {
        load_bank(dir / "missing.msbk");
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("bank not found"), std::string::npos);
    }
    {
        std::ofstream bad(dir / "bad.msbk", std::ios::binary);
        bad << "MSFTxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx";
    }
    EXPECT_THROW(load_bank(dir / "bad.msbk"), DataError);
    std::filesystem::resize_file(dir / "a.msbk", std::filesystem::file_size(dir / "a.msbk") - 2);
    EXPECT_THROW(load_bank(dir / "a.msbk"), DataError);
}
