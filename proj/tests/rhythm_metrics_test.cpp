#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "rhythm/oracle.hpp"
#include "rhythm/rhythm_metrics.hpp"
#include "rhythm/synth.hpp"

using namespace rhythm;

namespace {

std::vector<std::size_t> members(const IndexSet& s) { return s.indices(); }

} // namespace

TEST(Waad, SingleDistanceTerm) {
    SquareMatrix m(12);
    for (std::size_t t = 0; t < 12; ++t) m(t, t == 0 ? 0 : t - 1) = 1.0;
    const auto w = waad_series(m, {1, 12}, 10);
    for (double v : w) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(Waad, SinkMassSaturatesAtWindow) {
    const auto w = waad_series(fixtures::sink_map(51), {50, 51}, 10);
    EXPECT_DOUBLE_EQ(w[0], 10.0);
    EXPECT_DOUBLE_EQ(waad_series(fixtures::sink_map(51), {50, 51}, 10, false)[0], 0.0);
}

TEST(Waad, UniformRowAtTwenty) {
    const auto w = waad_series(fixtures::uniform_causal(21), {20, 21}, 10);
    EXPECT_NEAR(w[0], 155.0 / 21.0, 1e-12);
    EXPECT_NEAR(w[0], 7.380952, 1e-6);
    EXPECT_NEAR(w[0], oracle::brute_force_waad(fixtures::uniform_causal(21), 20, 10), 1e-12);
}

TEST(Waad, IdentityIsZeroAndBadInputsThrow) {
    for (double v : waad_series(fixtures::identity_map(8), {0, 8}, 3)) EXPECT_EQ(v, 0.0);
    EXPECT_THROW(waad_series(fixtures::identity_map(8), {4, 4}, 3), Error);
    EXPECT_THROW(waad_series(fixtures::identity_map(8), {4, 9}, 3), Error);
    EXPECT_THROW(waad_series(fixtures::identity_map(8), {4, 8}, 0), Error);
}

TEST(Fai, NeverAttendedColumnIsZero) {
    const auto f = fai_series(fixtures::identity_map(20), {0, 20}, 2, 5);
    for (std::size_t s = 0; s + 2 < 20; ++s) {
        EXPECT_EQ(f.values[s], 0.0);
        EXPECT_TRUE(f.covered[s]);
    }
    EXPECT_FALSE(f.covered[19]);
}

TEST(Fai, SingleRowWindow) {
    auto m = fixtures::identity_map(4);
    m(3, 3) = 0.0;
    m(3, 1) = 1.0;
    const auto f = fai_series(m, {3, 4}, 2, 3);
    EXPECT_DOUBLE_EQ(f.values[1], 1.0);
}

TEST(Fai, MeanOfFourColumnWeights) {
    // Column 0 receives {0.5, 0.25, 0, 0.25} from rows 2..5.
    auto m = fixtures::identity_map(6);
    const double w[4] = {0.5, 0.25, 0.0, 0.25};
    for (std::size_t i = 0; i < 4; ++i) {
        const std::size_t t = 2 + i;
        m(t, t) = 1.0 - w[i];
        m(t, 0) = w[i];
    }
    const auto f = fai_series(m, {2, 6}, 2, 5);
    EXPECT_DOUBLE_EQ(f.values[0], 0.25);
    EXPECT_NEAR(f.values[0], oracle::brute_force_fai(m, 0, 2, 5, {2, 6}), 1e-15);
}

TEST(Fai, WindowRestrictedToResponseRows) {
    const auto m = fixtures::sink_map(30);
    const auto f = fai_series(m, {20, 30}, 1, 5);
    EXPECT_TRUE(f.covered[15]);
    EXPECT_FALSE(f.covered[10]);  // rows 11..15 are all prompt rows
    EXPECT_DOUBLE_EQ(f.values[0], 0.0);
    EXPECT_THROW(fai_series(m, {20, 30}, 5, 5), Error);
}

TEST(Entropy, HandCases) {
    EXPECT_EQ(row_entropy(std::vector<double>{0, 1, 0}), 0.0);
    EXPECT_NEAR(row_entropy(std::vector<double>{0.25, 0.25, 0.25, 0.25}), 1.386294, 1e-6);
    EXPECT_NEAR(row_entropy(std::vector<double>{0.5, 0.5, 0, 0}), 0.693147, 1e-6);
    EXPECT_THROW(row_entropy(std::vector<double>{1.5, -0.5}), Error);
    const auto series = entropy_series({{1.0}, {0.5, 0.5}});
    EXPECT_EQ(series.size(), 2u);
}

TEST(Delta, HandCases) {
    EXPECT_EQ(waad_delta(std::vector<double>{7, 1, 1, 6}), (std::vector<double>{6, 0, 5}));
    for (double v : waad_delta(std::vector<double>(6, 3.5))) EXPECT_EQ(v, 0.0);
    std::vector<double> s{0.3, 2.0, 1.1, 4.0, 0.0};
    auto d = waad_delta(s);
    std::reverse(s.begin(), s.end());
    auto dr = waad_delta(s);
    std::reverse(dr.begin(), dr.end());
    EXPECT_EQ(d, dr);
    try {
        waad_delta(std::vector<double>{1.0});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "series-too-short");
    }
}

TEST(TopQuantile, HandCases) {
    EXPECT_EQ(members(top_quantile(std::vector<double>{1, 2, 3, 4, 5}, 0.4)), (std::vector<std::size_t>{3, 4}));
    EXPECT_EQ(top_quantile(std::vector<double>{1, 2, 3}, 1.0).size(), 3u);
    EXPECT_EQ(members(top_quantile(std::vector<double>{2, 2, 2, 2}, 0.5)), (std::vector<std::size_t>{0, 1}));
    EXPECT_THROW(top_quantile(std::vector<double>{1.0}, 0.0), Error);
    EXPECT_THROW(top_quantile(std::vector<double>{}, 0.5), Error);
}

TEST(TopQuantile, RestrictionSelectsWithinSubset) {
    const std::vector<double> s{9, 1, 8, 2, 7};
    const auto sel = top_quantile(s, 0.5, IndexSet({1, 3, 4}, 5));
    EXPECT_EQ(members(sel), (std::vector<std::size_t>{3, 4}));
}

TEST(TopQuantile, CountDoesNotOvershootOnExactProducts) {
    EXPECT_EQ(quantile_count(0.3, 10), 3u);
    EXPECT_EQ(quantile_count(0.7, 10), 7u);
    EXPECT_EQ(quantile_count(0.4, 5), 2u);
    EXPECT_EQ(quantile_count(0.41, 5), 3u);
}

TEST(Peaks, LocalMax) {
    EXPECT_TRUE(local_max_peaks(std::vector<double>{1, 2, 3, 4, 5}, 0.0).empty());
    EXPECT_EQ(members(detect_peaks(std::vector<double>{0, 5, 0, 5, 0}, PeakMethod::LocalMax, 0.4, 0.0)),
              (std::vector<std::size_t>{1, 3}));
}

TEST(Peaks, TopQAliasesTopQuantile) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> s(37);
    for (auto& v : s) v = u(rng);
    EXPECT_EQ(detect_peaks(s, PeakMethod::TopQ, 0.4, 1.0), top_quantile(s, 0.4));
    EXPECT_EQ(parse_peak_method("local-max"), PeakMethod::LocalMax);
    EXPECT_THROW(parse_peak_method("median"), Error);
}

TEST(Percentile, LinearInterpolation) {
    const std::vector<double> s{4, 1, 3, 2};
    EXPECT_DOUBLE_EQ(percentile(s, 0), 1.0);
    EXPECT_DOUBLE_EQ(percentile(s, 100), 4.0);
    EXPECT_DOUBLE_EQ(percentile(s, 50), 2.5);
    EXPECT_NEAR(percentile(s, 30), 1.9, 1e-12);
}

TEST(Oracle, AgreesWithOptimizedOnRandomMaps) {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 4 + trial;
        const auto m = random_causal_map(n, rng);
        const IndexRange r{n / 2, n};
        const auto w = waad_series(m, r, 5);
        for (std::size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(w[i], oracle::brute_force_waad(m, r.begin + i, 5), 1e-12);
        const auto f = fai_series(m, r, 1, 4);
        for (std::size_t s = 0; s < n; ++s) EXPECT_NEAR(f.values[s], oracle::brute_force_fai(m, s, 1, 4, r), 1e-12);
    }
}
