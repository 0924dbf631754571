#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "rhythm/credit_shaping.hpp"

using namespace rhythm;

namespace {

using Vec = std::vector<double>;

CreditParams explicit_taus(double tau_waad, double tau_delta) {
    CreditParams p;
    p.tau_waad = tau_waad;
    p.tau_delta = tau_delta;
    return p;
}

} // namespace

TEST(GroupAdvantage, HandCasesAndDegeneracy) {
    const auto a = group_normalized_advantage(Vec{1, 0});
    EXPECT_EQ(a.values, (Vec{1.0, -1.0}));
    EXPECT_FALSE(a.degenerate);
    const auto d = group_normalized_advantage(Vec{1, 1, 1});
    EXPECT_EQ(d.values, (Vec{0, 0, 0}));
    EXPECT_TRUE(d.degenerate);
    EXPECT_THROW(group_normalized_advantage(Vec{1}), Error);
}

TEST(GammaLocal, TopDeltaPositions) {
    CreditParams p;
    const auto w = gamma_local(Vec{6, 0, 5, 0, 0}, p);
    EXPECT_EQ(w.selected_local.indices(), (std::vector<std::size_t>{0, 2}));
    EXPECT_EQ(w.gamma, (Vec{1.5, 1, 1.5, 1, 1}));
}

TEST(GammaLocal, LaterCreditAndResponseLength) {
    CreditParams p;
    p.delta_credit = DeltaCredit::Later;
    const auto w = gamma_local(Vec{6, 0, 5, 0, 0}, p);
    EXPECT_EQ(w.gamma, (Vec{1, 1.5, 1, 1.5, 1, 1}));
    p.delta_credit = DeltaCredit::Earlier;
    EXPECT_EQ(gamma_local(Vec{6, 0, 5, 0, 0}, p, 6).gamma.size(), 6u);
    EXPECT_THROW(gamma_local(Vec{6, 0, 5}, p, 2), Error);
}

TEST(GammaGlobal, TopFaiPositions) {
    CreditParams p;
    const auto w = gamma_global(Vec{0.9, 0.1, 0.8, 0.1, 0.1}, p);
    EXPECT_EQ(w.selected_global.indices(), (std::vector<std::size_t>{0, 2}));
    EXPECT_EQ(w.gamma, (Vec{1.5, 1, 1.5, 1, 1}));
    p.q = 1.0;
    for (double g : gamma_global(Vec{0.9, 0.1, 0.8}, p).gamma) EXPECT_EQ(g, 1.5);
}

TEST(GammaCoupled, AlphaZeroMatchesGlobal) {
    auto p = explicit_taus(10.0, 0.0);
    p.alpha = 0.0;
    const Vec fai{0.9, 0.1, 0.8, 0.1, 0.1}, waad{1, 2, 3, 4, 5}, delta{1, 1, 1, 1};
    const auto c = gamma_coupled(fai, waad, delta, p);
    EXPECT_EQ(c.gamma, gamma_global(fai, p).gamma);
    EXPECT_EQ(c.selected_global, gamma_global(fai, p).selected_global);
}

TEST(GammaCoupled, DominatedAnchorSplitsItsBonus) {
    CreditParams p = explicit_taus(1.0, 3.0);
    p.q = 0.2;
    const Vec fai{0, 0, 0, 0.9, 0}, waad{5, 5, 0, 0, 5};
    const Vec delta{0, 5, 0, 5};
    const auto w = gamma_coupled(fai, waad, delta, p);
    EXPECT_EQ(w.dominated.indices(), (std::vector<std::size_t>{3}));
    EXPECT_EQ(w.intro_map.at(3), 1u);
    EXPECT_DOUBLE_EQ(w.gamma[3], 1.25);
    EXPECT_DOUBLE_EQ(w.gamma[1], 1.25);
    EXPECT_DOUBLE_EQ(w.gamma[0] + w.gamma[2] + w.gamma[4], 3.0);
}

TEST(GammaCoupled, IntroTiesGoToLatestPosition) {
    CreditParams p = explicit_taus(1.0, 3.0);
    p.q = 0.2;
    p.k = 3;
    const Vec fai{0, 0, 0, 0, 0.9, 0}, waad{0, 0, 0, 0, 0, 0}, delta{0, 4, 4, 1, 0};
    EXPECT_EQ(gamma_coupled(fai, waad, delta, p).intro_map.at(4), 2u);
}

TEST(GammaCoupled, NoDominationReducesToGlobal) {
    const Vec fai{0.9, 0.1, 0.8, 0.1, 0.1}, waad{1, 2, 3, 4, 5}, delta{1, 1, 1, 1};
    const auto c = gamma_coupled(fai, waad, delta, explicit_taus(0.0, 0.0));
    EXPECT_TRUE(c.dominated.empty());
    EXPECT_EQ(c.gamma, gamma_global(fai, CreditParams{}).gamma);
    const auto inf = gamma_coupled(fai, Vec(5, 0.0), delta, explicit_taus(10.0, std::numeric_limits<double>::infinity()));
    EXPECT_TRUE(inf.dominated.empty());
}

TEST(GammaCoupled, BonusIsConserved) {
    CreditParams p = explicit_taus(1.0, 3.0);
    p.q = 0.25;
    // Anchors at 3 and 7, both dominated; intros 1 and 5 lie outside the anchor set.
    const Vec fai{0, 0, 0, 0.9, 0, 0, 0, 0.8}, waad{5, 5, 0, 0, 5, 5, 0, 0}, delta{0, 5, 0, 5, 0, 5, 0};
    const auto w = gamma_coupled(fai, waad, delta, p);
    ASSERT_EQ(w.dominated.size(), 2u);
    double sum = 0.0;
    for (double g : w.gamma) sum += g - 1.0;
    EXPECT_NEAR(sum, 0.5 * 2, 1e-12);
}

TEST(GammaCoupled, DefaultThresholdsArePercentiles) {
    const Vec fai{0.1, 0.2, 0.9, 0.3}, waad{1, 2, 3, 4}, delta{1, 2, 3};
    const auto w = gamma_coupled(fai, waad, delta, CreditParams{});
    EXPECT_NEAR(*w.params.tau_waad, 1.9, 1e-12);
    EXPECT_NEAR(*w.params.tau_delta, 2.4, 1e-12);
    EXPECT_THROW(gamma_coupled(fai, waad, Vec{1, 2}, CreditParams{}), Error);
}

TEST(ShapeAdvantages, SignRule) {
    CreditWeights w;
    w.gamma = {1.5, 1.5, 1.5};
    CreditParams p;
    const AdvantageSeries adv{{0.0, 2.0, -1.0}, AdvantageSource::GroupNormalized};
    EXPECT_EQ(shape_advantages(adv, w, p).values, (Vec{0.0, 3.0, -1.0}));
    p.nonneg_only = false;
    EXPECT_EQ(shape_advantages(adv, w, p).values, (Vec{0.0, 3.0, -1.5}));
    EXPECT_THROW(shape_advantages({{1.0}, AdvantageSource::Gae}, w, p), Error);
}

TEST(ShapedObjective, HandCases) {
    EXPECT_EQ(shaped_token_objective(1.0, 0.7, 1.3, 0.2), 0.7 * 1.3);
    EXPECT_DOUBLE_EQ(shaped_token_objective(2.0, 1.0, 1.5, 0.2), 1.8);
    EXPECT_DOUBLE_EQ(shaped_token_objective(0.5, -1.0, 1.0, 0.2), -0.8);
}

TEST(Params, Validation) {
    CreditParams p;
    p.gamma_amp = 0.9;
    EXPECT_THROW(p.validate(), Error);
    p = {};
    p.alpha = 1.5;
    EXPECT_THROW(p.validate(), Error);
    EXPECT_EQ(parse_credit_scheme("coupled"), CreditScheme::Coupled);
    EXPECT_THROW(parse_credit_scheme("both"), Error);
}

TEST(Export, WeightsRecordFields) {
    CreditParams p = explicit_taus(1.0, 3.0);
    p.q = 0.2;
    const auto w = gamma_coupled(Vec{0, 0, 0, 0.9, 0}, Vec{5, 5, 0, 0, 5}, Vec{0, 5, 0, 5}, p);
    const auto j = weights_record("t7", w);
    EXPECT_EQ(j.at("trace_id"), "t7");
    EXPECT_EQ(j.at("intro_map").at("3"), 1);
    EXPECT_EQ(j.at("params").at("scheme"), "coupled");
    EXPECT_EQ(j.at("dominated"), nlohmann::json::array({3}));
}
