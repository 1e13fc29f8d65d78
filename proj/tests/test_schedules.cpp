#include <gtest/gtest.h>

#include <cmath>

#include <pscs/schedules.hpp>

using namespace pscs;

TEST(BetaSchedule, FirstEmissionIsZero) {
    BetaSchedule s = BetaSchedule::fista_adaptive();
    EXPECT_DOUBLE_EQ(next_beta(s), 0.0);
}

TEST(BetaSchedule, ConstantKind) {
    BetaSchedule s = BetaSchedule::make_constant(1.0 / 3.0);
    for (int i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(next_beta(s), 1.0 / 3.0);
    EXPECT_THROW(BetaSchedule::make_constant(1.0), std::invalid_argument);
}

TEST(BetaSchedule, GammaRecursionWithoutSquare) {
    BetaSchedule s = BetaSchedule::fista_adaptive();
    double g1 = (1.0 + std::sqrt(5.0)) / 2.0;
    double g2 = (1.0 + std::sqrt(1.0 + 4.0 * g1)) / 2.0;

    EXPECT_DOUBLE_EQ(next_beta(s), 0.0);             // (γ_{-1}-1)/γ_0
    EXPECT_DOUBLE_EQ(next_beta(s), 0.0);             // (γ_0-1)/γ_1
    double b2 = next_beta(s);                        // (γ_1-1)/γ_2
    EXPECT_DOUBLE_EQ(b2, (g1 - 1.0) / g2);
    EXPECT_NEAR(b2, 0.3311, 1e-4);
}

TEST(BetaSchedule, SquaredVariantDiffers) {
    BetaSchedule s = BetaSchedule::fista_adaptive(true);
    next_beta(s);
    next_beta(s);
    double g1 = (1.0 + std::sqrt(5.0)) / 2.0; // same first step: γ_0 = 1
    double g2 = (1.0 + std::sqrt(1.0 + 4.0 * g1 * g1)) / 2.0;
    EXPECT_DOUBLE_EQ(next_beta(s), (g1 - 1.0) / g2);
}

TEST(BetaSchedule, FixedRestartPeriod) {
    BetaSchedule s = BetaSchedule::fista_fixed(3);
    std::vector<double> beta;
    for (int i = 0; i < 10; ++i) beta.push_back(next_beta(s));
    // γ_{-1} = γ_0 = 1 makes the first two emissions after any reset zero,
    // so with period 3 only every third emission is nonzero
    for (int i : {0, 1, 3, 4, 6, 7, 9}) EXPECT_DOUBLE_EQ(beta[i], 0.0);
    for (int i : {2, 5, 8}) EXPECT_GT(beta[i], 0.0);
}

TEST(BetaSchedule, AdaptiveRestartResets) {
    BetaSchedule s = BetaSchedule::fista_adaptive();
    for (int i = 0; i < 5; ++i) next_beta(s);
    EXPECT_GT(next_beta(s), 0.0);
    EXPECT_DOUBLE_EQ(next_beta(s, true), 0.0);
    EXPECT_DOUBLE_EQ(s.gamma_prev, 1.0); // γ's were reset before advancing
}

TEST(BetaSchedule, CapKeepsBetaBelowOne) {
    BetaSchedule s = BetaSchedule::fista_adaptive();
    double last = 0.0;
    for (int i = 0; i < 200; ++i) last = next_beta(s);
    EXPECT_LT(last, 1.0);
    EXPECT_LE(last, s.beta_cap);
    // the paper's recursion has fixed point γ = 2, so β approaches 1/2
    EXPECT_NEAR(last, 0.5, 1e-6);
}

TEST(AdaptiveRestartCheck, Cases) {
    Vector zero2 = {0.0, 0.0};
    EXPECT_FALSE(adaptive_restart_check({2.0, 0.0}, {1.0, 0.0}, {1.0, 0.0}));
    EXPECT_FALSE(adaptive_restart_check({1.0, 0.0}, {1.0, 0.0}, zero2));
    EXPECT_TRUE(adaptive_restart_check({2.0, 0.0}, {1.0, 0.0}, zero2));
    EXPECT_THROW(adaptive_restart_check({1.0}, {1.0, 0.0}, zero2), std::invalid_argument);
}

TEST(OmegaSchedule, ConstantRecoversUnitDrive) {
    OmegaSchedule s = OmegaSchedule::make_constant(1.0);
    EXPECT_DOUBLE_EQ(next_omega(s), 1.0);
    EXPECT_DOUBLE_EQ(next_omega(s), 1.0);
    EXPECT_DOUBLE_EQ(s.omega_hat(), 1.0);
}

TEST(OmegaSchedule, DecayFormula) {
    OmegaSchedule s = OmegaSchedule::decay(2.0, 1.0, 0.5);
    EXPECT_DOUBLE_EQ(next_omega(s), 2.0);  // n = 0
    EXPECT_DOUBLE_EQ(next_omega(s), 1.5);  // n = 1
    EXPECT_DOUBLE_EQ(next_omega(s), 1.25); // n = 2
    for (int i = 0; i < 60; ++i) next_omega(s);
    EXPECT_NEAR(next_omega(s), 1.0, 1e-12);
}

TEST(OmegaSchedule, DecayIsMonotoneAndBounded) {
    OmegaSchedule s = OmegaSchedule::decay(2.0, 1.0, 0.9);
    double prev = next_omega(s);
    for (int i = 0; i < 100; ++i) {
        double w = next_omega(s);
        EXPECT_LE(w, prev);
        EXPECT_GE(w, 1.0);
        prev = w;
    }
    EXPECT_DOUBLE_EQ(s.omega_hat(), 1.0 + 1.0 * 0.9); // sup over n > 0
}

TEST(OmegaSchedule, IncreasingDecayHatIsLimit) {
    OmegaSchedule s = OmegaSchedule::decay(0.5, 1.0, 0.5);
    EXPECT_DOUBLE_EQ(s.omega_hat(), 1.0);
}
