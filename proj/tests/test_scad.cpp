#include <gtest/gtest.h>

#include <cstdio>
#include <random>

#include <pscs/scad.hpp>

#include "oracles.hpp"

using namespace pscs;

namespace {
const ScadParams kRef{0.5, 10.0};

double p2_quadrature(double u, const ScadParams& p, int panels = 40000) {
    auto integrand = [&](double x) {
        double t = std::min(p.theta * p.lambda_reg, x) - p.lambda_reg;
        return std::max(t, 0.0) / (p.theta - 1.0);
    };
    double a = std::abs(u);
    return a == 0.0 ? 0.0 : oracle::simpson(integrand, 0.0, a, panels);
}
} // namespace

TEST(ScadP2, ReferenceValues) {
    EXPECT_DOUBLE_EQ(scad_p2(0.3, kRef), 0.0);
    EXPECT_DOUBLE_EQ(scad_p2(2.0, kRef), 0.125);
    EXPECT_DOUBLE_EQ(scad_p2(6.0, kRef), 1.625);
    EXPECT_DOUBLE_EQ(scad_p2(-2.0, kRef), 0.125);
}

TEST(ScadP2, MatchesQuadratureOfIntegralDefinition) {
    EXPECT_NEAR(p2_quadrature(2.0, kRef), 0.125, 1e-9);
    EXPECT_NEAR(p2_quadrature(6.0, kRef), 1.625, 1e-9);

    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> span(-8.0, 8.0);
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        double u = span(rng);
        worst = std::max(worst, std::abs(scad_p2(u, kRef) - p2_quadrature(u, kRef)));
    }
    EXPECT_LE(worst, 1e-8);
}

TEST(ScadP2, ContinuouslyDifferentiableAtBreakpoints) {
    for (double b : {kRef.lambda_reg, kRef.theta * kRef.lambda_reg}) {
        double lo = b * (1.0 - 1e-13), hi = b * (1.0 + 1e-13);
        EXPECT_NEAR(scad_p2(lo, kRef), scad_p2(hi, kRef), 1e-10);
        EXPECT_NEAR(scad_grad_p2(lo, kRef), scad_grad_p2(hi, kRef), 1e-10);
    }
}

TEST(ScadGradP2, ReferenceValuesAndZeroClamp) {
    EXPECT_DOUBLE_EQ(scad_grad_p2(0.2, kRef), 0.0);
    EXPECT_DOUBLE_EQ(scad_grad_p2(2.0, kRef), 1.5 / 9.0);
    EXPECT_DOUBLE_EQ(scad_grad_p2(-6.0, kRef), -0.5);
    EXPECT_DOUBLE_EQ(scad_grad_p2(0.0, kRef), 0.0);
}

TEST(ScadGradP2, MatchesCentralDifference) {
    auto f = [&](double x) { return scad_p2(x, kRef); };
    std::mt19937_64 rng(405);
    std::uniform_real_distribution<double> span(-8.0, 8.0);
    for (int t = 0; t < 200; ++t) {
        double u = span(rng);
        EXPECT_NEAR(scad_grad_p2(u, kRef), oracle::central_diff(f, u), 1e-6);
    }
}

TEST(ScadGradP2, LipschitzWithModulusOneOverThetaMinusOne) {
    const double L = scad_lipschitz(kRef);
    EXPECT_DOUBLE_EQ(L, 1.0 / 9.0);
    std::mt19937_64 rng(406);
    std::uniform_real_distribution<double> span(-10.0, 10.0);
    for (int t = 0; t < 500; ++t) {
        double a = span(rng), b = span(rng);
        EXPECT_LE(std::abs(scad_grad_p2(a, kRef) - scad_grad_p2(b, kRef)),
                  L * std::abs(a - b) + 1e-12);
    }
}

TEST(ScadPenalty, BoundsEvennessPlateau) {
    EXPECT_DOUBLE_EQ(scad_penalty(Vector{0.0, 0.0}, kRef), 0.0);
    // below λ the concave part vanishes and the penalty is the plain l1 term
    EXPECT_DOUBLE_EQ(scad_penalty(Vector{0.3, -0.2}, kRef), 0.5 * 0.5);
    // the per-coordinate plateau λ²(θ+1)/2
    EXPECT_DOUBLE_EQ(scad_penalty(Vector{6.0}, kRef), 1.375);
    EXPECT_DOUBLE_EQ(scad_penalty(Vector{-117.0}, kRef), 1.375);

    std::mt19937_64 rng(407);
    std::uniform_real_distribution<double> span(-20.0, 20.0);
    const double cap = kRef.lambda_reg * kRef.lambda_reg * (kRef.theta + 1.0) / 2.0;
    for (int t = 0; t < 200; ++t) {
        Vector u(4);
        for (double& v : u) v = span(rng);
        double val = scad_penalty(u, kRef);
        EXPECT_GE(val, 0.0);
        EXPECT_LE(val, 4 * cap + 1e-12);
        Vector neg = scaled(u, -1.0);
        EXPECT_DOUBLE_EQ(scad_penalty(neg, kRef), val);
    }
}

TEST(ScadParamsValidation, RejectsBadValues) {
    EXPECT_THROW(validate(ScadParams{0.0, 10.0}), std::invalid_argument);
    EXPECT_THROW(validate(ScadParams{0.5, 2.0}), std::invalid_argument);
    EXPECT_NO_THROW(validate(ScadParams{0.5, 2.5}));
}

TEST(ScadInstance, FamilyDimensions) {
    ScadInstance inst = generate_instance(1, 99, ScadParams{5e-4, 10.0}, 0.0);
    EXPECT_EQ(inst.a->rows(), 720u);
    EXPECT_EQ(inst.a->cols(), 2560u);
    EXPECT_EQ(inst.b.size(), 720u);
    EXPECT_EQ(inst.size_index, 1u);
    std::size_t nnz = 0;
    for (double v : inst.ground_truth)
        if (v != 0.0) ++nnz;
    EXPECT_EQ(nnz, 80u);
}

TEST(ScadInstance, ColumnsHaveUnitNorm) {
    ScadInstance inst = make_instance(60, 150, 10, kRef, 7, 0.0);
    for (std::size_t j = 0; j < 150; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < 60; ++i) s += inst.a->at(i, j) * inst.a->at(i, j);
        EXPECT_NEAR(std::sqrt(s), 1.0, 1e-12);
    }
}

TEST(ScadInstance, SeedReproducesBitIdentically) {
    ScadInstance a = make_instance(40, 120, 6, kRef, 777, 1e-8);
    ScadInstance b = make_instance(40, 120, 6, kRef, 777, 1e-8);
    for (std::size_t j = 0; j < 120; ++j)
        for (std::size_t i = 0; i < 40; ++i)
            ASSERT_EQ(a.a->at(i, j), b.a->at(i, j));
    EXPECT_EQ(a.b, b.b);
    EXPECT_EQ(a.ground_truth, b.ground_truth);
    EXPECT_EQ(a.lambda_ata, b.lambda_ata);

    ScadInstance c = make_instance(40, 120, 6, kRef, 778, 1e-8);
    EXPECT_NE(a.b, c.b);
}

TEST(ScadInstance, LambdaAtaDominatesGram) {
    ScadInstance inst = make_instance(40, 120, 6, kRef, 2024, 1e-10);
    ASSERT_GT(inst.lambda_ata, 0.0);
    // λ̂I − AᵀA must act as a PSD metric
    std::mt19937_64 rng(2025);
    std::normal_distribution<double> gauss;
    for (int t = 0; t < 50; ++t) {
        Vector x(120);
        for (double& v : x) v = gauss(rng);
        Vector ax(40);
        inst.a->apply(x, ax);
        double q = inst.lambda_ata * norm2_sq(x) - norm2_sq(ax);
        EXPECT_GE(q, -1e-10 * norm2_sq(x));
    }
}

TEST(ScadGproj, ZeroDataProblemIsStationaryAtOrigin) {
    ScadInstance inst = make_instance(8, 5, 2, ScadParams{0.3, 4.0}, 11, 1e-8);
    std::fill(inst.b.begin(), inst.b.end(), 0.0);
    EXPECT_DOUBLE_EQ(residual_gproj(Vector(5, 0.0), inst), 0.0);
}

TEST(ScadGproj, MatchesStraightLineFormula) {
    ScadInstance inst = make_instance(8, 5, 2, ScadParams{0.3, 4.0}, 12, 1e-8);
    std::mt19937_64 rng(13);
    std::normal_distribution<double> gauss;
    for (int t = 0; t < 20; ++t) {
        Vector u(5);
        for (double& v : u) v = gauss(rng);
        const double gamma = 1.0;

        Vector r(8);
        inst.a->apply(u, r);
        for (std::size_t i = 0; i < 8; ++i) r[i] -= inst.b[i];
        Vector grad_i1(5);
        inst.a->apply_transpose(r, grad_i1);
        double acc = 0.0;
        for (std::size_t j = 0; j < 5; ++j) {
            grad_i1[j] -= scad_grad_p2(u[j], inst.params);
            double step = u[j] - gamma * grad_i1[j];
            double mag = std::abs(step) - gamma * inst.params.lambda_reg;
            double prox = mag > 0.0 ? (step > 0.0 ? mag : -mag) : 0.0;
            double gj = (u[j] - prox) / gamma;
            acc += gj * gj;
        }
        EXPECT_NEAR(residual_gproj(u, inst, gamma), std::sqrt(acc), 1e-14);
    }
}

TEST(ScadGproj, LiteralVariantDiffersOffStationaryPoints) {
    ScadInstance inst = make_instance(8, 5, 2, ScadParams{0.3, 4.0}, 14, 1e-8);
    Vector u(5, 2.0); // inside the concave region, ∇p₂ ≠ 0
    EXPECT_NE(residual_gproj(u, inst, 1.0, false), residual_gproj(u, inst, 1.0, true));
}

TEST(ScadSplitProblem, GradientEnergyAndCachedPieces) {
    ScadInstance inst = make_instance(12, 7, 3, kRef, 21, 1e-8);
    SplitProblem prob = make_split_problem(inst);
    EXPECT_EQ(prob.dim, 7u);
    EXPECT_DOUBLE_EQ(prob.lipschitz_l, 1.0 / 9.0);

    std::mt19937_64 rng(22);
    std::normal_distribution<double> gauss;
    Vector u(7);
    for (double& v : u) v = 3.0 * gauss(rng);

    Vector g = prob.grad_f(u);
    Vector expected = scaled(scad_grad_p2(u, inst.params), -1.0);
    for (std::size_t i = 0; i < 7; ++i) EXPECT_DOUBLE_EQ(g[i], expected[i]);

    EXPECT_DOUBLE_EQ(prob.energy(u), scad_energy(inst, u));

    const auto& st = std::get<L1PlusQuadratic>(prob.h);
    Vector atb(7);
    inst.a->apply_transpose(inst.b, atb);
    EXPECT_EQ(st.atb, atb);
    EXPECT_DOUBLE_EQ(st.lambda_ata, inst.lambda_ata);
}

TEST(ScadSerialization, RoundTripsThroughContainer) {
    ScadInstance inst = make_instance(10, 6, 2, ScadParams{0.25, 5.0}, 31, 1e-8);
    inst.size_index = 0;
    std::string path = ::testing::TempDir() + "scad_roundtrip.bin";
    save_instance(inst, path);

    ScadInstance back = load_instance(path);
    EXPECT_EQ(back.a->rows(), inst.a->rows());
    EXPECT_EQ(back.a->cols(), inst.a->cols());
    for (std::size_t j = 0; j < 6; ++j)
        for (std::size_t i = 0; i < 10; ++i)
            ASSERT_EQ(back.a->at(i, j), inst.a->at(i, j));
    EXPECT_EQ(back.b, inst.b);
    EXPECT_EQ(back.ground_truth, inst.ground_truth);
    EXPECT_EQ(back.seed, inst.seed);
    EXPECT_DOUBLE_EQ(back.params.lambda_reg, 0.25);
    EXPECT_DOUBLE_EQ(back.params.theta, 5.0);
    EXPECT_EQ(back.lambda_ata, inst.lambda_ata);

    std::ifstream side(path + ".json");
    EXPECT_TRUE(side.good());
    std::remove(path.c_str());
    std::remove((path + ".json").c_str());
}

TEST(ScadSerialization, RejectsForeignFiles) {
    std::string path = ::testing::TempDir() + "scad_bogus.bin";
    {
        std::ofstream out(path, std::ios::binary);
        out << "NOTMAGIC and some trailing bytes";
    }
    EXPECT_THROW(load_instance(path), std::runtime_error);
    std::remove(path.c_str());
}
