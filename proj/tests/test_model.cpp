#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "freebound/model.hpp"

using namespace freebound;

namespace {

ModelParams unit_model() { return ModelParams{}; }

}  // namespace

TEST(Validate, RegularModeDerivesKinkSlope) {
    const ValidationReport r = validate(unit_model(), CostParams(1, 1, 0));
    EXPECT_TRUE(r.ok);
    EXPECT_DOUBLE_EQ(r.c, 2.0);
    EXPECT_EQ(r.mode, CostMode::regular);
    EXPECT_TRUE(r.monotone_scheme);
}

TEST(Validate, ZeroB1IsDegenerate) {
    const ValidationReport r = validate(unit_model(), CostParams(1, 0, 0));
    EXPECT_DOUBLE_EQ(r.c, 1.0);
    EXPECT_EQ(r.mode, CostMode::degenerate_b1_zero);
}

TEST(Validate, RejectsOutOfRangeCost) {
    EXPECT_THROW(CostParams(1, 1, 1), InvalidArgument);
    EXPECT_THROW(CostParams(0, 1, 0), InvalidArgument);
    EXPECT_THROW(CostParams(1, -0.1, 0), InvalidArgument);
    EXPECT_THROW(CostParams(1, 1, -0.1), InvalidArgument);
}

TEST(Validate, RejectsBadDynamics) {
    ModelParams m;
    m.gamma = 0.0;
    EXPECT_THROW(validate(m, CostParams(1, 1, 0)), InvalidArgument);
    m = ModelParams{};
    m.sigma = {1.0, 1.0, 1.0};  // singular
    EXPECT_THROW(validate(m, CostParams(1, 1, 0)), InvalidArgument);
    m.sigma = {-1.0, 0.0, 1.0};
    EXPECT_THROW(validate(m, CostParams(1, 1, 0)), InvalidArgument);
}

TEST(Validate, ReportsMonotoneSchemeCondition) {
    ModelParams m;
    m.sigma = {1.0, 0.9, 2.0};
    EXPECT_TRUE(validate(m, CostParams(1, 1, 0)).monotone_scheme);
    m.sigma = {1.0, 1.2, 2.0};
    const ValidationReport r = validate(m, CostParams(1, 1, 0));
    EXPECT_FALSE(r.monotone_scheme);
    EXPECT_FALSE(r.notes.empty());
}

TEST(CostEll, Examples) {
    const CostParams cost(1, 1, 0);
    EXPECT_DOUBLE_EQ(cost_ell(cost, {1, 3}), 2.0);
    EXPECT_DOUBLE_EQ(cost_ell(cost, {0, 0}), 0.0);
    // Kink ray: both branches agree.
    EXPECT_DOUBLE_EQ(cost_ell(cost, {1, 2}), 1.0);
    const TwoPieceCost tp = as_two_piece(cost);
    EXPECT_DOUBLE_EQ(tp.alpha[0] * 1 + tp.alpha[1] * 2, tp.beta[0] * 1 + tp.beta[1] * 2);
}

TEST(CostEll, RejectsPointsOutsideQuadrant) {
    const CostParams cost(1, 1, 0);
    EXPECT_THROW(cost_ell(cost, {-1e-12, 1}), InvalidArgument);
    EXPECT_THROW(cost_ellhat(cost, {1, -1}), InvalidArgument);
}

TEST(CostEllhat, Examples) {
    const CostParams cost(1, 1, 0);
    EXPECT_DOUBLE_EQ(cost_ellhat(cost, {1, 1}), 1.0);
    EXPECT_DOUBLE_EQ(cost_ellhat(cost, {1, 2}), -1.0);
    EXPECT_DOUBLE_EQ(cost_ellhat(cost, {0, 0}), -1.0);
}

// Dyadic rationals keep every operation exact.
TEST(CostProperties, ConvexAlongGridSegments) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> coord(0, 64), step(-16, 16), pick(0, 3);
    const CostParams costs[] = {CostParams(1, 1, 0), CostParams(0.5, 0.25, 0.5),
                                CostParams(2, 0, 0.75), CostParams(1, 3, 0.25)};
    for (int n = 0; n < 20000; ++n) {
        const CostParams& cost = costs[pick(rng)];
        const Vec2 z{coord(rng) / 8.0, coord(rng) / 8.0};
        const Vec2 h{step(rng) / 8.0, step(rng) / 8.0};
        const Vec2 zp{z[0] + h[0], z[1] + h[1]}, zm{z[0] - h[0], z[1] - h[1]};
        if (zp[0] < 0 || zp[1] < 0 || zm[0] < 0 || zm[1] < 0) continue;
        ASSERT_GE(cost.ell(zp) + cost.ell(zm) - 2.0 * cost.ell(z), 0.0)
            << "z=(" << z[0] << "," << z[1] << ") h=(" << h[0] << "," << h[1] << ")";
        ASSERT_GE(cost.ell(z), 0.0);
    }
}

TEST(CostProperties, NondecreasingInX2AndLeftDerivative) {
    std::mt19937_64 rng(12);
    std::uniform_int_distribution<int> coord(1, 256);
    const CostParams cost(1, 1, 0.5);  // c = 4
    const double delta = 1.0 / 1024.0;
    for (int n = 0; n < 20000; ++n) {
        const Vec2 z{coord(rng) / 32.0, coord(rng) / 32.0};
        ASSERT_LE(cost.ell(z), cost.ell({z[0], z[1] + 1.0 / 32.0}));
        const Vec2 left{z[0] - delta, z[1]};
        if (cost.upper(z) != cost.upper(left)) continue;
        ASSERT_DOUBLE_EQ((cost.ell(z) - cost.ell(left)) / delta, cost.ellhat(z));
    }
}

TEST(CostProperties, EllhatMonotone) {
    const CostParams cost(1, 1, 0);
    for (int i = 0; i < 40; ++i)
        for (int j = 0; j < 40; ++j) {
            const Vec2 z{i / 8.0, j / 8.0};
            EXPECT_LE(cost.ellhat(z), cost.ellhat({z[0] + 0.125, z[1]}));
            EXPECT_GE(cost.ellhat(z), cost.ellhat({z[0], z[1] + 0.125}));
        }
}

TEST(Converter, DividesThroughBySecondUpperGradient) {
    // 3 x the fixture cost.
    const TwoPieceCost general{{-3.0, 3.0}, {3.0, 0.0}, 2.0};
    const CanonicalCost cc = to_canonical(general);
    EXPECT_DOUBLE_EQ(cc.multiplier, 3.0);
    EXPECT_DOUBLE_EQ(cc.cost.a(), 1.0);
    EXPECT_DOUBLE_EQ(cc.cost.b1(), 1.0);
    EXPECT_DOUBLE_EQ(cc.cost.b2(), 0.0);
    for (const Vec2 z : {Vec2{1, 1}, Vec2{1, 5}, Vec2{0.3, 0.6}})
        EXPECT_NEAR(general.ell(z), cc.multiplier * cc.cost.ell(z), 1e-12);
}

TEST(Converter, RejectsRegimesOutsideCanonicalFamily) {
    // Nonnegative gradients: valid two-piece cost, but not of the (a, b1, b2) form.
    const TwoPieceCost normal{{1.0, 1.0}, {2.0, 0.5}, 2.0};
    EXPECT_NO_THROW(validate_two_piece(normal));
    EXPECT_THROW(to_canonical(normal), InvalidArgument);
    // Discontinuous across the ray.
    EXPECT_THROW(validate_two_piece({{-1.0, 1.0}, {1.0, 0.0}, 3.0}), InvalidArgument);
    // Concave kink.
    EXPECT_THROW(validate_two_piece({{1.0, 0.0}, {0.0, 0.5}, 2.0}), InvalidArgument);
}

TEST(Converter, AsTwoPieceAgreesWithCanonical) {
    const CostParams cost(0.5, 0.25, 0.5);
    const TwoPieceCost tp = as_two_piece(cost);
    EXPECT_NO_THROW(validate_two_piece(tp));
    for (int i = 0; i < 20; ++i)
        for (int j = 0; j < 20; ++j) {
            const Vec2 z{i * 0.3, j * 0.7};
            EXPECT_NEAR(tp.ell(z), cost.ell(z), 1e-12);
        }
}
