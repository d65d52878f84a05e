#include <cmath>
#include <memory>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "freebound/policy.hpp"
#include "freebound/verify.hpp"

using namespace freebound;

namespace {

std::shared_ptr<const Boundary> flat_boundary(double level) {
    auto b = std::make_shared<Boundary>();
    b->h1 = 0.125;
    for (int j = 0; j <= 64; ++j) {
        b->x2_grid.push_back(j * 0.125);
        b->psi.push_back(level);
    }
    return b;
}

}  // namespace

TEST(StepPolicy, AxisReflection) {
    const PolicyStep s = step_policy(PolicySpec::axis(), {1, 1}, {-2, -2});
    EXPECT_EQ(s.state, (Vec2{0, 0}));
    EXPECT_EQ(s.dy, (Vec2{1, 1}));
}

TEST(StepPolicy, RayReflection) {
    const PolicyStep s = step_policy(PolicySpec::ray(2.0), {1, 4}, {0, 0});
    EXPECT_EQ(s.state, (Vec2{2, 4}));
    EXPECT_EQ(s.dy, (Vec2{1, 0}));
}

TEST(StepPolicy, ZeroBoundaryMatchesAxis) {
    const PolicySpec fb = PolicySpec::free_boundary(flat_boundary(0.0), 2.0);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n;
    Vec2 a{0.5, 0.5}, b = a;
    for (int k = 0; k < 1000; ++k) {
        const Vec2 inc{0.3 * n(rng), 0.3 * n(rng)};
        a = step_policy(fb, a, inc).state;
        b = step_policy(PolicySpec::axis(), b, inc).state;
        ASSERT_EQ(a, b);
    }
}

TEST(StepPolicy, RejectsStateOutsideQuadrant) {
    EXPECT_THROW(step_policy(PolicySpec::axis(), {-1, 0}, {0, 0}), InvalidArgument);
}

TEST(PolicySpec, RejectsBadParameters) {
    EXPECT_THROW(PolicySpec::scaled_ray(2.0, 0.0), InvalidArgument);
    EXPECT_THROW(PolicySpec::ray(-1.0), InvalidArgument);
    EXPECT_THROW(PolicySpec::free_boundary(nullptr, 2.0), InvalidArgument);
    auto deg = std::make_shared<Boundary>(*flat_boundary(0.0));
    deg->degenerate = true;
    EXPECT_THROW(PolicySpec::free_boundary(deg, 2.0), DegenerateModeError);
}

TEST(InitialJump, MovesOntoBarrier) {
    EXPECT_EQ(initial_jump(PolicySpec::ray(2.0), {1, 4}), (Vec2{1, 0}));
    EXPECT_EQ(initial_jump(PolicySpec::ray(2.0), {3, 4}), (Vec2{0, 0}));
    EXPECT_EQ(initial_jump(PolicySpec::scaled_ray(2.0, 0.5), {0, 4}), (Vec2{1, 0}));
}

// Pathwise: the controlled state stays right of the barrier and above the
// axis, pushes are nondecreasing, and each push happens only on the
// barrier.
TEST(ControlledPath, FeasibleAndComplementary) {
    const PolicySpec policies[] = {PolicySpec::axis(), PolicySpec::ray(2.0),
                                   PolicySpec::scaled_boundary(flat_boundary(0.75), 2.0, 2.0)};
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> unit;
    for (int trial = 0; trial < 60; ++trial) {
        const PolicySpec& pol = policies[trial % 3];
        const Vec2 x{3.0 * unit(rng), 3.0 * unit(rng)};
        const ControlledPath p = simulate_controlled_path(ModelParams{}, pol, x, 1e-2, 500,
                                                          static_cast<std::uint64_t>(trial));
        for (std::size_t k = 0; k < p.x_vals.size(); ++k) {
            const Vec2& s = p.x_vals[k];
            ASSERT_GE(s[1], 0.0);
            ASSERT_GE(s[0], pol.barrier(s[1]) - 1e-12);
            if (k == 0) continue;
            const double d1 = p.y_vals[k][0] - p.y_vals[k - 1][0];
            const double d2 = p.y_vals[k][1] - p.y_vals[k - 1][1];
            ASSERT_GE(d1, 0.0);
            ASSERT_GE(d2, 0.0);
            if (d1 > 0.0) {
                ASSERT_NEAR(s[0], pol.barrier(s[1]), 1e-12);
            }
            if (d2 > 0.0) {
                ASSERT_EQ(s[1], 0.0);
            }
        }
    }
}

// alpha = beta = (0, 1): the cost is X2, a reflected Brownian motion, so
// J equals the one-dimensional resolvent.
TEST(EvaluatePolicy, MatchesOneDimensionalResolvent) {
    ModelParams m;
    m.theta = {0.0, 0.3};
    m.sigma = {1.0, 0.0, 2.0};
    m.gamma = 0.8;
    const TwoPieceCost cost{{0.0, 1.0}, {0.0, 1.0}, 1.0};
    SimOptions opt;
    opt.dt = 1e-2;
    opt.n_paths = 20000;
    opt.seed = 12;
    const SimResult r = evaluate_policy(m, cost, PolicySpec::axis(), {1.0, 0.5}, opt);
    const double exact = oracle_1d_resolvent(0.5, 0.3, 2.0, 0.8);
    EXPECT_LE(std::abs(r.j_estimate - exact), 3.0 * r.std_error + r.tail_bound + 5e-3)
        << "mc=" << r.j_estimate << " se=" << r.std_error << " exact=" << exact;
}

TEST(EvaluatePolicy, DeterministicAcrossWorkers) {
    SimOptions opt;
    opt.dt = 1e-2;
    opt.n_paths = 200;
    opt.T = 2.0;
    opt.workers = 1;
    const CostParams cost(1, 1, 0);
    const SimResult a = evaluate_policy(ModelParams{}, cost, PolicySpec::ray(2.0), {1, 1}, opt);
    opt.workers = 3;
    const SimResult b = evaluate_policy(ModelParams{}, cost, PolicySpec::ray(2.0), {1, 1}, opt);
    EXPECT_EQ(a.j_estimate, b.j_estimate);
    EXPECT_EQ(a.std_error, b.std_error);
}

TEST(EvaluatePolicy, BatteryMatchesSingleRuns) {
    SimOptions opt;
    opt.dt = 1e-2;
    opt.n_paths = 100;
    opt.T = 3.0;
    const CostParams cost(1, 1, 0);
    const std::vector<PolicySpec> pols{PolicySpec::axis(), PolicySpec::ray(2.0)};
    const PolicyBattery bat = evaluate_policies(ModelParams{}, cost, pols, {1, 1}, opt);
    for (std::size_t q = 0; q < pols.size(); ++q)
        EXPECT_EQ(bat.results[q].j_estimate,
                  evaluate_policy(ModelParams{}, cost, pols[q], {1, 1}, opt).j_estimate);
    const MeanError d = bat.difference(0, 1);
    EXPECT_NEAR(d.mean, bat.results[0].j_estimate - bat.results[1].j_estimate, 1e-12);
}

TEST(EvaluatePolicy, CostIsNonnegative) {
    SimOptions opt;
    opt.dt = 1e-2;
    opt.n_paths = 200;
    const CostParams cost(1, 1, 0);
    for (const Vec2 x : {Vec2{0, 0}, Vec2{0, 3}, Vec2{2, 1}}) {
        const PolicyBattery bat = evaluate_policies(
            ModelParams{}, cost, {PolicySpec::axis(), PolicySpec::ray(2.0)}, x, opt);
        for (const auto& row : bat.per_path)
            for (double v : row) ASSERT_GE(v, 0.0);
    }
}

TEST(EvaluatePolicy, RejectsBadOptions) {
    SimOptions opt;
    opt.dt = 0.0;
    EXPECT_THROW(evaluate_policy(ModelParams{}, CostParams(1, 1, 0), PolicySpec::axis(), {1, 1}, opt),
                 InvalidArgument);
    opt.dt = 1e-2;
    opt.n_paths = 1;
    EXPECT_THROW(evaluate_policy(ModelParams{}, CostParams(1, 1, 0), PolicySpec::axis(), {1, 1}, opt),
                 InvalidArgument);
}

TEST(TailBound, DecreasesAndHorizonMeetsTolerance) {
    const ModelParams m;
    double prev = tail_bound(m, 1.0, {1, 1}, 0.5, 0.0, 1.0);
    for (double T = 2.0; T <= 30.0; T += 1.0) {
        const double t = tail_bound(m, 1.0, {1, 1}, 0.5, 0.0, T);
        EXPECT_LT(t, prev);
        prev = t;
    }
    const double T = default_horizon(m, 1.0, {1, 1}, 0.5, 0.0, 1e-4);
    EXPECT_LE(tail_bound(m, 1.0, {1, 1}, 0.5, 0.0, T), 1e-4);
    EXPECT_GT(tail_bound(m, 1.0, {1, 1}, 0.5, 0.0, 0.99 * T), 1e-4);
}

TEST(SimCsv, Header) {
    std::ostringstream os;
    write_sim_csv(os, {});
    EXPECT_EQ(os.str(), "policy,x1,x2,j,stderr,tail_bound,n_paths,dt,T,seed\n");
    std::ostringstream ps;
    write_path_csv(ps, simulate_controlled_path(ModelParams{}, PolicySpec::axis(), {1, 1}, 0.1, 2, 1));
    EXPECT_EQ(ps.str().substr(0, 14), "t,x1,x2,y1,y2\n");
}
