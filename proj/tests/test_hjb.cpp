#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "freebound/hjb.hpp"
#include "freebound/stopping.hpp"

using namespace freebound;

namespace {

const CostParams fixture_cost(1, 1, 0);

// V on the fixture at 512 x 512 cells over [0, 8]^2 (policy iteration,
// tol 1e-8), read by bilinear interpolation.
struct Frozen {
    Vec2 x;
    double v;
};
const Frozen frozen_v512[] = {{{2.0, 1.0}, 2.0999351292},
                              {{1.0, 3.0}, 2.0491198441},
                              {{0.5, 0.5}, 1.0163556381},
                              {{4.0, 4.0}, 4.0471253442},
                              {{0.0, 0.0}, 0.8599127037}};

const HjbSolution& fixture_v(std::size_t n) {
    static std::map<std::size_t, HjbSolution> cache;
    auto it = cache.find(n);
    if (it == cache.end())
        it = cache.emplace(n, solve_v(ModelParams{}, fixture_cost, {8, 8, n, n})).first;
    return it->second;
}

// l(z) = level * gamma everywhere, so V = level solves the equation.
struct ConstantCost {
    double level;
    double ell(const Vec2&) const { return level; }
    double growth() const { return 0.0; }
};

}  // namespace

TEST(HjbResidual, VanishesOnExactConstantSolution) {
    const GridSpec g{4, 4, 16, 16};
    const ScalarField v(g, FieldKind::V, 3.0);
    const ScalarField u(g, FieldKind::u, 0.0);
    Boundary b;
    b.x2_grid.assign(g.n2 + 1, 0.0);
    for (std::size_t j = 0; j <= g.n2; ++j) b.x2_grid[j] = g.x2(j);
    b.psi.assign(g.n2 + 1, 0.0);
    ModelParams m;
    m.gamma = 0.5;
    std::size_t counted = 0;
    const ScalarField r = hjb_residual(m, ConstantCost{1.5}, v, u, b);
    EXPECT_LE(residual_sup(r, &counted), 1e-12);
    EXPECT_GT(counted, 0u);
}

TEST(HjbResidual, ExcludesNodesLeftOfBoundaryAndNearEdges) {
    const GridSpec g{4, 4, 16, 16};
    const ScalarField v(g, FieldKind::V, 1.0);
    Boundary b;
    for (std::size_t j = 0; j <= g.n2; ++j) b.x2_grid.push_back(g.x2(j));
    b.psi.assign(g.n2 + 1, 2.0);
    const ScalarField r = hjb_residual(ModelParams{}, ConstantCost{1.0}, v, v, b);
    EXPECT_TRUE(std::isnan(r.at(4, 8)));   // x1 = 1 < psi
    EXPECT_TRUE(std::isnan(r.at(10, 0)));  // on the x2 axis
    EXPECT_TRUE(std::isnan(r.at(10, 15))); // next to the far edge
    EXPECT_FALSE(std::isnan(r.at(10, 8)));
}

TEST(HjbResidual, RejectsMismatchedBoundary) {
    const GridSpec g{4, 4, 16, 16};
    const ScalarField v(g, FieldKind::V, 1.0);
    Boundary b;
    b.psi.assign(3, 0.0);
    b.x2_grid.assign(3, 0.0);
    EXPECT_THROW(hjb_residual(ModelParams{}, ConstantCost{1.0}, v, v, b), GridMismatch);
}

TEST(SolveV, NonnegativeAndPositiveAtOrigin) {
    const HjbSolution& s = fixture_v(64);
    EXPECT_GE(s.V.min(), 0.0);
    EXPECT_GT(s.V.at(0, 0), 0.0);
}

TEST(SolveV, ConvergesToFrozenFineGrid) {
    for (const auto& f : frozen_v512) {
        const double e64 = std::abs(fixture_v(64).V.interpolate(f.x) - f.v);
        const double e256 = std::abs(fixture_v(256).V.interpolate(f.x) - f.v);
        EXPECT_LE(e256, 1e-4) << f.x[0] << "," << f.x[1];
        EXPECT_LE(e256, e64 + 1e-7) << f.x[0] << "," << f.x[1];
    }
}

TEST(SolveV, DominatedByAxisReflectionCostAtOrigin) {
    // Normal reflection from the origin costs
    //   E int e^{-t} (-X1 + X2) dt  on the upper piece, and is at most
    // E int e^{-t} (X1 + X2) dt = 2 f(0) for the 1D reflected resolvent f.
    const double f0 = 1.0 / std::sqrt(2.0);
    EXPECT_LE(fixture_v(128).V.at(0, 0), 2.0 * f0);
}

TEST(SolveV, PushesConcentrateLeftOfBoundary) {
    const HjbSolution& s = fixture_v(64);
    const auto& g = s.V.grid;
    // Near the x2 axis with x2 large the optimal move is to push along e1.
    EXPECT_EQ(s.actions[g.index(0, 40)], Action::push_e1);
    // Far right of the kink ray nothing is pushed.
    const Action a = s.actions[g.index(40, 8)];
    EXPECT_TRUE(a == Action::diffuse) << static_cast<int>(a);
}

TEST(SolveV, NormalCostPushesOnlyAtEdges) {
    // Nonnegative gradients on both pieces: moving right or up never helps
    // in the interior.
    const TwoPieceCost cost{{1.0, 1.0}, {2.0, 0.5}, 2.0};
    const HjbSolution s = solve_v(ModelParams{}, cost, {8, 8, 64, 64});
    EXPECT_EQ(push_active_set(s).interior_push_nodes, 0u);
}

TEST(SolveV, ReportsNonConvergence) {
    SolverOptions opt;
    opt.method = SolverMethod::psor;
    opt.max_iters = 2;
    opt.nested = false;
    EXPECT_THROW(solve_v(ModelParams{}, fixture_cost, {8, 8, 32, 32}, opt), ConvergenceError);
}

TEST(SolveV, ResidualSmallInNoActionRegion) {
    const HjbSolution& s = fixture_v(128);
    const ScalarField u = solve_u(ModelParams{}, fixture_cost, s.V.grid).u;
    const Boundary b = extract_boundary(u, 1e-7);
    const ScalarField r = hjb_residual(ModelParams{}, fixture_cost, s.V, u, b);
    EXPECT_LE(residual_sup(r), 10.0 * s.V.grid.h1());
}
