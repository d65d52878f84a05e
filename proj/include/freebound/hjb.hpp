#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "freebound/boundary.hpp"
#include "freebound/control.hpp"
#include "freebound/errors.hpp"
#include "freebound/grid.hpp"
#include "freebound/model.hpp"
#include "freebound/stencil.hpp"

namespace freebound {

struct HjbSolution {
    ScalarField V;
    std::vector<Action> actions;
    SolveStats stats;
};

namespace detail {

template <RunningCost Cost>
ControlProblem control_problem(const ModelParams& model, const Cost& cost, const GridSpec& grid) {
    ControlProblem p;
    p.model = model;
    p.grid = grid;
    p.sense = Sense::minimize;
    p.push_e1 = true;
    p.push_e2 = true;
    p.rules = EdgeRules{};
    p.source.resize(grid.nodes());
    for (std::size_t j = 0; j <= grid.n2; ++j)
        for (std::size_t i = 0; i <= grid.n1; ++i)
            p.source[grid.index(i, j)] = cost.ell({grid.x1(i), grid.x2(j)});
    return p;
}

}  // namespace detail

/// Fixed point of V = min(diffusion backup, V(node + h1 e1), V(node + h2 e2)):
/// a push moves the state one cell at no cost. Both axes reflect; the far
/// edges are closed by dropping the normal second-order term and the
/// outward drift.
template <RunningCost Cost>
HjbSolution solve_v(const ModelParams& model, const Cost& cost, const GridSpec& grid,
                    const SolverOptions& opt = {}) {
    validate_model(model);
    grid.validate();
    require_monotone(model, grid);
    auto build = [&](const GridSpec& g) { return detail::control_problem(model, cost, g); };
    ControlSolution sol = solve_nested(grid, build, opt);
    HjbSolution out{ScalarField(grid, FieldKind::V), std::move(sol.actions), sol.stats};
    out.V.values = std::move(sol.values);
    return out;
}

/// Nodes where a push is strictly better than diffusing.
struct PushActiveSet {
    std::size_t push_nodes = 0;
    /// Push nodes more than one cell away from every edge of the grid.
    std::size_t interior_push_nodes = 0;
    std::size_t max_i = 0;
    std::size_t max_j = 0;
};

inline PushActiveSet push_active_set(const HjbSolution& sol) {
    const auto& g = sol.V.grid;
    PushActiveSet s;
    for (std::size_t j = 0; j <= g.n2; ++j)
        for (std::size_t i = 0; i <= g.n1; ++i) {
            const Action a = sol.actions[g.index(i, j)];
            if (a != Action::push_e1 && a != Action::push_e2) continue;
            ++s.push_nodes;
            const bool near_edge = i <= 1 || j <= 1 || i + 1 >= g.n1 || j + 1 >= g.n2;
            if (!near_edge) {
                ++s.interior_push_nodes;
                s.max_i = std::max(s.max_i, i);
                s.max_j = std::max(s.max_j, j);
            }
        }
    return s;
}

/// Residual of  gamma V + A V - l  computed with central differences at
/// nodes of the numerical no-action region {x1 > psi(x2) + h1, x2 > h2}
/// at least two cells from the far edges. Other nodes hold NaN.
template <RunningCost Cost>
ScalarField hjb_residual(const ModelParams& model, const Cost& cost, const ScalarField& v,
                         const ScalarField& u, const Boundary& boundary) {
    require_same_grid(v.grid, u.grid, "hjb_residual");
    const auto& g = v.grid;
    if (boundary.psi.size() != g.n2 + 1) throw GridMismatch("hjb_residual: boundary rows differ");
    const double h1 = g.h1(), h2 = g.h2();
    ScalarField r(g, FieldKind::residual, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t j = 2; j + 2 <= g.n2; ++j)
        for (std::size_t i = 1; i + 2 <= g.n1; ++i) {
            const double x1 = g.x1(i);
            if (!(x1 > boundary.psi[j] + h1)) continue;
            const double c = v.at(i, j);
            const double v11 = (v.at(i + 1, j) - 2.0 * c + v.at(i - 1, j)) / (h1 * h1);
            const double v22 = (v.at(i, j + 1) - 2.0 * c + v.at(i, j - 1)) / (h2 * h2);
            const double v12 = (v.at(i + 1, j + 1) - v.at(i + 1, j - 1) - v.at(i - 1, j + 1) +
                                v.at(i - 1, j - 1)) /
                               (4.0 * h1 * h2);
            const double v1 = (v.at(i + 1, j) - v.at(i - 1, j)) / (2.0 * h1);
            const double v2 = (v.at(i, j + 1) - v.at(i, j - 1)) / (2.0 * h2);
            const auto& s = model.sigma;
            const double gen = 0.5 * (s.xx * v11 + 2.0 * s.xy * v12 + s.yy * v22) +
                               model.theta[0] * v1 + model.theta[1] * v2;
            r.at(i, j) = model.gamma * c - gen - cost.ell({x1, g.x2(j)});
        }
    return r;
}

/// Largest |value| over the non-NaN nodes of a residual field.
inline double residual_sup(const ScalarField& r, std::size_t* counted = nullptr) {
    double worst = 0.0;
    std::size_t n = 0;
    for (double x : r.values)
        if (!std::isnan(x)) {
            worst = std::max(worst, std::abs(x));
            ++n;
        }
    if (counted) *counted = n;
    return worst;
}

}  // namespace freebound
