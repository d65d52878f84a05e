#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "freebound/control.hpp"
#include "freebound/errors.hpp"
#include "freebound/grid.hpp"
#include "freebound/model.hpp"
#include "freebound/parallel.hpp"
#include "freebound/paths.hpp"
#include "freebound/rng.hpp"
#include "freebound/stencil.hpp"

namespace freebound {

/// Closure of the stopping problem on the artificial far edges.
enum class FarField {
    /// Zero normal derivative on x1 = L1 and x2 = L2.
    neumann,
    /// Zero normal derivative on x1 = L1; u taken to be linear across
    /// x2 = L2, the closure that matches the one used for V.
    linear,
    /// u = 0 on x2 = L2, zero normal derivative on x1 = L1.
    dirichlet,
};

inline const char* to_string(FarField f) {
    switch (f) {
        case FarField::neumann: return "neumann";
        case FarField::linear: return "linear";
        case FarField::dirichlet: return "dirichlet";
    }
    return "?";
}

struct StoppingSolution {
    ScalarField u;
    SolveStats stats;
};

namespace detail {

inline ControlProblem stopping_problem(const ModelParams& model, const CostParams& cost,
                                       const GridSpec& grid, FarField far) {
    ControlProblem p;
    p.model = model;
    p.grid = grid;
    p.sense = Sense::maximize;
    p.obstacle = 0.0;
    p.rules.x1_low = EdgeRule::fixed;
    p.rules.x2_low = EdgeRule::reflect;
    p.rules.x1_high = EdgeRule::reflect;
    p.rules.x2_high = far == FarField::neumann     ? EdgeRule::reflect
                      : far == FarField::linear    ? EdgeRule::extrapolate
                                                   : EdgeRule::fixed;
    p.source.resize(grid.nodes());
    p.fixed.assign(grid.nodes(), 0);
    p.fixed_value.assign(grid.nodes(), 0.0);
    for (std::size_t j = 0; j <= grid.n2; ++j)
        for (std::size_t i = 0; i <= grid.n1; ++i) {
            const auto k = grid.index(i, j);
            p.source[k] = cost.ellhat({grid.x1(i), grid.x2(j)});
            if (i == 0 || (j == grid.n2 && far == FarField::dirichlet)) p.fixed[k] = 1;
        }
    return p;
}

}  // namespace detail

/// Solves  min{ gamma u + A u - lhat, u } = 0  with u = 0 on x1 = 0 and
/// reflection on x2 = 0.
inline StoppingSolution solve_u(const ModelParams& model, const CostParams& cost,
                                const GridSpec& grid, const SolverOptions& opt = {},
                                FarField far = FarField::linear) {
    validate_model(model);
    grid.validate();
    require_monotone(model, grid);
    auto build = [&](const GridSpec& g) { return detail::stopping_problem(model, cost, g, far); };
    ControlSolution sol = solve_nested(grid, build, opt);
    StoppingSolution out{ScalarField(grid, FieldKind::u), sol.stats};
    out.u.values = std::move(sol.values);
    // Policy values are exact solutions of the linear system; clip the
    // roundoff-level negatives the obstacle allows.
    for (double& v : out.u.values) v = std::max(v, 0.0);
    return out;
}

/// Columns x1 = x1(i) along which u never drops to `tol` inside the domain.
struct RowZeroReport {
    bool ok = true;
    std::vector<std::size_t> failing_columns;
};

inline RowZeroReport row_zero_check(const ScalarField& u, double tol) {
    RowZeroReport r;
    const auto& g = u.grid;
    for (std::size_t i = 0; i <= g.n1; ++i) {
        bool reached = false;
        for (std::size_t j = 0; j <= g.n2 && !reached; ++j) reached = u.at(i, j) <= tol;
        if (!reached) r.failing_columns.push_back(i);
    }
    r.ok = r.failing_columns.empty();
    return r;
}

struct AutoStoppingSolution {
    StoppingSolution solution;
    RowZeroReport zero_check;
    /// Number of times L2 (and n2, keeping h2) was doubled.
    std::size_t doublings = 0;
};

/// solve_u, doubling L2 up to `max_doublings` times until every column of
/// the grid reaches the stopping region.
inline AutoStoppingSolution solve_u_auto(const ModelParams& model, const CostParams& cost,
                                         GridSpec grid, const SolverOptions& opt = {},
                                         FarField far = FarField::linear,
                                         std::size_t max_doublings = 3) {
    const double tol = 10.0 * opt.tol;
    for (std::size_t d = 0;; ++d) {
        StoppingSolution sol = solve_u(model, cost, grid, opt, far);
        RowZeroReport check = row_zero_check(sol.u, tol);
        if (check.ok || d == max_doublings) return {std::move(sol), std::move(check), d};
        grid.L2 *= 2.0;
        grid.n2 *= 2;
    }
}

/// Restriction of a field on an enlarged grid back to `target`, which must
/// share the origin and mesh widths and fit inside.
inline ScalarField restrict_to(const ScalarField& f, const GridSpec& target) {
    const auto& g = f.grid;
    if (std::abs(g.h1() - target.h1()) > 1e-12 || std::abs(g.h2() - target.h2()) > 1e-12 ||
        target.n1 > g.n1 || target.n2 > g.n2)
        throw GridMismatch("restrict_to: target grid is not a sub-grid");
    ScalarField out(target, f.kind);
    for (std::size_t j = 0; j <= target.n2; ++j)
        for (std::size_t i = 0; i <= target.n1; ++i) out.at(i, j) = f.at(i, j);
    return out;
}

/// Structural checks on a solved u.
struct StoppingReport {
    double min_value = 0.0;
    double max_x1_zero_column = 0.0;
    /// Largest decrease of u along a row (increasing x1).
    double max_row_decrease = 0.0;
    /// Largest increase of u along a column (increasing x2).
    double max_column_increase = 0.0;
    double residual = 0.0;
};

inline StoppingReport check_u(const StoppingSolution& sol) {
    const auto& u = sol.u;
    const auto& g = u.grid;
    StoppingReport r;
    r.min_value = u.min();
    r.residual = sol.stats.residual;
    for (std::size_t j = 0; j <= g.n2; ++j) {
        r.max_x1_zero_column = std::max(r.max_x1_zero_column, std::abs(u.at(0, j)));
        for (std::size_t i = 0; i < g.n1; ++i)
            r.max_row_decrease = std::max(r.max_row_decrease, u.at(i, j) - u.at(i + 1, j));
    }
    for (std::size_t j = 0; j < g.n2; ++j)
        for (std::size_t i = 0; i <= g.n1; ++i)
            r.max_column_increase = std::max(r.max_column_increase, u.at(i, j + 1) - u.at(i, j));
    return r;
}

/// Sup-norm gaps between the default closure of the x2 = L2 edge and the
/// zero-Neumann and zero-Dirichlet alternatives.
struct FarFieldDiagnostic {
    double neumann_inner = 0.0;
    double neumann_full = 0.0;
    double dirichlet_inner = 0.0;
    double dirichlet_full = 0.0;
};

inline FarFieldDiagnostic far_field_discrepancy(const ModelParams& model, const CostParams& cost,
                                                const GridSpec& grid,
                                                const SolverOptions& opt = {}) {
    const ScalarField base = solve_u(model, cost, grid, opt, FarField::linear).u;
    const IndexWindow w = inner_window(grid);
    auto gaps = [&](FarField far, double& inner, double& full) {
        const ScalarField alt = solve_u(model, cost, grid, opt, far).u;
        for (std::size_t j = 0; j <= grid.n2; ++j)
            for (std::size_t i = 0; i <= grid.n1; ++i) {
                const double gap = std::abs(base.at(i, j) - alt.at(i, j));
                full = std::max(full, gap);
                if (w.contains(i, j)) inner = std::max(inner, gap);
            }
    };
    FarFieldDiagnostic d;
    gaps(FarField::neumann, d.neumann_inner, d.neumann_full);
    gaps(FarField::dirichlet, d.dirichlet_inner, d.dirichlet_full);
    return d;
}

struct StoppingMcOptions {
    double dt = 1e-3;
    /// Simulation horizon; 0 selects ln(1e5) / gamma.
    double T = 0.0;
    std::size_t n_paths = 10000;
    std::uint64_t seed = 1;
    std::size_t workers = 1;
};

struct StoppingMcResult {
    double estimate = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
    std::size_t exited = 0;
    /// More than 10% of the paths left the grid before stopping.
    bool exit_warning = false;
    /// Bound on the discounted payoff beyond the horizon.
    double tail_bound = 0.0;
    double T = 0.0;
};

/// Monte Carlo value of the rule "stop at absorption of Z1 or as soon as
/// u(Z) <= eps" with u read off `u_field` by bilinear interpolation.
/// Paths that leave the grid are stopped there and counted.
inline StoppingMcResult mc_estimate_u(const ModelParams& model, const CostParams& cost,
                                      const ScalarField& u_field, const Vec2& x, double eps,
                                      const StoppingMcOptions& opt = {}) {
    validate_model(model);
    detail::require_quadrant(x);
    require_positive_dt(opt.dt);
    if (!(eps > 0.0)) throw InvalidArgument("mc_estimate_u: eps must be positive");
    if (opt.n_paths == 0) throw InvalidArgument("mc_estimate_u: n_paths must be positive");
    const double T = opt.T > 0.0 ? opt.T : std::log(1e5) / model.gamma;
    const auto steps = static_cast<std::size_t>(std::ceil(T / opt.dt));
    const auto& g = u_field.grid;
    const double decay = std::exp(-model.gamma * opt.dt);

    std::vector<double> payoff(opt.n_paths, 0.0);
    std::vector<char> exited(opt.n_paths, 0);
    parallel_for(opt.n_paths, opt.workers, [&](std::size_t p) {
        Vec2 z = x;
        if (z[0] <= 0.0 || u_field.interpolate(z) <= eps) return;
        IncrementSource src(model, opt.dt, path_seed(opt.seed, p));
        double disc = 1.0;
        double acc = 0.0;
        for (std::size_t k = 0; k < steps; ++k) {
            const double lhat = cost.ellhat(z);
            const Increment inc = src.next();
            const double z1_next = z[0] + inc.d1;
            if (z1_next <= 0.0) {
                const double frac = z[0] / (z[0] - z1_next);
                acc += disc * lhat * frac * opt.dt;
                break;
            }
            acc += disc * lhat * opt.dt;
            disc *= decay;
            z[0] = z1_next;
            reflect_against(z[1], inc.d2, 0.0, src.variance(1), true, [&] { return src.min2(); });
            if (z[0] > g.L1 || z[1] > g.L2) {
                exited[p] = 1;
                break;
            }
            if (u_field.interpolate(z) <= eps) break;
        }
        payoff[p] = acc;
    });
    const MeanError me = mean_error(payoff);
    StoppingMcResult r;
    r.estimate = me.mean;
    r.std_error = me.std_error;
    r.n_paths = opt.n_paths;
    for (char e : exited) r.exited += e ? 1 : 0;
    r.exit_warning = static_cast<double>(r.exited) > 0.1 * static_cast<double>(opt.n_paths);
    r.T = T;
    r.tail_bound = std::max(cost.a(), cost.b1()) * std::exp(-model.gamma * T) / model.gamma;
    return r;
}

}  // namespace freebound
