#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "freebound/errors.hpp"
#include "freebound/grid.hpp"
#include "freebound/model.hpp"
#include "freebound/stencil.hpp"

namespace freebound {

enum class SolverMethod { policy_iteration, psor };

inline const char* to_string(SolverMethod m) {
    return m == SolverMethod::policy_iteration ? "policy-iteration" : "psor";
}

struct SolverOptions {
    SolverMethod method = SolverMethod::policy_iteration;
    /// Sup-norm change between successive iterates that ends the iteration.
    double tol = 1e-8;
    std::size_t max_iters = 100000;
    /// Relaxation factor of projected SOR.
    double omega = 1.5;
    /// Solve on the half-resolution grid first and start from its
    /// interpolated solution.
    bool nested = true;
};

struct SolveStats {
    SolverMethod method = SolverMethod::policy_iteration;
    std::size_t iterations = 0;
    double last_change = 0.0;
    /// Sup norm of the discrete complementarity residual at exit.
    double residual = 0.0;
    double seconds = 0.0;
};

/// Per-node decision of the discrete control problem.
enum class Action : std::uint8_t { diffuse, obstacle, push_e1, push_e2, fixed };

enum class Sense { maximize, minimize };

/// Discrete dynamic program on a grid:
///
///   v = opt{ D v,  obstacle,  v(node + h1 e1),  v(node + h2 e2) }
///
/// where D v = (f + sum w v_k) / diag is the monotone diffusion backup and
/// only the enabled alternatives compete. `fixed` nodes keep `fixed_value`.
struct ControlProblem {
    ModelParams model;
    GridSpec grid;
    EdgeRules rules;
    Sense sense = Sense::minimize;
    std::vector<double> source;
    std::optional<double> obstacle;
    bool push_e1 = false;
    bool push_e2 = false;
    std::vector<char> fixed;
    std::vector<double> fixed_value;
};

struct ControlSolution {
    std::vector<double> values;
    std::vector<Action> actions;
    SolveStats stats;
};

namespace detail {

class ControlKernel {
public:
    explicit ControlKernel(const ControlProblem& p) : p_(p) {
        const auto& g = p.grid;
        if (p.source.size() != g.nodes()) throw InvalidArgument("control: source size mismatch");
        fixed_.assign(g.nodes(), 0);
        if (!p.fixed.empty()) fixed_ = p.fixed;
        rows_.resize(g.nodes());
        for (std::size_t j = 0; j <= g.n2; ++j)
            for (std::size_t i = 0; i <= g.n1; ++i) {
                const auto k = g.index(i, j);
                if (!fixed_[k]) rows_[k] = monotone_row(p.model, g, p.rules, i, j);
            }
    }

    bool has_e1(std::size_t k) const { return p_.push_e1 && k % (p_.grid.n1 + 1) != p_.grid.n1; }
    bool has_e2(std::size_t k) const { return p_.push_e2 && k / (p_.grid.n1 + 1) != p_.grid.n2; }
    std::size_t e1(std::size_t k) const { return k + 1; }
    std::size_t e2(std::size_t k) const { return k + p_.grid.n1 + 1; }

    double candidate(Action a, std::size_t k, const std::vector<double>& v) const {
        switch (a) {
            case Action::diffuse: return rows_[k].backup(v, p_.source[k]);
            case Action::obstacle: return *p_.obstacle;
            case Action::push_e1: return v[e1(k)];
            case Action::push_e2: return v[e2(k)];
            case Action::fixed: return v[k];
        }
        return v[k];
    }

    bool better(double a, double b, double eps) const {
        return p_.sense == Sense::maximize ? a > b + eps : a < b - eps;
    }

    /// Greedy action at node k. Alternatives are scanned in the order
    /// diffuse, obstacle, push e1, push e2 and a later one wins only when
    /// strictly better; `sticky` keeps the current action unless beaten.
    Action greedy(std::size_t k, const std::vector<double>& v, Action current, bool sticky) const {
        if (fixed_[k]) return Action::fixed;
        const double eps = 1e-11 * (1.0 + std::abs(v[k]));
        Action best = Action::diffuse;
        double best_val = candidate(best, k, v);
        auto consider = [&](Action a) {
            const double val = candidate(a, k, v);
            if (better(val, best_val, eps)) {
                best = a;
                best_val = val;
            }
        };
        if (p_.obstacle) consider(Action::obstacle);
        if (has_e1(k)) consider(Action::push_e1);
        if (has_e2(k)) consider(Action::push_e2);
        if (sticky && current != Action::fixed && best != current) {
            if (!better(best_val, candidate(current, k, v), eps)) return current;
        }
        return best;
    }

    /// Sup norm of the complementarity residual: min(F, v - obstacle) for
    /// maximization, max(F, v - v(e1), v - v(e2)) for minimization, where
    /// F is the diffusion-row residual.
    double residual(const std::vector<double>& v) const {
        double worst = 0.0;
        for (std::size_t k = 0; k < v.size(); ++k) {
            if (fixed_[k]) continue;
            const double F = rows_[k].residual(v, k, p_.source[k]);
            double r = F;
            if (p_.sense == Sense::maximize) {
                if (p_.obstacle) r = std::min(r, v[k] - *p_.obstacle);
            } else {
                if (has_e1(k)) r = std::max(r, v[k] - v[e1(k)]);
                if (has_e2(k)) r = std::max(r, v[k] - v[e2(k)]);
            }
            worst = std::max(worst, std::abs(r));
        }
        return worst;
    }

    std::vector<double> start_values(const std::optional<std::vector<double>>& initial) const {
        std::vector<double> v(p_.grid.nodes(), 0.0);
        if (initial) v = *initial;
        for (std::size_t k = 0; k < v.size(); ++k)
            if (fixed_[k]) v[k] = p_.fixed_value.empty() ? 0.0 : p_.fixed_value[k];
        return v;
    }

    ControlSolution policy_iteration(const SolverOptions& opt,
                                     const std::optional<std::vector<double>>& initial) const {
        const std::size_t N = p_.grid.nodes();
        std::vector<double> v = start_values(initial);
        std::vector<Action> actions(N, Action::diffuse);
        for (std::size_t k = 0; k < N; ++k)
            actions[k] = initial ? greedy(k, v, Action::diffuse, false)
                                 : (fixed_[k] ? Action::fixed : Action::diffuse);

        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        bool analyzed = false;
        std::vector<Eigen::Triplet<double>> trip;
        Eigen::VectorXd rhs(static_cast<Eigen::Index>(N));
        SolveStats stats;
        stats.method = SolverMethod::policy_iteration;

        for (std::size_t it = 1;; ++it) {
            trip.clear();
            for (std::size_t k = 0; k < N; ++k) assemble(k, actions[k], trip, rhs);
            Eigen::SparseMatrix<double> A(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
            A.setFromTriplets(trip.begin(), trip.end());
            A.makeCompressed();
            if (!analyzed) {
                lu.analyzePattern(A);
                analyzed = true;
            }
            lu.factorize(A);
            if (lu.info() != Eigen::Success)
                throw ConvergenceError("policy iteration: singular policy system", it,
                                       stats.last_change);
            const Eigen::VectorXd sol = lu.solve(rhs);
            double change = 0.0;
            for (std::size_t k = 0; k < N; ++k) {
                change = std::max(change, std::abs(sol[static_cast<Eigen::Index>(k)] - v[k]));
                v[k] = sol[static_cast<Eigen::Index>(k)];
            }
            stats.iterations = it;
            stats.last_change = change;

            bool stable = true;
            for (std::size_t k = 0; k < N; ++k) {
                const Action next = greedy(k, v, actions[k], true);
                if (next != actions[k]) {
                    actions[k] = next;
                    stable = false;
                }
            }
            if (stable || (it > 1 && change < opt.tol)) break;
            if (it >= opt.max_iters)
                throw ConvergenceError("policy iteration did not converge", it, change);
        }
        return finish(std::move(v), stats);
    }

    ControlSolution psor(const SolverOptions& opt,
                         const std::optional<std::vector<double>>& initial) const {
        const std::size_t N = p_.grid.nodes();
        std::vector<double> v = start_values(initial);
        SolveStats stats;
        stats.method = SolverMethod::psor;
        const double w = opt.omega;
        for (std::size_t it = 1;; ++it) {
            double change = 0.0;
            for (std::size_t k = 0; k < N; ++k) {
                if (fixed_[k]) continue;
                const double old = v[k];
                double next = old + w * (rows_[k].backup(v, p_.source[k]) - old);
                if (p_.sense == Sense::maximize) {
                    if (p_.obstacle) next = std::max(next, *p_.obstacle);
                } else {
                    if (has_e1(k)) next = std::min(next, v[e1(k)]);
                    if (has_e2(k)) next = std::min(next, v[e2(k)]);
                }
                v[k] = next;
                change = std::max(change, std::abs(next - old));
            }
            stats.iterations = it;
            stats.last_change = change;
            if (change < opt.tol) break;
            if (it >= opt.max_iters)
                throw ConvergenceError("projected SOR did not converge", it, change);
        }
        return finish(std::move(v), stats);
    }

private:
    void assemble(std::size_t k, Action a, std::vector<Eigen::Triplet<double>>& trip,
                  Eigen::VectorXd& rhs) const {
        const auto r = static_cast<Eigen::Index>(k);
        auto col = [](std::size_t c) { return static_cast<Eigen::Index>(c); };
        if (fixed_[k]) {
            trip.emplace_back(r, r, 1.0);
            rhs[r] = p_.fixed_value.empty() ? 0.0 : p_.fixed_value[k];
            return;
        }
        // The sparsity pattern is the same for every policy so the symbolic
        // analysis is done once.
        const StencilRow& row = rows_[k];
        const bool diffuse = a == Action::diffuse;
        trip.emplace_back(r, r, diffuse ? row.diag : 1.0);
        for (std::size_t e = 0; e < row.count; ++e)
            trip.emplace_back(r, col(row.entries[e].index), diffuse ? -row.entries[e].weight : 0.0);
        if (has_e1(k)) trip.emplace_back(r, col(e1(k)), a == Action::push_e1 ? -1.0 : 0.0);
        if (has_e2(k)) trip.emplace_back(r, col(e2(k)), a == Action::push_e2 ? -1.0 : 0.0);
        switch (a) {
            case Action::diffuse: rhs[r] = p_.source[k]; break;
            case Action::obstacle: rhs[r] = *p_.obstacle; break;
            default: rhs[r] = 0.0; break;
        }
    }

    ControlSolution finish(std::vector<double> v, SolveStats stats) const {
        ControlSolution out;
        out.actions.resize(v.size());
        for (std::size_t k = 0; k < v.size(); ++k) {
            // The direct solve leaves roundoff on prescribed nodes.
            if (fixed_[k]) v[k] = p_.fixed_value.empty() ? 0.0 : p_.fixed_value[k];
            out.actions[k] = greedy(k, v, Action::diffuse, false);
        }
        stats.residual = residual(v);
        out.values = std::move(v);
        out.stats = stats;
        return out;
    }

    const ControlProblem& p_;
    std::vector<char> fixed_;
    std::vector<StencilRow> rows_;
};

/// Bilinear prolongation of a solution from a half-resolution grid.
inline std::vector<double> prolong(const ScalarField& coarse, const GridSpec& fine) {
    std::vector<double> out(fine.nodes());
    for (std::size_t j = 0; j <= fine.n2; ++j)
        for (std::size_t i = 0; i <= fine.n1; ++i)
            out[fine.index(i, j)] = coarse.interpolate(fine.x1(i), fine.x2(j));
    return out;
}

}  // namespace detail

inline ControlSolution solve_control(const ControlProblem& problem, const SolverOptions& opt,
                                     const std::optional<std::vector<double>>& initial = {}) {
    if (!(opt.tol > 0.0)) throw InvalidArgument("solver: tol must be positive");
    if (opt.max_iters == 0) throw InvalidArgument("solver: max_iters must be positive");
    if (opt.method == SolverMethod::psor && !(opt.omega > 0.0 && opt.omega < 2.0))
        throw InvalidArgument("solver: omega must lie in (0, 2)");
    const auto t0 = std::chrono::steady_clock::now();
    detail::ControlKernel kernel(problem);
    ControlSolution sol = opt.method == SolverMethod::policy_iteration
                              ? kernel.policy_iteration(opt, initial)
                              : kernel.psor(opt, initial);
    sol.stats.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return sol;
}

/// Solves the problem produced by `build(grid)`, first on successively
/// halved grids when `opt.nested` is set, each level starting from the
/// interpolated solution of the level below. Only the finest level's
/// statistics are returned; `iterations` counts the finest level only.
template <typename Builder>
ControlSolution solve_nested(const GridSpec& grid, const Builder& build, const SolverOptions& opt,
                             std::size_t min_cells = 32) {
    const ControlProblem problem = build(grid);
    std::optional<std::vector<double>> initial;
    const bool halvable = grid.n1 % 2 == 0 && grid.n2 % 2 == 0 && grid.n1 / 2 >= min_cells &&
                          grid.n2 / 2 >= min_cells;
    if (opt.nested && halvable) {
        const GridSpec coarse{grid.L1, grid.L2, grid.n1 / 2, grid.n2 / 2};
        ControlSolution low = solve_nested(coarse, build, opt, min_cells);
        ScalarField field(coarse, FieldKind::residual);
        field.values = std::move(low.values);
        initial = detail::prolong(field, grid);
    }
    return solve_control(problem, opt, initial);
}

}  // namespace freebound
