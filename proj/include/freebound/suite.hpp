#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "freebound/boundary.hpp"
#include "freebound/config.hpp"
#include "freebound/errors.hpp"
#include "freebound/hjb.hpp"
#include "freebound/model.hpp"
#include "freebound/policy.hpp"
#include "freebound/stopping.hpp"
#include "freebound/verify.hpp"

namespace freebound {

/// Acceptance criteria in report order. Checks outside these groups are
/// supplementary.
inline const std::vector<std::string>& criterion_groups() {
    static const std::vector<std::string> groups{
        "skorokhod",         "oracle-1d",      "obstacle",         "stopping-mc",
        "free-boundary",     "gradient-identity", "hjb-structure", "policy-optimality",
        "degenerate",        "regime"};
    return groups;
}

namespace detail {

class SuiteBuilder {
public:
    explicit SuiteBuilder(std::ostream* log) : log_(log), t0_(std::chrono::steady_clock::now()) {}

    void add(std::string group, std::string name, std::string property, double measured,
             double threshold, bool pass, std::string detail = {}) {
        report.records.push_back({std::move(group), std::move(name), std::move(property), measured,
                                  threshold, pass, std::move(detail)});
        if (log_) {
            const auto& r = report.records.back();
            *log_ << "  " << (r.pass ? "pass " : "FAIL ") << r.group << '/' << r.name
                  << " measured=" << r.measured << " threshold=" << r.threshold << '\n';
        }
    }

    void stage(const std::string& what) {
        if (!log_) return;
        const double s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
        *log_ << "[" << static_cast<long>(s) << "s] " << what << '\n' << std::flush;
    }

    SuiteReport report;

private:
    std::ostream* log_;
    std::chrono::steady_clock::time_point t0_;
};

template <typename... Ts>
std::string cat(const Ts&... parts) {
    std::ostringstream os;
    os.precision(6);
    (os << ... << parts);
    return os.str();
}

inline std::string point_name(const Vec2& x) { return cat("(", x[0], ",", x[1], ")"); }

/// Sup-norm gap between two fields at the nodes of the coarser one.
inline double refinement_gap(const ScalarField& coarse, const ScalarField& fine) {
    const auto& g = coarse.grid;
    const std::size_t r1 = fine.grid.n1 / g.n1, r2 = fine.grid.n2 / g.n2;
    double gap = 0.0;
    for (std::size_t j = 0; j <= g.n2; ++j)
        for (std::size_t i = 0; i <= g.n1; ++i)
            gap = std::max(gap, std::abs(coarse.at(i, j) - fine.at(r1 * i, r2 * j)));
    return gap;
}

inline GridSpec refined(const GridSpec& g) { return {g.L1, g.L2, 2 * g.n1, 2 * g.n2}; }

/// Dominance of policy 0 over every other policy of a CRN battery.
inline void add_dominance(SuiteBuilder& b, const std::string& group, const PolicyBattery& bat,
                          const Vec2& x) {
    for (std::size_t k = 1; k < bat.results.size(); ++k) {
        const MeanError d = bat.difference(0, k);
        b.add(group, cat("dominance ", point_name(x), " vs ", bat.results[k].policy),
              cat(bat.results[0].policy,
                  " costs no more than the alternative; measured J(ref) - J(alt), paired CRN"),
              d.mean, 3.0 * d.std_error, d.mean <= 3.0 * d.std_error,
              cat("J(ref)=", bat.results[0].j_estimate, " J(alt)=", bat.results[k].j_estimate,
                  " paired se=", d.std_error));
    }
}

}  // namespace detail

/// Runs every structural check on the configuration's model and grid.
/// The configuration must be in the regular mode (b1 > 0); the degenerate
/// battery is run on its own cost (b1 = 0, b2 = verify.degenerate_b2).
/// Progress lines go to `log` when given.
inline SuiteReport run_suite(const RunConfig& cfg, std::ostream* log = nullptr) {
    using detail::cat;
    using detail::point_name;
    const CostParams cost = cfg.cost();
    if (cost.degenerate())
        throw DegenerateModeError("verify: the suite needs b1 > 0; the b1 = 0 battery runs inside "
                                  "it with b2 = verify.degenerate_b2");
    const auto& vo = cfg.verify;
    const ModelParams& model = cfg.model;
    const GridSpec& grid = cfg.grid;
    const double h1 = grid.h1(), h = std::max(grid.h1(), grid.h2());
    const double grad_tol = vo.gradient_tol >= 0.0 ? vo.gradient_tol
                                                   : 20.0 * h1 + 10.0 * cfg.solver.tol;
    detail::SuiteBuilder b(log);

    b.stage("model validation");
    const ValidationReport val = validate(model, cost);
    b.add("model", "validation", "parameters admissible and monotone scheme available",
          val.monotone_scheme ? 1 : 0, 1, val.ok && val.monotone_scheme,
          cat("c=", val.c, " mode=", to_string(val.mode)));

    b.stage("skorokhod map");
    const SkorokhodReport sk = check_skorokhod(vo.skorokhod_paths, vo.skorokhod_alternatives,
                                               vo.skorokhod_steps, cfg.sim.seed);
    b.add("skorokhod", "complementarity", "pushing increases only where the reflected path is 0",
          sk.complementarity, 0.0, sk.complementarity == 0.0,
          cat(vo.skorokhod_paths, " paths"));
    b.add("skorokhod", "minimality",
          "every feasible nondecreasing pushing process dominates the Skorokhod one",
          static_cast<double>(sk.minimality_violations), 0.0, sk.minimality_violations == 0,
          cat(sk.feasible, " feasible of ", sk.alternatives, " alternatives"));

    b.stage("1D resolvent oracle");
    {
        Resolvent1dOptions o;
        o.dt = vo.oracle_dt;
        o.T = vo.oracle_T;
        o.n_paths = vo.oracle_paths;
        o.seed = cfg.sim.seed;
        o.workers = cfg.sim.workers;
        const double exact = oracle_1d_resolvent(0.0, 0.0, 1.0, 1.0);
        const MeanError mc = mc_resolvent_1d(0.0, 0.0, 1.0, 1.0, o);
        const double dev = std::abs(mc.mean - exact);
        b.add("oracle-1d", "reflected-bm-resolvent",
              "MC discounted integral of reflected BM from 0 matches the closed form", dev,
              3.0 * mc.std_error, dev <= 3.0 * mc.std_error,
              cat("mc=", mc.mean, " se=", mc.std_error, " exact=", exact));
    }

    b.stage("stopping value");
    const StoppingSolution us = solve_u(model, cost, grid, cfg.solver, cfg.far_field);
    const ScalarField& u = us.u;
    {
        const StoppingReport r = check_u(us);
        b.add("obstacle", "nonnegative", "stopping value is nonnegative", r.min_value, 0.0,
              r.min_value >= 0.0);
        b.add("obstacle", "absorbed-column", "stopping value vanishes on x1 = 0",
              r.max_x1_zero_column, 0.0, r.max_x1_zero_column == 0.0);
        b.add("obstacle", "complementarity", "min(PDE residual, u) vanishes at every node",
              r.residual, vo.complementarity_tol, r.residual <= vo.complementarity_tol,
              cat("policy iterations=", us.stats.iterations));
        b.add("obstacle", "nondecreasing-x1", "stopping value nondecreasing in x1",
              r.max_row_decrease, vo.monotone_tol, r.max_row_decrease <= vo.monotone_tol);
        b.add("obstacle", "nonincreasing-x2", "stopping value nonincreasing in x2",
              r.max_column_increase, vo.monotone_tol, r.max_column_increase <= vo.monotone_tol);
        double min_below_ray = std::numeric_limits<double>::infinity();
        const IndexWindow w = inner_window(grid);
        for (std::size_t j = w.j0; j <= w.j1; ++j)
            for (std::size_t i = std::max<std::size_t>(w.i0, 1); i <= w.i1; ++i)
                if (grid.x2(j) < cost.c() * grid.x1(i))
                    min_below_ray = std::min(min_below_ray, u.at(i, j));
        b.add("obstacle", "positive-below-ray", "stopping value positive where x2 < c x1",
              min_below_ray, 0.0, min_below_ray > 0.0, "inner subgrid");
    }
    b.stage("stopping value with auto-enlarged x2 range");
    const AutoStoppingSolution auto_u = solve_u_auto(model, cost, grid, cfg.solver, cfg.far_field);
    b.add("obstacle", "zero-set-reached",
          "every column reaches the stopping region inside the domain",
          static_cast<double>(auto_u.zero_check.failing_columns.size()), 0.0, auto_u.zero_check.ok,
          cat("L2=", auto_u.solution.u.grid.L2, " after ", auto_u.doublings, " doubling(s)"));
    {
        const FarFieldDiagnostic ff = far_field_discrepancy(model, cost, grid, cfg.solver);
        b.add("diagnostic", "far-field-closure",
              "sensitivity of u to the x2 = L2 closure (reported, not gated)", ff.dirichlet_inner,
              std::numeric_limits<double>::quiet_NaN(), true,
              cat("inner: neumann=", ff.neumann_inner, " dirichlet=", ff.dirichlet_inner,
                  "; full: neumann=", ff.neumann_full, " dirichlet=", ff.dirichlet_full));
    }

    b.stage("stopping Monte Carlo");
    {
        const std::size_t s = vo.mc_domain_scale;
        const GridSpec big{grid.L1 * static_cast<double>(s), grid.L2 * static_cast<double>(s),
                           grid.n1 * s, grid.n2 * s};
        const ScalarField u_big =
            s == 1 ? u : solve_u(model, cost, big, cfg.solver, cfg.far_field).u;
        StoppingMcOptions o;
        o.dt = cfg.sim.dt;
        o.n_paths = cfg.sim.n_paths;
        o.seed = cfg.sim.seed;
        o.workers = cfg.sim.workers;
        for (const Vec2& x : vo.u_probes) {
            const StoppingMcResult r = mc_estimate_u(model, cost, u_big, x, cfg.eps, o);
            const double grid_u = u.interpolate(x);
            const double dev = std::abs(r.estimate - grid_u);
            const double tol = std::max(3.0 * r.std_error, cfg.eps);
            b.add("stopping-mc", cat("u", point_name(x)),
                  "MC value of the eps-stopping rule matches the grid stopping value", dev, tol,
                  dev <= tol,
                  cat("mc=", r.estimate, " se=", r.std_error, " grid=", grid_u, " exited=",
                      r.exited, r.exit_warning ? " (exit warning)" : ""));
        }
    }

    b.stage("free boundary");
    const double zero_tol = cfg.boundary_zero_tol();
    const auto wide_boundary =
        std::make_shared<const Boundary>(extract_boundary(auto_u.solution.u, zero_tol));
    const Boundary boundary = extract_boundary(u, zero_tol);
    {
        const BoundaryReport r = check_boundary(*wide_boundary, cost.c());
        b.add("free-boundary", "cone", "0 <= psi(x2) <= x2/c + h1", r.cone_excess, 0.0, r.cone_ok);
        b.add("free-boundary", "nondecreasing", "psi nondecreasing up to one cell",
              static_cast<double>(r.monotonicity_violations), 0.0, r.monotone_ok);
        b.add("free-boundary", "lipschitz", "discrete slope of psi at most 1/c plus slack",
              r.max_slope, r.slope_limit, r.slope_ok);
        b.add("free-boundary", "growth", "psi grows between 0.4 L2 and 0.8 L2",
              r.psi_high - r.psi_low, 0.0, r.growth_ok,
              cat("psi(0.4 L2)=", r.psi_low, " psi(0.8 L2)=", r.psi_high,
                  " L2=", wide_boundary->x2_grid.back()));
    }

    b.stage("control value");
    const HjbSolution vs = solve_v(model, cost, grid, cfg.solver);
    const ScalarField& V = vs.V;
    {
        const GradientSignReport s = check_gradient_signs(V);
        b.add("hjb-structure", "d1-nonnegative", "V nondecreasing in x1", s.min_d1, -vo.sign_tol,
              s.min_d1 >= -vo.sign_tol);
        b.add("hjb-structure", "d2-nonnegative", "V nondecreasing in x2", s.min_d2, -vo.sign_tol,
              s.min_d2 >= -vo.sign_tol);
        b.add("hjb-structure", "d2-positive-interior", "V strictly increasing in x2 off the edges",
              s.min_d2_interior, 0.0, s.min_d2_interior > 0.0);
        const ConvexityReport cv = check_convexity(V, vo.convexity_tol, true);
        const ConvexityReport cv_full = check_convexity(V, vo.convexity_tol, false);
        b.add("hjb-structure", "convexity",
              "second differences of V along axes and diagonals are nonnegative", cv.min_all(),
              -vo.convexity_tol, cv.pass,
              cat("inner subgrid; e1=", cv.min_e1, " e2=", cv.min_e2, " diag=", cv.min_diag,
                  " anti=", cv.min_antidiag, " worst at ", point_name(cv.worst_at),
                  "; full grid min=", cv_full.min_all()));
        const ScalarField res = hjb_residual(model, cost, V, u, boundary);
        std::size_t counted = 0;
        const double sup = residual_sup(res, &counted);
        b.add("hjb-structure", "pde-residual",
              "V solves the linear PDE in the no-action region", sup, vo.residual_factor * h,
              sup <= vo.residual_factor * h, cat(counted, " nodes"));
        const C1Report c1 = check_c1(V, boundary.psi);
        b.add("hjb-structure", "d1-left-of-boundary", "d1 V vanishes left of the free boundary",
              c1.left_of_boundary, grad_tol, c1.left_of_boundary <= grad_tol);
        b.add("c1-proxy", "d2-on-x2-axis", "d2 V vanishes on x2 = 0", c1.on_x2_axis, grad_tol,
              c1.on_x2_axis <= grad_tol);

        const GradientIdentityReport gi = check_gradient_identity(V, u, grad_tol, cfg.solver.tol);
        b.add("gradient-identity", cat("sup-error n=", grid.n1),
              "forward difference d1 V / h1 equals u", gi.sup_error, gi.tol, gi.pass,
              cat("worst at ", point_name(gi.worst_at)));

        if (vo.refine) {
            b.stage("refined solves");
            const GridSpec fine = detail::refined(grid);
            const ScalarField u2 = solve_u(model, cost, fine, cfg.solver, cfg.far_field).u;
            const ScalarField V2 = solve_v(model, cost, fine, cfg.solver).V;
            const double tol2 =
                vo.gradient_tol >= 0.0 ? vo.gradient_tol : 20.0 * fine.h1() + 10.0 * cfg.solver.tol;
            const GradientIdentityReport gi2 = check_gradient_identity(V2, u2, tol2, cfg.solver.tol);
            b.add("gradient-identity", cat("sup-error n=", fine.n1),
                  "forward difference d1 V / h1 equals u", gi2.sup_error, gi2.tol, gi2.pass);
            const double ratio = gi2.sup_error / gi.sup_error;
            b.add("gradient-identity", "refinement-ratio",
                  "gradient identity error halves under refinement", ratio, vo.identity_ratio_high,
                  ratio >= vo.identity_ratio_low && ratio <= vo.identity_ratio_high,
                  cat("accepted range [", vo.identity_ratio_low, ", ", vo.identity_ratio_high, "]"));

            const Boundary boundary2 = extract_boundary(u2, zero_tol);
            const C1Report c1b = check_c1(V2, boundary2.psi);
            const double jr = c1b.max_jump / c1.max_jump;
            b.add("c1-proxy", "gradient-jump-ratio",
                  "largest gradient jump between neighbors shrinks under refinement", jr,
                  vo.c1_ratio, jr <= vo.c1_ratio,
                  cat("jump n=", grid.n1, ": ", c1.max_jump, ", n=", fine.n1, ": ", c1b.max_jump));
            const double l1 = lipschitz_estimate(V), l2 = lipschitz_estimate(V2);
            b.add("lipschitz", "refinement-ratio",
                  "discrete Lipschitz constant of V stays bounded under refinement", l2 / l1,
                  vo.lipschitz_ratio, l2 / l1 <= vo.lipschitz_ratio,
                  cat("L(n=", grid.n1, ")=", l1, " L(n=", fine.n1, ")=", l2));

            if (grid.n1 % 2 == 0 && grid.n2 % 2 == 0 && grid.n1 >= 16 && grid.n2 >= 16) {
                const GridSpec coarse{grid.L1, grid.L2, grid.n1 / 2, grid.n2 / 2};
                const ScalarField u0 = solve_u(model, cost, coarse, cfg.solver, cfg.far_field).u;
                const double g01 = detail::refinement_gap(u0, u);
                const double g12 = detail::refinement_gap(u, u2);
                b.add("obstacle", "refinement-cauchy",
                      "gap between stopping values at n and 2n shrinks as n doubles", g12, g01,
                      g12 < g01, cat("gap(n/2,n)=", g01, " gap(n,2n)=", g12));
            }
        }
    }

    b.stage("policy battery");
    {
        const double c = cost.c();
        const std::vector<PolicySpec> policies{
            PolicySpec::free_boundary(wide_boundary, c), PolicySpec::axis(), PolicySpec::ray(c),
            PolicySpec::scaled_boundary(wide_boundary, c, 0.5),
            PolicySpec::scaled_boundary(wide_boundary, c, 2.0)};
        for (const Vec2& x : vo.policy_probes) {
            const PolicyBattery bat = evaluate_policies(model, cost, policies, x, cfg.sim);
            detail::add_dominance(b, "policy-optimality", bat, x);
            const SimResult& fb = bat.results.front();
            const double vx = V.interpolate(x);
            const double dev = std::abs(fb.j_estimate - vx);
            const double tol = 3.0 * fb.std_error + fb.tail_bound + 20.0 * h;
            b.add("policy-optimality", cat("J=V ", point_name(x)),
                  "cost of the free-boundary policy equals the grid control value", dev, tol,
                  dev <= tol,
                  cat("J=", fb.j_estimate, " se=", fb.std_error, " tail=", fb.tail_bound, " V=", vx,
                      " T=", fb.T));
        }
    }

    b.stage("degenerate battery");
    {
        const CostParams dcost(cost.a(), 0.0, vo.degenerate_b2);
        const ScalarField du = solve_u(model, dcost, grid, cfg.solver, cfg.far_field).u;
        const double umax = du.max();
        b.add("degenerate", "u-vanishes", "with b1 = 0 the stopping value vanishes", umax,
              vo.degenerate_u_tol, umax <= vo.degenerate_u_tol);
        const Boundary db = extract_boundary(du, zero_tol);
        b.add("degenerate", "boundary-flag", "boundary extraction reports the degenerate mode",
              db.degenerate ? 1 : 0, 1, db.degenerate);
        const double c = dcost.c();
        const std::vector<PolicySpec> policies{PolicySpec::ray(c), PolicySpec::axis(),
                                               PolicySpec::scaled_ray(c, 0.5),
                                               PolicySpec::scaled_ray(c, 2.0)};
        for (const Vec2& x : vo.degenerate_probes) {
            const PolicyBattery bat = evaluate_policies(model, dcost, policies, x, cfg.sim);
            detail::add_dominance(b, "degenerate", bat, x);
        }
    }

    b.stage("regime sanity");
    {
        const Vec2& al = vo.regime_alpha;
        const Vec2& be = vo.regime_beta;
        TwoPieceCost tc{al, be, (be[0] - al[0]) / (al[1] - be[1])};
        validate_two_piece(tc);
        const HjbSolution rs = solve_v(model, tc, grid, cfg.solver);
        const PushActiveSet ps = push_active_set(rs);
        b.add("regime", "push-only-at-edges",
              "with nonnegative cost gradients pushing happens only next to the axes",
              static_cast<double>(ps.interior_push_nodes), 0.0, ps.interior_push_nodes == 0,
              cat(ps.push_nodes, " push nodes, all within one cell of an edge; c=", tc.c));
    }
    b.stage("done");
    return std::move(b.report);
}

/// Pass flag of each acceptance criterion: every record of the group passes.
struct CriterionSummary {
    std::string group;
    bool pass = true;
    std::size_t checks = 0;
    std::size_t failed = 0;
};

inline std::vector<CriterionSummary> summarize(const SuiteReport& report) {
    std::vector<CriterionSummary> out;
    for (const auto& g : criterion_groups()) {
        CriterionSummary s{g};
        for (const auto& r : report.records)
            if (r.group == g) {
                ++s.checks;
                if (!r.pass) ++s.failed;
            }
        s.pass = s.checks > 0 && s.failed == 0;
        out.push_back(s);
    }
    return out;
}

}  // namespace freebound
