#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "freebound/boundary.hpp"
#include "freebound/errors.hpp"
#include "freebound/model.hpp"
#include "freebound/parallel.hpp"
#include "freebound/paths.hpp"
#include "freebound/rng.hpp"

namespace freebound {

enum class PolicyKind { free_boundary, ray, axis, scaled_boundary, scaled_ray };

/// Reflection policy: X2 is reflected at 0 in direction e2 and X1 at the
/// barrier b(X2) in direction e1.
class PolicySpec {
public:
    /// Reflect X1 at psi(X2). Beyond the last boundary row psi is
    /// continued with slope 1/c.
    static PolicySpec free_boundary(std::shared_ptr<const Boundary> boundary, double c) {
        return scaled_boundary(std::move(boundary), c, 1.0, PolicyKind::free_boundary);
    }
    static PolicySpec scaled_boundary(std::shared_ptr<const Boundary> boundary, double c,
                                      double kappa) {
        return scaled_boundary(std::move(boundary), c, kappa, PolicyKind::scaled_boundary);
    }
    /// Reflect X1 at X2 / c.
    static PolicySpec ray(double c) { return scaled_ray(c, 1.0, PolicyKind::ray); }
    static PolicySpec scaled_ray(double c, double kappa) {
        return scaled_ray(c, kappa, PolicyKind::scaled_ray);
    }
    /// Normal reflection on the quadrant.
    static PolicySpec axis() {
        PolicySpec p;
        p.kind_ = PolicyKind::axis;
        p.name_ = "axis-reflect";
        return p;
    }

    PolicyKind kind() const { return kind_; }
    const std::string& name() const { return name_; }
    double kappa() const { return kappa_; }

    double barrier(double x2) const {
        switch (kind_) {
            case PolicyKind::axis: return 0.0;
            case PolicyKind::ray:
            case PolicyKind::scaled_ray: return kappa_ * x2 / c_;
            case PolicyKind::free_boundary:
            case PolicyKind::scaled_boundary: return kappa_ * boundary_->at(x2, 1.0 / c_);
        }
        return 0.0;
    }

    /// Bound k with barrier(x2) <= k x2 + k0, used by the tail envelope.
    double slope_bound() const {
        if (kind_ == PolicyKind::axis) return 0.0;
        double k = 1.0 / c_;
        if (boundary_) {
            for (std::size_t j = 1; j < boundary_->psi.size(); ++j)
                k = std::max(k, boundary_->psi[j] / boundary_->x2_grid[j]);
        }
        return kappa_ * k;
    }
    double offset_bound() const {
        if (!boundary_ || boundary_->psi.empty()) return 0.0;
        return kappa_ * std::max(0.0, boundary_->psi.front());
    }

private:
    static PolicySpec scaled_boundary(std::shared_ptr<const Boundary> boundary, double c,
                                      double kappa, PolicyKind kind) {
        if (!boundary) throw InvalidArgument("policy: boundary missing");
        if (boundary->degenerate)
            throw DegenerateModeError("policy: free-boundary reflection needs a non-degenerate "
                                      "boundary; use the ray policy when b1 = 0");
        require_kappa(kappa);
        require_c(c);
        PolicySpec p;
        p.kind_ = kind;
        p.boundary_ = std::move(boundary);
        p.c_ = c;
        p.kappa_ = kappa;
        p.name_ = kind == PolicyKind::free_boundary ? "free-boundary-reflect"
                                                    : "scaled-boundary-reflect(" + fmt(kappa) + ")";
        return p;
    }
    static PolicySpec scaled_ray(double c, double kappa, PolicyKind kind) {
        require_kappa(kappa);
        require_c(c);
        PolicySpec p;
        p.kind_ = kind;
        p.c_ = c;
        p.kappa_ = kappa;
        p.name_ = kind == PolicyKind::ray ? "ray-reflect" : "scaled-ray-reflect(" + fmt(kappa) + ")";
        return p;
    }
    static void require_kappa(double kappa) {
        if (!(kappa > 0.0) || !std::isfinite(kappa))
            throw InvalidArgument("policy: kappa must be positive");
    }
    static void require_c(double c) {
        if (!(c > 0.0) || !std::isfinite(c)) throw InvalidArgument("policy: c must be positive");
    }
    static std::string fmt(double v) {
        std::string s = std::to_string(v);
        while (s.size() > 1 && s.back() == '0') s.pop_back();
        if (!s.empty() && s.back() == '.') s.pop_back();
        return s;
    }

    PolicyKind kind_ = PolicyKind::axis;
    std::string name_;
    std::shared_ptr<const Boundary> boundary_;
    double c_ = 1.0;
    double kappa_ = 1.0;
};

struct PolicyStep {
    Vec2 state;
    Vec2 dy;
};

/// One step of the controlled process: X2 is reflected at 0 first, then
/// X1 is projected onto the barrier evaluated at the reflected X2.
inline PolicyStep step_policy(const PolicySpec& policy, const Vec2& state, const Vec2& incr) {
    detail::require_quadrant(state);
    PolicyStep s{state, {0.0, 0.0}};
    const double x2 = state[1] + incr[1];
    s.state[1] = std::max(x2, 0.0);
    s.dy[1] = s.state[1] - x2;
    const double x1 = state[0] + incr[0];
    s.state[0] = std::max(x1, policy.barrier(s.state[1]));
    s.dy[0] = s.state[0] - x1;
    return s;
}

/// Jump applied at t = 0 when x lies left of the barrier.
inline Vec2 initial_jump(const PolicySpec& policy, const Vec2& x) {
    detail::require_quadrant(x);
    return {std::max(0.0, policy.barrier(x[1]) - x[0]), 0.0};
}

struct SimOptions {
    double dt = 1e-3;
    /// Horizon; 0 selects the smallest T with tail_bound <= tail_tol.
    double T = 0.0;
    /// 0 selects 1e-4 (1 + |x|).
    double tail_tol = 0.0;
    std::size_t n_paths = 10000;
    std::uint64_t seed = 1;
    std::size_t workers = 1;
    /// Reflect using the Brownian-bridge minimum inside each step instead
    /// of projecting the endpoint only.
    bool bridge = true;
};

struct SimResult {
    std::string policy;
    Vec2 x{};
    double j_estimate = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
    double dt = 0.0;
    double T = 0.0;
    double tail_bound = 0.0;
    Vec2 initial_jump{};
    std::uint64_t seed = 0;
};

/// Upper bound on E int_T^inf e^{-gamma t} l(X(t)) dt for a reflection
/// policy whose barrier satisfies b(x2) <= k x2 + k0, given l(z) <=
/// growth (z1 + z2). Pathwise X1 + X2 <= x1 + (1 + k) x2 + k0
/// + 2 sup|B1| + (2 + 2k) sup|B2|, and E sup_{s<=t} |B_i(s)| <=
/// |theta_i| t + 2 sigma_i sqrt(2 t / pi).
inline double tail_bound(const ModelParams& model, double growth, const Vec2& x, double k,
                         double k0, double T) {
    const double s1 = std::sqrt(model.sigma.xx);
    const double s2 = std::sqrt(model.sigma.yy);
    const double A = x[0] + (1.0 + k) * x[1] + k0;
    const double B = 2.0 * std::abs(model.theta[0]) + (2.0 + 2.0 * k) * std::abs(model.theta[1]);
    const double C = (2.0 * s1 + (2.0 + 2.0 * k) * s2) * 2.0 * std::sqrt(2.0 / std::numbers::pi);
    const double g = model.gamma;
    const double e = std::exp(-g * T);
    const double rt = std::sqrt(std::max(T, 1e-300));
    return growth * e * (A / g + B * (T / g + 1.0 / (g * g)) + C * (rt / g + 1.0 / (2.0 * rt * g * g)));
}

/// Smallest horizon (to 1e-3 relative) with tail_bound <= tol.
inline double default_horizon(const ModelParams& model, double growth, const Vec2& x, double k,
                              double k0, double tol) {
    if (!(tol > 0.0)) throw InvalidArgument("default_horizon: tail_tol must be positive");
    auto tail = [&](double T) { return tail_bound(model, growth, x, k, k0, T); };
    double hi = 1.0 / model.gamma;
    while (tail(hi) > tol) hi *= 2.0;
    double lo = 0.0;
    while (hi - lo > 1e-3 * hi) {
        const double mid = 0.5 * (lo + hi);
        (tail(mid) > tol ? lo : hi) = mid;
    }
    return hi;
}

/// Result of simulating several policies on common random numbers.
struct PolicyBattery {
    std::vector<SimResult> results;
    /// per_path[k][p]: discounted cost of path p under policy k.
    std::vector<std::vector<double>> per_path;

    /// Mean and standard error of J(a) - J(b) over the paired paths.
    MeanError difference(std::size_t a, std::size_t b) const {
        std::vector<double> d(per_path[a].size());
        for (std::size_t p = 0; p < d.size(); ++p) d[p] = per_path[a][p] - per_path[b][p];
        return mean_error(d);
    }
};

namespace detail {

inline void require_sim(const SimOptions& opt) {
    require_positive_dt(opt.dt);
    if (opt.n_paths < 2) throw InvalidArgument("simulate: n_paths must be at least 2");
    if (opt.T < 0.0 || !std::isfinite(opt.T)) throw InvalidArgument("simulate: invalid T");
    if (opt.T > 0.0 && opt.T < opt.dt) throw InvalidArgument("simulate: T shorter than dt");
}

}  // namespace detail

/// Monte Carlo estimates of J(x, policy) for every policy in `policies`,
/// all driven by the same Brownian paths. The discounted cost is
/// accumulated with the trapezoid rule on [0, T].
template <RunningCost Cost>
PolicyBattery evaluate_policies(const ModelParams& model, const Cost& cost,
                                const std::vector<PolicySpec>& policies, const Vec2& x,
                                const SimOptions& opt = {}) {
    validate_model(model);
    detail::require_quadrant(x);
    detail::require_sim(opt);
    if (policies.empty()) throw InvalidArgument("simulate: no policies");
    const std::size_t K = policies.size();
    const double growth = cost.growth();
    const double tol = opt.tail_tol > 0.0 ? opt.tail_tol : 1e-4 * (1.0 + std::hypot(x[0], x[1]));

    double k = 0.0, k0 = 0.0;
    for (const auto& pol : policies) {
        k = std::max(k, pol.slope_bound());
        k0 = std::max(k0, pol.offset_bound());
    }
    const double T = opt.T > 0.0 ? opt.T : default_horizon(model, growth, x, k, k0, tol);
    const auto steps = static_cast<std::size_t>(std::ceil(T / opt.dt - 1e-9));
    const double dt = T / static_cast<double>(steps);
    const double decay = std::exp(-model.gamma * dt);

    std::vector<Vec2> starts(K);
    std::vector<Vec2> jumps(K);
    for (std::size_t q = 0; q < K; ++q) {
        jumps[q] = initial_jump(policies[q], x);
        starts[q] = {x[0] + jumps[q][0], x[1]};
    }

    PolicyBattery out;
    out.per_path.assign(K, std::vector<double>(opt.n_paths, 0.0));
    parallel_for(opt.n_paths, opt.workers, [&](std::size_t p) {
        IncrementSource src(model, dt, path_seed(opt.seed, p));
        std::vector<Vec2> z = starts;
        std::vector<double> prev(K), acc(K, 0.0);
        for (std::size_t q = 0; q < K; ++q) prev[q] = cost.ell(z[q]);
        double disc = 1.0;
        const double v1 = src.variance(0), v2 = src.variance(1);
        for (std::size_t s = 0; s < steps; ++s) {
            const Increment inc = src.next();
            const double next_disc = disc * decay;
            for (std::size_t q = 0; q < K; ++q) {
                Vec2& st = z[q];
                reflect_against(st[1], inc.d2, 0.0, v2, opt.bridge, [&] { return src.min2(); });
                const double b = policies[q].barrier(st[1]);
                reflect_against(st[0], inc.d1, b, v1, opt.bridge, [&] { return src.min1(); });
                const double now = cost.ell(st);
                acc[q] += 0.5 * dt * (disc * prev[q] + next_disc * now);
                prev[q] = now;
            }
            disc = next_disc;
        }
        for (std::size_t q = 0; q < K; ++q) out.per_path[q][p] = acc[q];
    });

    for (std::size_t q = 0; q < K; ++q) {
        const MeanError me = mean_error(out.per_path[q]);
        SimResult r;
        r.policy = policies[q].name();
        r.x = x;
        r.j_estimate = me.mean;
        r.std_error = me.std_error;
        r.n_paths = opt.n_paths;
        r.dt = dt;
        r.T = T;
        r.tail_bound = tail_bound(model, growth, x, policies[q].slope_bound(),
                                  policies[q].offset_bound(), T);
        r.initial_jump = jumps[q];
        r.seed = opt.seed;
        out.results.push_back(r);
    }
    return out;
}

template <RunningCost Cost>
SimResult evaluate_policy(const ModelParams& model, const Cost& cost, const PolicySpec& policy,
                          const Vec2& x, const SimOptions& opt = {}) {
    return evaluate_policies(model, cost, std::vector<PolicySpec>{policy}, x, opt).results.front();
}

/// A single controlled trajectory with its pushing process.
struct ControlledPath {
    double dt = 0.0;
    std::vector<Vec2> x_vals;
    /// Cumulative pushes; y_vals[0] is the initial jump Y(0).
    std::vector<Vec2> y_vals;
};

inline ControlledPath simulate_controlled_path(const ModelParams& model, const PolicySpec& policy,
                                               const Vec2& x, double dt, std::size_t steps,
                                               std::uint64_t seed) {
    validate_model(model);
    require_positive_dt(dt);
    ControlledPath path;
    path.dt = dt;
    const Vec2 jump = initial_jump(policy, x);
    Vec2 state{x[0] + jump[0], x[1]};
    Vec2 y = jump;
    path.x_vals.push_back(state);
    path.y_vals.push_back(y);
    IncrementSource src(model, dt, seed);
    for (std::size_t k = 0; k < steps; ++k) {
        const Increment inc = src.next();
        const PolicyStep s = step_policy(policy, state, {inc.d1, inc.d2});
        state = s.state;
        y[0] += s.dy[0];
        y[1] += s.dy[1];
        path.x_vals.push_back(state);
        path.y_vals.push_back(y);
    }
    return path;
}

/// Plot-ready dump with columns t, x1, x2, y1, y2.
inline void write_path_csv(std::ostream& os, const ControlledPath& path) {
    os << "t,x1,x2,y1,y2\n";
    for (std::size_t k = 0; k < path.x_vals.size(); ++k)
        os << path.dt * static_cast<double>(k) << ',' << path.x_vals[k][0] << ','
           << path.x_vals[k][1] << ',' << path.y_vals[k][0] << ',' << path.y_vals[k][1] << '\n';
}

/// CSV rows `policy,x1,x2,j,stderr,tail_bound,n_paths,dt,T,seed`.
inline void write_sim_csv(std::ostream& os, const std::vector<SimResult>& rows,
                          bool header = true) {
    os.precision(12);
    if (header) os << "policy,x1,x2,j,stderr,tail_bound,n_paths,dt,T,seed\n";
    for (const auto& r : rows)
        os << r.policy << ',' << r.x[0] << ',' << r.x[1] << ',' << r.j_estimate << ','
           << r.std_error << ',' << r.tail_bound << ',' << r.n_paths << ',' << r.dt << ',' << r.T
           << ',' << r.seed << '\n';
}

}  // namespace freebound
