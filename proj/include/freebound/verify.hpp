#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/random/normal_distribution.hpp>

#include "freebound/errors.hpp"
#include "freebound/grid.hpp"
#include "freebound/parallel.hpp"
#include "freebound/paths.hpp"
#include "freebound/rng.hpp"

namespace freebound {

/// E int_0^inf e^{-gamma t} W_t dt for W a reflected Brownian motion on
/// [0, inf) started at x0 with the given drift and variance:
///   f(x0) = x0/gamma + drift/gamma^2 - e^{m x0} / (gamma m),
/// m the negative root of (variance/2) m^2 + drift m - gamma = 0.
inline double oracle_1d_resolvent(double x0, double drift, double variance, double gamma) {
    if (!(variance > 0.0) || !(gamma > 0.0) || !(x0 >= 0.0) || !std::isfinite(drift))
        throw InvalidArgument("oracle_1d_resolvent: need variance > 0, gamma > 0, x0 >= 0");
    const double m = (-drift - std::sqrt(drift * drift + 2.0 * variance * gamma)) / variance;
    return x0 / gamma + drift / (gamma * gamma) - std::exp(m * x0) / (gamma * m);
}

/// E W_t for the reflected Brownian motion above, by integrating the
/// survival function
///   P(W_t > y) = 1 - Phi((y - x - mu t)/s) + e^{2 mu y / sigma^2} Phi((-y - x - mu t)/s)
/// with s = sigma sqrt(t), using composite Simpson on a truncated range.
inline double reflected_bm_mean(double x0, double drift, double variance, double t) {
    if (!(variance > 0.0) || !(t > 0.0) || !(x0 >= 0.0))
        throw InvalidArgument("reflected_bm_mean: need variance > 0, t > 0, x0 >= 0");
    const boost::math::normal_distribution<double> N;
    const double s = std::sqrt(variance * t);
    auto survival = [&](double y) {
        const double a = boost::math::cdf(boost::math::complement(N, (y - x0 - drift * t) / s));
        const double b = boost::math::cdf(N, (-y - x0 - drift * t) / s);
        const double w = std::exp(2.0 * drift * y / variance);
        return a + (b > 0.0 ? w * b : 0.0);
    };
    const double upper = x0 + std::abs(drift) * t + 40.0 * s;
    const std::size_t n = 20000;
    const double h = upper / static_cast<double>(n);
    double acc = survival(0.0) + survival(upper);
    for (std::size_t k = 1; k < n; ++k)
        acc += (k % 2 ? 4.0 : 2.0) * survival(h * static_cast<double>(k));
    return acc * h / 3.0;
}

struct Resolvent1dOptions {
    double dt = 1e-3;
    double T = 15.0;
    std::size_t n_paths = 100000;
    std::uint64_t seed = 7;
    std::size_t workers = 1;
    bool bridge = true;
};

/// Monte Carlo of E int_0^T e^{-gamma t} W_t dt (trapezoid rule) for the
/// reflected Brownian motion of oracle_1d_resolvent.
inline MeanError mc_resolvent_1d(double x0, double drift, double variance, double gamma,
                                 const Resolvent1dOptions& opt = {}) {
    if (!(variance > 0.0) || !(gamma > 0.0) || !(x0 >= 0.0))
        throw InvalidArgument("mc_resolvent_1d: need variance > 0, gamma > 0, x0 >= 0");
    if (!(opt.dt > 0.0) || !(opt.T >= opt.dt) || opt.n_paths < 2)
        throw InvalidArgument("mc_resolvent_1d: invalid dt, T or n_paths");
    const auto steps = static_cast<std::size_t>(std::llround(opt.T / opt.dt));
    const double dt = opt.T / static_cast<double>(steps);
    const double decay = std::exp(-gamma * dt);
    const double sd = std::sqrt(variance * dt);
    const double var = variance * dt;
    const double mean = drift * dt;
    std::vector<double> out(opt.n_paths);
    parallel_for(opt.n_paths, opt.workers, [&](std::size_t p) {
        const std::uint64_t seed = path_seed(opt.seed, p);
        std::mt19937_64 engine(seed);
        boost::random::normal_distribution<double> normal;
        const std::uint64_t key = splitmix64(seed ^ 0x5851F42D4C957F2DULL);
        double w = x0, disc = 1.0, acc = 0.0;
        for (std::size_t k = 0; k < steps; ++k) {
            const double d = mean + sd * normal(engine);
            const double prev = w;
            reflect_against(w, d, 0.0, var, opt.bridge, [&] {
                return bridge_minimum(d, var, bits_to_open_unit(splitmix64(key ^ splitmix64(k))));
            });
            const double next_disc = disc * decay;
            acc += 0.5 * dt * (disc * prev + next_disc * w);
            disc = next_disc;
        }
        out[p] = acc;
    });
    return mean_error(out);
}

/// Randomized test of the discrete Skorokhod map.
struct SkorokhodReport {
    /// Largest |sum_k W(k) (L(k) - L(k-1))| over all paths.
    double complementarity = 0.0;
    std::size_t alternatives = 0;
    /// Alternatives that keep the path nonnegative.
    std::size_t feasible = 0;
    /// Feasible alternatives that fall below L somewhere.
    std::size_t minimality_violations = 0;
};

/// Gaussian random walks from random starts; each alternative pushing
/// process is the running maximum of max(0, L + noise), so it is
/// nondecreasing and may or may not be feasible.
inline SkorokhodReport check_skorokhod(std::size_t n_paths, std::size_t n_alternatives,
                                       std::size_t steps, std::uint64_t seed) {
    std::mt19937_64 engine(seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unit;
    SkorokhodReport r;
    std::vector<double> incr(steps);
    for (std::size_t p = 0; p < n_paths; ++p) {
        const double x0 = unit(engine);
        const double sd = 0.05 + 0.5 * unit(engine);
        for (double& d : incr) d = sd * normal(engine);
        const Reflected w = skorokhod_1d(x0, incr);
        double comp = 0.0;
        for (std::size_t k = 1; k <= steps; ++k)
            comp += w.values[k] * (w.pushing[k] - w.pushing[k - 1]);
        r.complementarity = std::max(r.complementarity, std::abs(comp));

        for (std::size_t a = 0; a < n_alternatives; ++a) {
            const double scale = sd * std::pow(10.0, -3.0 * unit(engine));
            double run = 0.0, free = x0;
            bool feasible = true, below = false;
            for (std::size_t k = 0; k <= steps; ++k) {
                if (k > 0) free += incr[k - 1];
                run = std::max(run, std::max(0.0, w.pushing[k] + scale * normal(engine)));
                feasible = feasible && free + run >= 0.0;
                below = below || run < w.pushing[k];
            }
            ++r.alternatives;
            if (feasible) {
                ++r.feasible;
                if (below) ++r.minimality_violations;
            }
        }
    }
    return r;
}

/// One line of the verification report.
struct CheckRecord {
    /// Acceptance criterion the check belongs to.
    std::string group;
    std::string name;
    /// The structural property being checked, in words.
    std::string property;
    double measured = 0.0;
    double threshold = 0.0;
    bool pass = false;
    std::string detail;
};

struct SuiteReport {
    std::vector<CheckRecord> records;

    bool all_pass() const {
        return std::all_of(records.begin(), records.end(), [](const auto& r) { return r.pass; });
    }

    void write_text(std::ostream& os) const {
        for (const auto& r : records) {
            os << (r.pass ? "PASS " : "FAIL ") << r.group << '/' << r.name << "  [" << r.property
               << "]  measured=" << r.measured << " threshold=" << r.threshold;
            if (!r.detail.empty()) os << "  " << r.detail;
            os << '\n';
        }
    }

    void write_csv(std::ostream& os) const {
        os.precision(12);
        os << "group,name,property,measured,threshold,pass,detail\n";
        for (const auto& r : records)
            os << r.group << ',' << r.name << ",\"" << r.property << "\"," << r.measured << ',' << r.threshold << ','
               << (r.pass ? 1 : 0) << ",\"" << r.detail << "\"\n";
    }
};

/// sup over the inner subgrid of |(V(i+1,j) - V(i,j))/h1 - u(i,j)|.
struct GradientIdentityReport {
    double sup_error = 0.0;
    double tol = 0.0;
    bool pass = false;
    Vec2 worst_at{};
};

inline GradientIdentityReport check_gradient_identity(const ScalarField& v, const ScalarField& u,
                                                      double tol = -1.0, double solver_tol = 1e-8) {
    require_same_grid(v.grid, u.grid, "check_gradient_identity");
    const auto& g = v.grid;
    GradientIdentityReport r;
    r.tol = tol >= 0.0 ? tol : 20.0 * g.h1() + 10.0 * solver_tol;
    const IndexWindow w = inner_window(g);
    for (std::size_t j = w.j0; j <= w.j1; ++j)
        for (std::size_t i = w.i0; i <= std::min(w.i1, g.n1 - 1); ++i) {
            const double e = std::abs((v.at(i + 1, j) - v.at(i, j)) / g.h1() - u.at(i, j));
            if (e > r.sup_error) {
                r.sup_error = e;
                r.worst_at = {g.x1(i), g.x2(j)};
            }
        }
    r.pass = r.sup_error <= r.tol;
    return r;
}

/// Smallest undivided second difference of V along e1, e2 and both
/// diagonals.
struct ConvexityReport {
    double min_e1 = 0.0;
    double min_e2 = 0.0;
    double min_diag = 0.0;
    double min_antidiag = 0.0;
    Vec2 worst_at{};
    double tol = 0.0;
    bool pass = false;

    double min_all() const { return std::min({min_e1, min_e2, min_diag, min_antidiag}); }
};

inline ConvexityReport check_convexity(const ScalarField& v, double tol = 1e-6,
                                       bool inner_only = false) {
    const auto& g = v.grid;
    ConvexityReport r;
    r.tol = tol;
    const IndexWindow w = inner_only ? inner_window(g) : IndexWindow{1, g.n1 - 1, 1, g.n2 - 1};
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t j = std::max<std::size_t>(w.j0, 1); j <= std::min(w.j1, g.n2 - 1); ++j)
        for (std::size_t i = std::max<std::size_t>(w.i0, 1); i <= std::min(w.i1, g.n1 - 1); ++i) {
            const double c = 2.0 * v.at(i, j);
            const double d[4] = {v.at(i + 1, j) + v.at(i - 1, j) - c,
                                 v.at(i, j + 1) + v.at(i, j - 1) - c,
                                 v.at(i + 1, j + 1) + v.at(i - 1, j - 1) - c,
                                 v.at(i + 1, j - 1) + v.at(i - 1, j + 1) - c};
            r.min_e1 = std::min(r.min_e1, d[0]);
            r.min_e2 = std::min(r.min_e2, d[1]);
            r.min_diag = std::min(r.min_diag, d[2]);
            r.min_antidiag = std::min(r.min_antidiag, d[3]);
            const double m = std::min({d[0], d[1], d[2], d[3]});
            if (m < worst) {
                worst = m;
                r.worst_at = {g.x1(i), g.x2(j)};
            }
        }
    // Edge rows: second differences along the edge direction.
    for (std::size_t i = 1; i < g.n1; ++i)
        for (std::size_t j : {std::size_t{0}, g.n2}) {
            if (inner_only) break;
            r.min_e1 = std::min(r.min_e1, v.at(i + 1, j) + v.at(i - 1, j) - 2.0 * v.at(i, j));
        }
    for (std::size_t j = 1; j < g.n2; ++j)
        for (std::size_t i : {std::size_t{0}, g.n1}) {
            if (inner_only) break;
            r.min_e2 = std::min(r.min_e2, v.at(i, j + 1) + v.at(i, j - 1) - 2.0 * v.at(i, j));
        }
    r.pass = r.min_all() >= -tol;
    return r;
}

/// Signs of the forward differences of V.
struct GradientSignReport {
    double min_d1 = 0.0;
    double min_d2 = 0.0;
    /// Smallest forward difference along e2 at nodes off every edge.
    double min_d2_interior = 0.0;
};

inline GradientSignReport check_gradient_signs(const ScalarField& v) {
    const auto& g = v.grid;
    GradientSignReport r;
    r.min_d2_interior = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j <= g.n2; ++j)
        for (std::size_t i = 0; i <= g.n1; ++i) {
            if (i < g.n1) r.min_d1 = std::min(r.min_d1, v.at(i + 1, j) - v.at(i, j));
            if (j < g.n2) {
                const double d2 = v.at(i, j + 1) - v.at(i, j);
                r.min_d2 = std::min(r.min_d2, d2);
                if (i > 0 && i < g.n1 && j > 0 && j + 1 < g.n2)
                    r.min_d2_interior = std::min(r.min_d2_interior, d2);
            }
        }
    return r;
}

/// Largest jump of the forward-difference gradient between neighboring
/// nodes of the inner subgrid, plus the boundary behavior of the gradient.
struct C1Report {
    double max_jump = 0.0;
    /// max (V(i+1,j) - V(i,j))/h1 over nodes with x1 < psi(x2).
    double left_of_boundary = 0.0;
    /// max |V(i,1) - V(i,0)|/h2 over the inner x1 range.
    double on_x2_axis = 0.0;
};

inline C1Report check_c1(const ScalarField& v, const std::vector<double>& psi) {
    const auto& g = v.grid;
    if (psi.size() != g.n2 + 1) throw GridMismatch("check_c1: boundary rows differ");
    const double h1 = g.h1(), h2 = g.h2();
    auto d1 = [&](std::size_t i, std::size_t j) { return (v.at(i + 1, j) - v.at(i, j)) / h1; };
    auto d2 = [&](std::size_t i, std::size_t j) { return (v.at(i, j + 1) - v.at(i, j)) / h2; };
    C1Report r;
    const IndexWindow w = inner_window(g);
    for (std::size_t j = w.j0; j < w.j1; ++j)
        for (std::size_t i = w.i0; i < w.i1; ++i) {
            r.max_jump = std::max({r.max_jump, std::abs(d1(i + 1, j) - d1(i, j)),
                                   std::abs(d1(i, j + 1) - d1(i, j)),
                                   std::abs(d2(i + 1, j) - d2(i, j)),
                                   std::abs(d2(i, j + 1) - d2(i, j))});
        }
    for (std::size_t j = 0; j <= g.n2; ++j)
        for (std::size_t i = 0; i < g.n1 && g.x1(i) < psi[j]; ++i)
            r.left_of_boundary = std::max(r.left_of_boundary, d1(i, j));
    for (std::size_t i = w.i0; i <= w.i1; ++i) r.on_x2_axis = std::max(r.on_x2_axis, std::abs(d2(i, 0)));
    return r;
}

/// max |forward difference| / h over the inner subgrid.
inline double lipschitz_estimate(const ScalarField& v) {
    const auto& g = v.grid;
    const IndexWindow w = inner_window(g);
    double L = 0.0;
    for (std::size_t j = w.j0; j <= w.j1; ++j)
        for (std::size_t i = w.i0; i <= w.i1; ++i) {
            L = std::max(L, std::abs(v.at(i + 1, j) - v.at(i, j)) / g.h1());
            L = std::max(L, std::abs(v.at(i, j + 1) - v.at(i, j)) / g.h2());
        }
    return L;
}

}  // namespace freebound
