#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "freebound/errors.hpp"
#include "freebound/model.hpp"
#include "freebound/rng.hpp"

namespace freebound {

/// Output of the one-dimensional Skorokhod map: the reflected path W and
/// its minimal pushing process L, both of length steps + 1.
struct Reflected {
    std::vector<double> values;
    std::vector<double> pushing;
};

/// Skorokhod map on the grid: W(k) = x0 + S(k) + L(k) with
/// L(k) = -min(0, min_{j<=k} (x0 + S(j))), S the partial sums of `incr`.
inline Reflected skorokhod_1d(double x0, std::span<const double> incr) {
    if (!(x0 >= 0.0)) throw InvalidArgument("skorokhod_1d: x0 must be nonnegative");
    Reflected out;
    out.values.reserve(incr.size() + 1);
    out.pushing.reserve(incr.size() + 1);
    double free = x0;
    double push = 0.0;
    out.values.push_back(x0);
    out.pushing.push_back(0.0);
    for (double d : incr) {
        free += d;
        push = std::max(push, -free);
        out.values.push_back(free + push);
        out.pushing.push_back(push);
    }
    return out;
}

/// Skorokhod map driven by the running minimum of the continuous path:
/// `step_minima[k]` is the minimum of the free path over step k relative
/// to its value at the start of the step (so it is <= min(0, incr[k])).
/// Grid values then have the exact law of the continuously reflected
/// process.
inline Reflected skorokhod_1d(double x0, std::span<const double> incr,
                              std::span<const double> step_minima) {
    if (!(x0 >= 0.0)) throw InvalidArgument("skorokhod_1d: x0 must be nonnegative");
    if (incr.size() != step_minima.size())
        throw InvalidArgument("skorokhod_1d: increments and minima differ in length");
    Reflected out;
    out.values.reserve(incr.size() + 1);
    out.pushing.reserve(incr.size() + 1);
    double free = x0;
    double push = 0.0;
    out.values.push_back(x0);
    out.pushing.push_back(0.0);
    for (std::size_t k = 0; k < incr.size(); ++k) {
        push = std::max(push, -(free + step_minima[k]));
        free += incr[k];
        out.values.push_back(free + push);
        out.pushing.push_back(push);
    }
    return out;
}

/// The sampled driving Brownian motion.
struct PathSample {
    double dt = 0.0;
    std::size_t steps = 0;
    std::uint64_t seed = 0;
    std::vector<double> b1_incr;
    std::vector<double> b2_incr;
    std::vector<double> b2_step_min;
};

inline void require_positive_dt(double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("dt must be positive");
}

inline PathSample sample_path(const ModelParams& model, double dt, std::size_t steps,
                              std::uint64_t seed) {
    validate_model(model);
    require_positive_dt(dt);
    PathSample path{dt, steps, seed, {}, {}, {}};
    path.b1_incr.reserve(steps);
    path.b2_incr.reserve(steps);
    path.b2_step_min.reserve(steps);
    IncrementSource source(model, dt, seed);
    for (std::size_t k = 0; k < steps; ++k) {
        const Increment inc = source.next();
        path.b1_incr.push_back(inc.d1);
        path.b2_incr.push_back(inc.d2);
        path.b2_step_min.push_back(source.min2());
    }
    return path;
}

/// Z = (x1 + B1, reflected x2 + B2) together with the absorption index of
/// the first coordinate.
struct StoppingPath {
    double dt = 0.0;
    std::vector<Vec2> z_vals;
    std::optional<std::size_t> s_index;
    /// Absorption time refined by linear interpolation of Z1 between the
    /// bracketing grid points.
    std::optional<double> s_time;
};

/// Grid time at which Z1 first reaches zero, interpolated within the
/// bracketing step [k-1, k].
inline double crossing_time(double dt, std::size_t k, double before, double after) {
    if (k == 0) return 0.0;
    const double frac = before / (before - after);
    return dt * (static_cast<double>(k - 1) + std::clamp(frac, 0.0, 1.0));
}

/// Simulates Z on [0, steps * dt]. The path continues after absorption
/// (the index is recorded), so callers can study both events.
inline StoppingPath simulate_z(const ModelParams& model, const Vec2& x, double dt,
                               std::size_t steps, std::uint64_t seed, bool bridge = true) {
    detail::require_quadrant(x);
    const PathSample sample = sample_path(model, dt, steps, seed);
    const Reflected z2 = bridge ? skorokhod_1d(x[1], sample.b2_incr, sample.b2_step_min)
                                : skorokhod_1d(x[1], sample.b2_incr);
    StoppingPath path;
    path.dt = dt;
    path.z_vals.reserve(steps + 1);
    double z1 = x[0];
    for (std::size_t k = 0; k <= steps; ++k) {
        if (k > 0) z1 += sample.b1_incr[k - 1];
        path.z_vals.push_back({z1, z2.values[k]});
        if (!path.s_index && z1 <= 0.0) {
            path.s_index = k;
            path.s_time =
                k == 0 ? 0.0 : crossing_time(dt, k, path.z_vals[k - 1][0], z1);
        }
    }
    return path;
}

/// Plot-ready dump with columns t, z1, z2.
inline void write_path_csv(std::ostream& os, const StoppingPath& path) {
    os << "t,z1,z2\n";
    for (std::size_t k = 0; k < path.z_vals.size(); ++k)
        os << path.dt * static_cast<double>(k) << ',' << path.z_vals[k][0] << ','
           << path.z_vals[k][1] << '\n';
}

}  // namespace freebound
