#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <boost/random/normal_distribution.hpp>

#include "freebound/model.hpp"

namespace freebound {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed of path `index` under `master`. Counter-based, so any worker can
/// produce path i without touching the others.
constexpr std::uint64_t path_seed(std::uint64_t master, std::uint64_t index) {
    return splitmix64(splitmix64(master) ^ splitmix64(index + 0xD1B54A32D192ED03ULL));
}

/// Uniform on (0, 1] from 64 random bits.
constexpr double bits_to_open_unit(std::uint64_t bits) {
    return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
}

/// Minimum of a Brownian bridge from 0 to `incr` whose variance over the
/// step is `variance`; `u` is uniform on (0, 1].
inline double bridge_minimum(double incr, double variance, double u) {
    return 0.5 * (incr - std::sqrt(incr * incr - 2.0 * variance * std::log(u)));
}

/// Increments of the driving Brownian motion over one time step.
struct Increment {
    double d1;
    double d2;
};

/// Draws exact Brownian increments with mean theta dt and covariance
/// sigma dt. Intra-step minima of each coordinate are available on demand
/// from their Brownian-bridge law given the endpoint; the uniforms behind
/// them come from a separate counter-based stream, so asking for a minimum
/// never shifts the increment sequence.
class IncrementSource {
public:
    IncrementSource(const ModelParams& model, double dt, std::uint64_t seed)
        : engine_(seed), bridge_key_(splitmix64(seed ^ 0x5851F42D4C957F2DULL)), dt_(dt) {
        mean_ = {model.theta[0] * dt, model.theta[1] * dt};
        const double l11 = std::sqrt(model.sigma.xx);
        const double l21 = model.sigma.xy / l11;
        const double l22 = std::sqrt(model.sigma.yy - l21 * l21);
        const double s = std::sqrt(dt);
        l11_ = l11 * s;
        l21_ = l21 * s;
        l22_ = l22 * s;
        var_ = {model.sigma.xx * dt, model.sigma.yy * dt};
    }

    Increment next() {
        const double g1 = normal_(engine_);
        const double g2 = normal_(engine_);
        last_ = {mean_[0] + l11_ * g1, mean_[1] + l21_ * g1 + l22_ * g2};
        ++step_;
        return last_;
    }

    /// Minimum of B1 over the last step, relative to its value at the start.
    double min1() const { return bridge_minimum(last_.d1, var_[0], uniform(0)); }
    /// Minimum of B2 over the last step, relative to its value at the start.
    double min2() const { return bridge_minimum(last_.d2, var_[1], uniform(1)); }

    /// Variance of B_i over one step.
    double variance(int coord) const { return var_[coord]; }
    double dt() const { return dt_; }

private:
    double uniform(std::uint64_t coord) const {
        return bits_to_open_unit(splitmix64(bridge_key_ ^ splitmix64(2 * step_ + coord)));
    }

    std::mt19937_64 engine_;
    boost::random::normal_distribution<double> normal_{0.0, 1.0};
    std::uint64_t bridge_key_;
    std::uint64_t step_ = 0;
    double dt_;
    Vec2 mean_{};
    Vec2 var_{};
    Increment last_{0.0, 0.0};
    double l11_ = 0.0, l21_ = 0.0, l22_ = 0.0;
};

/// Advances w by `d` and keeps it above `barrier`, returning the push.
/// With `bridge` the excursion inside the step is honored through the
/// bridge minimum `min_of_step()`, which is only evaluated when the
/// crossing probability exp(-2 a b / variance) is not negligible.
template <typename MinFn>
double reflect_against(double& w, double d, double barrier, double variance, bool bridge,
                       const MinFn& min_of_step) {
    const double before = w - barrier;
    const double after = before + d;
    double low = after;
    if (bridge && !(before > 0.0 && after > 0.0 && before * after > 20.0 * variance))
        low = std::min(after, before + min_of_step());
    const double push = std::max(0.0, -low);
    w += d + push;
    if (w < barrier) w = barrier;  // roundoff only
    return push;
}

}  // namespace freebound
