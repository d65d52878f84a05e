#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <string>
#include <vector>

#include "freebound/errors.hpp"

namespace freebound {

using Vec2 = std::array<double, 2>;

/// Symmetric 2x2 matrix stored by its three distinct entries.
struct SymMat2 {
    double xx = 1.0;
    double xy = 0.0;
    double yy = 1.0;

    double det() const { return xx * yy - xy * xy; }
    bool positive_definite() const { return xx > 0.0 && det() > 0.0; }
};

/// Uncontrolled dynamics: Brownian motion with drift `theta`, covariance
/// `sigma` (per unit time) and discount rate `gamma`.
struct ModelParams {
    Vec2 theta{0.0, 0.0};
    SymMat2 sigma{};
    double gamma = 1.0;
};

/// Canonical piecewise-linear running cost
///
///   l(z) = z2 - a z1          if z2 >= c z1
///   l(z) = b1 z1 + b2 z2      otherwise
///
/// with the kink slope c = (a + b1) / (1 - b2) derived from continuity.
class CostParams {
public:
    CostParams(double a, double b1, double b2) : a_(a), b1_(b1), b2_(b2) {
        if (!(a > 0.0) || !std::isfinite(a))
            throw InvalidArgument("cost: a must be positive, got " + std::to_string(a));
        if (!(b1 >= 0.0) || !std::isfinite(b1))
            throw InvalidArgument("cost: b1 must be nonnegative, got " + std::to_string(b1));
        if (!(b2 >= 0.0 && b2 < 1.0))
            throw InvalidArgument("cost: b2 must lie in [0, 1), got " + std::to_string(b2));
        c_ = (a + b1) / (1.0 - b2);
    }

    double a() const { return a_; }
    double b1() const { return b1_; }
    double b2() const { return b2_; }
    double c() const { return c_; }
    bool degenerate() const { return b1_ == 0.0; }

    /// True on the closed upper piece {z2 >= c z1}; the kink ray belongs here.
    bool upper(const Vec2& z) const { return c_ * z[0] <= z[1]; }

    double ell(const Vec2& z) const {
        return upper(z) ? z[1] - a_ * z[0] : b1_ * z[0] + b2_ * z[1];
    }

    /// Left derivative of ell in the e1 direction.
    double ellhat(const Vec2& z) const { return upper(z) ? -a_ : b1_; }

    /// Bound K with ell(z) <= K (z1 + z2) on the quadrant.
    double growth() const { return std::max(1.0, b1_); }

private:
    double a_;
    double b1_;
    double b2_;
    double c_ = 0.0;
};

/// General two-piece linear cost  l(z) = alpha.z above the ray z2 = c z1,
/// beta.z below it. Used for the regime conversion and for synthetic
/// costs that fall outside the canonical (a, b1, b2) family.
struct TwoPieceCost {
    Vec2 alpha{};
    Vec2 beta{};
    double c = 1.0;

    bool upper(const Vec2& z) const { return c * z[0] <= z[1]; }

    double ell(const Vec2& z) const {
        const Vec2& g = upper(z) ? alpha : beta;
        return g[0] * z[0] + g[1] * z[1];
    }

    double growth() const {
        return std::max({std::abs(alpha[0]), std::abs(alpha[1]), std::abs(beta[0]),
                         std::abs(beta[1])});
    }
};

/// Anything usable as a running cost by the control solver and the
/// policy simulator.
template <typename C>
concept RunningCost = requires(const C& cost, const Vec2& z) {
    { cost.ell(z) } -> std::convertible_to<double>;
    { cost.growth() } -> std::convertible_to<double>;
};

inline TwoPieceCost as_two_piece(const CostParams& cost) {
    return TwoPieceCost{{-cost.a(), 1.0}, {cost.b1(), cost.b2()}, cost.c()};
}

/// Checks continuity across the ray, nonnegativity and convexity.
inline void validate_two_piece(const TwoPieceCost& cost) {
    if (!(cost.c > 0.0) || !std::isfinite(cost.c))
        throw InvalidArgument("two-piece cost: c must be positive");
    const Vec2 ray{1.0, cost.c};
    const double on_ray_alpha = cost.alpha[0] * ray[0] + cost.alpha[1] * ray[1];
    const double on_ray_beta = cost.beta[0] * ray[0] + cost.beta[1] * ray[1];
    const double scale = 1.0 + std::abs(on_ray_alpha) + std::abs(on_ray_beta);
    if (std::abs(on_ray_alpha - on_ray_beta) > 1e-12 * scale)
        throw InvalidArgument("two-piece cost: pieces disagree on the kink ray");
    if (cost.alpha[1] < 0.0 || on_ray_alpha < 0.0 || cost.beta[0] < 0.0)
        throw InvalidArgument("two-piece cost: cost is negative somewhere on the quadrant");
    if (cost.alpha[1] < cost.beta[1])
        throw InvalidArgument("two-piece cost: cost is not convex");
}

/// Result of mapping a general two-piece cost onto the canonical family.
/// The general cost equals `multiplier` times the canonical one, so the
/// corresponding value functions differ by the same factor.
struct CanonicalCost {
    CostParams cost;
    double multiplier;
};

/// Maps (alpha, beta, c) with alpha1 < 0 < alpha2 and beta >= 0 onto
/// (a, b1, b2) by dividing through by alpha2.
inline CanonicalCost to_canonical(const TwoPieceCost& general) {
    validate_two_piece(general);
    const auto& al = general.alpha;
    const auto& be = general.beta;
    if (!(al[0] < 0.0 && al[1] > 0.0 && be[0] >= 0.0 && be[1] >= 0.0))
        throw InvalidArgument(
            "two-piece cost: only alpha1 < 0 < alpha2 with beta >= 0 maps to (a, b1, b2)");
    CostParams canonical(-al[0] / al[1], be[0] / al[1], be[1] / al[1]);
    if (std::abs(canonical.c() - general.c) > 1e-9 * (1.0 + general.c))
        throw InvalidArgument("two-piece cost: inconsistent kink slope");
    return {canonical, al[1]};
}

enum class CostMode { regular, degenerate_b1_zero };

inline const char* to_string(CostMode mode) {
    return mode == CostMode::regular ? "regular" : "degenerate-b1-zero";
}

struct ValidationReport {
    bool ok = true;
    double c = 0.0;
    CostMode mode = CostMode::regular;
    /// min(S11, S22) >= |S12|: the monotone finite-difference schemes need it.
    bool monotone_scheme = true;
    std::vector<std::string> notes;
};

inline void validate_model(const ModelParams& model) {
    if (!std::isfinite(model.theta[0]) || !std::isfinite(model.theta[1]))
        throw InvalidArgument("model: theta must be finite");
    if (!model.sigma.positive_definite())
        throw InvalidArgument("model: sigma must be symmetric positive definite");
    if (!(model.gamma > 0.0) || !std::isfinite(model.gamma))
        throw InvalidArgument("model: gamma must be positive, got " + std::to_string(model.gamma));
}

inline ValidationReport validate(const ModelParams& model, const CostParams& cost) {
    validate_model(model);
    ValidationReport report;
    report.c = cost.c();
    report.mode = cost.degenerate() ? CostMode::degenerate_b1_zero : CostMode::regular;
    const double off = std::abs(model.sigma.xy);
    report.monotone_scheme = std::min(model.sigma.xx, model.sigma.yy) >= off;
    if (!report.monotone_scheme)
        report.notes.emplace_back("min(S11, S22) < |S12|: grid solvers are unavailable");
    if (report.mode == CostMode::degenerate_b1_zero)
        report.notes.emplace_back("b1 = 0: stopping value vanishes, ray policy applies");
    return report;
}

namespace detail {
inline void require_quadrant(const Vec2& z) {
    if (!(z[0] >= 0.0 && z[1] >= 0.0))
        throw InvalidArgument("point outside the quadrant");
}
}  // namespace detail

inline double cost_ell(const CostParams& cost, const Vec2& z) {
    detail::require_quadrant(z);
    return cost.ell(z);
}

inline double cost_ellhat(const CostParams& cost, const Vec2& z) {
    detail::require_quadrant(z);
    return cost.ellhat(z);
}

}  // namespace freebound
