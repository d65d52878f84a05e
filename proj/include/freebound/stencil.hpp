#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>

#include "freebound/errors.hpp"
#include "freebound/grid.hpp"
#include "freebound/model.hpp"

namespace freebound {

/// How the generator gamma + A is closed on one side of the domain.
enum class EdgeRule {
    /// Zero normal derivative through a mirrored ghost node.
    reflect,
    /// Normal second-order term, mixed term and outward drift are dropped
    /// (the solution is taken to be linear across the edge).
    extrapolate,
    /// Node values are prescribed; the solver never builds rows there.
    fixed,
};

struct EdgeRules {
    EdgeRule x1_low = EdgeRule::reflect;
    EdgeRule x1_high = EdgeRule::extrapolate;
    EdgeRule x2_low = EdgeRule::reflect;
    EdgeRule x2_high = EdgeRule::extrapolate;
};

/// One row of the monotone discretization of
///   gamma v - 1/2 tr(S D^2 v) - theta . D v
/// written as  diag * v0 - sum_k weight_k * v_k  with weight_k >= 0.
struct StencilRow {
    struct Entry {
        std::size_t index;
        double weight;
    };
    double diag = 0.0;
    std::array<Entry, 8> entries{};
    std::size_t count = 0;

    void add(std::size_t index, double weight) {
        if (weight == 0.0) return;
        entries[count++] = {index, weight};
        diag += weight;
    }

    /// Continuation value (f + sum w v_k) / diag.
    template <typename Values>
    double backup(const Values& v, double source) const {
        double acc = source;
        for (std::size_t k = 0; k < count; ++k) acc += entries[k].weight * v[entries[k].index];
        return acc / diag;
    }

    /// diag v0 - sum w v_k - f.
    template <typename Values>
    double residual(const Values& v, std::size_t self, double source) const {
        double acc = diag * v[self] - source;
        for (std::size_t k = 0; k < count; ++k) acc -= entries[k].weight * v[entries[k].index];
        return acc;
    }
};

/// Requires S11 h2 >= |S12| h1 and S22 h1 >= |S12| h2, i.e. nonnegative
/// axial weights in the sign-adapted mixed-derivative stencil.
inline bool monotone_on(const ModelParams& model, const GridSpec& grid) {
    const double off = std::abs(model.sigma.xy);
    return model.sigma.xx * grid.h2() >= off * grid.h1() * (1.0 - 1e-12) &&
           model.sigma.yy * grid.h1() >= off * grid.h2() * (1.0 - 1e-12);
}

inline void require_monotone(const ModelParams& model, const GridSpec& grid) {
    if (!monotone_on(model, grid))
        throw InvalidArgument(
            "monotone scheme unavailable: need S11 h2 >= |S12| h1 and S22 h1 >= |S12| h2");
}

namespace detail {

/// Maps an offset neighbor index onto the grid through mirrored ghosts.
/// Returns false when the neighbor falls off an edge that is not mirrored.
inline bool resolve(std::ptrdiff_t k, std::size_t n, EdgeRule low, EdgeRule high,
                    std::size_t& out) {
    const auto nn = static_cast<std::ptrdiff_t>(n);
    if (k < 0) {
        if (low != EdgeRule::reflect) return false;
        k = -k;
    } else if (k > nn) {
        if (high != EdgeRule::reflect) return false;
        k = 2 * nn - k;
    }
    out = static_cast<std::size_t>(k);
    return true;
}

}  // namespace detail

/// Builds the row for node (i, j). Mixed derivatives use the 7-point
/// stencil oriented by the sign of S12; drift is upwinded.
inline StencilRow monotone_row(const ModelParams& model, const GridSpec& grid,
                               const EdgeRules& rules, std::size_t i, std::size_t j) {
    const double h1 = grid.h1();
    const double h2 = grid.h2();
    double a11 = 0.5 * model.sigma.xx / (h1 * h1);
    double a22 = 0.5 * model.sigma.yy / (h2 * h2);
    double mix = std::abs(model.sigma.xy) / (2.0 * h1 * h2);
    double up1 = std::max(model.theta[0], 0.0) / h1;
    double dn1 = std::max(-model.theta[0], 0.0) / h1;
    double up2 = std::max(model.theta[1], 0.0) / h2;
    double dn2 = std::max(-model.theta[1], 0.0) / h2;

    const bool on_x1_low = i == 0, on_x1_high = i == grid.n1;
    const bool on_x2_low = j == 0, on_x2_high = j == grid.n2;
    auto dropped = [](bool on, EdgeRule r) { return on && r == EdgeRule::extrapolate; };
    if (dropped(on_x1_low, rules.x1_low) || dropped(on_x1_high, rules.x1_high)) {
        a11 = 0.0;
        mix = 0.0;
        if (on_x1_low) dn1 = 0.0;
        if (on_x1_high) up1 = 0.0;
    }
    if (dropped(on_x2_low, rules.x2_low) || dropped(on_x2_high, rules.x2_high)) {
        a22 = 0.0;
        mix = 0.0;
        if (on_x2_low) dn2 = 0.0;
        if (on_x2_high) up2 = 0.0;
    }

    StencilRow row;
    row.diag = model.gamma;
    auto add = [&](int di, int dj, double w) {
        if (w <= 0.0) return;  // exact zero, or roundoff at S11 h2 == |S12| h1
        std::size_t ii = 0, jj = 0;
        const bool ok1 = detail::resolve(static_cast<std::ptrdiff_t>(i) + di, grid.n1,
                                         rules.x1_low, rules.x1_high, ii);
        const bool ok2 = detail::resolve(static_cast<std::ptrdiff_t>(j) + dj, grid.n2,
                                         rules.x2_low, rules.x2_high, jj);
        if (!ok1 || !ok2) return;  // only reached by terms already dropped
        row.add(grid.index(ii, jj), w);
    };
    add(+1, 0, a11 - mix + up1);
    add(-1, 0, a11 - mix + dn1);
    add(0, +1, a22 - mix + up2);
    add(0, -1, a22 - mix + dn2);
    if (model.sigma.xy >= 0.0) {
        add(+1, +1, mix);
        add(-1, -1, mix);
    } else {
        add(+1, -1, mix);
        add(-1, +1, mix);
    }
    return row;
}

}  // namespace freebound
