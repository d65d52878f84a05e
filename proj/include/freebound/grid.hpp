#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "freebound/errors.hpp"
#include "freebound/model.hpp"

namespace freebound {

/// Uniform grid on the truncated quadrant [0, L1] x [0, L2] with n1 x n2
/// cells; node (i, j) sits at (i h1, j h2).
struct GridSpec {
    double L1 = 8.0;
    double L2 = 8.0;
    std::size_t n1 = 256;
    std::size_t n2 = 256;

    double h1() const { return L1 / static_cast<double>(n1); }
    double h2() const { return L2 / static_cast<double>(n2); }
    double x1(std::size_t i) const { return static_cast<double>(i) * h1(); }
    double x2(std::size_t j) const { return static_cast<double>(j) * h2(); }
    std::size_t nodes() const { return (n1 + 1) * (n2 + 1); }
    /// Row-major: rows are fixed x2, x1 runs fastest.
    std::size_t index(std::size_t i, std::size_t j) const { return j * (n1 + 1) + i; }

    void validate() const {
        if (!(L1 > 0.0) || !(L2 > 0.0)) throw InvalidArgument("grid: extents must be positive");
        if (n1 < 8 || n2 < 8) throw InvalidArgument("grid: at least 8 cells per axis");
    }

    bool operator==(const GridSpec& o) const {
        return L1 == o.L1 && L2 == o.L2 && n1 == o.n1 && n2 == o.n2;
    }
};

inline void require_same_grid(const GridSpec& a, const GridSpec& b, const char* what) {
    if (!(a == b)) throw GridMismatch(std::string(what) + ": fields live on different grids");
}

/// Index window of the inner 80% subgrid (10% trimmed on each side).
struct IndexWindow {
    std::size_t i0, i1, j0, j1;  // inclusive

    bool contains(std::size_t i, std::size_t j) const {
        return i >= i0 && i <= i1 && j >= j0 && j <= j1;
    }
};

inline IndexWindow inner_window(const GridSpec& g, double keep = 0.8) {
    const double trim = 0.5 * (1.0 - keep);
    auto lo = [&](std::size_t n) {
        return static_cast<std::size_t>(std::ceil(trim * static_cast<double>(n) - 1e-9));
    };
    auto hi = [&](std::size_t n) {
        return static_cast<std::size_t>(std::floor((1.0 - trim) * static_cast<double>(n) + 1e-9));
    };
    return {lo(g.n1), hi(g.n1), lo(g.n2), hi(g.n2)};
}

enum class FieldKind { u, V, residual };

inline const char* to_string(FieldKind kind) {
    switch (kind) {
        case FieldKind::u: return "u";
        case FieldKind::V: return "V";
        case FieldKind::residual: return "residual";
    }
    return "?";
}

/// A value function sampled on a GridSpec.
struct ScalarField {
    GridSpec grid;
    std::vector<double> values;
    FieldKind kind = FieldKind::u;

    ScalarField() = default;
    ScalarField(const GridSpec& g, FieldKind k, double fill = 0.0)
        : grid(g), values(g.nodes(), fill), kind(k) {}

    double& at(std::size_t i, std::size_t j) { return values[grid.index(i, j)]; }
    double at(std::size_t i, std::size_t j) const { return values[grid.index(i, j)]; }

    double max() const { return *std::max_element(values.begin(), values.end()); }
    double min() const { return *std::min_element(values.begin(), values.end()); }

    /// Bilinear interpolation; points outside the domain are clamped onto it.
    double interpolate(double x1, double x2) const {
        const double s = std::clamp(x1 / grid.h1(), 0.0, static_cast<double>(grid.n1));
        const double t = std::clamp(x2 / grid.h2(), 0.0, static_cast<double>(grid.n2));
        const auto i = std::min(static_cast<std::size_t>(s), grid.n1 - 1);
        const auto j = std::min(static_cast<std::size_t>(t), grid.n2 - 1);
        const double fs = s - static_cast<double>(i);
        const double ft = t - static_cast<double>(j);
        const double lower = (1.0 - fs) * at(i, j) + fs * at(i + 1, j);
        const double upper = (1.0 - fs) * at(i, j + 1) + fs * at(i + 1, j + 1);
        return (1.0 - ft) * lower + ft * upper;
    }

    double interpolate(const Vec2& x) const { return interpolate(x[0], x[1]); }
};

/// Nearest grid index of an abscissa, for probe lookups.
inline std::size_t nearest_index(double x, double h, std::size_t n) {
    const double k = std::round(x / h);
    return static_cast<std::size_t>(std::clamp(k, 0.0, static_cast<double>(n)));
}

}  // namespace freebound
