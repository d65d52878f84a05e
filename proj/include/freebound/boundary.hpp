#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "freebound/errors.hpp"
#include "freebound/grid.hpp"

namespace freebound {

/// Sampled free boundary: psi[j] is the abscissa separating the zero set
/// of u from its support on row x2 = x2_grid[j].
struct Boundary {
    std::vector<double> x2_grid;
    std::vector<double> psi;
    double zero_tol = 0.0;
    bool degenerate = false;
    /// Mesh width along x1 of the field the boundary came from.
    double h1 = 0.0;

    /// Linear interpolation in x2; beyond the last row the boundary is
    /// continued with slope `tail_slope`, capped at x2 * tail_slope.
    double at(double x2, double tail_slope = 0.0) const {
        if (psi.empty()) return 0.0;
        if (x2 <= x2_grid.front()) return psi.front();
        if (x2 >= x2_grid.back()) {
            const double ext = psi.back() + tail_slope * (x2 - x2_grid.back());
            return tail_slope > 0.0 ? std::min(ext, std::max(psi.back(), x2 * tail_slope)) : ext;
        }
        // Rows are uniformly spaced when they come from a grid; guess first.
        const double step = (x2_grid.back() - x2_grid.front()) / static_cast<double>(psi.size() - 1);
        auto j = static_cast<std::size_t>((x2 - x2_grid.front()) / step);
        if (j + 1 >= psi.size() || !(x2_grid[j] <= x2 && x2 <= x2_grid[j + 1])) {
            const auto it = std::upper_bound(x2_grid.begin(), x2_grid.end(), x2);
            j = static_cast<std::size_t>(it - x2_grid.begin()) - 1;
        }
        const double t = (x2 - x2_grid[j]) / (x2_grid[j + 1] - x2_grid[j]);
        return (1.0 - t) * psi[j] + t * psi[j + 1];
    }
};

/// Per row, the largest node with u <= zero_tol, moved right to the point
/// where the linear interpolant of u crosses zero_tol.
inline Boundary extract_boundary(const ScalarField& u, double zero_tol) {
    if (!(zero_tol > 0.0)) throw InvalidArgument("extract_boundary: zero_tol must be positive");
    const auto& g = u.grid;
    Boundary b;
    b.zero_tol = zero_tol;
    b.h1 = g.h1();
    b.x2_grid.resize(g.n2 + 1);
    b.psi.resize(g.n2 + 1);

    const IndexWindow w = inner_window(g);
    double inner_max = 0.0;
    for (std::size_t j = w.j0; j <= w.j1; ++j)
        for (std::size_t i = w.i0; i <= w.i1; ++i) inner_max = std::max(inner_max, u.at(i, j));
    b.degenerate = inner_max <= zero_tol;

    for (std::size_t j = 0; j <= g.n2; ++j) {
        b.x2_grid[j] = g.x2(j);
        std::size_t last = 0;
        bool any = false;
        for (std::size_t i = 0; i <= g.n1; ++i)
            if (u.at(i, j) <= zero_tol) {
                last = i;
                any = true;
            }
        if (!any) {
            b.psi[j] = 0.0;
            continue;
        }
        double x = g.x1(last);
        if (last < g.n1) {
            const double lo = u.at(last, j);
            const double hi = u.at(last + 1, j);
            if (hi > lo) x += g.h1() * std::clamp((zero_tol - lo) / (hi - lo), 0.0, 1.0);
        }
        b.psi[j] = x;
    }
    return b;
}

struct BoundaryReport {
    double max_slope = 0.0;
    double slope_limit = 0.0;
    bool slope_ok = false;
    /// Rows where psi drops by more than one cell below its running maximum.
    std::size_t monotonicity_violations = 0;
    bool monotone_ok = false;
    /// Largest violation of 0 <= psi <= x2 / c + h1 (0 when contained).
    double cone_excess = 0.0;
    bool cone_ok = false;
    double psi_low = 0.0;
    double psi_high = 0.0;
    bool growth_ok = false;
    std::vector<std::string> notes;

    bool ok() const { return slope_ok && monotone_ok && cone_ok && growth_ok; }
};

/// Lipschitz bound 1/c, monotonicity, cone containment and growth of psi.
/// `slope_slack` < 0 selects (h1 + h2) / (c h2). Slope and monotonicity
/// skip the top 10% of rows, where the far-edge closure distorts u.
inline BoundaryReport check_boundary(const Boundary& b, double c, double slope_slack = -1.0) {
    if (b.degenerate)
        throw DegenerateModeError(
            "boundary is degenerate (b1 = 0): the stopping value vanishes and the ray "
            "policy x1 = x2 / c replaces the free boundary");
    if (!(c > 0.0)) throw InvalidArgument("check_boundary: c must be positive");
    if (b.psi.size() < 2) throw InvalidArgument("check_boundary: need at least two rows");
    BoundaryReport r;
    const double h2 = b.x2_grid[1] - b.x2_grid[0];
    if (slope_slack < 0.0) slope_slack = (b.h1 + h2) / (c * h2);
    r.slope_limit = 1.0 / c + slope_slack;

    const std::size_t n2 = b.psi.size() - 1;
    const auto top = static_cast<std::size_t>(std::floor(0.9 * static_cast<double>(n2) + 1e-9));
    double running_max = b.psi.front();
    for (std::size_t j = 0; j <= n2; ++j) {
        const double upper = b.x2_grid[j] / c + b.h1;
        r.cone_excess = std::max({r.cone_excess, -b.psi[j], b.psi[j] - upper});
        if (j > top) continue;
        if (j < top) {
            const double dx = b.x2_grid[j + 1] - b.x2_grid[j];
            r.max_slope = std::max(r.max_slope, (b.psi[j + 1] - b.psi[j]) / dx);
        }
        if (b.psi[j] < running_max - b.h1) ++r.monotonicity_violations;
        running_max = std::max(running_max, b.psi[j]);
    }
    r.slope_ok = r.max_slope <= r.slope_limit;
    r.monotone_ok = r.monotonicity_violations == 0;
    r.cone_ok = r.cone_excess <= 0.0;

    const double L2 = b.x2_grid.back();
    r.psi_low = b.at(0.4 * L2);
    r.psi_high = b.at(0.8 * L2);
    r.growth_ok = r.psi_high > r.psi_low;
    if (!r.growth_ok)
        r.notes.emplace_back("psi does not grow between 0.4 L2 and 0.8 L2; the boundary is flat "
                             "on this domain");
    return r;
}

/// CSV with header `x2,psi`.
inline void write_boundary_csv(std::ostream& os, const Boundary& b) {
    os.precision(17);
    os << "x2,psi\n";
    for (std::size_t j = 0; j < b.psi.size(); ++j) os << b.x2_grid[j] << ',' << b.psi[j] << '\n';
}

}  // namespace freebound
