#pragma once

#include <vector>

#include "vfckit/box.hpp"
#include "vfckit/errors.hpp"
#include "vfckit/smooth.hpp"

namespace vfckit {

struct NewtonStats {
    int seeds = 0;
    int converged = 0;
    int nonconverged = 0;
};

// Grid-seeded Newton (square systems) / Gauss-Newton (rectangular). Returns
// in-domain converged points deduplicated at radius `dedup` in chart
// coordinates. Deterministic: seeds are visited in grid order and dedup keeps
// the first representative.
inline std::vector<Vec> find_zeros(const Smooth& f, const Domain& domain, int grid_density,
                                   double tol, int max_iter, double dedup,
                                   NewtonStats* stats = nullptr) {
    std::vector<Vec> zeros;
    auto seeds = domain.sample_grid(grid_density);
    if (stats) stats->seeds = (int)seeds.size();
    const bool square = f.n_out() == f.n_in();
    for (const auto& seed : seeds) {
        Vec x = seed;
        bool ok = false;
        for (int it = 0; it < max_iter; ++it) {
            Vec r = f(x);
            if (r.norm() <= tol) {
                ok = true;
                break;
            }
            Mat j = f.jac(x);
            Vec dx;
            if (square) {
                if (!solve_square(j, r, dx)) break;
            } else {
                dx = solve_lsq(j, r);
            }
            if (!dx.allFinite()) break;
            // damped step so iterates cannot fly far outside the box
            double cap = 0.5 * (domain.hi - domain.lo).norm();
            if (dx.norm() > cap) dx *= cap / dx.norm();
            x -= dx;
            if (dx.norm() <= tol && f(x).norm() <= std::sqrt(tol)) {
                ok = f(x).norm() <= tol;
                if (!ok && dx.norm() < 1e-15) break;
            }
        }
        if (!ok || !x.allFinite()) {
            if (stats) stats->nonconverged++;
            continue;
        }
        if (!domain.contains(x, 1e-9)) continue;
        if (stats) stats->converged++;
        bool dup = false;
        for (const auto& z : zeros)
            if ((z - x).norm() <= dedup) {
                dup = true;
                break;
            }
        if (!dup) zeros.push_back(x);
    }
    return zeros;
}

// Newton refinement from a given start; returns true on convergence.
inline bool refine_zero(const Smooth& f, Vec& x, double tol, int max_iter) {
    const bool square = f.n_out() == f.n_in();
    for (int it = 0; it < max_iter; ++it) {
        Vec r = f(x);
        if (r.norm() <= tol) return true;
        Mat j = f.jac(x);
        Vec dx;
        if (square) {
            if (!solve_square(j, r, dx)) return false;
        } else {
            dx = solve_lsq(j, r);
        }
        if (!dx.allFinite()) return false;
        x -= dx;
    }
    return f(x).norm() <= tol;
}

// Sample cloud on the zero SET of a rectangular system (vdim >= 1): runs
// Gauss-Newton from every grid seed and keeps converged points with a small
// dedup radius, giving a point cloud that covers the zero locus.
inline std::vector<Vec> zero_cloud(const Smooth& f, const Domain& domain, int grid_density,
                                   double tol, int max_iter, double cloud_dedup = 1e-3) {
    if (f.n_out() == 0) return domain.sample_grid(grid_density);  // rank-0: all of V
    return find_zeros(f, domain, grid_density, tol, max_iter, cloud_dedup);
}

}  // namespace vfckit
