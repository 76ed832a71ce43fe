#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "vfckit/linalg.hpp"

namespace vfckit {

// Chart domain: an axis-aligned box with a corner mask marking the faces that
// are true boundary (manifold-with-corners model), optionally intersected
// with an origin-centered spherical shell so rotation groups have invariant
// domains. Shell faces are always artificial.
struct Domain {
    Vec lo, hi;
    std::vector<bool> boundary_lo;  // per axis: lo face is true boundary
    std::vector<bool> boundary_hi;
    double ball_outer = -1.0;       // <0: no ball clip
    double ball_inner = -1.0;       // <0: solid

    int dim() const { return (int)lo.size(); }

    static Domain box(std::initializer_list<std::pair<double, double>> ranges) {
        Domain d;
        d.lo = Vec(ranges.size());
        d.hi = Vec(ranges.size());
        int i = 0;
        for (auto& r : ranges) {
            d.lo[i] = r.first;
            d.hi[i] = r.second;
            ++i;
        }
        d.boundary_lo.assign(ranges.size(), false);
        d.boundary_hi.assign(ranges.size(), false);
        return d;
    }

    Domain with_boundary_lo(int axis) const {
        Domain d = *this;
        d.boundary_lo[axis] = true;
        return d;
    }
    Domain with_boundary_hi(int axis) const {
        Domain d = *this;
        d.boundary_hi[axis] = true;
        return d;
    }
    Domain with_ball(double outer, double inner = -1.0) const {
        Domain d = *this;
        d.ball_outer = outer;
        d.ball_inner = inner;
        return d;
    }

    bool contains(const Vec& x, double tol = 0.0) const {
        for (int i = 0; i < dim(); ++i)
            if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
        if (ball_outer > 0 && x.norm() > ball_outer + tol) return false;
        if (ball_inner > 0 && x.norm() < ball_inner - tol) return false;
        return true;
    }

    // Interior with a uniform margin eaten off every face (incl. ball faces).
    bool contains_margin(const Vec& x, double margin) const {
        for (int i = 0; i < dim(); ++i)
            if (x[i] < lo[i] + margin || x[i] > hi[i] - margin) return false;
        if (ball_outer > 0 && x.norm() > ball_outer - margin) return false;
        if (ball_inner > 0 && x.norm() < ball_inner + margin) return false;
        return true;
    }

    Domain shrunk(double margin) const {
        Domain d = *this;
        for (int i = 0; i < dim(); ++i) {
            d.lo[i] += margin;
            d.hi[i] -= margin;
        }
        if (d.ball_outer > 0) d.ball_outer -= margin;
        if (d.ball_inner > 0) d.ball_inner += margin;
        return d;
    }

    Vec center() const { return 0.5 * (lo + hi); }

    // Deterministic sample grid: density points per axis, offset half a cell
    // from the faces, filtered by the ball clip.
    std::vector<Vec> sample_grid(int density) const {
        std::vector<Vec> pts;
        if (dim() == 0) {
            pts.push_back(Vec(0));
            return pts;
        }
        std::vector<int> idx(dim(), 0);
        Vec x(dim());
        while (true) {
            for (int i = 0; i < dim(); ++i)
                x[i] = lo[i] + (hi[i] - lo[i]) * (idx[i] + 0.5) / density;
            if (contains(x)) pts.push_back(x);
            int k = dim() - 1;
            while (k >= 0 && ++idx[k] == density) idx[k--] = 0;
            if (k < 0) break;
        }
        return pts;
    }

    // Points on the codimension-1 face {axis = (side? hi : lo)}.
    std::vector<Vec> sample_face(int axis, bool side, int density) const {
        std::vector<Vec> pts;
        Domain sub = *this;
        sub.lo[axis] = sub.hi[axis] = side ? hi[axis] : lo[axis];
        if (dim() == 1) {
            Vec x(1);
            x[0] = sub.lo[0];
            if (contains(x, 1e-12)) pts.push_back(x);
            return pts;
        }
        std::vector<int> idx(dim(), 0);
        Vec x(dim());
        while (true) {
            for (int i = 0; i < dim(); ++i)
                x[i] = i == axis ? sub.lo[axis]
                                 : lo[i] + (hi[i] - lo[i]) * (idx[i] + 0.5) / density;
            if (contains(x, 1e-12)) pts.push_back(x);
            int k = dim() - 1;
            while (k >= 0) {
                if (k == axis) { --k; continue; }
                if (++idx[k] == density) { idx[k--] = 0; } else break;
            }
            if (k < 0) break;
        }
        return pts;
    }

    // Number of true-boundary faces the point lies on (corner stratum depth).
    int corner_depth(const Vec& x, double tol = 1e-9) const {
        int k = 0;
        for (int i = 0; i < dim(); ++i) {
            if (boundary_lo[i] && std::abs(x[i] - lo[i]) <= tol) ++k;
            if (boundary_hi[i] && std::abs(x[i] - hi[i]) <= tol) ++k;
        }
        return k;
    }

    std::string str() const {
        std::string s = "[";
        for (int i = 0; i < dim(); ++i) {
            if (i) s += " x ";
            s += (boundary_lo[i] ? "[" : "(") + std::to_string(lo[i]) + "," +
                 std::to_string(hi[i]) + (boundary_hi[i] ? "]" : ")");
        }
        if (ball_outer > 0) s += " ∩ ball(" + std::to_string(ball_outer) + ")";
        if (ball_inner > 0) s += "∖ball(" + std::to_string(ball_inner) + ")";
        return s + "]";
    }
};

}  // namespace vfckit
