#pragma once

#include <optional>

#include "vfckit/newton.hpp"
#include "vfckit/quadrature.hpp"

namespace vfckit {

// Oriented polyline model of a 1-dimensional transversal zero set
// {s = 0} in a chart domain. Orientation is the frozen normal-first rule:
// the tangent tau satisfies det[Ds^T | tau] > 0 in chart coordinates.
struct TracedCurve {
    std::vector<Vec> nodes;  // in traversal order
    bool closed = false;
    // when open: which face each endpoint lies on (axis, side_hi), or nullopt
    // if the curve stopped at the ball face
    std::optional<std::pair<int, bool>> start_face, end_face;
};

namespace detail {

inline Vec oriented_tangent(const Smooth& s, const Vec& x, double tau_rank) {
    Mat ds = s.jac(x);
    Mat K = kernel_basis(ds, tau_rank);
    if (K.cols() != 1)
        throw VfcError(ErrCode::NOT_TRANSVERSAL, "tangent not 1-dimensional at " + point_str(x));
    Vec t = K.col(0);
    Mat frame(x.size(), x.size());
    frame.leftCols(ds.rows()) = ds.transpose();
    frame.rightCols(1) = t;
    if (frame.determinant() < 0) t = -t;
    return t / t.norm();
}

// Corrector: solve s(x)=0 constrained to the hyperplane through pred
// orthogonal to dir.
inline bool correct_on_plane(const Smooth& s, const Vec& pred, const Vec& dir, Vec& x,
                             double tol_newton) {
    x = pred;
    for (int it = 0; it < 30; ++it) {
        Vec r(s.n_out() + 1);
        r.head(s.n_out()) = s(x);
        r[s.n_out()] = dir.dot(x - pred);
        if (r.norm() <= tol_newton) return true;
        Mat j(s.n_out() + 1, x.size());
        j.topRows(s.n_out()) = s.jac(x);
        j.bottomRows(1) = dir.transpose();
        Vec dx;
        if (!solve_square(j, r, dx)) return false;
        x -= dx;
    }
    return s(x).norm() <= std::sqrt(tol_newton);
}

// Endpoint on a box face: fix the crossed coordinate, solve the remaining
// (d-1)-system from the last interior point.
inline std::optional<Vec> land_on_face(const Smooth& s, const Domain& dom, const Vec& from,
                                       int axis, bool side_hi, double tol_newton) {
    Vec x = from;
    double c = side_hi ? dom.hi[axis] : dom.lo[axis];
    x[axis] = c;
    for (int it = 0; it < 30; ++it) {
        Vec r = s(x);
        if (r.norm() <= tol_newton) return x;
        Mat j = s.jac(x);
        // drop the fixed column
        Mat jr(j.rows(), j.cols() - 1);
        for (int col = 0, cc = 0; col < j.cols(); ++col)
            if (col != axis) jr.col(cc++) = j.col(col);
        Vec dx;
        if (!solve_square(jr, r, dx)) return std::nullopt;
        for (int col = 0, cc = 0; col < j.cols(); ++col)
            if (col != axis) x[col] -= dx[cc++];
    }
    return s(x).norm() <= std::sqrt(tol_newton) ? std::optional<Vec>(x) : std::nullopt;
}

}  // namespace detail

// Predictor-corrector tracing of all components of {s=0} in the domain.
// Seeds from the zero cloud; components are deduplicated by proximity.
inline std::vector<TracedCurve> trace_zero_curves(const Smooth& s, const Domain& dom,
                                                  const Tolerances& tol = {}) {
    std::vector<TracedCurve> curves;
    auto seeds = zero_cloud(s, dom, tol.grid_density, 1e-10, tol.newton_max_iter, 5 * tol.h_trace);
    const double h = tol.h_trace;
    const int max_steps = (int)(20.0 * (dom.hi - dom.lo).norm() / h) + 100;

    auto on_existing = [&](const Vec& x) {
        for (const auto& c : curves)
            for (const auto& p : c.nodes)
                if ((p - x).norm() < 2 * h) return true;
        return false;
    };

    for (const auto& seed : seeds) {
        if (on_existing(seed)) continue;
        // trace both directions
        std::vector<Vec> fwd{seed}, bwd;
        std::optional<std::pair<int, bool>> fwd_face, bwd_face;
        bool closed = false;
        for (int dir = 0; dir < 2 && !closed; ++dir) {
            Vec x = seed;
            std::vector<Vec>& side = dir == 0 ? fwd : bwd;
            auto& face_out = dir == 0 ? fwd_face : bwd_face;
            for (int step = 0; step < max_steps; ++step) {
                Vec t = detail::oriented_tangent(s, x, tol.tau_rank);
                if (dir == 1) t = -t;
                Vec pred = x + h * t;
                Vec nxt;
                if (!detail::correct_on_plane(s, pred, t, nxt, 1e-12))
                    throw VfcError(ErrCode::TRACE_BREAK, "corrector failed near " + point_str(x));
                if (!dom.contains(nxt, 0.0)) {
                    // find which box face was crossed and land exactly on it
                    int axis = -1;
                    bool hi = false;
                    for (int a = 0; a < dom.dim(); ++a) {
                        if (nxt[a] < dom.lo[a]) { axis = a; hi = false; }
                        if (nxt[a] > dom.hi[a]) { axis = a; hi = true; }
                    }
                    if (axis >= 0) {
                        auto endp = detail::land_on_face(s, dom, x, axis, hi, 1e-12);
                        if (endp) {
                            side.push_back(*endp);
                            face_out = std::make_pair(axis, hi);
                        }
                    }
                    break;
                }
                side.push_back(nxt);
                x = nxt;
                if (step > 3 && (nxt - seed).norm() < 0.9 * h) {
                    closed = true;
                    break;
                }
                if (step == max_steps - 1)
                    throw VfcError(ErrCode::TRACE_BREAK,
                                   "step budget exhausted at " + point_str(nxt));
            }
        }
        TracedCurve c;
        c.closed = closed;
        if (closed) {
            c.nodes = fwd;
        } else {
            // bwd runs opposite to orientation: reverse and prepend
            c.nodes.assign(bwd.rbegin(), bwd.rend());
            c.nodes.insert(c.nodes.end(), fwd.begin(), fwd.end());
            c.start_face = bwd_face;
            c.end_face = fwd_face;
        }
        if (c.nodes.size() >= 2) curves.push_back(std::move(c));
    }
    return curves;
}

// Integral of sum_j a_j dx_j over a traced curve. Per segment the curve is a
// graph over its dominant axis; Gauss-Legendre nodes are corrected back onto
// the curve and slopes come from the exact tangent, so accuracy is limited by
// the integrand, not the trace step.
inline double integrate_1form_on_curve(const Smooth& s, const TracedCurve& curve,
                                       const std::function<Vec(const Vec&)>& coeffs,
                                       int seg_order, const Tolerances& tol = {}) {
    double acc = 0.0;
    const auto& rule = gauss_legendre(seg_order);
    size_t nseg = curve.nodes.size() - 1 + (curve.closed ? 1 : 0);
    for (size_t k = 0; k < nseg; ++k) {
        const Vec& a = curve.nodes[k];
        const Vec& b = curve.nodes[(k + 1) % curve.nodes.size()];
        Vec chord = b - a;
        if (chord.norm() < 1e-15) continue;
        int jstar = 0;
        chord.cwiseAbs().maxCoeff(&jstar);
        double lo = a[jstar], hi = b[jstar];
        for (int q = 0; q < seg_order; ++q) {
            double t01 = 0.5 * (rule.nodes[q] + 1.0);
            double tj = lo + (hi - lo) * t01;
            Vec pred = a + t01 * chord;
            pred[jstar] = tj;
            Vec dirj = Vec::Zero(a.size());
            dirj[jstar] = 1.0;
            Vec x;
            if (!detail::correct_on_plane(s, pred, dirj, x, 1e-12)) x = pred;
            Vec tau = detail::oriented_tangent(s, x, tol.tau_rank);
            Vec av = coeffs(x);
            double integrand = 0.0;
            for (int j = 0; j < x.size(); ++j)
                integrand += av[j] * (j == jstar ? 1.0 : tau[j] / tau[jstar]);
            acc += 0.5 * rule.weights[q] * (hi - lo) * integrand;
        }
    }
    return acc;
}

}  // namespace vfckit
