#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "vfckit/errors.hpp"
#include "vfckit/linalg.hpp"

namespace vfckit {

struct QuadRule1d {
    std::vector<double> nodes;    // on [-1,1]
    std::vector<double> weights;
};

// Gauss-Legendre nodes by Newton iteration on P_n, seeded with the Chebyshev
// approximation. Accurate to machine precision for n <= 64.
inline const QuadRule1d& gauss_legendre(int n) {
    static std::vector<QuadRule1d> cache(65);
    if (n < 1 || n > 64) throw VfcError(ErrCode::QUADRATURE_DIVERGED, "order out of range");
    QuadRule1d& rule = cache[n];
    if (!rule.nodes.empty()) return rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            // Legendre recurrence for P_n(x) and derivative.
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            pp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        rule.nodes[n - 1 - i] = x;
        rule.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * pp * pp);
    }
    return rule;
}

inline double integrate_1d(const std::function<double(double)>& f, double a, double b, int order) {
    const QuadRule1d& r = gauss_legendre(order);
    double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double acc = 0.0;
    for (int i = 0; i < order; ++i) acc += r.weights[i] * f(mid + half * r.nodes[i]);
    return acc * half;
}

// Tensor-product rule over an axis-aligned box given by (lo, hi) per axis.
// Visits nodes in lexicographic order so reductions are deterministic.
inline double integrate_box(const std::function<double(const Vec&)>& f, const Vec& lo,
                            const Vec& hi, int order) {
    const int d = (int)lo.size();
    if (d == 0) return f(Vec(0));
    const QuadRule1d& r = gauss_legendre(order);
    std::vector<int> idx(d, 0);
    Vec x(d);
    double acc = 0.0;
    while (true) {
        double w = 1.0;
        for (int k = 0; k < d; ++k) {
            double mid = 0.5 * (lo[k] + hi[k]), half = 0.5 * (hi[k] - lo[k]);
            x[k] = mid + half * r.nodes[idx[k]];
            w *= r.weights[idx[k]] * half;
        }
        double v = f(x);
        if (!std::isfinite(v)) throw VfcError(ErrCode::QUADRATURE_DIVERGED, "non-finite integrand");
        acc += w * v;
        int k = d - 1;
        while (k >= 0 && ++idx[k] == order) idx[k--] = 0;
        if (k < 0) break;
    }
    return acc;
}

}  // namespace vfckit
