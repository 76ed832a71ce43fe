#pragma once

#include <string>
#include <vector>

#include "vfckit/box.hpp"
#include "vfckit/errors.hpp"
#include "vfckit/linalg.hpp"
#include "vfckit/report.hpp"

namespace vfckit {

// Finite effective group of real matrices acting on a chart domain.
struct FiniteGroupAction {
    std::vector<Mat> elements;
    std::vector<std::string> labels;

    int size() const { return (int)elements.size(); }
    int dim() const { return elements.empty() ? 0 : (int)elements[0].rows(); }

    static FiniteGroupAction trivial(int dim) {
        FiniteGroupAction g;
        g.elements.push_back(Mat::Identity(dim, dim));
        g.labels.push_back("e");
        return g;
    }

    // Z2 acting by coordinate sign flip on 1-d charts.
    static FiniteGroupAction sign_flip_1d() {
        FiniteGroupAction g;
        g.elements.push_back(Mat::Identity(1, 1));
        g.elements.push_back(-Mat::Identity(1, 1));
        g.labels = {"e", "s"};
        return g;
    }

    // Z_n rotations of the plane, generated by multiplication so closure
    // residuals stay at machine precision.
    static FiniteGroupAction rotation_2d(int n) {
        FiniteGroupAction g;
        Mat r(2, 2);
        double th = 2.0 * M_PI / n;
        r << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
        Mat acc = Mat::Identity(2, 2);
        for (int k = 0; k < n; ++k) {
            g.elements.push_back(acc);
            g.labels.push_back("r" + std::to_string(k));
            acc = r * acc;
        }
        return g;
    }

    int identity_index(double tol = 1e-10) const {
        for (int i = 0; i < size(); ++i)
            if ((elements[i] - Mat::Identity(dim(), dim())).norm() <= tol) return i;
        return -1;
    }

    // Index of the element closest to m, or -1 beyond tol.
    int find(const Mat& m, double tol) const {
        int best = -1;
        double best_d = tol;
        for (int i = 0; i < size(); ++i) {
            double d = (elements[i] - m).norm();
            if (d <= best_d) {
                best_d = d;
                best = i;
            }
        }
        return best;
    }

    // gi * gj = g(table[i][j]); throws if closure fails.
    std::vector<std::vector<int>> multiplication_table(double tol) const {
        std::vector<std::vector<int>> table(size(), std::vector<int>(size(), -1));
        for (int i = 0; i < size(); ++i)
            for (int j = 0; j < size(); ++j) table[i][j] = find(elements[i] * elements[j], tol);
        return table;
    }

    FiniteGroupAction subgroup(const std::vector<int>& idx) const {
        FiniteGroupAction g;
        for (int i : idx) {
            g.elements.push_back(elements[i]);
            g.labels.push_back(i < (int)labels.size() ? labels[i] : "g" + std::to_string(i));
        }
        return g;
    }
};

// Group-axiom and effectivity diagnostics over a sampled domain.
inline Report verify_group(const FiniteGroupAction& g, const Domain& domain,
                           const Tolerances& tol = {}) {
    Report rep;
    rep.subject = "group";
    if (g.elements.empty()) throw VfcError(ErrCode::EMPTY_GROUP, "no elements");
    for (const auto& m : g.elements)
        if (m.rows() != m.cols() || (int)m.rows() != domain.dim())
            throw VfcError(ErrCode::MALFORMED_MATRIX,
                           "element is not a square matrix of the chart dimension");

    double worst_closure = 0.0;
    std::string closure_witness;
    for (int i = 0; i < g.size(); ++i)
        for (int j = 0; j < g.size(); ++j) {
            Mat prod = g.elements[i] * g.elements[j];
            double best = 1e300;
            for (int k = 0; k < g.size(); ++k) best = std::min(best, (prod - g.elements[k]).norm());
            if (best > worst_closure) {
                worst_closure = best;
                closure_witness = "g" + std::to_string(i) + "*g" + std::to_string(j);
            }
        }
    rep.add_residual("closure", worst_closure, tol.tau_grp, closure_witness);

    double id_res = 1e300;
    for (const auto& m : g.elements)
        id_res = std::min(id_res, (m - Mat::Identity(g.dim(), g.dim())).norm());
    rep.add_residual("identity_present", id_res, tol.tau_grp);

    double worst_inv = 0.0;
    for (int i = 0; i < g.size(); ++i) {
        Mat inv = g.elements[i].inverse();
        double best = 1e300;
        for (int k = 0; k < g.size(); ++k) best = std::min(best, (inv - g.elements[k]).norm());
        worst_inv = std::max(worst_inv, best);
    }
    rep.add_residual("inverses_present", worst_inv, tol.tau_grp);

    // Effectivity: every non-identity element must move some sample point.
    auto samples = domain.sample_grid(tol.sample_density);
    int id = g.identity_index(tol.tau_grp);
    bool effective = true;
    std::string eff_witness;
    for (int i = 0; i < g.size(); ++i) {
        if (i == id) continue;
        // also catch duplicated identities: two elements within tau of each other
        bool moves = false;
        Vec moved_at;
        for (const auto& p : samples) {
            if ((g.elements[i] * p - p).norm() > tol.tau_grp) {
                moves = true;
                moved_at = p;
                break;
            }
        }
        if (!moves) {
            effective = false;
            eff_witness = "element " + std::to_string(i) + " fixes all samples";
            break;
        } else if (eff_witness.empty()) {
            eff_witness = "element " + std::to_string(i) + " moves " + point_str(moved_at);
        }
    }
    auto& eff = rep.add("effectivity", effective, effective ? 0.0 : 1.0, 0.0, eff_witness);
    if (samples.size() < 4 && !effective)
        eff.note = "UNKNOWN: witnesses may lie below sampling resolution";

    // Domain invariance: group maps sample points into the domain.
    double inv_viol = 0.0;
    std::string dom_witness;
    for (const auto& m : g.elements)
        for (const auto& p : samples) {
            Vec q = m * p;
            if (!domain.contains(q, 1e-9)) {
                inv_viol = 1.0;
                dom_witness = point_str(p);
                break;
            }
        }
    rep.add("domain_invariance", inv_viol == 0.0, inv_viol, 0.0, dom_witness);
    return rep;
}

// Subgroup of elements fixing the point within tau_grp, with closure
// re-certified on the returned set.
inline FiniteGroupAction stabilizer(const FiniteGroupAction& g, const Domain& domain,
                                    const Vec& point, const Tolerances& tol = {}) {
    if (!domain.contains(point, 1e-9))
        throw VfcError(ErrCode::POINT_OUTSIDE_DOMAIN, point_str(point));
    std::vector<int> idx;
    for (int i = 0; i < g.size(); ++i)
        if ((g.elements[i] * point - point).norm() <= tol.tau_grp) idx.push_back(i);
    FiniteGroupAction sub = g.subgroup(idx);
    sub.multiplication_table(tol.tau_grp);  // certify closure
    return sub;
}

// Orbit of a point, deduplicated.
inline std::vector<Vec> orbit(const FiniteGroupAction& g, const Vec& point, double dedup = 1e-9) {
    std::vector<Vec> pts;
    for (const auto& m : g.elements) {
        Vec q = m * point;
        bool dup = false;
        for (const auto& p : pts)
            if ((p - q).norm() <= dedup) { dup = true; break; }
        if (!dup) pts.push_back(q);
    }
    return pts;
}

}  // namespace vfckit
