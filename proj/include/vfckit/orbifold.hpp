#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vfckit/expr.hpp"
#include "vfckit/group.hpp"
#include "vfckit/smooth.hpp"

namespace vfckit {

// One finite-group quotient chart: the atom of all geometry here.
struct OrbifoldChart {
    int dim = 0;
    Domain domain;
    FiniteGroupAction group;
    Vec base_point;
    std::string label;

    // Injective map of the quotient into R^N; induces the metric on glued
    // spaces. The scenario supplies it.
    std::vector<Expr> global_coords;

    Smooth global_map() const {
        return smooth_expr(global_coords, coord_names(dim));
    }

    static OrbifoldChart make(std::string label, Domain d, FiniteGroupAction g,
                              std::vector<Expr> global) {
        OrbifoldChart c;
        c.label = std::move(label);
        c.dim = d.dim();
        c.domain = std::move(d);
        c.group = std::move(g);
        c.base_point = Vec::Zero(c.dim);
        c.global_coords = std::move(global);
        return c;
    }
};

// Local representative of a transition/embedding between charts:
// an injective group homomorphism h (as an index map src->dst) and an
// h-equivariant map phi, unique up to the mu-action of the target group.
struct LocalRepresentative {
    std::string src, dst;
    std::vector<int> hom;          // hom[i] = index in dst group of h(g_i)
    std::vector<Expr> map_exprs;   // phi: src coords -> dst coords
    Domain overlap;                // subdomain of src where valid

    Smooth map(int src_dim) const { return smooth_expr(map_exprs, coord_names(src_dim)); }
};

struct OrbifoldAtlas {
    std::vector<OrbifoldChart> charts;
    std::vector<LocalRepresentative> transitions;

    const OrbifoldChart& chart(const std::string& label) const {
        for (const auto& c : charts)
            if (c.label == label) return c;
        throw VfcError(ErrCode::UNRESOLVED_LABEL, "chart " + label);
    }
    int chart_index(const std::string& label) const {
        for (int i = 0; i < (int)charts.size(); ++i)
            if (charts[i].label == label) return i;
        throw VfcError(ErrCode::UNRESOLVED_LABEL, "chart " + label);
    }
};

// Chart diagnostics: group axioms, effectivity, base point, domain
// invariance, and corner-face permutation. Corner effectivity is checked
// stratum-by-stratum by sampling each true boundary face.
inline Report verify_chart(const OrbifoldChart& chart, const Tolerances& tol = {}) {
    Report rep = verify_group(chart.group, chart.domain, tol);
    rep.subject = "chart:" + chart.label;

    double base_res = 0.0;
    bool base_in = chart.domain.contains(chart.base_point, 1e-9);
    for (const auto& m : chart.group.elements)
        base_res = std::max(base_res, (m * chart.base_point - chart.base_point).norm());
    rep.add("base_point_fixed", base_in && base_res == 0.0, base_res, 0.0,
            base_in ? "" : "base point outside domain");

    // Group elements must permute the true boundary faces.
    bool faces_ok = true;
    std::string face_witness;
    for (int axis = 0; axis < chart.dim && faces_ok; ++axis) {
        for (int side = 0; side < 2 && faces_ok; ++side) {
            bool is_true = side ? chart.domain.boundary_hi[axis] : chart.domain.boundary_lo[axis];
            if (!is_true) continue;
            auto pts = chart.domain.sample_face(axis, side, 5);
            for (const auto& m : chart.group.elements)
                for (const auto& p : pts) {
                    Vec q = m * p;
                    if (chart.domain.corner_depth(q, 1e-7) < 1) {
                        faces_ok = false;
                        face_witness = point_str(p);
                        break;
                    }
                }
            // corner effectivity on this stratum
            if (chart.group.size() > 1 && !pts.empty()) {
                int id = chart.group.identity_index(tol.tau_grp);
                for (int gi = 0; gi < chart.group.size(); ++gi) {
                    if (gi == id) continue;
                    bool fixes_face = true, maps_into_face = true;
                    for (const auto& p : pts) {
                        Vec q = chart.group.elements[gi] * p;
                        if ((q - p).norm() > tol.tau_grp) fixes_face = false;
                        if (chart.domain.corner_depth(q, 1e-7) < 1) maps_into_face = false;
                    }
                    if (fixes_face && maps_into_face && pts.size() > 2) {
                        // acts trivially on a face it preserves: effectivity of the
                        // induced corner action fails
                        rep.add("corner_effectivity", false, 1.0, 0.0,
                                "element " + std::to_string(gi) + " fixes face axis=" +
                                    std::to_string(axis));
                    }
                }
            }
        }
    }
    rep.add("corner_faces_permuted", faces_ok, faces_ok ? 0.0 : 1.0, 0.0, face_witness);
    return rep;
}

// Equivariance residual of a transition: max over samples and group elements
// of |phi(g y) - h(g) phi(y)|.
inline double equivariance_residual(const OrbifoldAtlas& atlas, const LocalRepresentative& t,
                                    int n_samples = 100) {
    const auto& src = atlas.chart(t.src);
    const auto& dst = atlas.chart(t.dst);
    Smooth phi = t.map(src.dim);
    int per_axis = std::max(2, (int)std::round(std::pow((double)n_samples, 1.0 / src.dim)));
    auto samples = t.overlap.sample_grid(per_axis);
    double worst = 0.0;
    for (const auto& y : samples) {
        for (int gi = 0; gi < src.group.size(); ++gi) {
            Vec gy = src.group.elements[gi] * y;
            if (!t.overlap.contains(gy, 1e-9)) continue;
            Vec lhs = phi(gy);
            Vec rhs = dst.group.elements[t.hom[gi]] * phi(y);
            worst = std::max(worst, (lhs - rhs).norm());
        }
    }
    return worst;
}

// Returns the stored/derived local representative at a point, canonicalized:
// among the mu-orbit {(mu h mu^{-1}, mu phi)} the member with the lowest mu
// index (identity first) is returned. NOT_IN_OVERLAP if no transition covers
// the point.
inline LocalRepresentative local_representative(const OrbifoldAtlas& atlas,
                                                const std::string& src, const std::string& dst,
                                                const Vec& point, const Tolerances& tol = {}) {
    const auto& dst_chart = atlas.chart(dst);
    for (const auto& t : atlas.transitions) {
        if (t.src != src || t.dst != dst) continue;
        if (!t.overlap.contains(point, 1e-9)) continue;
        // Canonical member: scan mu in dst group order; mu = identity yields
        // the stored representative, which is canonical by convention. A
        // scenario may store a non-identity composed representative; detect
        // that by looking for the lowest-mu equivalent whose hom fixes the
        // identity slot ordering. We canonicalize by left-multiplying with
        // each mu and choosing the lexicographically smallest (hom, phi(point))
        // pair, which is deterministic.
        const auto& src_chart = atlas.chart(src);
        Smooth phi = t.map(src_chart.dim);
        Vec at = phi(point);
        LocalRepresentative best = t;
        Vec best_at = at;
        for (int mu = 0; mu < dst_chart.group.size(); ++mu) {
            std::vector<int> hom2(t.hom.size());
            bool ok = true;
            for (size_t i = 0; i < t.hom.size(); ++i) {
                Mat conj = dst_chart.group.elements[mu] * dst_chart.group.elements[t.hom[i]] *
                           dst_chart.group.elements[mu].inverse();
                int k = dst_chart.group.find(conj, tol.tau_grp);
                if (k < 0) { ok = false; break; }
                hom2[i] = k;
            }
            if (!ok) continue;
            Vec cand = dst_chart.group.elements[mu] * at;
            auto lex_less = [](const std::vector<int>& h1, const Vec& p1,
                               const std::vector<int>& h2, const Vec& p2) {
                if (h1 != h2) return h1 < h2;
                for (int i = 0; i < p1.size(); ++i)
                    if (std::abs(p1[i] - p2[i]) > 1e-12) return p1[i] < p2[i];
                return false;
            };
            if (lex_less(hom2, cand, best.hom, best_at)) {
                best.hom = hom2;
                best_at = cand;
                // compose phi with mu
                std::vector<Expr> comps;
                const Mat& m = dst_chart.group.elements[mu];
                for (int r = 0; r < m.rows(); ++r) {
                    Expr acc(0.0);
                    for (int c = 0; c < m.cols(); ++c)
                        acc = acc + Expr(m(r, c)) * Expr(t.map_exprs[c].ptr());
                    comps.push_back(acc);
                }
                best.map_exprs = comps;
            }
        }
        return best;
    }
    throw VfcError(ErrCode::NOT_IN_OVERLAP, src + "->" + dst + " at " + point_str(point));
}

}  // namespace vfckit
