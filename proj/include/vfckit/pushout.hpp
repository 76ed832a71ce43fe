#pragma once

#include <functional>

#include "vfckit/cfp.hpp"
#include "vfckit/forms.hpp"
#include "vfckit/trace.hpp"
#include "vfckit/vfc.hpp"

namespace vfckit {

// Numeric differential form on one chart: degree 0 (one coefficient),
// degree 1 (one coefficient per dy_j), or top degree (one coefficient,
// natural coordinate ordering).
struct NumericForm {
    int degree = 0;
    int dim = 0;
    std::function<Vec(const Vec&)> coeffs;

    static NumericForm from_symbolic(const FormOnChart& f) {
        NumericForm out;
        out.degree = f.degree;
        out.dim = f.dim;
        if (f.degree == 0) {
            auto bound = std::make_shared<BoundExpr>(f.coeff({}), coord_names(f.dim));
            out.coeffs = [bound](const Vec& y) {
                Vec v(1);
                v[0] = bound->eval(y);
                return v;
            };
        } else if (f.degree == 1) {
            auto bounds = std::make_shared<std::vector<BoundExpr>>();
            for (int j = 0; j < f.dim; ++j)
                bounds->emplace_back(f.coeff({j}), coord_names(f.dim));
            int d = f.dim;
            out.coeffs = [bounds, d](const Vec& y) {
                Vec v(d);
                for (int j = 0; j < d; ++j) v[j] = (*bounds)[j].eval(y);
                return v;
            };
        } else if (f.degree == f.dim) {
            MultiIndex top;
            for (int k = 0; k < f.dim; ++k) top.push_back(k);
            auto bound = std::make_shared<BoundExpr>(f.coeff(top), coord_names(f.dim));
            out.coeffs = [bound](const Vec& y) {
                Vec v(1);
                v[0] = bound->eval(y);
                return v;
            };
        } else {
            throw VfcError(ErrCode::MODE_UNSUPPORTED, "numeric forms support deg 0, 1, top");
        }
        return out;
    }

    static NumericForm constant_one(int dim) {
        NumericForm out;
        out.degree = 0;
        out.dim = dim;
        out.coeffs = [](const Vec&) {
            Vec v(1);
            v[0] = 1.0;
            return v;
        };
        return out;
    }

    NumericForm scaled_by(std::function<double(const Vec&)> g) const {
        NumericForm out = *this;
        auto base = coeffs;
        out.coeffs = [base, g](const Vec& y) { return Vec(g(y) * base(y)); };
        return out;
    }
};

// Numeric wedge for the degree combinations the pairing needs.
inline NumericForm numeric_wedge(const NumericForm& a, const NumericForm& b) {
    if (a.degree == 0) return b.scaled_by([a](const Vec& y) { return a.coeffs(y)[0]; });
    if (b.degree == 0) return a.scaled_by([b](const Vec& y) { return b.coeffs(y)[0]; });
    if (a.degree == 1 && b.degree == 1 && a.dim == 2) {
        NumericForm out;
        out.degree = 2;
        out.dim = 2;
        auto ca = a.coeffs, cb = b.coeffs;
        out.coeffs = [ca, cb](const Vec& y) {
            Vec va = ca(y), vb = cb(y), v(1);
            v[0] = va[0] * vb[1] - va[1] * vb[0];
            return v;
        };
        return out;
    }
    throw VfcError(ErrCode::MODE_UNSUPPORTED, "numeric wedge degree combination");
}

inline int pushout_degree(int deg_h, int dim_m, int vdim) { return deg_h + dim_m - vdim; }

// ---------------------------------------------------------------------------
// The chartwise pairing integral
//   (1/#Gamma) int_{(s^eps)^{-1}(0)} F ^ omega
// computed slicewise over W: per quadrature node xi with omega(xi) != 0 the
// slice {y : s^eps(y, xi) = 0} contributes a signed point sum (vdim 0), an
// oriented curve integral (vdim 1), or a plain box integral (rank 0).
inline double chart_zero_set_integral(const KuranishiChart& kc, const CFPerturbation& cfp,
                                      double eps, const NumericForm& F, int quad_order,
                                      const Tolerances& tol = {}) {
    const int vd = kc.vdim();
    const double group_factor = 1.0 / kc.group().size();
    const int seg_order = std::max(2, quad_order / 4);

    if (kc.rank() == 0) {
        if (F.degree != kc.dim())
            throw VfcError(ErrCode::DEGREE_OVERFLOW, "rank-0 chart needs a top-degree integrand");
        double mass = cfp.w_dim == 0 ? cfp.omega(Vec(0))[0] : cfp.omega_integral(quad_order);
        auto integrand = [&](const Vec& y) {
            return kc.domain().contains(y) ? F.coeffs(y)[0] : 0.0;
        };
        double box = integrate_box(integrand, kc.domain().lo, kc.domain().hi, quad_order);
        return group_factor * kc.orientation_sign * mass * box;
    }
    if (vd != 0 && vd != 1)
        throw VfcError(ErrCode::MODE_UNSUPPORTED, "zero-set dimension capped at 1");
    if ((vd == 0 && F.degree != 0) || (vd == 1 && F.degree != 1))
        throw VfcError(ErrCode::DEGREE_OVERFLOW, "integrand degree must match zero-set dim");

    // tensor nodes over W
    std::vector<Vec> wnodes;
    std::vector<double> wweights;
    if (cfp.w_dim == 0) {
        wnodes.push_back(Vec(0));
        wweights.push_back(cfp.omega(Vec(0))[0]);
    } else {
        const auto& rule = gauss_legendre(quad_order);
        std::vector<int> idx(cfp.w_dim, 0);
        Vec w(cfp.w_dim);
        while (true) {
            double wq = 1.0;
            for (int k = 0; k < cfp.w_dim; ++k) {
                double mid = 0.5 * (cfp.W.lo[k] + cfp.W.hi[k]);
                double half = 0.5 * (cfp.W.hi[k] - cfp.W.lo[k]);
                w[k] = mid + half * rule.nodes[idx[k]];
                wq *= rule.weights[idx[k]] * half;
            }
            double om = cfp.omega(w)[0];
            if (om != 0.0) {
                wnodes.push_back(w);
                wweights.push_back(wq * om);
            }
            int k = cfp.w_dim - 1;
            while (k >= 0 && ++idx[k] == quad_order) idx[k--] = 0;
            if (k < 0) break;
        }
    }

    double acc = 0.0;
    for (size_t q = 0; q < wnodes.size(); ++q) {
        Smooth s_xi = cfp.at_eps_w(eps, wnodes[q]);
        double slice = 0.0;
        if (vd == 0) {
            auto zeros = find_zeros(s_xi, kc.domain(), tol.grid_density, tol.newton_tol,
                                    tol.newton_max_iter, tol.r_dedup);
            for (const auto& y : zeros) {
                double det = s_xi.jac(y).determinant();
                if (std::abs(det) < tol.tau_det)
                    throw VfcError(ErrCode::NOT_TRANSVERSAL, "degenerate slice zero");
                slice += (det > 0 ? 1.0 : -1.0) * F.coeffs(y)[0];
            }
        } else {
            auto curves = trace_zero_curves(s_xi, kc.domain(), tol);
            for (const auto& c : curves)
                slice += integrate_1form_on_curve(
                    s_xi, c, [&](const Vec& y) { return F.coeffs(y); }, seg_order, tol);
        }
        acc += wweights[q] * slice * kc.orientation_sign;
    }
    return group_factor * acc;
}

// Spec-facing wrapper: integral of a symbolic form over the perturbed zero
// set of one chart.
inline double integrate_on_perturbed_zero_set(const KuranishiChart& kc, const CFPerturbation& cfp,
                                              double eps, const FormOnChart& h,
                                              const Tolerances& tol = {}, int quad_order = 0) {
    return chart_zero_set_integral(kc, cfp, eps, NumericForm::from_symbolic(h),
                                   quad_order > 0 ? quad_order : tol.quad_order, tol);
}

// ---------------------------------------------------------------------------
// Pushout over a GCS

// Strongly smooth data for the pushout: per-piece map exprs into M plus the
// target dimension.
struct StronglySmoothMap {
    std::map<std::string, std::vector<Expr>> by_piece;
    int target_dim = 0;

    Smooth on(const KuranishiChart& kc) const {
        auto it = by_piece.find(kc.label);
        if (it == by_piece.end())
            throw VfcError(ErrCode::UNRESOLVED_LABEL, "map on piece " + kc.label);
        return smooth_expr(it->second, coord_names(kc.dim()));
    }
};

// Partition of unity over GCS pieces: chi per piece, built so the chart sums
// are exactly 1 on identified zero loci.
struct GcsPou {
    std::map<std::string, Smooth> chi;

    Smooth of(const std::string& label) const {
        auto it = chi.find(label);
        if (it == chi.end()) throw VfcError(ErrCode::MISSING_POU, "chi for " + label);
        return it->second;
    }
    static GcsPou trivial(const GoodCoordinateSystem& gcs) {
        GcsPou p;
        for (const auto* kc : gcs.all_pieces())
            p.chi[kc->label] = smooth_const(make_vec({1.0}), kc->dim());
        return p;
    }
};

// chi weights from per-piece bumps, transported across coordinate changes so
// the sum over identified points is exactly 1: chi_p = b_p / (b_p + sum of
// pulled neighbors).
inline GcsPou make_gcs_pou(const GoodCoordinateSystem& gcs,
                           const std::map<std::string, BundleExtensionDatum>& data,
                           const std::map<std::string, Domain>& bump_supports) {
    GcsPou pou;
    std::map<std::string, Smooth> bumps;
    for (const auto* kc : gcs.all_pieces()) {
        auto it = bump_supports.find(kc->label);
        Domain sup = it != bump_supports.end() ? it->second
                     : gcs.support.has(kc->label) ? gcs.support.of(kc->label)
                                                  : kc->domain();
        bumps[kc->label] = invariant_bump(kc->bundle.base, sup);
    }
    for (const auto* kc : gcs.all_pieces()) {
        std::vector<Smooth> terms{bumps[kc->label]};
        // neighbors reachable from this piece: via changes out of it (phi) or
        // retraction data into a lower piece (pi)
        for (const auto* chg : gcs.changes_from(kc->label)) {
            Domain dom = chg->emb.domain;
            terms.push_back(guard(compose(bumps[chg->dst], chg->emb.base(kc->dim())),
                                  [dom](const Vec& y) { return dom.contains(y, 1e-12); },
                                  "pou:" + chg->src + ">" + chg->dst));
        }
        for (const auto& [key, datum] : data) {
            auto gt = key.find('>');
            std::string q = key.substr(0, gt), p = key.substr(gt + 1);
            if (p != kc->label) continue;
            Domain dom = datum.omega12;
            terms.push_back(guard(compose(bumps[q], datum.retraction_map(kc->dim())),
                                  [dom](const Vec& y) { return dom.contains(y, 1e-12); },
                                  "pou_pi:" + key));
        }
        Smooth total = terms.size() == 1
                           ? terms[0]
                           : smooth_sum(std::vector<double>(terms.size(), 1.0), terms);
        pou.chi[kc->label] = scalar_quot(bumps[kc->label], total);
    }
    return pou;
}

enum class PushoutMode { Point, Pair, Grid };

// Submersivity gate: f strongly submersive w.r.t. the system, sampled at a
// few interior omega nodes.
inline void require_strongly_submersive(const GoodCoordinateSystem& gcs, const CfpSystem& sys,
                                        const StronglySmoothMap& f, double eps,
                                        const Tolerances& tol) {
    if (f.target_dim == 0) return;
    for (const auto* kc : gcs.all_pieces()) {
        const CFPerturbation& cfp = sys.of(kc->label);
        Vec w = cfp.w_dim > 0 ? Vec(0.25 * (cfp.W.lo + cfp.W.hi) + 0.25 * (cfp.W.hi - cfp.W.lo))
                              : Vec(0);
        Smooth s_xi = cfp.at_eps_w(eps, w);
        auto rep = check_transversality(s_xi, kc->domain(), f.on(*kc), std::nullopt, std::nullopt,
                                        tol);
        if (!rep.vacuous && !(rep.transversal_to_zero &&
                              (kc->rank() == 0 ? rep.sigma_min_submersive > tol.tau_rank
                                               : rep.strongly_submersive)))
            throw VfcError(ErrCode::NOT_SUBMERSIVE, kc->label + " at " + rep.witness);
    }
}

// Point-target pushout: sum over pieces of the chartwise pairing integral of
// chi_p h_p.
inline double pushout_point(const GoodCoordinateSystem& gcs, const CfpSystem& sys,
                            const GcsPou& pou,
                            const std::map<std::string, FormOnChart>& h, double eps,
                            int quad_order, const Tolerances& tol = {}) {
    std::vector<const KuranishiChart*> pieces = gcs.all_pieces();
    std::sort(pieces.begin(), pieces.end(),
              [](auto* a, auto* b) { return a->label < b->label; });
    double acc = 0.0;
    for (const auto* kc : pieces) {
        auto it = h.find(kc->label);
        if (it == h.end()) continue;
        NumericForm F = NumericForm::from_symbolic(it->second);
        Smooth chi = pou.of(kc->label);
        NumericForm weighted = F.scaled_by([chi](const Vec& y) { return chi(y)[0]; });
        acc += chart_zero_set_integral(*kc, sys.of(kc->label), eps, weighted, quad_order, tol);
    }
    return acc;
}

// Pairing-mode pushout: <f!(h), rho> = sum_p (1/#Gamma) int chi_p h_p ^
// f_p^* rho ^ omega, the defining property of the pushout.
inline double pushout_pair(const GoodCoordinateSystem& gcs, const CfpSystem& sys,
                           const GcsPou& pou, const std::map<std::string, FormOnChart>& h,
                           const StronglySmoothMap& f, const FormOnChart& rho, double eps,
                           int quad_order, const Tolerances& tol = {}) {
    std::vector<const KuranishiChart*> pieces = gcs.all_pieces();
    std::sort(pieces.begin(), pieces.end(),
              [](auto* a, auto* b) { return a->label < b->label; });
    double acc = 0.0;
    for (const auto* kc : pieces) {
        auto it = h.find(kc->label);
        if (it == h.end()) continue;
        FormOnChart pulled_rho = rho.pullback(f.by_piece.at(kc->label), kc->dim());
        FormOnChart integrand = it->second.wedge(pulled_rho);
        NumericForm F = NumericForm::from_symbolic(integrand);
        Smooth chi = pou.of(kc->label);
        NumericForm weighted = F.scaled_by([chi](const Vec& y) { return chi(y)[0]; });
        acc += chart_zero_set_integral(*kc, sys.of(kc->label), eps, weighted, quad_order, tol);
    }
    return acc;
}

// Grid-mode pushout: pointwise fiber integrals of chi h over f^{-1}(t) at the
// supplied M samples; dim M <= 1 and fiber zero-set dimension <= 1. The fiber
// is realized by appending the rows f - t to the obstruction (M-rows first in
// the orientation frame).
inline std::vector<double> pushout_grid(const GoodCoordinateSystem& gcs, const CfpSystem& sys,
                                        const GcsPou& pou,
                                        const std::map<std::string, FormOnChart>& h,
                                        const StronglySmoothMap& f,
                                        const std::vector<Vec>& m_points, double eps,
                                        int quad_order, const Tolerances& tol = {}) {
    if (f.target_dim > 1)
        throw VfcError(ErrCode::MODE_UNSUPPORTED, "grid mode needs dim M <= 1");
    std::vector<double> out;
    std::vector<const KuranishiChart*> pieces = gcs.all_pieces();
    std::sort(pieces.begin(), pieces.end(),
              [](auto* a, auto* b) { return a->label < b->label; });
    for (const auto& t : m_points) {
        double acc = 0.0;
        for (const auto* kc : pieces) {
            auto it = h.find(kc->label);
            if (it == h.end()) continue;
            // fibered chart: E' = R^m (+) E, s' = (f - t, s^eps)
            KuranishiChart fib = *kc;
            fib.label += "@f";
            fib.bundle.fiber_dim += f.target_dim;
            for (auto& m : fib.bundle.representation) {
                Mat ext = Mat::Identity(fib.bundle.fiber_dim, fib.bundle.fiber_dim);
                ext.bottomRightCorner(m.rows(), m.cols()) = m;
                m = ext;
            }
            CFPerturbation cfp = sys.of(kc->label);
            CFPerturbation fcfp = cfp;
            fcfp.chart_dim = kc->dim();
            int n = kc->dim() + cfp.w_dim + 1;
            std::vector<int> y_idx;
            for (int i = 0; i < kc->dim(); ++i) y_idx.push_back(i);
            Smooth fmap = compose(f.on(*kc), smooth_select(y_idx, n));
            Smooth shift = smooth_const(t, n);
            fcfp.s_family = smooth_concat({fmap - shift, cfp.s_family});
            NumericForm F = NumericForm::from_symbolic(it->second);
            Smooth chi = pou.of(kc->label);
            NumericForm weighted = F.scaled_by([chi](const Vec& y) { return chi(y)[0]; });
            acc += chart_zero_set_integral(fib, fcfp, eps, weighted, quad_order, tol);
        }
        out.push_back(acc);
    }
    return out;
}

}  // namespace vfckit
