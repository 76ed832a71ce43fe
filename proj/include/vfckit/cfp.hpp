#pragma once

#include <map>
#include <optional>

#include "vfckit/quadrature.hpp"
#include "vfckit/transversality.hpp"

namespace vfckit {

// Continuous-family perturbation of one chart piece: parameter box W with a
// group action, a normalized invariant density omega on W, and the family
// s^eps as one smooth map over (chart coords, W coords, eps).
struct CFPerturbation {
    int chart_dim = 0;
    int w_dim = 0;
    Domain W;
    std::vector<Mat> w_action;  // indexed like the chart group; empty = trivial
    Smooth omega;               // scalar density on W
    Smooth s_family;            // (y, w, eps) -> E

    // s^eps as a map of (y, w).
    Smooth at_eps(double eps) const {
        int n = chart_dim + w_dim;
        std::vector<Smooth> parts;
        parts.push_back(smooth_identity(n));
        parts.push_back(smooth_const(make_vec({eps}), n));
        return compose(s_family, smooth_concat(parts));
    }

    // s^eps(., w) as a map of y alone.
    Smooth at_eps_w(double eps, const Vec& w) const {
        std::vector<Smooth> parts;
        parts.push_back(smooth_identity(chart_dim));
        Vec tail(w_dim + 1);
        tail.head(w_dim) = w;
        tail[w_dim] = eps;
        parts.push_back(smooth_const(tail, chart_dim));
        return compose(s_family, smooth_concat(parts));
    }

    double omega_integral(int order = 32) const {
        if (w_dim == 0) return omega(Vec(0))[0];
        return integrate_box([&](const Vec& w) { return omega(w)[0]; }, W.lo, W.hi, order);
    }

    std::string describe() const {
        return "cfp[Wdim=" + std::to_string(w_dim) + ";omega=" + omega.describe() +
               ";s=" + s_family.describe() + "]";
    }
};

// Fresh perturbation with W = the fiber representation space: s^eps(y, w) =
// s(y) - eps * w. Equivariant because the group acts on W by the fiber
// representation. omega is a polynomial bump supported in radius
// `support_radius`, normalized exactly by quadrature on its polynomial
// support.
inline CFPerturbation fresh_cfp(const KuranishiChart& kc, double support_radius = 0.9) {
    CFPerturbation cfp;
    cfp.chart_dim = kc.dim();
    cfp.w_dim = kc.rank();
    cfp.W = Domain::box({});
    cfp.W.lo = Vec::Constant(kc.rank(), -1.0);
    cfp.W.hi = Vec::Constant(kc.rank(), 1.0);
    cfp.W.boundary_lo.assign(kc.rank(), false);
    cfp.W.boundary_hi.assign(kc.rank(), false);
    cfp.w_action = kc.bundle.representation;

    if (kc.rank() == 0) {
        cfp.omega = smooth_const(make_vec({1.0}), 0);
    } else {
        Smooth b = kc.rank() == 1
                       ? bump_box(make_vec({-support_radius}), make_vec({support_radius}), 4)
                       : bump_ball(kc.rank(), support_radius, 4);
        double mass = kc.rank() == 0 ? 1.0
                                     : integrate_box([&](const Vec& w) { return b(w)[0]; },
                                                     cfp.W.lo, cfp.W.hi, 32);
        cfp.omega = scalar_mul(smooth_const(make_vec({1.0 / mass}), kc.rank()), b);
    }

    // s(y) - eps*w as expressions over (y1..yd, w1..wk, eps)
    std::vector<std::string> names = coord_names(kc.dim());
    for (int i = 1; i <= kc.rank(); ++i) names.push_back("w" + std::to_string(i));
    names.push_back("eps");
    std::vector<Expr> comps;
    for (int i = 0; i < kc.rank(); ++i)
        comps.push_back(kc.s.components[i] -
                        Expr::var("eps") * Expr::var("w" + std::to_string(i + 1)));
    cfp.s_family = smooth_expr(comps, names);
    return cfp;
}

// Verification per the definition: normalized nonnegative invariant omega,
// equivariant s^eps, C^1 convergence to the Kuranishi map as eps -> 0.
inline Report verify_cfp(const CFPerturbation& cfp, const KuranishiChart& kc,
                         const std::vector<double>& eps_ladder = {0.1, 0.01},
                         const Tolerances& tol = {}) {
    Report rep;
    rep.subject = "cfp@" + kc.label;
    double mass = cfp.omega_integral(32);
    auto& mi = rep.add_residual("omega_normalized", std::abs(mass - 1.0), tol.tau_omega);
    if (!mi.pass) mi.note = "OMEGA_NOT_NORMALIZED";

    double neg = 0.0;
    if (cfp.w_dim > 0)
        for (const auto& w : cfp.W.sample_grid(10)) neg = std::min(neg, cfp.omega(w)[0]);
    rep.add("omega_nonnegative", neg >= -1e-12, -neg, 1e-12);

    // omega invariance and s-family equivariance
    double w_inv = 0.0, eq = 0.0;
    std::string eq_witness;
    auto ysamples = kc.domain().sample_grid(6);
    auto wsamples = cfp.W.sample_grid(cfp.w_dim > 1 ? 4 : 8);
    for (int gi = 0; gi < kc.group().size(); ++gi) {
        const Mat& gy = kc.group().elements[gi];
        Mat gw = cfp.w_action.empty() ? Mat::Identity(std::max(cfp.w_dim, 1), std::max(cfp.w_dim, 1))
                                      : cfp.w_action[gi];
        for (const auto& w : wsamples) {
            Vec gww = cfp.w_dim == 0 ? w : Vec(gw * w);
            if (cfp.w_dim > 0 && cfp.W.contains(gww, 1e-9))
                w_inv = std::max(w_inv, std::abs(cfp.omega(gww)[0] - cfp.omega(w)[0]));
            for (const auto& y : ysamples) {
                Vec gyy = gy * y;
                if (!kc.domain().contains(gyy, 1e-9)) continue;
                for (double eps : eps_ladder) {
                    Vec in1(cfp.chart_dim + cfp.w_dim + 1);
                    in1 << gyy, gww, eps;
                    Vec in2(cfp.chart_dim + cfp.w_dim + 1);
                    in2 << y, w, eps;
                    double r =
                        (cfp.s_family(in1) - kc.bundle.representation[gi] * cfp.s_family(in2))
                            .norm();
                    if (r > eq) {
                        eq = r;
                        eq_witness = point_str(y);
                    }
                }
            }
        }
    }
    rep.add_residual("omega_invariance", w_inv, tol.tau_eq);
    rep.add_residual("s_equivariance", eq, tol.tau_eq, eq_witness);

    // C^1 convergence: |s^eps - s| + |Ds^eps - Ds| <= C eps with fitted C
    Smooth s0 = kc.s_eval();
    double fitted_c = 0.0;
    bool monotone = true;
    double prev_gap = 1e300;
    for (double eps : eps_ladder) {
        double gap = 0.0;
        Smooth se = cfp.at_eps(eps);
        for (const auto& y : ysamples)
            for (const auto& w : wsamples) {
                Vec in(cfp.chart_dim + cfp.w_dim, 1);
                in.resize(cfp.chart_dim + cfp.w_dim);
                in << y, w;
                Vec v = se(in);
                Mat j = se.jac(in).leftCols(cfp.chart_dim);
                gap = std::max(gap, (v - s0(y)).norm() + (j - s0.jac(y)).norm());
            }
        fitted_c = std::max(fitted_c, gap / eps);
        if (gap > prev_gap + 1e-12) monotone = false;
        prev_gap = gap;
    }
    auto& ci = rep.add("c1_convergence", monotone, 0.0, 0.0);
    ci.note = "fitted C = " + std::to_string(fitted_c);
    rep.extra["fitted_C"] = fitted_c;
    return rep;
}

// ---------------------------------------------------------------------------
// Sum of CF-perturbations via a partition of unity (all terms on one chart):
// W = prod W_r, omega = prod omega_r,
// s^eps(y, (xi_r)) = s(y) + sum_r chi_r(y) (s_r^eps(y, xi_r) - s(y)).
inline CFPerturbation sum_cfp(const KuranishiChart& kc,
                              const std::vector<CFPerturbation>& parts,
                              const std::vector<Smooth>& chis) {
    if (parts.empty()) throw VfcError(ErrCode::MISSING_POU, "sum over empty family");
    CFPerturbation out;
    out.chart_dim = kc.dim();
    out.w_dim = 0;
    for (const auto& p : parts) out.w_dim += p.w_dim;
    out.W.lo = Vec(out.w_dim);
    out.W.hi = Vec(out.w_dim);
    out.W.boundary_lo.assign(out.w_dim, false);
    out.W.boundary_hi.assign(out.w_dim, false);
    int at = 0;
    for (const auto& p : parts) {
        out.W.lo.segment(at, p.w_dim) = p.W.lo;
        out.W.hi.segment(at, p.w_dim) = p.W.hi;
        at += p.w_dim;
    }
    // product action blockwise
    int gsize = kc.group().size();
    for (int gi = 0; gi < gsize; ++gi) {
        Mat m = Mat::Identity(out.w_dim, out.w_dim);
        int off = 0;
        for (const auto& p : parts) {
            if (!p.w_action.empty() && p.w_dim > 0)
                m.block(off, off, p.w_dim, p.w_dim) = p.w_action[gi];
            off += p.w_dim;
        }
        out.w_action.push_back(m);
    }
    // omega = prod omega_r (composed with proper W-coordinate selections)
    Smooth om;
    at = 0;
    for (const auto& p : parts) {
        std::vector<int> idx;
        for (int i = 0; i < p.w_dim; ++i) idx.push_back(at + i);
        Smooth factor = p.w_dim == 0 ? smooth_const(make_vec({p.omega(Vec(0))[0]}), out.w_dim)
                                     : compose(p.omega, smooth_select(idx, out.w_dim));
        om = om.valid() ? scalar_mul(om, factor) : factor;
        at += p.w_dim;
    }
    out.omega = om;

    // s^eps: route (y, xi_1..xi_R, eps) pieces into each part family
    int n = out.chart_dim + out.w_dim + 1;
    std::vector<int> y_idx;
    for (int i = 0; i < out.chart_dim; ++i) y_idx.push_back(i);
    Smooth y_sel = smooth_select(y_idx, n);
    Smooth s_base = compose(kc.s_eval(), y_sel);
    std::vector<Smooth> terms{s_base};
    std::vector<double> coefs{1.0};
    at = 0;
    for (size_t r = 0; r < parts.size(); ++r) {
        std::vector<int> route = y_idx;
        for (int i = 0; i < parts[r].w_dim; ++i) route.push_back(out.chart_dim + at + i);
        route.push_back(n - 1);  // eps
        Smooth s_r = compose(parts[r].s_family, smooth_select(route, n));
        Smooth chi_y = compose(chis[r], y_sel);
        terms.push_back(scalar_mul(chi_y, s_r - s_base));
        coefs.push_back(1.0);
        at += parts[r].w_dim;
    }
    out.s_family = smooth_sum(coefs, terms);
    return out;
}

// Extension of a CF-perturbation along a bundle extension datum, optionally
// chi-interpolated against the destination Kuranishi map:
// s_p^eps(z, w) = s_p(z) + chi0(z) phi~(z) (s_q^eps(pi(z), w) - s_q(pi(z))).
inline CFPerturbation extend_cfp(const CFPerturbation& src_cfp, const KuranishiChart& src,
                                 const KuranishiChart& dst, const BundleExtensionDatum& datum,
                                 const std::optional<Smooth>& chi0 = std::nullopt) {
    if (!datum.verified)
        throw VfcError(ErrCode::UNVERIFIED_EMBEDDING, "bundle extension datum not verified");
    CFPerturbation out;
    out.chart_dim = dst.dim();
    out.w_dim = src_cfp.w_dim;
    out.W = src_cfp.W;
    out.w_action = src_cfp.w_action;
    out.omega = src_cfp.omega;

    int n = out.chart_dim + out.w_dim + 1;
    std::vector<int> z_idx;
    for (int i = 0; i < out.chart_dim; ++i) z_idx.push_back(i);
    Smooth z_sel = smooth_select(z_idx, n);
    Smooth pi_z = compose(datum.retraction_map(dst.dim()), z_sel);
    // (pi(z), w, eps) routed into the source family
    std::vector<Smooth> routed{pi_z};
    std::vector<int> tail_idx;
    for (int i = out.chart_dim; i < n; ++i) tail_idx.push_back(i);
    routed.push_back(smooth_select(tail_idx, n));
    Smooth s_q_eps = compose(src_cfp.s_family, smooth_concat(routed));
    Smooth s_q_0 = compose(src.s_eval(), pi_z);
    Smooth delta = s_q_eps - s_q_0;
    // lift(z,w,eps) = M(z) * delta(z,w,eps): the matrix entries use y1..yd,
    // which bind to the first chart_dim slots of the (z, w, eps) input.
    std::vector<std::string> names = coord_names(dst.dim());
    for (int i = 1; i <= out.w_dim; ++i) names.push_back("w" + std::to_string(i));
    names.push_back("eps");
    Smooth lifted = exprmat_apply(datum.fiber_ext, names, delta);
    Smooth s_p = compose(dst.s_eval(), z_sel);
    if (chi0) {
        Smooth chi_z = compose(*chi0, z_sel);
        out.s_family = s_p + scalar_mul(chi_z, lifted);
    } else {
        out.s_family = s_p + lifted;
    }
    return out;
}

// Direct product of CF-perturbations on the product chart.
inline CFPerturbation product_cfp(const CFPerturbation& a, const CFPerturbation& b,
                                  int extra_rank = 0) {
    CFPerturbation out;
    out.chart_dim = a.chart_dim + b.chart_dim;
    out.w_dim = a.w_dim + b.w_dim;
    out.W.lo = concat(a.W.lo, b.W.lo);
    out.W.hi = concat(a.W.hi, b.W.hi);
    out.W.boundary_lo.assign(out.w_dim, false);
    out.W.boundary_hi.assign(out.w_dim, false);
    // product group acts blockwise; callers supply actions indexed by the
    // product group (pair order a-major), which this builds when both parts
    // had actions for their own groups
    for (size_t i = 0; i < std::max<size_t>(a.w_action.size(), 1); ++i)
        for (size_t j = 0; j < std::max<size_t>(b.w_action.size(), 1); ++j) {
            Mat m = Mat::Identity(out.w_dim, out.w_dim);
            if (!a.w_action.empty() && a.w_dim)
                m.topLeftCorner(a.w_dim, a.w_dim) = a.w_action[i];
            if (!b.w_action.empty() && b.w_dim)
                m.bottomRightCorner(b.w_dim, b.w_dim) = b.w_action[j];
            out.w_action.push_back(m);
        }
    int n = out.chart_dim + out.w_dim + 1;
    std::vector<int> ia, ib;
    for (int i = 0; i < a.chart_dim; ++i) ia.push_back(i);
    for (int i = 0; i < a.w_dim; ++i) ia.push_back(out.chart_dim + i);
    ia.push_back(n - 1);
    for (int i = 0; i < b.chart_dim; ++i) ib.push_back(a.chart_dim + i);
    for (int i = 0; i < b.w_dim; ++i) ib.push_back(out.chart_dim + a.w_dim + i);
    ib.push_back(n - 1);
    Smooth sa = compose(a.s_family, smooth_select(ia, n));
    Smooth sb = compose(b.s_family, smooth_select(ib, n));
    std::vector<Smooth> comps{sa, sb};
    // thickened fiber products append unperturbed rows separately
    (void)extra_rank;
    out.s_family = smooth_concat(comps);
    // omega product
    std::vector<int> wa, wb;
    for (int i = 0; i < a.w_dim; ++i) wa.push_back(i);
    for (int i = 0; i < b.w_dim; ++i) wb.push_back(a.w_dim + i);
    Smooth oa = a.w_dim == 0 ? smooth_const(make_vec({a.omega(Vec(0))[0]}), out.w_dim)
                             : compose(a.omega, smooth_select(wa, out.w_dim));
    Smooth ob = b.w_dim == 0 ? smooth_const(make_vec({b.omega(Vec(0))[0]}), out.w_dim)
                             : compose(b.omega, smooth_select(wb, out.w_dim));
    out.omega = scalar_mul(oa, ob);
    return out;
}

// A CF-perturbation system over a GCS: one per piece plus the compatibility
// residuals measured across coordinate changes.
struct CfpSystem {
    std::map<std::string, CFPerturbation> by_piece;
    Report build_report;

    const CFPerturbation& of(const std::string& label) const {
        auto it = by_piece.find(label);
        if (it == by_piece.end())
            throw VfcError(ErrCode::UNRESOLVED_LABEL, "cfp for piece " + label);
        return it->second;
    }
};

// Upward filter induction: fresh perturbations on poset-minimal pieces,
// datum-based extension along each change that has a bundle extension datum.
// Compatibility is then sampled on the change domains.
inline CfpSystem build_cfp_system(const GoodCoordinateSystem& gcs,
                                  const std::map<std::string, BundleExtensionDatum>& data,
                                  const Tolerances& tol = {}) {
    CfpSystem sys;
    sys.build_report.subject = "cfp_system";
    // node order: ascending dimension (minimal first)
    std::vector<int> order(gcs.nodes.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = (int)i;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return gcs.nodes[a].dim < gcs.nodes[b].dim; });

    for (int ni : order) {
        for (const auto& piece : gcs.nodes[ni].pieces) {
            // is there a change from an already-perturbed piece into this one?
            const CoordinateChange* incoming = nullptr;
            for (const auto& chg : gcs.changes)
                if (chg.dst == piece.label && sys.by_piece.count(chg.src)) incoming = &chg;
            if (!incoming) {
                sys.by_piece[piece.label] = fresh_cfp(piece);
                continue;
            }
            auto key = incoming->src + ">" + incoming->dst;
            auto it = data.find(key);
            if (it == data.end())
                throw VfcError(ErrCode::FILTER_INDUCTION_STUCK,
                               "no bundle extension datum for " + key);
            const auto& src_piece = gcs.piece(incoming->src);
            sys.by_piece[piece.label] =
                extend_cfp(sys.by_piece[incoming->src], src_piece, piece, it->second);
        }
    }

    // compatibility residuals across changes (shared W only)
    for (const auto& chg : gcs.changes) {
        if (!sys.by_piece.count(chg.src) || !sys.by_piece.count(chg.dst)) continue;
        const auto& cq = sys.by_piece[chg.src];
        const auto& cp = sys.by_piece[chg.dst];
        if (cq.w_dim != cp.w_dim) {
            sys.build_report.add("compat:" + chg.src + ">" + chg.dst, true, 0.0, 0.0, "",
                                 "skipped: different W");
            continue;
        }
        const auto& src = gcs.piece(chg.src);
        Smooth phi = chg.emb.base(src.dim());
        double worst = 0.0;
        for (const auto& y : chg.emb.domain.sample_grid(5)) {
            Mat g = chg.emb.fiber_at(y, src.dim());
            for (const auto& w : cq.W.sample_grid(cq.w_dim > 1 ? 3 : 6)) {
                for (double eps : {0.1, 0.05}) {
                    Vec in_q(cq.chart_dim + cq.w_dim + 1);
                    in_q << y, w, eps;
                    Vec in_p(cp.chart_dim + cp.w_dim + 1);
                    in_p << phi(y), w, eps;
                    worst = std::max(worst,
                                     (cp.s_family(in_p) - g * cq.s_family(in_q)).norm());
                }
            }
        }
        sys.build_report.add_residual("compat:" + chg.src + ">" + chg.dst, worst, tol.tau_eq);
    }
    return sys;
}

}  // namespace vfckit
