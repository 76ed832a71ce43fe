#pragma once

#include "vfckit/pushout.hpp"

namespace vfckit {

// ---------------------------------------------------------------------------
// Boundary restriction of the pushout data

inline CFPerturbation restrict_cfp_to_boundary(const CFPerturbation& cfp,
                                               const BoundaryChart& bc) {
    CFPerturbation out;
    out.chart_dim = bc.chart.dim();
    out.w_dim = cfp.w_dim;
    out.W = cfp.W;
    out.omega = cfp.omega;
    for (int gi : bc.kept_group_indices)
        if (!cfp.w_action.empty()) out.w_action.push_back(cfp.w_action[gi]);
    // (y', w, eps) -> (insert(y'), w, eps)
    int n_out = out.chart_dim + out.w_dim + 1;
    int parent = bc.chart.dim() + 1;
    Mat A = Mat::Zero(parent + out.w_dim + 1, n_out);
    Vec b = Vec::Zero(parent + out.w_dim + 1);
    for (int i = 0, j = 0; i < parent; ++i) {
        if (i == bc.axis) b[i] = bc.side_hi ? bc.face_value_hi : bc.face_value_lo;
        else A(i, j++) = 1.0;
    }
    for (int i = 0; i < out.w_dim + 1; ++i) A(parent + i, out.chart_dim + i) = 1.0;
    out.s_family = compose(cfp.s_family, smooth_affine(A, b));
    return out;
}

struct BoundaryPushoutData {
    BoundaryData bd;
    CfpSystem sys;
    GcsPou pou;
    std::map<std::string, FormOnChart> h;
    StronglySmoothMap f;
};

// Everything the boundary term of Stokes' formula needs, induced by
// restriction: cfp, chi, form, map.
inline BoundaryPushoutData induce_boundary_data(const GoodCoordinateSystem& gcs,
                                                const CfpSystem& sys, const GcsPou& pou,
                                                const std::map<std::string, FormOnChart>& h,
                                                const StronglySmoothMap& f,
                                                const Tolerances& tol = {}) {
    BoundaryPushoutData out;
    out.bd = normalized_boundary(gcs, tol);
    out.f.target_dim = f.target_dim;
    for (const auto& bc : out.bd.charts) {
        const KuranishiChart& parent = gcs.piece(bc.parent_piece);
        out.sys.by_piece[bc.chart.label] =
            restrict_cfp_to_boundary(sys.of(bc.parent_piece), bc);
        // chi composed with the face insertion
        int n = parent.dim();
        Mat A = Mat::Zero(n, n - 1);
        Vec b = Vec::Zero(n);
        for (int i = 0, j = 0; i < n; ++i) {
            if (i == bc.axis) b[i] = bc.side_hi ? bc.face_value_hi : bc.face_value_lo;
            else A(i, j++) = 1.0;
        }
        out.pou.chi[bc.chart.label] = compose(pou.of(bc.parent_piece), smooth_affine(A, b));
        auto it = h.find(bc.parent_piece);
        if (it != h.end()) {
            if (it->second.degree != 0)
                throw VfcError(ErrCode::MODE_UNSUPPORTED,
                               "boundary restriction implemented for 0-forms");
            double value = bc.side_hi ? bc.face_value_hi : bc.face_value_lo;
            FormOnChart hf = FormOnChart::function(
                detail::restrict_to_face({it->second.coeff({})}, n, bc.axis, value)[0], n - 1);
            out.h[bc.chart.label] = hf;
        }
        if (f.target_dim > 0) {
            double value = bc.side_hi ? bc.face_value_hi : bc.face_value_lo;
            out.f.by_piece[bc.chart.label] =
                detail::restrict_to_face(f.by_piece.at(bc.parent_piece), n, bc.axis, value);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Stokes' formula check: d(f!(h)) = f!(dh) + f_boundary!(h_boundary).
// Point targets check |f!(dh) + f_b!(h_b)| directly; interval targets pair
// both sides against a compactly supported test form.
struct StokesResult {
    std::vector<double> eps;
    std::vector<double> residual;
    Report report;
};

inline StokesResult stokes_check(const GoodCoordinateSystem& gcs, const CfpSystem& sys,
                                 const GcsPou& pou, const std::map<std::string, FormOnChart>& h,
                                 const std::optional<StronglySmoothMap>& f,
                                 const std::optional<FormOnChart>& rho,
                                 const std::vector<double>& eps_ladder, int quad_order,
                                 const Tolerances& tol = {}) {
    StokesResult res;
    res.report.subject = "stokes";
    std::map<std::string, FormOnChart> dh;
    for (const auto& [label, form] : h) dh[label] = form.exterior_derivative();
    StronglySmoothMap f_eff = f ? *f : StronglySmoothMap{};
    BoundaryPushoutData bdata = induce_boundary_data(gcs, sys, pou, h, f_eff, tol);

    for (double eps : eps_ladder) {
        double residual = 0.0;
        if (!f || f->target_dim == 0) {
            double lhs_bulk = pushout_point(gcs, sys, pou, dh, eps, quad_order, tol);
            double lhs_bdry =
                pushout_point(bdata.bd.gcs, bdata.sys, bdata.pou, bdata.h, eps, quad_order, tol);
            residual = std::abs(lhs_bulk + lhs_bdry);
        } else {
            if (!rho) throw VfcError(ErrCode::MODE_UNSUPPORTED, "pairing mode needs rho");
            FormOnChart drho = rho->exterior_derivative();
            double t1 = pushout_pair(gcs, sys, pou, h, *f, drho, eps, quad_order, tol);
            double t2 = pushout_pair(gcs, sys, pou, dh, *f, *rho, eps, quad_order, tol);
            double t3 = bdata.h.empty()
                            ? 0.0
                            : pushout_pair(bdata.bd.gcs, bdata.sys, bdata.pou, bdata.h, bdata.f,
                                           *rho, eps, quad_order, tol);
            residual = std::abs(t1 + t2 + t3);
        }
        res.eps.push_back(eps);
        res.residual.push_back(residual);
        res.report.add_residual("stokes_eps=" + std::to_string(eps), residual, 1e-6);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Smooth correspondences

struct Correspondence {
    GoodCoordinateSystem space;
    CfpSystem cfps;
    GcsPou pou;
    StronglySmoothMap f_src, f_tgt;
    std::map<std::string, FormOnChart> kernel;  // optional weight form; default 1

    FormOnChart kernel_on(const KuranishiChart& kc) const {
        auto it = kernel.find(kc.label);
        if (it != kernel.end()) return it->second;
        return FormOnChart::function(Expr(1.0), kc.dim());
    }
};

// <Corr(h), rho> where h is a symbolic form on M_src and rho a test form on
// M_tgt: chartwise integral of kernel ^ f_src^* h ^ f_tgt^* rho.
inline double correspondence_pair(const Correspondence& corr, const FormOnChart& h,
                                  const FormOnChart& rho, double eps, int quad_order,
                                  const Tolerances& tol = {}) {
    double acc = 0.0;
    std::vector<const KuranishiChart*> pieces = corr.space.all_pieces();
    std::sort(pieces.begin(), pieces.end(),
              [](auto* a, auto* b) { return a->label < b->label; });
    for (const auto* kc : pieces) {
        FormOnChart hs = h.pullback(corr.f_src.by_piece.at(kc->label), kc->dim());
        FormOnChart rt = rho.pullback(corr.f_tgt.by_piece.at(kc->label), kc->dim());
        FormOnChart integrand = corr.kernel_on(*kc).wedge(hs).wedge(rt);
        NumericForm F = NumericForm::from_symbolic(integrand);
        Smooth chi = corr.pou.of(kc->label);
        NumericForm weighted = F.scaled_by([chi](const Vec& y) { return chi(y)[0]; });
        acc += chart_zero_set_integral(*kc, corr.cfps.of(kc->label), eps, weighted, quad_order,
                                       tol);
    }
    return acc;
}

// Corr(h) evaluated at target points (grid mode; 0-form output).
inline std::vector<double> correspondence_apply_grid(const Correspondence& corr,
                                                     const FormOnChart& h,
                                                     const std::vector<Vec>& t_points, double eps,
                                                     int quad_order, const Tolerances& tol = {}) {
    std::map<std::string, FormOnChart> weighted;
    for (const auto* kc : corr.space.all_pieces()) {
        FormOnChart hs = h.pullback(corr.f_src.by_piece.at(kc->label), kc->dim());
        weighted[kc->label] = corr.kernel_on(*kc).wedge(hs);
    }
    return pushout_grid(corr.space, corr.cfps, corr.pou, weighted, corr.f_tgt, t_points, eps,
                        quad_order, tol);
}

// <Corr(g), rho> for a numeric 0-form g on M_src (needed to iterate
// correspondences: g is the previous stage's pointwise output).
inline double correspondence_pair_numeric(const Correspondence& corr,
                                          const std::function<double(const Vec&)>& g,
                                          const FormOnChart& rho, double eps, int quad_order,
                                          const Tolerances& tol = {}) {
    double acc = 0.0;
    std::vector<const KuranishiChart*> pieces = corr.space.all_pieces();
    std::sort(pieces.begin(), pieces.end(),
              [](auto* a, auto* b) { return a->label < b->label; });
    for (const auto* kc : pieces) {
        FormOnChart rt = rho.pullback(corr.f_tgt.by_piece.at(kc->label), kc->dim());
        FormOnChart integrand = corr.kernel_on(*kc).wedge(rt);
        NumericForm F = NumericForm::from_symbolic(integrand);
        Smooth chi = corr.pou.of(kc->label);
        Smooth fs = corr.f_src.on(*kc);
        NumericForm weighted =
            F.scaled_by([chi, fs, g](const Vec& y) { return chi(y)[0] * g(fs(y)); });
        acc += chart_zero_set_integral(*kc, corr.cfps.of(kc->label), eps, weighted, quad_order,
                                       tol);
    }
    return acc;
}

// Composition formula: <Corr_{32 o 21}(h), rho> vs <Corr_32(Corr_21(h)), rho>.
// The composed space must be supplied (built by product_and_fiber_product;
// for identity factors it collapses). The iterated side evaluates Corr_21
// pointwise on M_2 through grid mode.
struct CompositionResult {
    double lhs = 0.0, rhs = 0.0;
    double gap() const { return std::abs(lhs - rhs); }
};

inline CompositionResult composition_check(const Correspondence& corr31,
                                           const Correspondence& corr21,
                                           const Correspondence& corr32, const FormOnChart& h1,
                                           const FormOnChart& rho3, double eps, int quad_order,
                                           const Tolerances& tol = {}) {
    CompositionResult res;
    res.lhs = correspondence_pair(corr31, h1, rho3, eps, quad_order, tol);
    auto mid = [&](const Vec& t) {
        return correspondence_apply_grid(corr21, h1, {t}, eps, quad_order, tol)[0];
    };
    res.rhs = correspondence_pair_numeric(corr32, mid, rho3, eps, quad_order, tol);
    return res;
}

// Chain-map residual |<Corr h, d rho> + <Corr dh, rho>| for boundaryless
// spaces (the Corr_boundary term being absent).
inline double chain_map_residual(const Correspondence& corr, const FormOnChart& h,
                                 const FormOnChart& rho, double eps, int quad_order,
                                 const Tolerances& tol = {}) {
    double t1 = correspondence_pair(corr, h, rho.exterior_derivative(), eps, quad_order, tol);
    double t2 = correspondence_pair(corr, h.exterior_derivative(), rho, eps, quad_order, tol);
    return std::abs(t1 + t2);
}

}  // namespace vfckit
