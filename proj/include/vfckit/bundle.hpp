#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vfckit/orbifold.hpp"
#include "vfckit/smooth.hpp"

namespace vfckit {

// Equivariant vector bundle over one orbifold chart: fibers are R^k with an
// explicit representation matrix per group element.
struct BundleChart {
    OrbifoldChart base;
    int fiber_dim = 0;
    std::vector<Mat> representation;  // indexed like base.group.elements
    std::string label;

    static BundleChart make(std::string label, OrbifoldChart base, int fiber_dim,
                            std::vector<Mat> rep) {
        BundleChart b;
        b.label = std::move(label);
        b.base = std::move(base);
        b.fiber_dim = fiber_dim;
        b.representation = std::move(rep);
        return b;
    }

    static BundleChart trivial(std::string label, OrbifoldChart base, int fiber_dim) {
        std::vector<Mat> rep(base.group.size(), Mat::Identity(fiber_dim, fiber_dim));
        return make(std::move(label), std::move(base), fiber_dim, std::move(rep));
    }

    Report verify(const Tolerances& tol = {}) const {
        Report rep;
        rep.subject = "bundle:" + label;
        for (const auto& m : representation)
            if ((int)m.rows() != fiber_dim || (int)m.cols() != fiber_dim)
                throw VfcError(ErrCode::MALFORMED_MATRIX, "representation matrix size");
        // homomorphism: rho(gi)rho(gj) = rho(gi gj)
        auto table = base.group.multiplication_table(tol.tau_grp);
        double worst = 0.0;
        for (int i = 0; i < base.group.size(); ++i)
            for (int j = 0; j < base.group.size(); ++j) {
                int k = table[i][j];
                if (k < 0) continue;
                worst = std::max(
                    worst, (representation[i] * representation[j] - representation[k]).norm());
            }
        rep.add_residual("representation_homomorphism", worst, tol.tau_grp);
        return rep;
    }
};

// Section given by expressions in chart coordinates, one per fiber component.
struct Section {
    std::vector<Expr> components;

    Smooth evaluator(int base_dim) const {
        return smooth_expr(components, coord_names(base_dim));
    }

    static Section from(std::vector<Expr> comps) { return Section{std::move(comps)}; }
};

// Max |s(g y) - rho(g) s(y)| over samples; witness is the worst (y, gamma).
inline double section_equivariance_residual(const BundleChart& bundle, const Smooth& s,
                                            std::string* witness = nullptr,
                                            int density = 16) {
    auto samples = bundle.base.domain.sample_grid(density);
    double worst = 0.0;
    for (const auto& y : samples)
        for (int gi = 0; gi < bundle.base.group.size(); ++gi) {
            Vec gy = bundle.base.group.elements[gi] * y;
            if (!bundle.base.domain.contains(gy, 1e-9)) continue;
            double r = (s(gy) - bundle.representation[gi] * s(y)).norm();
            if (r > worst) {
                worst = r;
                if (witness)
                    *witness = "(" + point_str(y) + ", g" + std::to_string(gi) + ")";
            }
        }
    return worst;
}

// Verified equivariant evaluator for a section; throws EQUIVARIANCE_FAIL
// beyond tolerance, with the witness embedded in the message.
inline Smooth local_expression(const BundleChart& bundle, const Section& s, Report* out_report,
                               const Tolerances& tol = {}) {
    Smooth ev = s.evaluator(bundle.base.dim);
    std::string witness;
    double res = section_equivariance_residual(bundle, ev, &witness);
    if (out_report) {
        out_report->subject = "section@" + bundle.label;
        out_report->add_residual("equivariance", res, tol.tau_eq, witness);
    }
    if (res > tol.tau_eq)
        throw VfcError(ErrCode::EQUIVARIANCE_FAIL, "residual " + std::to_string(res) + " at " +
                                                       witness);
    return ev;
}

// Fiberwise-linear bundle embedding over a base embedding: y -> g_y, an
// expression-valued (dst_fiber x src_fiber) matrix.
struct BundleEmbedding {
    std::string src_bundle, dst_bundle;
    std::vector<Expr> base_map;                  // src base coords -> dst base coords
    std::vector<std::vector<Expr>> fiber_map;    // rows: dst fiber, cols: src fiber
    std::vector<int> hom;                        // group hom as index map
    Domain domain;                               // where defined (in src coords)
    bool verified = false;

    Smooth base(int src_dim) const { return smooth_expr(base_map, coord_names(src_dim)); }

    Mat fiber_at(const Vec& y, int src_dim) const {
        std::map<std::string, double> env;
        auto names = coord_names(src_dim);
        for (int i = 0; i < src_dim; ++i) env[names[i]] = y[i];
        Mat m(fiber_map.size(), fiber_map[0].size());
        for (size_t r = 0; r < fiber_map.size(); ++r)
            for (size_t c = 0; c < fiber_map[r].size(); ++c) m(r, c) = fiber_map[r][c].eval(env);
        return m;
    }
};

inline Report verify_bundle_embedding(const BundleChart& src, const BundleChart& dst,
                                      BundleEmbedding& emb, const Tolerances& tol = {}) {
    Report rep;
    rep.subject = "bundle_embedding:" + emb.src_bundle + "->" + emb.dst_bundle;
    auto samples = emb.domain.sample_grid(8);
    double worst_rank = 1e300;
    std::string witness;
    for (const auto& y : samples) {
        Mat g = emb.fiber_at(y, src.base.dim);
        double s = src.fiber_dim == 0 ? 1.0 : sigma_min(g);
        if (s < worst_rank) {
            worst_rank = s;
            witness = point_str(y);
        }
    }
    if (samples.empty()) worst_rank = 1.0;
    rep.add("fiberwise_injective", worst_rank > tol.tau_rank, worst_rank, tol.tau_rank, witness,
            "smallest singular value over samples");

    // equivariance of the base map
    LocalRepresentative t;
    t.src = src.base.label;
    t.dst = dst.base.label;
    t.hom = emb.hom;
    t.map_exprs = emb.base_map;
    t.overlap = emb.domain;
    OrbifoldAtlas tiny;
    tiny.charts = {src.base, dst.base};
    double eqres = equivariance_residual(tiny, t);
    rep.add_residual("base_equivariance", eqres, tol.tau_eq);

    emb.verified = rep.all_pass();
    return rep;
}

// Pullback of a bundle along an embedding: fibers reused, representation
// conjugated through the group hom.
inline BundleChart pullback_bundle(const BundleChart& dst, const BundleEmbedding& emb,
                                   const OrbifoldChart& src_base) {
    if (!emb.verified)
        throw VfcError(ErrCode::UNVERIFIED_EMBEDDING, emb.src_bundle + "->" + emb.dst_bundle);
    BundleChart out;
    out.label = dst.label + "|" + src_base.label;
    out.base = src_base;
    out.fiber_dim = dst.fiber_dim;
    for (int gi = 0; gi < src_base.group.size(); ++gi)
        out.representation.push_back(dst.representation[emb.hom[gi]]);
    return out;
}

// Retraction pi: Omega12 (in dst chart) -> Omega1 (in src chart) plus a fiber
// extension phi~: pi^* E1 -> E2. Scenario-supplied, verified here.
struct BundleExtensionDatum {
    std::string src_chart, dst_chart;            // chart 1 (small), chart 2 (big)
    std::vector<Expr> retraction;                // dst coords -> src coords
    std::vector<std::vector<Expr>> fiber_ext;    // dst_fiber x src_fiber, exprs in dst coords
    Domain omega12;                              // neighborhood in dst chart
    Domain omega1;                               // neighborhood in src chart
    bool verified = false;

    Smooth retraction_map(int dst_dim) const {
        return smooth_expr(retraction, coord_names(dst_dim));
    }
    Mat fiber_at(const Vec& z, int dst_dim) const {
        std::map<std::string, double> env;
        auto names = coord_names(dst_dim);
        for (int i = 0; i < dst_dim; ++i) env[names[i]] = z[i];
        Mat m(fiber_ext.size(), fiber_ext[0].size());
        for (size_t r = 0; r < fiber_ext.size(); ++r)
            for (size_t c = 0; c < fiber_ext[r].size(); ++c) m(r, c) = fiber_ext[r][c].eval(env);
        return m;
    }
};

// Checks (a) pi(phi(y)) = y on samples of K (retraction-identity on the
// embedded locus), (b) the fiber extension restricted to the locus reproduces
// the bundle map, (c) fiberwise injectivity. K is sampled from omega1.
inline Report verify_bundle_extension(BundleExtensionDatum& datum, const BundleEmbedding& emb,
                                      const BundleChart& src, const BundleChart& dst,
                                      const std::vector<Vec>& K_samples,
                                      const Tolerances& tol = {}) {
    Report rep;
    rep.subject = "bundle_extension:" + datum.src_chart + "->" + datum.dst_chart;
    Smooth phi = emb.base(src.base.dim);
    Smooth pi = datum.retraction_map(dst.base.dim);

    double worst_id = 0.0, worst_restrict = 0.0, worst_rank = 1e300;
    std::string id_witness;
    for (const auto& y : K_samples) {
        Vec z = phi(y);
        if (!datum.omega12.contains(z, 1e-9))
            throw VfcError(ErrCode::DOMAIN_TOO_SMALL,
                           "embedded point " + point_str(z) + " not in Omega12");
        double r = (pi(z) - y).norm();
        if (r > worst_id) {
            worst_id = r;
            id_witness = point_str(y);
        }
        // restriction condition: fiber_ext at phi(y) equals the bundle map at y
        Mat a = datum.fiber_at(z, dst.base.dim);
        Mat b = emb.fiber_at(y, src.base.dim);
        worst_restrict = std::max(worst_restrict, (a - b).norm());
    }
    for (const auto& z : datum.omega12.sample_grid(6)) {
        Mat a = datum.fiber_at(z, dst.base.dim);
        double s = src.fiber_dim == 0 ? 1.0 : sigma_min(a);
        worst_rank = std::min(worst_rank, s);
    }
    rep.add_residual("retraction_identity_on_locus", worst_id, tol.tau_eq, id_witness);
    rep.add_residual("restricts_to_bundle_map", worst_restrict, tol.tau_eq);
    rep.add("fiber_extension_rank", worst_rank > tol.tau_rank, worst_rank, tol.tau_rank, "",
            "smallest singular value over Omega12 samples");
    datum.verified = rep.all_pass();
    return rep;
}

// Composition compatibility on a linear-order chain p > q > r:
// pi_rq(pi_qp(x)) = pi_rp(x) on samples of the declared common domain.
inline Report verify_extension_chain(const BundleExtensionDatum& qp,
                                     const BundleExtensionDatum& rq,
                                     const BundleExtensionDatum& rp, int dim_p,
                                     const std::vector<Vec>& common_samples,
                                     const Tolerances& tol = {}) {
    Report rep;
    rep.subject = "extension_chain";
    Smooth pi_qp = qp.retraction_map(dim_p);
    Smooth pi_rq = rq.retraction_map((int)qp.retraction.size());
    Smooth pi_rp = rp.retraction_map(dim_p);
    double worst = 0.0;
    std::string witness;
    for (const auto& x : common_samples) {
        double r = (pi_rq(pi_qp(x)) - pi_rp(x)).norm();
        if (r > worst) {
            worst = r;
            witness = point_str(x);
        }
    }
    rep.add_residual("pi_rq.pi_qp=pi_rp", worst, tol.tau_eq, witness);
    return rep;
}

}  // namespace vfckit
