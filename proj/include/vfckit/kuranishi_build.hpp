#pragma once

#include <algorithm>

#include "vfckit/kuranishi.hpp"

namespace vfckit {

// ---------------------------------------------------------------------------
// Sum charts

// Glue two same-dimension charts along an open change into one GCS node (a
// 2-chart atlas treated as a single Kuranishi chart; footprint = union).
// Properness of the glue is sampled: points on the interior boundary of the
// overlap must map to the boundary of the target chart, otherwise the glued
// space acquires a doubled point.
inline GcsNode sum_chart(const KuranishiChart& c1, const KuranishiChart& c2,
                         const std::optional<CoordinateChange>& glue, const Tolerances& tol = {}) {
    if (c1.dim() != c2.dim())
        throw VfcError(ErrCode::DIM_MISMATCH, c1.label + " dim " + std::to_string(c1.dim()) +
                                                  " vs " + c2.label + " dim " +
                                                  std::to_string(c2.dim()));
    GcsNode node;
    node.label = c1.label + "+" + c2.label;
    node.dim = c1.dim();
    node.pieces = {c1, c2};
    if (glue) {
        const auto& chg = *glue;
        const KuranishiChart& src = chg.src == c1.label ? c1 : c2;
        const KuranishiChart& dst = chg.dst == c2.label ? c2 : c1;
        Smooth phi = chg.emb.base(src.dim());
        // interior-boundary samples of the overlap: overlap face points that
        // are interior to the source domain
        double margin = 1e-6;
        for (int axis = 0; axis < src.dim(); ++axis) {
            for (int side = 0; side < 2; ++side) {
                for (const auto& p : chg.emb.domain.sample_face(axis, side, 5)) {
                    if (!src.domain().contains_margin(p, margin)) continue;  // chart face, fine
                    Vec img = phi(p);
                    if (dst.domain().contains_margin(img, 10 * margin))
                        throw VfcError(ErrCode::NOT_PROPER,
                                       "overlap boundary point " + point_str(p) +
                                           " maps to interior point " + point_str(img));
                }
            }
        }
        node.internal_glue.push_back(chg);
    }
    (void)tol;
    return node;
}

// ---------------------------------------------------------------------------
// build_gcs: finite generating family -> GCS ordered by dimension

struct BuildGcsResult {
    GoodCoordinateSystem gcs;
    EmbeddingRecord kg_record;  // KG-embedding of the input structure
};

inline SupportSystem default_support(const GoodCoordinateSystem& gcs, double margin) {
    SupportSystem K;
    for (const auto* kc : gcs.all_pieces()) K.by_piece[kc->label] = kc->domain().shrunk(margin);
    return K;
}

inline BuildGcsResult build_gcs(const KuranishiStructure& ks, const Tolerances& tol = {}) {
    if (ks.charts.empty()) throw VfcError(ErrCode::INCOMPATIBLE_CHARTS, "no charts");
    for (const auto& c : ks.charts)
        if (c.vdim() != ks.charts[0].vdim())
            throw VfcError(ErrCode::INCOMPATIBLE_CHARTS, "vdim mismatch at " + c.label);

    // group charts by dimension, ascending
    std::vector<int> dims;
    for (const auto& c : ks.charts)
        if (std::find(dims.begin(), dims.end(), c.dim()) == dims.end()) dims.push_back(c.dim());
    std::sort(dims.begin(), dims.end());

    double base_margin = 1e300;
    for (const auto& c : ks.charts)
        base_margin = std::min(base_margin, 0.1 * (c.domain().hi - c.domain().lo).minCoeff());

    for (int round = 0; round <= tol.max_shrink; ++round) {
        double m = round == 0 ? 0.0 : base_margin / double(1 << (round - 1));
        GoodCoordinateSystem gcs;
        EmbeddingRecord kg;
        kg.kind = EmbeddingRecord::Kind::KG;

        for (int d : dims) {
            GcsNode node;
            node.dim = d;
            for (const auto& c : ks.charts) {
                if (c.dim() != d) continue;
                KuranishiChart piece = c;
                if (m > 0) piece.bundle.base.domain = piece.domain().shrunk(m);
                node.pieces.push_back(piece);
                node.label = node.label.empty() ? c.label : node.label + "+" + c.label;
            }
            // same-dimension changes become internal glue
            for (const auto& chg : ks.changes) {
                const auto& s = ks.chart(chg.src);
                const auto& t = ks.chart(chg.dst);
                if (s.dim() == d && t.dim() == d) {
                    CoordinateChange g2 = chg;
                    if (m > 0) g2.emb.domain = g2.emb.domain.shrunk(m);
                    node.internal_glue.push_back(g2);
                }
            }
            gcs.nodes.push_back(std::move(node));
        }

        // cross-dimension changes, promoted to strong
        for (const auto& chg : ks.changes) {
            const auto& s = ks.chart(chg.src);
            const auto& t = ks.chart(chg.dst);
            if (s.dim() == t.dim()) continue;
            CoordinateChange strong = chg;
            strong.kind = CoordinateChange::Kind::Strong;
            if (m > 0) strong.emb.domain = strong.emb.domain.shrunk(m);
            gcs.changes.push_back(strong);
        }

        // order: lower dim <= higher dim whenever a change or footprint
        // overlap relates them; then transitive closure
        for (int i = 0; i < (int)gcs.nodes.size(); ++i)
            for (int j = 0; j < (int)gcs.nodes.size(); ++j) {
                if (gcs.nodes[i].dim >= gcs.nodes[j].dim) continue;
                bool related = false;
                for (const auto& chg : gcs.changes)
                    if (gcs.node_of_piece(chg.src) == i && gcs.node_of_piece(chg.dst) == j)
                        related = true;
                if (related) gcs.order.push_back({i, j});
            }
        for (size_t pass = 0; pass < gcs.nodes.size(); ++pass)
            for (int i = 0; i < (int)gcs.nodes.size(); ++i)
                for (int j = 0; j < (int)gcs.nodes.size(); ++j)
                    for (int k = 0; k < (int)gcs.nodes.size(); ++k)
                        if (i != k && gcs.leq(i, j) && gcs.leq(j, k) && !gcs.leq(i, k))
                            gcs.order.push_back({i, k});

        gcs.support = default_support(gcs, std::max(m, 0.05 * base_margin));
        SupportSystem inner;
        for (auto& [label, K] : gcs.support.by_piece)
            inner.by_piece[label] = K.shrunk(0.25 * base_margin);
        gcs.support_inner = inner;

        // KG record: identity embedding of each input chart onto its piece
        for (const auto& c : ks.charts) {
            CoordinateChange idc;
            idc.kind = CoordinateChange::Kind::Strong;
            idc.src = c.label;
            idc.dst = c.label;
            idc.emb.src_bundle = c.bundle.label;
            idc.emb.dst_bundle = c.bundle.label;
            auto names = coord_names(c.dim());
            for (const auto& n : names) idc.emb.base_map.push_back(Expr::var(n));
            idc.emb.fiber_map.assign(std::max(1, c.rank()), {});
            for (int r = 0; r < std::max(1, c.rank()); ++r) {
                for (int cc = 0; cc < std::max(1, c.rank()); ++cc)
                    idc.emb.fiber_map[r].push_back(Expr(r == cc ? 1.0 : 0.0));
            }
            idc.emb.hom.resize(c.group().size());
            for (int i = 0; i < c.group().size(); ++i) idc.emb.hom[i] = i;
            idc.emb.domain = m > 0 ? c.domain().shrunk(m) : c.domain();
            idc.emb.verified = true;
            kg.chartwise.push_back(std::move(idc));
        }

        Report axioms = verify_gcs_axioms(gcs, tol);
        if (axioms.all_pass()) return {std::move(gcs), std::move(kg)};
    }
    throw VfcError(ErrCode::SHRINK_EXHAUSTED,
                   "axioms still failing after max_shrink rounds");
}

// ---------------------------------------------------------------------------
// Direct and fiber products

inline std::vector<Expr> rename_coords(const std::vector<Expr>& exprs, int src_dim, int offset) {
    std::map<std::string, Expr> sub;
    auto names = coord_names(src_dim);
    for (int i = 0; i < src_dim; ++i)
        sub[names[i]] = Expr::var("y" + std::to_string(offset + i + 1));
    std::vector<Expr> out;
    for (const auto& e : exprs) out.push_back(e.substitute(sub));
    return out;
}

// Direct product chart: box domains only; groups and bundles act blockwise.
inline KuranishiChart direct_product_chart(const KuranishiChart& a, const KuranishiChart& b) {
    if (a.domain().ball_outer > 0 || b.domain().ball_outer > 0)
        throw VfcError(ErrCode::UNSUPPORTED, "products require box-only domains");
    KuranishiChart out;
    out.label = a.label + "x" + b.label;
    OrbifoldChart base;
    base.label = out.label;
    base.dim = a.dim() + b.dim();
    Domain d;
    d.lo = concat(a.domain().lo, b.domain().lo);
    d.hi = concat(a.domain().hi, b.domain().hi);
    d.boundary_lo = a.domain().boundary_lo;
    d.boundary_hi = a.domain().boundary_hi;
    d.boundary_lo.insert(d.boundary_lo.end(), b.domain().boundary_lo.begin(),
                         b.domain().boundary_lo.end());
    d.boundary_hi.insert(d.boundary_hi.end(), b.domain().boundary_hi.begin(),
                         b.domain().boundary_hi.end());
    base.domain = d;
    base.base_point = concat(a.bundle.base.base_point, b.bundle.base.base_point);
    FiniteGroupAction g;
    for (int i = 0; i < a.group().size(); ++i)
        for (int j = 0; j < b.group().size(); ++j) {
            Mat m = Mat::Zero(base.dim, base.dim);
            m.topLeftCorner(a.dim(), a.dim()) = a.group().elements[i];
            m.bottomRightCorner(b.dim(), b.dim()) = b.group().elements[j];
            g.elements.push_back(m);
            g.labels.push_back(a.group().labels[i] + "." + b.group().labels[j]);
        }
    base.group = g;
    base.global_coords = a.bundle.base.global_coords;
    auto gb = rename_coords(b.bundle.base.global_coords, b.dim(), a.dim());
    base.global_coords.insert(base.global_coords.end(), gb.begin(), gb.end());

    int rank = a.rank() + b.rank();
    std::vector<Mat> rep;
    for (int i = 0; i < a.group().size(); ++i)
        for (int j = 0; j < b.group().size(); ++j) {
            Mat m = Mat::Zero(rank, rank);
            if (a.rank()) m.topLeftCorner(a.rank(), a.rank()) = a.bundle.representation[i];
            if (b.rank()) m.bottomRightCorner(b.rank(), b.rank()) = b.bundle.representation[j];
            rep.push_back(m);
        }
    out.bundle = BundleChart::make(out.label + ".E", std::move(base), rank, std::move(rep));
    out.s.components = a.s.components;
    auto sb = rename_coords(b.s.components, b.dim(), a.dim());
    out.s.components.insert(out.s.components.end(), sb.begin(), sb.end());
    return out;
}

struct ProductResult {
    KuranishiStructure ks;
    bool collapsed = false;  // identity factor collapsed away
};

// Is `f` the identity map of an m-dimensional chart onto M (expressions
// y1..ym in order) with a rank-0 obstruction?
inline bool is_identity_factor(const KuranishiChart& c, const std::vector<Expr>& f, int m) {
    if (c.dim() != m || c.rank() != 0) return false;
    auto names = coord_names(m);
    for (int i = 0; i < m; ++i) {
        const ExprNode& n = f[i].node();
        if (n.op != ExOp::Var || n.name != names[i]) return false;
    }
    return true;
}

// Direct product (no target) or fiber product over M. Fiber products are
// presented in thickened form: the product chart with obstruction
// E_a (+) E_b (+) R^m and Kuranishi map (s_a, s_b, f_a - f_b); when one
// factor maps to M by the identity the product collapses to the other factor.
inline ProductResult product_and_fiber_product(
    const KuranishiStructure& a, const std::vector<std::vector<Expr>>& fa,
    const KuranishiStructure& b, const std::vector<std::vector<Expr>>& fb, int target_dim,
    const Tolerances& tol = {}) {
    ProductResult out;
    if (target_dim == 0) {  // direct product
        for (const auto& ca : a.charts)
            for (const auto& cb : b.charts) out.ks.charts.push_back(direct_product_chart(ca, cb));
        return out;
    }

    for (size_t ia = 0; ia < a.charts.size(); ++ia)
        for (size_t ib = 0; ib < b.charts.size(); ++ib) {
            const auto& ca = a.charts[ia];
            const auto& cb = b.charts[ib];
            const auto& fae = fa[ia];
            const auto& fbe = fb[ib];

            // weak transversality: [dfa | dfb] spans R^m at sampled zero pairs
            Smooth fa_s = smooth_expr(fae, coord_names(ca.dim()));
            Smooth fb_s = smooth_expr(fbe, coord_names(cb.dim()));
            auto za = ca.zero_samples(tol), zb = cb.zero_samples(tol);
            double worst = 1e300;
            std::string witness;
            for (const auto& ya : za)
                for (const auto& yb : zb) {
                    if ((fa_s(ya) - fb_s(yb)).norm() > 5e-2) continue;  // not a fiber pair
                    Mat j(target_dim, ca.dim() + cb.dim());
                    j.leftCols(ca.dim()) = fa_s.jac(ya);
                    j.rightCols(cb.dim()) = fb_s.jac(yb);
                    double sv = sigma_min(j);
                    if (sv < worst) {
                        worst = sv;
                        witness = point_str(ya) + "," + point_str(yb);
                    }
                }
            if (worst <= tol.tau_rank && worst < 1e300)
                throw VfcError(ErrCode::NOT_TRANSVERSAL, "sigma_min " + std::to_string(worst) +
                                                             " at " + witness);

            if (is_identity_factor(cb, fbe, target_dim)) {
                out.ks.charts.push_back(ca);
                out.collapsed = true;
                continue;
            }
            if (is_identity_factor(ca, fae, target_dim)) {
                out.ks.charts.push_back(cb);
                out.collapsed = true;
                continue;
            }
            KuranishiChart prod = direct_product_chart(ca, cb);
            // thickening: extra R^m obstruction components f_a - f_b
            prod.bundle.fiber_dim += target_dim;
            for (auto& m : prod.bundle.representation) {
                Mat ext = Mat::Identity(prod.bundle.fiber_dim, prod.bundle.fiber_dim);
                ext.topLeftCorner(m.rows(), m.cols()) = m;
                m = ext;
            }
            auto fb_shift = rename_coords(fbe, cb.dim(), ca.dim());
            for (int k = 0; k < target_dim; ++k)
                prod.s.components.push_back(fae[k] - fb_shift[k]);
            prod.label += "x_M";
            // effectivity must survive (paper: fiber product of effective
            // orbifolds is assumed effective; verified by sampling)
            Report eff = verify_group(prod.group(), prod.domain(), tol);
            for (const auto& item : eff.items)
                if (item.name == "effectivity" && !item.pass)
                    throw VfcError(ErrCode::EFFECTIVITY_LOST, prod.label);
            out.ks.charts.push_back(std::move(prod));
        }
    return out;
}

// Associativity data: chartwise comparison of (a x b) x c vs a x (b x c)
// after canonical flattening; exact for expression inputs.
inline bool product_associativity_check(const KuranishiStructure& a, const KuranishiStructure& b,
                                        const KuranishiStructure& c) {
    auto ab = product_and_fiber_product(a, {}, b, {}, 0);
    auto ab_c = product_and_fiber_product(ab.ks, {}, c, {}, 0);
    auto bc = product_and_fiber_product(b, {}, c, {}, 0);
    auto a_bc = product_and_fiber_product(a, {}, bc.ks, {}, 0);
    if (ab_c.ks.charts.size() != a_bc.ks.charts.size()) return false;
    for (size_t i = 0; i < ab_c.ks.charts.size(); ++i) {
        const auto& x = ab_c.ks.charts[i];
        const auto& y = a_bc.ks.charts[i];
        if (x.dim() != y.dim() || x.rank() != y.rank()) return false;
        if ((x.domain().lo - y.domain().lo).norm() != 0.0) return false;
        if ((x.domain().hi - y.domain().hi).norm() != 0.0) return false;
        for (size_t k = 0; k < x.s.components.size(); ++k)
            if (x.s.components[k].str() != y.s.components[k].str()) return false;
    }
    return true;
}

}  // namespace vfckit
