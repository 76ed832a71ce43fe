#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vfckit/bundle.hpp"
#include "vfckit/newton.hpp"
#include "vfckit/pou.hpp"

namespace vfckit {

// One Kuranishi chart piece: orbifold base + obstruction bundle +
// equivariant Kuranishi map + footprint into the shared global space.
// Footprints are the base chart's global-coordinate map restricted to the
// zero set. Orientations are coordinate orientations on U and E.
struct KuranishiChart {
    std::string label;
    BundleChart bundle;  // bundle.base is the orbifold chart
    Section s;
    // +1 for coordinate orientation; boundary charts carry the
    // outward-normal-first sign relative to their natural face coordinates.
    int orientation_sign = 1;

    int dim() const { return bundle.base.dim; }
    int rank() const { return bundle.fiber_dim; }
    int vdim() const { return dim() - rank(); }
    const Domain& domain() const { return bundle.base.domain; }
    const FiniteGroupAction& group() const { return bundle.base.group; }

    Smooth s_eval() const { return s.evaluator(dim()); }
    Smooth footprint() const { return bundle.base.global_map(); }

    // Zero-set point cloud in chart coordinates (sampled model of psi^{-1}).
    std::vector<Vec> zero_samples(const Tolerances& tol, int density = 0) const {
        int g = density > 0 ? density : tol.grid_density;
        return zero_cloud(s_eval(), domain(), g, 1e-10, tol.newton_max_iter);
    }
};

// Coordinate change Phi_pq : U_q -> U_p (src = q, dst = p), weak or strong.
struct CoordinateChange {
    enum class Kind { Weak, Strong };
    Kind kind = Kind::Weak;
    std::string src, dst;  // chart labels
    BundleEmbedding emb;   // base map, fiber map, hom; emb.domain = U_{pq} in src coords
};

struct KuranishiStructure {
    std::vector<KuranishiChart> charts;
    std::vector<CoordinateChange> changes;

    const KuranishiChart& chart(const std::string& label) const {
        for (const auto& c : charts)
            if (c.label == label) return c;
        throw VfcError(ErrCode::UNRESOLVED_LABEL, "kuranishi chart " + label);
    }
    int vdim() const { return charts.empty() ? 0 : charts[0].vdim(); }
};

// ---------------------------------------------------------------------------
// Chart / change verification

inline Report verify_kuranishi_chart(const KuranishiChart& kc, const Tolerances& tol = {}) {
    Report rep = verify_chart(kc.bundle.base, tol);
    rep.subject = "kchart:" + kc.label;
    rep.merge(kc.bundle.verify(tol), "bundle");
    std::string witness;
    double eq = kc.rank() == 0 ? 0.0
                               : section_equivariance_residual(kc.bundle, kc.s_eval(), &witness);
    rep.add_residual("kuranishi_map_equivariance", eq, tol.tau_eq, witness);
    return rep;
}

// The normal-derivative condition of an embedding: at zeros of s_src inside
// the change domain, D s_dst must induce an isomorphism
// T U_dst / Im(D phi)  ->  E_dst / Im(phihat).
// Returns the smallest singular value of the induced quotient map over the
// sampled zeros (1.0 when the quotients are 0-dimensional).
inline double normal_derivative_sigma_min(const KuranishiChart& src, const KuranishiChart& dst,
                                          const CoordinateChange& chg, const Tolerances& tol,
                                          std::string* witness = nullptr) {
    Smooth phi = chg.emb.base(src.dim());
    Smooth s_dst = dst.s_eval();
    int nd = dst.dim() - src.dim();
    int ne = dst.rank() - src.rank();
    if (nd == 0 && ne == 0) return 1.0;
    Smooth s_src = src.s_eval();
    auto zeros = find_zeros(s_src, chg.emb.domain, tol.grid_density, 1e-10, tol.newton_max_iter,
                            tol.r_dedup);
    double worst = 1e300;
    for (const auto& y : zeros) {
        Vec py = phi(y);
        Mat dphi = phi.jac(y);                      // dim_dst x dim_src
        Mat ghat = chg.emb.fiber_at(y, src.dim());  // rank_dst x rank_src
        Mat ds = s_dst.jac(py);                     // rank_dst x dim_dst
        Mat ncomp = kernel_basis(dphi.transpose()); // complement of Im dphi
        Mat ecomp = src.rank() == 0 ? Mat(Mat::Identity(dst.rank(), dst.rank()))
                                    : Mat(kernel_basis(ghat.transpose()));
        Mat q = ecomp.transpose() * ds * ncomp;     // ne x nd
        double sv = sigma_min(q);
        if (sv < worst) {
            worst = sv;
            if (witness) *witness = point_str(y);
        }
    }
    if (zeros.empty()) worst = 1.0;  // vacuous
    return worst;
}

// Itemized verification of a coordinate change: equivariance, section
// compatibility phihat(s_src) = s_dst(phi), the normal-derivative
// isomorphism, and (strong kind) two-sided footprint matching.
inline Report verify_change(const KuranishiStructure& ks, const CoordinateChange& chg,
                            const Tolerances& tol = {}) {
    Report rep;
    rep.subject = "change:" + chg.src + "->" + chg.dst;
    const auto& src = ks.chart(chg.src);
    const auto& dst = ks.chart(chg.dst);

    BundleEmbedding emb_copy = chg.emb;
    rep.merge(verify_bundle_embedding(src.bundle, dst.bundle, emb_copy, tol), "emb");

    Smooth phi = chg.emb.base(src.dim());
    Smooth s_src = src.s_eval(), s_dst = dst.s_eval();
    double worst_compat = 0.0;
    std::string compat_witness;
    for (const auto& y : chg.emb.domain.sample_grid(8)) {
        Mat g = chg.emb.fiber_at(y, src.dim());
        double r = (g * s_src(y) - s_dst(phi(y))).norm();
        if (r > worst_compat) {
            worst_compat = r;
            compat_witness = point_str(y);
        }
    }
    rep.add_residual("section_compatibility", worst_compat, tol.tau_eq, compat_witness);

    std::string nwitness;
    double sv = normal_derivative_sigma_min(src, dst, chg, tol, &nwitness);
    rep.add("normal_derivative_isomorphism", sv > tol.tau_rank, sv, tol.tau_rank, nwitness,
            "smallest singular value of the induced quotient map at sampled zeros");

    if (chg.kind == CoordinateChange::Kind::Strong) {
        // psi_src(s^{-1}(0) cap U_pq) = Im psi_src cap Im psi_dst, two-sided.
        Smooth g_src = src.footprint(), g_dst = dst.footprint();
        auto z_src_all = src.zero_samples(tol);
        auto z_dst = dst.zero_samples(tol);
        double eps = 5e-2;  // footprint matching resolution
        double worst = 0.0;
        std::string fw;
        // side 1: zeros in U_pq must land in Im psi_dst
        for (const auto& y : z_src_all) {
            if (!chg.emb.domain.contains(y, 1e-9)) continue;
            Vec gy = g_src(y);
            double best = 1e300;
            for (const auto& z : z_dst) best = std::min(best, (g_dst(z) - gy).norm());
            if (best > worst) {
                worst = best;
                fw = point_str(y);
            }
        }
        // side 2: common footprint points must come from U_pq
        for (const auto& z : z_dst) {
            Vec gz = g_dst(z);
            double best_any = 1e300, best_dom = 1e300;
            for (const auto& y : z_src_all) {
                double d = (g_src(y) - gz).norm();
                best_any = std::min(best_any, d);
                if (chg.emb.domain.contains(y, 1e-9)) best_dom = std::min(best_dom, d);
            }
            if (best_any < eps && best_dom > worst) {
                worst = best_dom;
                fw = "global " + point_str(gz);
            }
        }
        rep.add_residual("strong_footprint_equality", worst, eps, fw);
    }
    return rep;
}

// Cocycle condition Phi_pr = Phi_pq . Phi_qr on sampled common domains.
inline Report verify_structure_cocycle(const KuranishiStructure& ks, const Tolerances& tol = {}) {
    Report rep;
    rep.subject = "cocycle";
    int triples = 0;
    for (const auto& qr : ks.changes)
        for (const auto& pq : ks.changes) {
            if (qr.dst != pq.src) continue;
            // find direct r -> p
            for (const auto& pr : ks.changes) {
                if (pr.src != qr.src || pr.dst != pq.dst) continue;
                ++triples;
                const auto& r_chart = ks.chart(qr.src);
                Smooth phi_qr = qr.emb.base(r_chart.dim());
                Smooth phi_pq = pq.emb.base(ks.chart(pq.src).dim());
                Smooth phi_pr = pr.emb.base(r_chart.dim());
                double worst_base = 0.0, worst_fiber = 0.0;
                std::string witness;
                for (const auto& y : qr.emb.domain.sample_grid(8)) {
                    if (!pr.emb.domain.contains(y, 1e-9)) continue;
                    Vec mid = phi_qr(y);
                    if (!pq.emb.domain.contains(mid, 1e-9)) continue;
                    double rb = (phi_pq(mid) - phi_pr(y)).norm();
                    if (rb > worst_base) {
                        worst_base = rb;
                        witness = point_str(y);
                    }
                    Mat f_comp = pq.emb.fiber_at(mid, ks.chart(pq.src).dim()) *
                                 qr.emb.fiber_at(y, r_chart.dim());
                    Mat f_dir = pr.emb.fiber_at(y, r_chart.dim());
                    worst_fiber = std::max(worst_fiber, (f_comp - f_dir).norm());
                }
                rep.add_residual(
                    "cocycle_base:" + qr.src + ">" + qr.dst + ">" + pq.dst, worst_base,
                    1e-6, witness);
                rep.add_residual("cocycle_fiber:" + qr.src + ">" + qr.dst + ">" + pq.dst,
                                 worst_fiber, 1e-6);
            }
        }
    if (triples == 0)
        rep.add("cocycle_vacuous", true, 0.0, 0.0, "", "no composable triple present");
    (void)tol;
    return rep;
}

// ---------------------------------------------------------------------------
// Good coordinate system

struct SupportSystem {
    std::map<std::string, Domain> by_piece;  // piece label -> compact K

    const Domain& of(const std::string& label) const {
        auto it = by_piece.find(label);
        if (it == by_piece.end())
            throw VfcError(ErrCode::UNRESOLVED_LABEL, "support for " + label);
        return it->second;
    }
    bool has(const std::string& label) const { return by_piece.count(label) > 0; }
};

// Poset node: one GCS chart, possibly glued from several pieces (sum chart).
struct GcsNode {
    std::string label;
    std::vector<KuranishiChart> pieces;
    std::vector<CoordinateChange> internal_glue;  // open changes between pieces
    int dim = 0;
};

struct GoodCoordinateSystem {
    std::vector<GcsNode> nodes;
    std::vector<std::pair<int, int>> order;   // (i, j): node_i <= node_j, i != j
    std::vector<CoordinateChange> changes;    // strong, between pieces of different nodes
    SupportSystem support;                    // K
    std::optional<SupportSystem> support_inner;  // K' < K

    int vdim() const { return nodes.empty() ? 0 : nodes[0].pieces[0].vdim(); }

    bool leq(int i, int j) const {
        if (i == j) return true;
        for (auto& [a, b] : order)
            if (a == i && b == j) return true;
        return false;
    }
    bool comparable(int i, int j) const { return leq(i, j) || leq(j, i); }

    const GcsNode& node(const std::string& label) const {
        for (const auto& n : nodes)
            if (n.label == label) return n;
        throw VfcError(ErrCode::UNRESOLVED_LABEL, "gcs node " + label);
    }
    int node_of_piece(const std::string& piece_label) const {
        for (int i = 0; i < (int)nodes.size(); ++i)
            for (const auto& p : nodes[i].pieces)
                if (p.label == piece_label) return i;
        throw VfcError(ErrCode::UNRESOLVED_LABEL, "piece " + piece_label);
    }
    const KuranishiChart& piece(const std::string& label) const {
        for (const auto& n : nodes)
            for (const auto& p : n.pieces)
                if (p.label == label) return p;
        throw VfcError(ErrCode::UNRESOLVED_LABEL, "piece " + label);
    }
    std::vector<const KuranishiChart*> all_pieces() const {
        std::vector<const KuranishiChart*> out;
        for (const auto& n : nodes)
            for (const auto& p : n.pieces) out.push_back(&p);
        return out;
    }
    // All changes incident to a piece, internal glue included.
    std::vector<const CoordinateChange*> changes_from(const std::string& src) const {
        std::vector<const CoordinateChange*> out;
        for (const auto& c : changes)
            if (c.src == src) out.push_back(&c);
        for (const auto& n : nodes)
            for (const auto& c : n.internal_glue)
                if (c.src == src) out.push_back(&c);
        return out;
    }

    KuranishiStructure as_structure() const {
        KuranishiStructure ks;
        for (const auto& n : nodes)
            for (const auto& p : n.pieces) ks.charts.push_back(p);
        ks.changes = changes;
        for (const auto& n : nodes)
            for (const auto& c : n.internal_glue) ks.changes.push_back(c);
        return ks;
    }
};

// Global zero cloud of the whole GCS: the sampled model of X.
inline std::vector<Vec> global_zero_cloud(const GoodCoordinateSystem& gcs,
                                          const Tolerances& tol) {
    std::vector<Vec> cloud;
    for (const auto* kc : gcs.all_pieces()) {
        Smooth g = kc->footprint();
        for (const auto& y : kc->zero_samples(tol)) cloud.push_back(g(y));
    }
    return cloud;
}

inline double dist_to_cloud(const Vec& p, const std::vector<Vec>& cloud) {
    double best = 1e300;
    for (const auto& q : cloud) best = std::min(best, (q - p).norm());
    return best;
}

// GCS axioms: comparability on footprint overlaps (6), sampled
// equivalence-relation consistency (7), sampled Hausdorff separation (8),
// and support covering. A PASS on (7)/(8) means "no violation found at
// resolution delta_hd".
inline Report verify_gcs_axioms(const GoodCoordinateSystem& gcs, const Tolerances& tol = {}) {
    Report rep;
    rep.subject = "gcs_axioms";

    // partial order sanity
    bool anti = true;
    for (auto& [a, b] : gcs.order)
        if (a != b && gcs.leq(b, a) && gcs.leq(a, b)) anti = false;
    rep.add("poset_antisymmetry", anti, anti ? 0.0 : 1.0, 0.0);

    // (6) footprints intersect => comparable
    const double near = 5e-2;
    bool comp_ok = true;
    std::string comp_witness;
    std::vector<std::vector<Vec>> node_clouds(gcs.nodes.size());
    for (size_t i = 0; i < gcs.nodes.size(); ++i)
        for (const auto& p : gcs.nodes[i].pieces) {
            Smooth g = p.footprint();
            for (const auto& y : p.zero_samples(tol)) node_clouds[i].push_back(g(y));
        }
    for (size_t i = 0; i < gcs.nodes.size(); ++i)
        for (size_t j = i + 1; j < gcs.nodes.size(); ++j) {
            bool meet = false;
            for (const auto& a : node_clouds[i]) {
                if (dist_to_cloud(a, node_clouds[j]) < near) {
                    meet = true;
                    break;
                }
            }
            if (meet && !gcs.comparable((int)i, (int)j)) {
                comp_ok = false;
                comp_witness = gcs.nodes[i].label + " ~ " + gcs.nodes[j].label;
            }
        }
    rep.add("totality_on_overlaps", comp_ok, comp_ok ? 0.0 : 1.0, 0.0, comp_witness);

    // (7)+(8): sampled Hausdorff/equivalence. Pairs of chart sample points
    // closer than delta_hd in global coordinates must be identified by a
    // coordinate change (up to the group orbit); identified pairs must agree.
    bool hd_ok = true;
    std::string hd_witness;
    auto pieces = gcs.all_pieces();
    std::vector<std::vector<Vec>> piece_samples;
    std::vector<Smooth> piece_global;
    for (const auto* kc : pieces) {
        piece_samples.push_back(kc->domain().sample_grid(10));
        piece_global.push_back(kc->footprint());
    }
    for (size_t a = 0; a < pieces.size() && hd_ok; ++a) {
        for (size_t b = 0; b < pieces.size() && hd_ok; ++b) {
            if (a == b) continue;
            // is there a change a->b or b->a?
            const CoordinateChange* ab = nullptr;
            for (const auto* c : gcs.changes_from(pieces[a]->label))
                if (c->dst == pieces[b]->label) ab = c;
            for (const auto& xa : piece_samples[a]) {
                Vec ga = piece_global[a](xa);
                for (const auto& xb : piece_samples[b]) {
                    double d = (piece_global[b](xb) - ga).norm();
                    if (d >= tol.delta_hd) continue;
                    // must be identified via some change (either direction)
                    bool identified = false;
                    if (ab && ab->emb.domain.contains(xa, 1e-9)) {
                        Vec img = ab->emb.base(pieces[a]->dim())(xa);
                        for (const auto& g : pieces[b]->group().elements)
                            if ((g * img - xb).norm() < 10 * tol.delta_hd) identified = true;
                    }
                    const CoordinateChange* ba = nullptr;
                    for (const auto* c : gcs.changes_from(pieces[b]->label))
                        if (c->dst == pieces[a]->label) ba = c;
                    if (!identified && ba && ba->emb.domain.contains(xb, 1e-9)) {
                        Vec img = ba->emb.base(pieces[b]->dim())(xb);
                        for (const auto& g : pieces[a]->group().elements)
                            if ((g * img - xa).norm() < 10 * tol.delta_hd) identified = true;
                    }
                    if (!identified) {
                        hd_ok = false;
                        hd_witness = pieces[a]->label + point_str(xa) + " vs " +
                                     pieces[b]->label + point_str(xb);
                        break;
                    }
                }
                if (!hd_ok) break;
            }
        }
    }
    rep.add("hausdorff_separation", hd_ok, hd_ok ? 0.0 : 1.0, 0.0, hd_witness,
            hd_ok ? "no violation found at resolution delta_hd" : "");

    // support covering: interiors of K_p footprints cover X
    std::vector<Vec> covered;
    for (const auto* kc : pieces) {
        if (!gcs.support.has(kc->label)) continue;
        const Domain& K = gcs.support.of(kc->label);
        Smooth g = kc->footprint();
        for (const auto& y : kc->zero_samples(tol))
            if (K.contains_margin(y, 1e-9)) covered.push_back(g(y));
    }
    double worst_gap = 0.0;
    std::string gap_witness;
    for (const auto* kc : pieces) {
        Smooth g = kc->footprint();
        for (const auto& y : kc->zero_samples(tol)) {
            double d = dist_to_cloud(g(y), covered);
            if (d > worst_gap) {
                worst_gap = d;
                gap_witness = kc->label + point_str(y);
            }
        }
    }
    rep.add_residual("support_covering", worst_gap, near, gap_witness);
    return rep;
}

// ---------------------------------------------------------------------------
// Embedding records (KK / GG / KG / GK)

struct EmbeddingRecord {
    enum class Kind { KK, GG, KG, GK };
    Kind kind = Kind::KK;
    // chartwise embedding data: src piece label -> change into dst piece
    std::vector<CoordinateChange> chartwise;
    // GG: order-preserving index map between node labels
    std::map<std::string, std::string> index_map;
};

inline const char* kind_name(EmbeddingRecord::Kind k) {
    switch (k) {
        case EmbeddingRecord::Kind::KK: return "KK";
        case EmbeddingRecord::Kind::GG: return "GG";
        case EmbeddingRecord::Kind::KG: return "KG";
        case EmbeddingRecord::Kind::GK: return "GK";
    }
    return "?";
}

// Commuting-square residuals for an embedding record: sections, footprints
// and (GG) order preservation plus the domain condition.
inline Report verify_embedding_record(const KuranishiStructure& src_ks,
                                      const KuranishiStructure& dst_ks,
                                      const EmbeddingRecord& rec, const Tolerances& tol = {}) {
    Report rep;
    rep.subject = std::string("embedding:") + kind_name(rec.kind);
    for (const auto& chg : rec.chartwise) {
        const auto& src = src_ks.chart(chg.src);
        const auto& dst = dst_ks.chart(chg.dst);
        Smooth phi = chg.emb.base(src.dim());
        Smooth s_src = src.s_eval(), s_dst = dst.s_eval();
        Smooth g_src = src.footprint(), g_dst = dst.footprint();
        double worst_sec = 0.0, worst_foot = 0.0;
        std::string witness;
        for (const auto& y : chg.emb.domain.sample_grid(8)) {
            Mat g = chg.emb.fiber_at(y, src.dim());
            double r = (g * s_src(y) - s_dst(phi(y))).norm();
            if (r > worst_sec) {
                worst_sec = r;
                witness = point_str(y);
            }
        }
        for (const auto& y : src.zero_samples(tol)) {
            if (!chg.emb.domain.contains(y, 1e-9)) continue;
            worst_foot = std::max(worst_foot, (g_dst(phi(y)) - g_src(y)).norm());
        }
        rep.add_residual("square_section:" + chg.src + ">" + chg.dst, worst_sec, tol.tau_eq,
                         witness);
        rep.add_residual("square_footprint:" + chg.src + ">" + chg.dst, worst_foot, tol.tau_eq);
    }
    return rep;
}

// GG-specific checks need both GCS: order preservation of the index map and
// the domain condition U_pq = phi_q^{-1}(U'_{i(p)i(q)}).
inline Report verify_gg_record(const GoodCoordinateSystem& src, const GoodCoordinateSystem& dst,
                               const EmbeddingRecord& rec, const Tolerances& tol = {}) {
    Report rep = verify_embedding_record(src.as_structure(), dst.as_structure(), rec, tol);
    rep.subject = "embedding:GG";
    bool order_ok = true;
    std::string witness;
    for (auto& [pa, pb] : src.order) {
        auto ia = rec.index_map.find(src.nodes[pa].label);
        auto ib = rec.index_map.find(src.nodes[pb].label);
        if (ia == rec.index_map.end() || ib == rec.index_map.end()) continue;
        int da = -1, db = -1;
        for (int i = 0; i < (int)dst.nodes.size(); ++i) {
            if (dst.nodes[i].label == ia->second) da = i;
            if (dst.nodes[i].label == ib->second) db = i;
        }
        if (da < 0 || db < 0 || !dst.leq(da, db)) {
            order_ok = false;
            witness = src.nodes[pa].label + "<=" + src.nodes[pb].label;
        }
    }
    rep.add("order_preserving", order_ok, order_ok ? 0.0 : 1.0, 0.0, witness);

    // domain condition on corresponding changes
    for (const auto& c_src : src.changes) {
        auto iq = rec.index_map.find(src.nodes[src.node_of_piece(c_src.src)].label);
        auto ip = rec.index_map.find(src.nodes[src.node_of_piece(c_src.dst)].label);
        if (iq == rec.index_map.end() || ip == rec.index_map.end()) continue;
        // find the image change in dst between the mapped nodes
        for (const auto& c_dst : dst.changes) {
            if (dst.nodes[dst.node_of_piece(c_dst.src)].label != iq->second ||
                dst.nodes[dst.node_of_piece(c_dst.dst)].label != ip->second)
                continue;
            // find the chartwise embedding for c_src.src
            for (const auto& chw : rec.chartwise) {
                if (chw.src != c_src.src) continue;
                Smooth phi_q = chw.emb.base(src.piece(c_src.src).dim());
                double worst = 0.0;
                std::string w2;
                for (const auto& y : c_src.emb.domain.sample_grid(8)) {
                    // U_pq point must map into U'_{i(p)i(q)}
                    if (!c_dst.emb.domain.contains(phi_q(y), 1e-7)) {
                        worst = 1.0;
                        w2 = point_str(y);
                    }
                }
                rep.add("domain_condition:" + c_src.src + ">" + c_src.dst, worst == 0.0, worst,
                        0.0, w2);
            }
        }
    }
    return rep;
}

}  // namespace vfckit
