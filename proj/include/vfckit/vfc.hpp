#pragma once

#include <algorithm>

#include "vfckit/boundary.hpp"
#include "vfckit/perturb_build.hpp"
#include "vfckit/rational.hpp"

namespace vfckit {

// One counted zero: orbit/overlap-deduplicated, with its exact rational
// multiplicity m_p = (sum eps_i) / (l * #Gamma_p).
struct WeightedZero {
    std::string piece;
    Vec chart_point;
    Vec global_point;
    Rational multiplicity;
    int stabilizer_order = 1;
    int ell = 1;
    std::vector<int> branch_signs;  // eps_{p,i} per branch
    bool dedup_margin_flag = false; // merged pair sat within 10x of r_dedup

    Json to_json() const {
        Json j;
        j["piece"] = piece;
        j["chart_point"] = point_str(chart_point);
        j["global_point"] = point_str(global_point);
        j["multiplicity"] = multiplicity.str();
        j["stabilizer_order"] = stabilizer_order;
        j["ell"] = ell;
        j["branch_signs"] = branch_signs;
        if (dedup_margin_flag) j["dedup_margin_flag"] = true;
        return j;
    }
};

struct WeightedZeroSet {
    std::vector<WeightedZero> points;
    int nonconvergent_seeds = 0;

    Rational total() const {
        Rational t;
        for (const auto& p : points) t += p.multiplicity;
        return t;
    }

    Json to_json() const {
        Json j;
        j["total"] = total().str();
        Json arr = Json::array();
        for (const auto& p : points) arr.push_back(p.to_json());
        j["points"] = arr;
        if (nonconvergent_seeds) j["nonconvergent_seeds"] = nonconvergent_seeds;
        return j;
    }
};

struct RationalChain {
    Rational total;
    std::string provenance;
    WeightedZeroSet zeros;
};

// Multiplicity at a Newton-refined zero point of one piece:
// eps_i = 0 for non-vanishing branches, else sign det of the oriented
// Jacobian; m_p = (sum eps_i)/(l * #Gamma_p). SIGN_UNDETERMINED when a
// vanishing branch has |det| below tau_det.
inline WeightedZero multiplicity_at(const KuranishiChart& kc, const Multisection& ms,
                                    const Vec& p, const Tolerances& tol = {}) {
    WeightedZero wz;
    wz.piece = kc.label;
    wz.chart_point = p;
    wz.global_point = kc.footprint()(p);
    wz.ell = ms.ell();
    // stabilizer via exact group matrices applied to the refined point
    int stab = 0;
    for (const auto& g : kc.group().elements)
        if ((g * p - p).norm() <= tol.r_dedup) ++stab;
    wz.stabilizer_order = std::max(stab, 1);
    int sum_eps = 0;
    for (const auto& b : ms.branches) {
        double val = b(p).norm();
        if (val > tol.tau_zero) {
            wz.branch_signs.push_back(0);
            continue;
        }
        double det = b.jac(p).determinant();
        if (std::abs(det) < tol.tau_det)
            throw VfcError(ErrCode::SIGN_UNDETERMINED,
                           "branch Jacobian det " + std::to_string(det) + " at " + point_str(p));
        int sign = (det > 0 ? 1 : -1) * kc.orientation_sign;
        wz.branch_signs.push_back(sign);
        sum_eps += sign;
    }
    wz.multiplicity = Rational(sum_eps, (std::int64_t)wz.ell * wz.stabilizer_order);
    return wz;
}

// Grid-seeded Newton zeros of every branch on every piece, clipped to the
// delta_U-neighborhood of X and (optionally) the inner support system, then
// orbit- and overlap-deduplicated. Deterministic: points sorted by
// (piece label, lexicographic coordinates) before any accumulation.
inline WeightedZeroSet solve_zeros_dim0(const GoodCoordinateSystem& gcs,
                                        const MultivaluedPerturbation& mvp, int n,
                                        const SupportSystem* clip_support,
                                        const Tolerances& tol = {},
                                        double delta_U_override = -1.0) {
    WeightedZeroSet out;
    if (gcs.vdim() < 0) {
        // transversality forces emptiness; probe anyway so the claim is checked
        for (const auto* kc : gcs.all_pieces())
            for (const auto& b : mvp.at(n, kc->label).branches)
                for (const auto& z :
                     find_zeros(b, kc->domain(), tol.grid_density, 1e-9, tol.newton_max_iter,
                                tol.r_dedup))
                    (void)z;  // none expected; found ones would be non-transversal
        return out;
    }
    if (gcs.vdim() != 0) throw VfcError(ErrCode::NOT_VDIM0, "vdim " + std::to_string(gcs.vdim()));
    double delta_U = delta_U_override > 0 ? delta_U_override : tol.delta_U;
    auto xcloud = global_zero_cloud(gcs, tol);

    struct Raw {
        std::string piece;
        Vec p;
    };
    std::vector<Raw> raw;
    NewtonStats stats;
    for (const auto* kc : gcs.all_pieces()) {
        const auto& ms = mvp.at(n, kc->label);
        for (const auto& b : ms.branches) {
            NewtonStats st;
            auto zs = find_zeros(b, kc->domain(), tol.grid_density, tol.newton_tol,
                                 tol.newton_max_iter, tol.r_dedup, &st);
            stats.nonconvergent += st.nonconverged;
            for (const auto& z : zs) {
                if (clip_support && clip_support->has(kc->label) &&
                    !clip_support->of(kc->label).contains(z, 1e-9))
                    continue;
                Vec g = kc->footprint()(z);
                if (dist_to_cloud(g, xcloud) > delta_U) continue;
                raw.push_back({kc->label, z});
            }
        }
    }
    out.nonconvergent_seeds = stats.nonconvergent;

    std::sort(raw.begin(), raw.end(), [](const Raw& a, const Raw& b) {
        if (a.piece != b.piece) return a.piece < b.piece;
        for (int i = 0; i < a.p.size(); ++i)
            if (std::abs(a.p[i] - b.p[i]) > 1e-15) return a.p[i] < b.p[i];
        return false;
    });

    // orbit dedup within pieces: exact group matrices + re-refinement, then
    // global-coordinate dedup across pieces
    std::vector<WeightedZero> kept;
    for (const auto& r : raw) {
        const KuranishiChart& kc = gcs.piece(r.piece);
        const Multisection& ms = mvp.at(n, r.piece);
        bool dup = false, margin_flag = false;
        Vec g = kc.footprint()(r.p);
        for (const auto& k : kept) {
            double d = (k.global_point - g).norm();
            if (d <= tol.r_dedup) {
                dup = true;
                break;
            }
            if (d <= 10 * tol.r_dedup) margin_flag = true;
        }
        if (dup) continue;
        // orbit dedup: some group translate already kept?
        for (const auto& gm : kc.group().elements) {
            Vec q = gm * r.p;
            if ((q - r.p).norm() <= tol.r_dedup) continue;
            if (refine_zero(ms.branches[0], q, tol.newton_tol, 8)) {}
            Vec gq = kc.footprint()(q);
            for (const auto& k : kept)
                if ((k.global_point - gq).norm() <= tol.r_dedup) dup = true;
        }
        if (dup) continue;
        WeightedZero wz = multiplicity_at(kc, ms, r.p, tol);
        wz.dedup_margin_flag = margin_flag;
        kept.push_back(std::move(wz));
    }
    out.points = std::move(kept);
    return out;
}

// Exact rational virtual chain in dimension 0. When the GCS carries an inner
// support system the count is computed against both clips and asserted equal.
inline RationalChain virtual_chain_dim0(const GoodCoordinateSystem& gcs,
                                        const MultivaluedPerturbation& mvp, int n,
                                        const Tolerances& tol = {}) {
    RationalChain chain;
    const SupportSystem* inner =
        gcs.support_inner ? &*gcs.support_inner : nullptr;
    chain.zeros = solve_zeros_dim0(gcs, mvp, n, inner, tol);
    chain.total = chain.zeros.total();
    chain.provenance = mvp.provenance + ";n=" + std::to_string(n);
    if (inner) {
        WeightedZeroSet outer = solve_zeros_dim0(gcs, mvp, n, &gcs.support, tol);
        if (outer.total() != chain.total)
            throw VfcError(ErrCode::NOT_TRANSVERSAL,
                           "support-system dependence: " + outer.total().str() + " vs " +
                               chain.total.str());
    }
    return chain;
}

// Restriction of a stage-n multisection to a boundary chart: branches
// composed with the face insertion.
inline Multisection restrict_to_boundary(const Multisection& ms, const BoundaryChart& bc) {
    int n = bc.chart.dim() + 1;
    Mat A = Mat::Zero(n, bc.chart.dim());
    Vec b = Vec::Zero(n);
    for (int i = 0, j = 0; i < n; ++i) {
        if (i == bc.axis) {
            b[i] = bc.side_hi ? bc.face_value_hi : bc.face_value_lo;
        } else {
            A(i, j++) = 1.0;
        }
    }
    Smooth insert = smooth_affine(A, b);
    Multisection out;
    for (const auto& br : ms.branches) out.branches.push_back(compose(br, insert));
    return out;
}

inline MultivaluedPerturbation restrict_mvp_to_boundary(const MultivaluedPerturbation& mvp,
                                                        const GoodCoordinateSystem& gcs,
                                                        const BoundaryData& bd) {
    MultivaluedPerturbation out;
    out.n_list = mvp.n_list;
    out.provenance = mvp.provenance + ";boundary";
    (void)gcs;
    for (int n : mvp.n_list)
        for (const auto& bc : bd.charts)
            out.stages[n][bc.chart.label] =
                restrict_to_boundary(mvp.stages.at(n).at(bc.parent_piece), bc);
    return out;
}

struct BoundaryVanishingResult {
    Rational boundary_chain;
    WeightedZeroSet zeros;
    Report report;
};

// dim-1 boundary vanishing: the 0-dimensional chain of the normalized
// boundary with the restricted perturbation is exactly zero.
inline BoundaryVanishingResult boundary_vanishing_check(const GoodCoordinateSystem& gcs,
                                                        const MultivaluedPerturbation& mvp, int n,
                                                        const Tolerances& tol = {}) {
    BoundaryVanishingResult res;
    res.report.subject = "boundary_vanishing";
    if (gcs.vdim() != 1)
        throw VfcError(ErrCode::NOT_VDIM0, "boundary check needs vdim 1");
    BoundaryData bd = normalized_boundary(gcs, tol);
    MultivaluedPerturbation bmvp = restrict_mvp_to_boundary(mvp, gcs, bd);
    for (const auto& bc : bd.charts) {
        auto tr = check_transversality(bmvp.at(n, bc.chart.label), bc.chart.domain(),
                                       std::nullopt, tol);
        if (!tr.transversal_to_zero)
            throw VfcError(ErrCode::BOUNDARY_NOT_TRANSVERSAL,
                           bc.chart.label + " at " + tr.witness);
    }
    res.zeros = solve_zeros_dim0(bd.gcs, bmvp, n, nullptr, tol);
    res.boundary_chain = res.zeros.total();
    res.report.add("boundary_chain_zero", res.boundary_chain == Rational(0),
                   std::abs(res.boundary_chain.to_double()), 0.0, "",
                   "chain = " + res.boundary_chain.str());
    return res;
}

// ---------------------------------------------------------------------------
// Morse level sweep

// Level-restricted GCS: each piece gains one obstruction row f - s, dropping
// vdim by one; branches gain the same row. Numerically this is the fiber
// product with the level.
inline GoodCoordinateSystem level_restrict(const GoodCoordinateSystem& gcs,
                                           const std::map<std::string, Expr>& f_by_piece,
                                           double level) {
    GoodCoordinateSystem out = gcs;
    for (auto& node : out.nodes) {
        for (auto& piece : node.pieces) {
            const Expr& f = f_by_piece.at(piece.label);
            piece.label += "@s";
            piece.bundle.fiber_dim += 1;
            for (auto& m : piece.bundle.representation) {
                Mat ext = Mat::Identity(piece.bundle.fiber_dim, piece.bundle.fiber_dim);
                ext.bottomRightCorner(m.rows(), m.cols()) = m;
                m = ext;
            }
            // level row first, matching the fiber orientation frame
            piece.s.components.insert(piece.s.components.begin(), f - Expr(level));
        }
        node.label += "@s";
    }
    SupportSystem K;
    for (auto& [label, dom] : out.support.by_piece) K.by_piece[label + "@s"] = dom;
    out.support = K;
    if (out.support_inner) {
        SupportSystem Ki;
        for (auto& [label, dom] : out.support_inner->by_piece) Ki.by_piece[label + "@s"] = dom;
        out.support_inner = Ki;
    }
    // changes/glue keep labels of their endpoints
    for (auto& c : out.changes) {
        c.src += "@s";
        c.dst += "@s";
    }
    for (auto& node : out.nodes)
        for (auto& c : node.internal_glue) {
            c.src += "@s";
            c.dst += "@s";
        }
    return out;
}

inline MultivaluedPerturbation level_restrict_mvp(const MultivaluedPerturbation& mvp,
                                                  const GoodCoordinateSystem& gcs,
                                                  const std::map<std::string, Expr>& f_by_piece,
                                                  double level) {
    MultivaluedPerturbation out;
    out.n_list = mvp.n_list;
    out.provenance = mvp.provenance + ";level=" + std::to_string(level);
    for (int n : mvp.n_list)
        for (const auto* kc : gcs.all_pieces()) {
            Smooth frow = smooth_expr({f_by_piece.at(kc->label) - Expr(level)},
                                      coord_names(kc->dim()));
            Multisection ms;
            for (const auto& b : mvp.stages.at(n).at(kc->label).branches)
                ms.branches.push_back(smooth_concat({frow, b}));
            out.stages[n][kc->label + "@s"] = std::move(ms);
        }
    return out;
}

struct LevelSweepResult {
    std::vector<double> levels;
    std::vector<Rational> chains;
    std::vector<double> skipped_critical;
    Report report;
};

// Sweep of the boundary-distance function: for each regular level the 0-dim
// chain of the level-restricted GCS; chains must be constant across regular
// levels and empty above the max level. Critical levels within delta_S are
// skipped (LEVEL_CRITICAL).
inline LevelSweepResult level_sweep(const GoodCoordinateSystem& gcs,
                                    const MultivaluedPerturbation& mvp, int n,
                                    const std::map<std::string, Expr>& f_by_piece,
                                    const std::vector<double>& levels,
                                    const Tolerances& tol = {}) {
    LevelSweepResult res;
    res.report.subject = "level_sweep";
    if (gcs.vdim() != 1) throw VfcError(ErrCode::NOT_VDIM0, "sweep needs vdim 1");

    // f >= 0, f^{-1}(0) = boundary, normally positive at the boundary
    double worst_bd = 0.0, worst_pos = 1e300;
    for (const auto* kc : gcs.all_pieces()) {
        Smooth f = smooth_expr({f_by_piece.at(kc->label)}, coord_names(kc->dim()));
        const Domain& dom = kc->domain();
        for (int a = 0; a < kc->dim(); ++a)
            for (int side = 0; side < 2; ++side) {
                bool true_face = side ? dom.boundary_hi[a] : dom.boundary_lo[a];
                if (!true_face) continue;
                for (const auto& p : dom.sample_face(a, side, 6)) {
                    worst_bd = std::max(worst_bd, std::abs(f(p)[0]));
                    Vec inward = Vec::Zero(kc->dim());
                    inward[a] = side ? -1.0 : 1.0;
                    worst_pos = std::min(worst_pos, (f.jac(p) * inward)(0, 0));
                }
            }
    }
    res.report.add_residual("f_vanishes_on_boundary", worst_bd, 1e-9);
    res.report.add("normally_positive", worst_pos == 1e300 || worst_pos > 0,
                   worst_pos == 1e300 ? 0.0 : -std::min(0.0, worst_pos), 0.0, "",
                   "min inward derivative " +
                       (worst_pos == 1e300 ? std::string("n/a") : std::to_string(worst_pos)));

    // critical values of f along the perturbed zero curves (and of f itself)
    std::vector<double> critical;
    const double delta_S = 1e-3;
    for (const auto* kc : gcs.all_pieces()) {
        Smooth f = smooth_expr({f_by_piece.at(kc->label)}, coord_names(kc->dim()));
        for (const auto& b : mvp.stages.at(n).at(kc->label).branches) {
            for (const auto& y : zero_cloud(b, kc->domain(), 24, 1e-9, tol.newton_max_iter)) {
                Mat K = kernel_basis(b.jac(y), tol.tau_rank);
                if (K.cols() == 0) continue;
                double along = (f.jac(y) * K).norm();
                if (along < 5e-2) critical.push_back(f(y)[0]);
            }
        }
    }
    std::sort(critical.begin(), critical.end());

    std::optional<Rational> constant;
    bool all_equal = true;
    for (double s : levels) {
        bool near_crit = false;
        for (double c : critical)
            if (std::abs(s - c) < delta_S) near_crit = true;
        if (near_crit) {
            res.skipped_critical.push_back(s);
            continue;
        }
        GoodCoordinateSystem lg = level_restrict(gcs, f_by_piece, s);
        MultivaluedPerturbation lm = level_restrict_mvp(mvp, gcs, f_by_piece, s);
        RationalChain chain;
        chain.zeros = solve_zeros_dim0(lg, lm, n, lg.support_inner ? &*lg.support_inner : nullptr,
                                       tol);
        chain.total = chain.zeros.total();
        res.levels.push_back(s);
        res.chains.push_back(chain.total);
        if (!constant) constant = chain.total;
        else if (*constant != chain.total) all_equal = false;
    }
    res.report.add("constant_across_regular_levels", all_equal, all_equal ? 0.0 : 1.0, 0.0, "",
                   constant ? "chain = " + constant->str() : "no regular level");
    return res;
}

}  // namespace vfckit
