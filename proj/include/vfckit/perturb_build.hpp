#pragma once

#include <map>
#include <optional>

#include "vfckit/cfp.hpp"
#include "vfckit/rng.hpp"

namespace vfckit {

// Multivalued perturbation of a GCS: per stage n, an l-branch multisection on
// every chart piece, compatible with coordinate changes through bundle
// extension data (never by chi-interpolating branches).
struct MultivaluedPerturbation {
    std::vector<int> n_list;
    std::map<int, std::map<std::string, Multisection>> stages;
    std::string provenance;

    const Multisection& at(int n, const std::string& piece) const {
        auto sit = stages.find(n);
        if (sit == stages.end())
            throw VfcError(ErrCode::UNRESOLVED_LABEL, "stage n=" + std::to_string(n));
        auto pit = sit->second.find(piece);
        if (pit == sit->second.end())
            throw VfcError(ErrCode::UNRESOLVED_LABEL, "piece " + piece);
        return pit->second;
    }

    std::string describe() const {
        std::string s = "mvp[" + provenance;
        for (const auto& [n, per_piece] : stages) {
            s += ";n=" + std::to_string(n);
            for (const auto& [label, ms] : per_piece) s += "|" + label + ":" + ms.describe();
        }
        return s + "]";
    }
};

// How to perturb each piece: pure transfer from an already-built neighbor,
// transfer + fresh branches glued by invariant bumps, or fresh-only.
struct PerturbPlan {
    struct PiecePlan {
        std::optional<std::string> transfer_from;
        bool transfer_via_datum = false;   // else backward-change restriction
        bool transfer_covers_all = false;  // pure transfer, no fresh factor
        std::optional<Domain> fresh_region;     // bump support for the fresh term
        std::optional<Domain> transfer_region;  // bump support for the transfer term
        std::optional<Domain> xi_box;           // free-orbit box W0 override
    };
    std::map<std::string, PiecePlan> pieces;

    const PiecePlan& of(const std::string& label) const {
        static const PiecePlan fresh_only{};
        auto it = pieces.find(label);
        return it == pieces.end() ? fresh_only : it->second;
    }
};

namespace detail {

// Default free-orbit box for the fiber representation: a box in the positive
// quadrant region whose group translates are disjoint. Verified by sampling;
// shrunk toward its center until disjointness holds.
inline Domain free_orbit_box(int rank, const std::vector<Mat>& action,
                             const std::optional<Domain>& override_box) {
    Domain w0;
    if (override_box) {
        w0 = *override_box;
    } else {
        w0.lo = Vec(rank);
        w0.hi = Vec(rank);
        for (int i = 0; i < rank; ++i) {
            w0.lo[i] = i == 0 ? 0.25 : 0.1;
            w0.hi[i] = i == 0 ? 0.75 : 0.35;
        }
        w0.boundary_lo.assign(rank, false);
        w0.boundary_hi.assign(rank, false);
    }
    for (int attempt = 0; attempt < 8; ++attempt) {
        bool disjoint = true;
        for (size_t gi = 0; gi < action.size() && disjoint; ++gi) {
            if ((action[gi] - Mat::Identity(rank, rank)).norm() <= 1e-12) continue;
            for (const auto& c : w0.sample_grid(3))
                if (w0.contains(action[gi] * c, -1e-9)) {
                    disjoint = false;
                    break;
                }
        }
        if (disjoint) return w0;
        Vec mid = w0.center();
        w0.lo = mid + 0.5 * (w0.lo - mid);
        w0.hi = mid + 0.5 * (w0.hi - mid);
    }
    throw VfcError(ErrCode::TRANSVERSALITY_RETRY_EXHAUSTED, "no free-orbit box found");
}

}  // namespace detail

// Seeded construction of a transversal multivalued perturbation. Per piece
// the stage-n branches realize
//   s^{n,xi}_{(j,gamma)}(y) = s(y) + chi_t(y) (t_j(y) - s(y))
//                                  - eps_n chi_f(y) rho(gamma^{-1}) xi
// with eps_n = 1/n, xi drawn uniformly from the free-orbit box W0, t_j the
// branches transferred from an already-built neighbor (bundle extension datum
// or backward-change restriction). Retries with fresh xi until every branch
// is transversal on the support.
inline MultivaluedPerturbation build_multivalued_perturbation(
    const GoodCoordinateSystem& gcs, const std::map<std::string, BundleExtensionDatum>& data,
    std::uint64_t seed, const std::vector<int>& n_list, const PerturbPlan& plan = {},
    const Tolerances& tol = {}) {
    MultivaluedPerturbation mvp;
    mvp.n_list = n_list;
    mvp.provenance = "seed=" + std::to_string(seed);

    // deterministic piece order: nodes ascending dim, pieces in declaration order
    std::vector<int> node_order(gcs.nodes.size());
    for (size_t i = 0; i < node_order.size(); ++i) node_order[i] = (int)i;
    std::sort(node_order.begin(), node_order.end(),
              [&](int a, int b) { return gcs.nodes[a].dim < gcs.nodes[b].dim; });

    Rng rng(seed);
    for (int attempt = 0; attempt <= tol.max_retry; ++attempt) {
        // one xi per piece, shared across stages (eps_n scales it)
        std::map<std::string, Vec> xi;
        for (int ni : node_order)
            for (const auto& piece : gcs.nodes[ni].pieces) {
                const auto& pp = plan.of(piece.label);
                Domain w0 = detail::free_orbit_box(piece.rank(), piece.bundle.representation,
                                                   pp.xi_box);
                Vec x(piece.rank());
                for (int i = 0; i < piece.rank(); ++i) x[i] = rng.uniform(w0.lo[i], w0.hi[i]);
                xi[piece.label] = x;
            }

        mvp.stages.clear();
        bool all_transversal = true;
        for (int n : n_list) {
            double eps_n = 1.0 / n;
            std::map<std::string, Multisection>& stage = mvp.stages[n];
            for (int ni : node_order) {
                for (const auto& piece : gcs.nodes[ni].pieces) {
                    const auto& pp = plan.of(piece.label);
                    Smooth s0 = piece.s_eval();

                    // transferred branch list, if any
                    std::vector<Smooth> transfer;
                    if (pp.transfer_from) {
                        const Multisection& src_ms = stage.at(*pp.transfer_from);
                        const KuranishiChart& src = gcs.piece(*pp.transfer_from);
                        if (pp.transfer_via_datum) {
                            auto key = *pp.transfer_from + ">" + piece.label;
                            auto it = data.find(key);
                            if (it == data.end())
                                throw VfcError(ErrCode::MISSING_EXTENSION_DATA, key);
                            transfer = extend_multisection(src_ms, src, piece,
                                                           it->second).branches;
                        } else {
                            // backward change: piece -> source
                            const CoordinateChange* back = nullptr;
                            for (const auto* c : gcs.changes_from(piece.label))
                                if (c->dst == *pp.transfer_from) back = c;
                            if (!back)
                                throw VfcError(ErrCode::MISSING_EXTENSION_DATA,
                                               "no backward change " + piece.label + "->" +
                                                   *pp.transfer_from);
                            // t_j(z) = s(z) + g_z^{-1}(src_j(phi(z)) - s_src(phi(z))),
                            // guarded by the backward-change domain
                            Smooth phi = back->emb.base(piece.dim());
                            Smooth s_src = src.s_eval();
                            Domain dom = back->emb.domain;
                            auto names = coord_names(piece.dim());
                            for (const auto& b : src_ms.branches) {
                                Smooth delta = compose(b, phi) - compose(s_src, phi);
                                Smooth pulled =
                                    exprmat_solve(back->emb.fiber_map, names, delta);
                                transfer.push_back(
                                    s0 + guard(pulled,
                                               [dom](const Vec& z) {
                                                   return dom.contains(z, 1e-12);
                                               },
                                               "bkw:" + piece.label));
                            }
                        }
                    }

                    // chi functions
                    Smooth chi_t, chi_f;
                    bool has_fresh = !(pp.transfer_from && pp.transfer_covers_all);
                    if (pp.transfer_from && !pp.transfer_covers_all) {
                        if (!pp.transfer_region || !pp.fresh_region)
                            throw VfcError(ErrCode::MISSING_POU,
                                           "piece " + piece.label +
                                               " needs fresh+transfer regions");
                        Smooth bt = invariant_bump(piece.bundle.base, *pp.transfer_region);
                        Smooth bf = invariant_bump(piece.bundle.base, *pp.fresh_region);
                        Smooth total = bt + bf;
                        chi_t = scalar_quot(bt, total);
                        chi_f = scalar_quot(bf, total);
                    } else if (pp.transfer_from) {
                        chi_t = smooth_const(make_vec({1.0}), piece.dim());
                    } else {
                        chi_f = smooth_const(make_vec({1.0}), piece.dim());
                    }

                    // assemble branches over (transfer index) x (fresh group index)
                    Multisection ms;
                    int lt = transfer.empty() ? 1 : (int)transfer.size();
                    int lf = has_fresh ? piece.group().size() : 1;
                    for (int j = 0; j < lt; ++j) {
                        for (int gi = 0; gi < lf; ++gi) {
                            std::vector<Smooth> terms{s0};
                            std::vector<double> coefs{1.0};
                            if (!transfer.empty()) {
                                terms.push_back(scalar_mul(chi_t, transfer[j] - s0));
                                coefs.push_back(1.0);
                            }
                            if (has_fresh && piece.rank() > 0) {
                                Mat rho_inv = piece.bundle.representation[gi].inverse();
                                Vec shift = rho_inv * xi.at(piece.label);
                                terms.push_back(scalar_mul(
                                    chi_f, smooth_const(shift, piece.dim())));
                                coefs.push_back(-eps_n);
                            }
                            ms.branches.push_back(smooth_sum(coefs, terms));
                        }
                    }
                    stage[piece.label] = std::move(ms);
                }
            }
            // transversality gate on supports
            for (const auto* kc : gcs.all_pieces()) {
                Domain region =
                    gcs.support.has(kc->label) ? gcs.support.of(kc->label) : kc->domain();
                auto tr = check_transversality(stage.at(kc->label), region, std::nullopt, tol);
                if (!tr.transversal_to_zero) all_transversal = false;
            }
            if (!all_transversal) break;
        }
        if (all_transversal) {
            mvp.provenance += ";attempt=" + std::to_string(attempt);
            return mvp;
        }
    }
    throw VfcError(ErrCode::TRANSVERSALITY_RETRY_EXHAUSTED,
                   "no transversal perturbation in max_retry attempts");
}

// Chartwise compatibility of a multivalued perturbation with the coordinate
// changes, plus C^1 convergence across stages.
inline Report verify_mvp(const GoodCoordinateSystem& gcs, const MultivaluedPerturbation& mvp,
                         const Tolerances& tol = {}) {
    Report rep;
    rep.subject = "mvp";
    auto all_changes = gcs.changes;
    for (const auto& node : gcs.nodes)
        for (const auto& c : node.internal_glue) all_changes.push_back(c);
    for (int n : mvp.n_list) {
        const auto& stage = mvp.stages.at(n);
        for (const auto& chg : all_changes) {
            if (!stage.count(chg.src) || !stage.count(chg.dst)) continue;
            const auto& src = gcs.piece(chg.src);
            Smooth phi = chg.emb.base(src.dim());
            const Multisection& ms_q = stage.at(chg.src);
            const Multisection& ms_p = stage.at(chg.dst);
            Multisection iq = ms_q.iterate(ms_p.ell());
            Multisection ip = ms_p.iterate(ms_q.ell());
            double worst = 0.0;
            std::string witness;
            for (const auto& y : chg.emb.domain.sample_grid(6)) {
                Mat g = chg.emb.fiber_at(y, src.dim());
                std::vector<Vec> lhs = ip.branches_at(phi(y));
                std::vector<Vec> rhs;
                for (const auto& v : iq.branches_at(y)) rhs.push_back(g * v);
                double res = 0.0;
                detail::match_permutation(lhs, rhs, tol.tau_eq, nullptr, &res, nullptr);
                if (res > worst) {
                    worst = res;
                    witness = point_str(y);
                }
            }
            rep.add_residual(
                "compat:n=" + std::to_string(n) + ":" + chg.src + ">" + chg.dst, worst,
                tol.tau_eq, witness);
        }
    }
    // C^1 convergence in n per piece
    for (const auto* kc : gcs.all_pieces()) {
        Smooth s0 = kc->s_eval();
        double prev = 1e300;
        bool decreasing = true;
        for (int n : mvp.n_list) {
            double gap = 0.0;
            for (const auto& b : mvp.stages.at(n).at(kc->label).branches)
                for (const auto& y : kc->domain().sample_grid(6))
                    gap = std::max(gap, (b(y) - s0(y)).norm() + (b.jac(y) - s0.jac(y)).norm());
            if (gap > prev + 1e-12) decreasing = false;
            prev = gap;
        }
        rep.add("c1_decreasing:" + kc->label, decreasing, 0.0, 0.0);
    }
    return rep;
}

}  // namespace vfckit
