#pragma once

#include <algorithm>
#include <numeric>

#include "vfckit/bundle.hpp"
#include "vfckit/kuranishi.hpp"

namespace vfckit {

// An l-branch multisection on one chart piece. Branches are smooth maps
// V -> E; equivariance holds up to a branch permutation that may depend on
// the point.
struct Multisection {
    std::vector<Smooth> branches;

    int ell() const { return (int)branches.size(); }

    std::string describe() const {
        std::string s = "multisection[l=" + std::to_string(ell());
        for (const auto& b : branches) s += ";" + b.describe();
        return s + "]";
    }

    // l'-iteration: branch list repeated l' times (s'_k = s_{k mod l}).
    Multisection iterate(int lprime) const {
        Multisection out;
        for (int r = 0; r < lprime; ++r)
            for (const auto& b : branches) out.branches.push_back(b);
        return out;
    }

    std::vector<Vec> branches_at(const Vec& y) const {
        std::vector<Vec> vals;
        for (const auto& b : branches) vals.push_back(b(y));
        return vals;
    }
};

namespace detail {

// Find sigma with A[sigma(k)] ~= B[k]. Exhaustive over Perm(l) for l <= 6;
// tolerance-aware lexicographic matching beyond that (same verdict, explicit
// witness, feasible for the iterated branch lists gluing produces).
inline bool match_permutation(const std::vector<Vec>& a, const std::vector<Vec>& b, double tol,
                              std::vector<int>* sigma_out, double* residual_out,
                              bool* exhaustive_used) {
    const int l = (int)a.size();
    double best_res = 1e300;
    std::vector<int> best_sigma;
    if (l <= 6) {
        if (exhaustive_used) *exhaustive_used = true;
        std::vector<int> perm(l);
        std::iota(perm.begin(), perm.end(), 0);
        do {
            double worst = 0.0;
            for (int k = 0; k < l; ++k) worst = std::max(worst, (a[perm[k]] - b[k]).norm());
            if (worst < best_res) {
                best_res = worst;
                best_sigma = perm;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
    } else {
        if (exhaustive_used) *exhaustive_used = false;
        // sort both index sets by lexicographic value order, pair them up
        auto lex = [](const Vec& x, const Vec& y) {
            for (int i = 0; i < x.size(); ++i)
                if (std::abs(x[i] - y[i]) > 1e-12) return x[i] < y[i];
            return false;
        };
        std::vector<int> ia(l), ib(l);
        std::iota(ia.begin(), ia.end(), 0);
        std::iota(ib.begin(), ib.end(), 0);
        std::sort(ia.begin(), ia.end(), [&](int x, int y) { return lex(a[x], a[y]); });
        std::sort(ib.begin(), ib.end(), [&](int x, int y) { return lex(b[x], b[y]); });
        best_sigma.assign(l, 0);
        best_res = 0.0;
        for (int k = 0; k < l; ++k) {
            best_sigma[ib[k]] = ia[k];
            best_res = std::max(best_res, (a[ia[k]] - b[ib[k]]).norm());
        }
    }
    if (sigma_out) *sigma_out = best_sigma;
    if (residual_out) *residual_out = best_res;
    return best_res <= tol;
}

}  // namespace detail

// Equivariance up to permutation: for each sample y and group element gamma
// there must be sigma with s_{sigma(k)}(gamma y) = rho(gamma) s_k(y).
inline Report verify_multisection(const Multisection& ms, const BundleChart& bundle,
                                  const Tolerances& tol = {}) {
    Report rep;
    rep.subject = "multisection@" + bundle.label;
    auto samples = bundle.base.domain.sample_grid(12);
    double worst = 0.0;
    std::string witness, sigma_note;
    bool used_exhaustive = true;
    for (const auto& y : samples) {
        for (int gi = 0; gi < bundle.base.group.size(); ++gi) {
            Vec gy = bundle.base.group.elements[gi] * y;
            if (!bundle.base.domain.contains(gy, 1e-9)) continue;
            std::vector<Vec> lhs = ms.branches_at(gy);
            std::vector<Vec> rhs;
            for (const auto& b : ms.branches) rhs.push_back(bundle.representation[gi] * b(y));
            std::vector<int> sigma;
            double res = 0.0;
            bool ex = true;
            detail::match_permutation(lhs, rhs, tol.tau_eq, &sigma, &res, &ex);
            used_exhaustive = used_exhaustive && ex;
            if (res > worst) {
                worst = res;
                witness = "(" + point_str(y) + ", g" + std::to_string(gi) + ")";
                sigma_note = "sigma=[";
                for (size_t k = 0; k < sigma.size(); ++k)
                    sigma_note += (k ? "," : "") + std::to_string(sigma[k]);
                sigma_note += "]";
            }
        }
    }
    auto& item = rep.add("equivariance_up_to_permutation", worst <= tol.tau_eq, worst, tol.tau_eq,
                         witness, sigma_note + (used_exhaustive ? " (exhaustive)" : " (sorted)"));
    if (!item.pass) item.note = "NO_PERMUTATION_FOUND " + item.note;
    return rep;
}

// Equivalence of two multisections: iterate to the common branch count, then
// pointwise multiset equality on samples.
inline bool multisections_equivalent(const Multisection& a, const Multisection& b,
                                     const Domain& domain, double tol) {
    Multisection ia = a.iterate(b.ell());
    Multisection ib = b.iterate(a.ell());
    for (const auto& y : domain.sample_grid(10)) {
        double res = 0.0;
        if (!detail::match_permutation(ia.branches_at(y), ib.branches_at(y), tol, nullptr, &res,
                                       nullptr))
            return false;
    }
    return true;
}

// Restriction of a multisection along a coordinate change (same fiber rank):
// (Phi^* s)_k(y) = g_y^{-1} s_k(phi(y)).
inline Multisection restrict_multisection(const Multisection& ms, const CoordinateChange& chg,
                                          int src_dim) {
    Multisection out;
    Smooth phi = chg.emb.base(src_dim);
    auto names = coord_names(src_dim);
    for (const auto& b : ms.branches)
        out.branches.push_back(exprmat_solve(chg.emb.fiber_map, names, compose(b, phi)));
    return out;
}

// Extension of a multisection along a bundle extension datum:
// t_i(z) = s_dst(z) + phi~(z) (s_i(pi(z)) - s_src(pi(z))).
// On the embedded locus this is the paper's (z, t_i(z)) = phi~(z, s_i(pi(z)))
// and the branch count is preserved.
inline Multisection extend_multisection(const Multisection& ms, const KuranishiChart& src,
                                        const KuranishiChart& dst,
                                        const std::optional<BundleExtensionDatum>& datum) {
    if (!datum)
        throw VfcError(ErrCode::MISSING_EXTENSION_DATA,
                       "extension " + src.label + "->" + dst.label + " requested without datum");
    if (!datum->verified)
        throw VfcError(ErrCode::UNVERIFIED_EMBEDDING, "bundle extension datum not verified");
    Multisection out;
    Smooth pi = datum->retraction_map(dst.dim());
    Smooth s_dst = dst.s_eval();
    Smooth s_src = src.s_eval();
    auto dst_names = coord_names(dst.dim());
    for (const auto& b : ms.branches) {
        Smooth delta = compose(b, pi) - compose(s_src, pi);
        Smooth lifted = exprmat_apply(datum->fiber_ext, dst_names, delta);
        out.branches.push_back(s_dst + lifted);
    }
    return out;
}

}  // namespace vfckit
