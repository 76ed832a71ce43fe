#pragma once

#include <optional>

#include "vfckit/multisection.hpp"
#include "vfckit/newton.hpp"

namespace vfckit {

// Sampled transversality certificate. Flags are set only when the smallest
// singular value stays above tau_rank uniformly over the sampled zero set;
// the report states the sampling resolution.
struct TransversalityReport {
    std::string region;
    int sample_resolution = 0;
    double sigma_min_transversal = 1e300;   // of Ds on the zero set
    double sigma_min_submersive = 1e300;    // of Df restricted to ker Ds
    double sigma_min_transversal_g = 1e300; // of [Df|ker, Dg]
    bool transversal_to_zero = false;
    bool strongly_submersive = false;
    bool strongly_transversal_to_g = false;
    bool vacuous = false;                   // no zeros in the region
    std::string witness;
    std::optional<double> estimate_c;       // normal-growth constant, when derivable

    Json to_json() const {
        Json j;
        j["region"] = region;
        j["resolution"] = sample_resolution;
        j["transversal_to_zero"] = transversal_to_zero;
        j["sigma_min"] = sigma_min_transversal == 1e300 ? 0.0 : sigma_min_transversal;
        if (sigma_min_submersive < 1e300) {
            j["strongly_submersive"] = strongly_submersive;
            j["sigma_min_submersive"] = sigma_min_submersive;
        }
        if (sigma_min_transversal_g < 1e300) {
            j["strongly_transversal_to_g"] = strongly_transversal_to_g;
            j["sigma_min_transversal_g"] = sigma_min_transversal_g;
        }
        if (vacuous) j["vacuous"] = true;
        if (!witness.empty()) j["witness"] = witness;
        if (estimate_c) j["estimate_c"] = *estimate_c;
        return j;
    }
};

// Transversality of a single smooth map s : region -> R^r on its zero set,
// optionally with submersivity of f and strong transversality to g.
inline TransversalityReport check_transversality(const Smooth& s, const Domain& region,
                                                 const std::optional<Smooth>& f,
                                                 const std::optional<Smooth>& g,
                                                 const std::optional<Domain>& g_domain,
                                                 const Tolerances& tol = {}) {
    TransversalityReport rep;
    rep.region = region.str();
    rep.sample_resolution = tol.sample_density;
    if (s.n_out() == 0) {
        // rank-0 obstruction: zero set is everything, conditions on Ds vacuous
        rep.transversal_to_zero = true;
        rep.sigma_min_transversal = 1e300;
        if (f) {
            for (const auto& y : region.sample_grid(8)) {
                double sv = sigma_min(f->jac(y));
                if (sv < rep.sigma_min_submersive) {
                    rep.sigma_min_submersive = sv;
                    rep.witness = point_str(y);
                }
            }
            rep.strongly_submersive = rep.sigma_min_submersive > tol.tau_rank;
        }
        return rep;
    }

    auto zeros = find_zeros(s, region, tol.grid_density, 1e-10, tol.newton_max_iter, 1e-4);
    if (zeros.empty()) {
        rep.vacuous = true;
        rep.transversal_to_zero = true;
        return rep;
    }
    for (const auto& y : zeros) {
        Mat ds = s.jac(y);
        double sv = sigma_min(ds);
        if (sv < rep.sigma_min_transversal) {
            rep.sigma_min_transversal = sv;
            rep.witness = point_str(y);
        }
        if (f) {
            Mat K = kernel_basis(ds, tol.tau_rank);
            Mat df = f->jac(y.head(f->n_in()));
            double svf = K.cols() == 0 ? 0.0 : sigma_min(df * K.topRows(f->n_in()));
            rep.sigma_min_submersive = std::min(rep.sigma_min_submersive, svf);
            if (g && g_domain) {
                double best = 0.0;
                Vec fy = (*f)(y.head(f->n_in()));
                for (const auto& z : g_domain->sample_grid(8)) {
                    if (((*g)(z) - fy).norm() > 5e-2) continue;
                    Mat dg = g->jac(z);
                    Mat joint(df.rows(), K.cols() + dg.cols());
                    joint.leftCols(K.cols()) = df * K.topRows(f->n_in());
                    joint.rightCols(dg.cols()) = dg;
                    best = std::max(best, sigma_min(joint));
                }
                rep.sigma_min_transversal_g = std::min(rep.sigma_min_transversal_g, best);
            }
        }
    }
    rep.transversal_to_zero = rep.sigma_min_transversal > tol.tau_rank;
    if (f) rep.strongly_submersive =
        rep.transversal_to_zero && rep.sigma_min_submersive > tol.tau_rank;
    if (g) rep.strongly_transversal_to_g =
        rep.transversal_to_zero && rep.sigma_min_transversal_g > tol.tau_rank;
    return rep;
}

// All branches of a multisection transversal on a region.
inline TransversalityReport check_transversality(const Multisection& ms, const Domain& region,
                                                 const std::optional<Smooth>& f,
                                                 const Tolerances& tol = {}) {
    TransversalityReport agg;
    agg.region = region.str();
    agg.sample_resolution = tol.sample_density;
    agg.transversal_to_zero = true;
    bool all_vacuous = true;
    for (const auto& b : ms.branches) {
        TransversalityReport r = check_transversality(b, region, f, std::nullopt, std::nullopt, tol);
        all_vacuous = all_vacuous && r.vacuous;
        agg.transversal_to_zero = agg.transversal_to_zero && r.transversal_to_zero;
        agg.sigma_min_transversal = std::min(agg.sigma_min_transversal, r.sigma_min_transversal);
        agg.sigma_min_submersive = std::min(agg.sigma_min_submersive, r.sigma_min_submersive);
        if (!r.transversal_to_zero && agg.witness.empty()) agg.witness = r.witness;
    }
    agg.vacuous = all_vacuous;
    if (f)
        agg.strongly_submersive = agg.transversal_to_zero &&
                                  (all_vacuous || agg.sigma_min_submersive > tol.tau_rank);
    return agg;
}

// Normal-growth constant estimate c = min |s(y)| / dist(y, locus) over
// off-locus samples, when a retraction supplies the distance proxy.
inline double estimate_normal_constant(const Smooth& s, const Smooth& retraction,
                                       const Smooth& locus_embed, const Domain& region,
                                       double min_dist = 1e-3) {
    double c = 1e300;
    for (const auto& y : region.sample_grid(10)) {
        Vec foot = locus_embed(retraction(y));
        double d = (y - foot).norm();
        if (d < min_dist) continue;
        c = std::min(c, s(y).norm() / d);
    }
    return c == 1e300 ? 0.0 : c;
}

}  // namespace vfckit
