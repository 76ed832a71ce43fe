#pragma once

#include <algorithm>
#include <vector>

#include "vfckit/forms.hpp"
#include "vfckit/orbifold.hpp"
#include "vfckit/quadrature.hpp"

namespace vfckit {

// Partition of unity subordinate to per-chart compact supports. Each chi_i is
// a group-invariant polynomial bump divided by the sum of all bumps, the
// other charts' bumps being pulled into chart i coordinates through the
// stored transitions. Exactly sums to 1 wherever the bumps cover.
struct PartitionOfUnity {
    std::vector<std::string> chart_labels;
    std::vector<Smooth> chi;  // chi[i] on chart i coordinates

    const Smooth& on(const std::string& label) const {
        for (size_t i = 0; i < chart_labels.size(); ++i)
            if (chart_labels[i] == label) return chi[i];
        throw VfcError(ErrCode::UNRESOLVED_LABEL, "no chi for chart " + label);
    }
    bool has(const std::string& label) const {
        for (const auto& l : chart_labels)
            if (l == label) return true;
        return false;
    }
};

inline Smooth invariant_bump(const OrbifoldChart& chart, const Domain& support, int k = 4) {
    Smooth b;
    if (support.ball_outer > 0) {
        b = bump_shell(chart.dim, support.ball_inner, support.ball_outer, k);
    } else {
        b = bump_box(support.lo, support.hi, k);
    }
    if (chart.group.size() > 1) {
        std::vector<Mat> reps(chart.group.size(), Mat::Identity(1, 1));
        b = symmetrize(b, chart.group.elements, reps);
    }
    return b;
}

// target_samples: per chart, points that must be covered (compact target set
// given by sampling). COVER_GAP names the first uncovered witness.
inline PartitionOfUnity partition_of_unity(const OrbifoldAtlas& atlas,
                                           const std::vector<Domain>& supports,
                                           const std::vector<std::vector<Vec>>& target_samples,
                                           int bump_order = 4) {
    const int n = (int)atlas.charts.size();
    std::vector<Smooth> bumps(n);
    for (int i = 0; i < n; ++i) bumps[i] = invariant_bump(atlas.charts[i], supports[i], bump_order);

    PartitionOfUnity pou;
    for (int i = 0; i < n; ++i) {
        const auto& ci = atlas.charts[i];
        std::vector<Smooth> terms{bumps[i]};
        // Other charts' bumps expressed in chart-i coordinates via stored
        // transitions (either direction), guarded by the overlap domain.
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            for (const auto& t : atlas.transitions) {
                if (t.src == ci.label && t.dst == atlas.charts[j].label) {
                    Domain ov = t.overlap;
                    terms.push_back(guard(compose(bumps[j], t.map(ci.dim)),
                                          [ov](const Vec& x) { return ov.contains(x, 1e-12); },
                                          "ov:" + t.src + ">" + t.dst));
                }
            }
        }
        Smooth total = terms.size() == 1
                           ? terms[0]
                           : smooth_sum(std::vector<double>(terms.size(), 1.0), terms);
        pou.chart_labels.push_back(ci.label);
        pou.chi.push_back(scalar_quot(bumps[i], total));

        // cover check on this chart's target samples
        for (const auto& p : target_samples[i]) {
            if (total(p)[0] <= 0.0)
                throw VfcError(ErrCode::COVER_GAP,
                               "chart " + ci.label + " at " + point_str(p));
        }
    }
    return pou;
}

// Residual of sum(chi) - 1 at covered sample points, reported per chart.
inline Report verify_pou(const OrbifoldAtlas& atlas, const PartitionOfUnity& pou,
                         const std::vector<std::vector<Vec>>& target_samples,
                         const Tolerances& tol = {}) {
    Report rep;
    rep.subject = "partition_of_unity";
    for (size_t i = 0; i < atlas.charts.size(); ++i) {
        const auto& ci = atlas.charts[i];
        double worst = 0.0;
        std::string witness;
        for (const auto& p : target_samples[i]) {
            double total = pou.chi[i](p)[0];
            for (size_t j = 0; j < atlas.charts.size(); ++j) {
                if (j == i) continue;
                for (const auto& t : atlas.transitions)
                    if (t.src == ci.label && t.dst == atlas.charts[j].label &&
                        t.overlap.contains(p, 1e-12))
                        total += pou.chi[j](t.map(ci.dim)(p))[0];
            }
            double r = std::abs(total - 1.0);
            if (r > worst) {
                worst = r;
                witness = point_str(p);
            }
        }
        rep.add_residual("sum_to_one:" + ci.label, worst, tol.tau_pou, witness);

        // group invariance of chi_i (exact by symmetrization; sampled anyway)
        double inv = 0.0;
        for (const auto& p : target_samples[i])
            for (const auto& g : ci.group.elements) {
                Vec q = g * p;
                if (ci.domain.contains(q, 1e-12))
                    inv = std::max(inv, std::abs(pou.chi[i](q)[0] - pou.chi[i](p)[0]));
            }
        rep.add_residual("invariance:" + ci.label, inv, tol.tau_pou);
    }
    return rep;
}

// Chartwise orbifold integral of a top-degree invariant form:
// sum over charts of (1/#Gamma) * integral of chi * coefficient.
inline double integrate_top_form(const OrbifoldAtlas& atlas, const DifferentialForm& form,
                                 const PartitionOfUnity& pou, const Tolerances& tol = {}) {
    // label-sorted reduction order: chart relabeling cannot change the sum
    std::vector<int> order(atlas.charts.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = (int)i;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return atlas.charts[a].label < atlas.charts[b].label;
    });
    double acc = 0.0;
    for (int i : order) {
        const auto& chart = atlas.charts[i];
        if (form.degree != chart.dim)
            throw VfcError(ErrCode::DEGREE_OVERFLOW, "integrand degree must equal chart dim");
        auto it = form.by_chart.find(chart.label);
        if (it == form.by_chart.end()) continue;
        const FormOnChart& f = it->second;
        MultiIndex top;
        for (int k = 0; k < chart.dim; ++k) top.push_back(k);
        const Smooth& chi = pou.on(chart.label);
        auto integrand = [&](const Vec& y) -> double {
            if (!chart.domain.contains(y)) return 0.0;
            return chi(y)[0] * f.eval_coeff(top, y);
        };
        double piece =
            integrate_box(integrand, chart.domain.lo, chart.domain.hi, tol.quad_order);
        acc += piece / chart.group.size();
    }
    return acc;
}

}  // namespace vfckit
