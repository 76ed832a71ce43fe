#pragma once

#include <optional>

#include "vfckit/kuranishi.hpp"

namespace vfckit {

// One normalized-boundary chart: a true face of a parent piece, one per
// group orbit of faces, as a Kuranishi chart of dimension n-1 with the
// stabilizer action and the outward-normal-first orientation sign.
struct BoundaryChart {
    KuranishiChart chart;       // dim = parent dim - 1
    std::string parent_piece;
    int axis = 0;
    bool side_hi = false;
    int orientation_sign = 1;   // or(face coords in natural order) = sign * or(boundary)
    std::vector<int> kept_group_indices;  // parent group elements fixing the face

    // Projection pi: boundary coords -> parent coords (inserts the face value).
    Vec project(const Vec& x) const {
        Vec y(chart.dim() + 1);
        double c = side_hi ? face_value_hi : face_value_lo;
        for (int i = 0, j = 0; i < chart.dim() + 1; ++i)
            y[i] = (i == axis) ? c : x[j++];
        return y;
    }
    double face_value_lo = 0.0, face_value_hi = 0.0;
};

struct BoundaryData {
    std::vector<BoundaryChart> charts;
    GoodCoordinateSystem gcs;  // the boundary as a 1-lower-dimensional GCS
};

namespace detail {

// Substitute the face coordinate into expressions and renumber remaining
// variables to y1..y{n-1}.
inline std::vector<Expr> restrict_to_face(const std::vector<Expr>& exprs, int n, int axis,
                                          double value) {
    std::map<std::string, Expr> sub;
    auto names = coord_names(n);
    sub[names[axis]] = Expr(value);
    for (int i = axis + 1; i < n; ++i) sub[names[i]] = Expr::var("y" + std::to_string(i));
    // after removing axis, variable i (0-based, i>axis) becomes y{i}
    std::vector<Expr> out;
    for (const auto& e : exprs) out.push_back(e.substitute(sub));
    return out;
}

// Induced action of a face-preserving group element on the face coordinates;
// nullopt when the element mixes the face with its normal direction.
inline std::optional<Mat> face_action(const Mat& g, int axis, double tol) {
    int n = (int)g.rows();
    // need g e_axis = + e_axis and e_axis^T g = e_axis^T
    for (int i = 0; i < n; ++i) {
        if (i == axis) {
            if (std::abs(g(axis, axis) - 1.0) > tol) return std::nullopt;
        } else {
            if (std::abs(g(i, axis)) > tol || std::abs(g(axis, i)) > tol) return std::nullopt;
        }
    }
    Mat m(n - 1, n - 1);
    for (int r = 0, rr = 0; r < n; ++r) {
        if (r == axis) continue;
        for (int c = 0, cc = 0; c < n; ++c) {
            if (c == axis) continue;
            m(rr, cc++) = g(r, c);
        }
        ++rr;
    }
    return m;
}

}  // namespace detail

// Normalized boundary of one Kuranishi chart piece: one boundary chart per
// group orbit of true faces. Codimension-2 corner points appear once in each
// incident face chart, i.e. twice in the normalized boundary.
inline std::vector<BoundaryChart> normalized_boundary_of_piece(const KuranishiChart& kc,
                                                               const Tolerances& tol = {}) {
    std::vector<BoundaryChart> out;
    const Domain& dom = kc.domain();
    const auto& grp = kc.group();
    std::vector<std::pair<int, bool>> faces;
    for (int a = 0; a < kc.dim(); ++a) {
        if (dom.boundary_lo[a]) faces.push_back({a, false});
        if (dom.boundary_hi[a]) faces.push_back({a, true});
    }
    std::vector<bool> used(faces.size(), false);
    for (size_t fi = 0; fi < faces.size(); ++fi) {
        if (used[fi]) continue;
        auto [axis, hi] = faces[fi];
        // orbit of this face under the group: g maps face center to another
        // face center
        Vec center = dom.center();
        center[axis] = hi ? dom.hi[axis] : dom.lo[axis];
        for (size_t fj = fi; fj < faces.size(); ++fj) {
            auto [a2, h2] = faces[fj];
            Vec c2 = dom.center();
            c2[a2] = h2 ? dom.hi[a2] : dom.lo[a2];
            for (const auto& g : grp.elements)
                if ((g * center - c2).norm() <= 1e-9) used[fj] = true;
        }

        BoundaryChart bc;
        bc.parent_piece = kc.label;
        bc.axis = axis;
        bc.side_hi = hi;
        bc.face_value_lo = dom.lo[axis];
        bc.face_value_hi = dom.hi[axis];
        // outward-normal-first: or(U) = nu ^ or(boundary)
        bc.orientation_sign = (axis % 2 == 0 ? 1 : -1) * (hi ? 1 : -1);

        double value = hi ? dom.hi[axis] : dom.lo[axis];
        OrbifoldChart base;
        base.label = kc.label + ".d" + std::to_string(axis) + (hi ? "h" : "l");
        base.dim = kc.dim() - 1;
        Domain face;
        face.lo = Vec(base.dim);
        face.hi = Vec(base.dim);
        for (int i = 0, j = 0; i < kc.dim(); ++i) {
            if (i == axis) continue;
            face.lo[j] = dom.lo[i];
            face.hi[j] = dom.hi[i];
            face.boundary_lo.push_back(dom.boundary_lo[i]);
            face.boundary_hi.push_back(dom.boundary_hi[i]);
            ++j;
        }
        base.domain = face;
        base.base_point = Vec::Zero(base.dim);
        // stabilizer of the face with its induced action
        FiniteGroupAction fg;
        std::vector<int> kept;
        for (int gi = 0; gi < grp.size(); ++gi) {
            if ((grp.elements[gi] * center - center).norm() > 1e-9) continue;
            auto m = detail::face_action(grp.elements[gi], axis, tol.tau_grp);
            if (!m) continue;
            fg.elements.push_back(*m);
            fg.labels.push_back(grp.labels[gi]);
            kept.push_back(gi);
        }
        if (fg.elements.empty()) {
            fg = FiniteGroupAction::trivial(base.dim);
            kept = {grp.identity_index(tol.tau_grp)};
        }
        base.group = fg;
        base.global_coords =
            detail::restrict_to_face(kc.bundle.base.global_coords, kc.dim(), axis, value);

        std::vector<Mat> rep;
        for (int gi : kept) rep.push_back(kc.bundle.representation[gi]);
        bc.chart.label = base.label;
        bc.chart.bundle = BundleChart::make(base.label + ".E", std::move(base), kc.rank(),
                                            std::move(rep));
        bc.chart.s.components =
            detail::restrict_to_face(kc.s.components, kc.dim(), axis, value);
        bc.chart.orientation_sign = kc.orientation_sign * bc.orientation_sign;
        bc.kept_group_indices = kept;
        out.push_back(std::move(bc));
    }
    return out;
}

// Normalized boundary of a GCS: boundary charts per piece, coordinate changes
// restricted to matching faces, order inherited.
inline BoundaryData normalized_boundary(const GoodCoordinateSystem& gcs,
                                        const Tolerances& tol = {}) {
    BoundaryData bd;
    std::map<std::string, std::vector<size_t>> per_piece;
    for (const auto& node : gcs.nodes) {
        GcsNode bnode;
        bnode.label = "d" + node.label;
        bnode.dim = node.dim - 1;
        for (const auto& piece : node.pieces) {
            auto charts = normalized_boundary_of_piece(piece, tol);
            for (auto& bc : charts) {
                per_piece[piece.label].push_back(bd.charts.size());
                bnode.pieces.push_back(bc.chart);
                bd.charts.push_back(bc);
            }
        }
        if (!bnode.pieces.empty()) bd.gcs.nodes.push_back(std::move(bnode));
    }
    // order inherited between nonempty boundary nodes
    for (auto& [i, j] : gcs.order) {
        std::string li = "d" + gcs.nodes[i].label, lj = "d" + gcs.nodes[j].label;
        int bi = -1, bj = -1;
        for (int k = 0; k < (int)bd.gcs.nodes.size(); ++k) {
            if (bd.gcs.nodes[k].label == li) bi = k;
            if (bd.gcs.nodes[k].label == lj) bj = k;
        }
        if (bi >= 0 && bj >= 0) bd.gcs.order.push_back({bi, bj});
    }
    // supports: restrict parent supports to the face
    for (const auto& bc : bd.charts) {
        if (!gcs.support.has(bc.parent_piece)) continue;
        const Domain& K = gcs.support.of(bc.parent_piece);
        Domain face;
        face.lo = Vec(bc.chart.dim());
        face.hi = Vec(bc.chart.dim());
        for (int i = 0, j = 0; i < bc.chart.dim() + 1; ++i) {
            if (i == bc.axis) continue;
            face.lo[j] = K.lo[i];
            face.hi[j] = K.hi[i];
            face.boundary_lo.push_back(false);
            face.boundary_hi.push_back(false);
            ++j;
        }
        bd.gcs.support.by_piece[bc.chart.label] = face;
    }
    if (gcs.support_inner) {
        SupportSystem inner;
        for (const auto& bc : bd.charts) {
            if (!gcs.support_inner->has(bc.parent_piece)) continue;
            const Domain& K = gcs.support_inner->of(bc.parent_piece);
            Domain face;
            face.lo = Vec(bc.chart.dim());
            face.hi = Vec(bc.chart.dim());
            for (int i = 0, j = 0; i < bc.chart.dim() + 1; ++i) {
                if (i == bc.axis) continue;
                face.lo[j] = K.lo[i];
                face.hi[j] = K.hi[i];
                face.boundary_lo.push_back(false);
                face.boundary_hi.push_back(false);
                ++j;
            }
            inner.by_piece[bc.chart.label] = face;
        }
        bd.gcs.support_inner = inner;
    }
    return bd;
}

// Corner stratum S_k (depth >= k) or open stratum (depth == k) sample points
// of one piece.
inline std::vector<Vec> corner_stratum_samples(const KuranishiChart& kc, int k, bool open_stratum,
                                               int density = 12) {
    std::vector<Vec> out;
    const Domain& dom = kc.domain();
    if (k == 0) {
        for (const auto& p : dom.sample_grid(density))
            if (!open_stratum || dom.corner_depth(p, 1e-9) == 0) out.push_back(p);
        return out;
    }
    // sample faces and filter by depth
    for (int a = 0; a < kc.dim(); ++a)
        for (int side = 0; side < 2; ++side) {
            bool is_true = side ? dom.boundary_hi[a] : dom.boundary_lo[a];
            if (!is_true) continue;
            for (const auto& p : dom.sample_face(a, side, density)) {
                int depth = dom.corner_depth(p, 1e-9);
                if (open_stratum ? depth == k : depth >= k) out.push_back(p);
            }
        }
    return out;
}

// Dimension stratification S_d: footprint points of charts with dim >= d,
// clipped to supports.
inline std::vector<Vec> dimension_stratum_samples(const GoodCoordinateSystem& gcs, int d,
                                                  const Tolerances& tol = {}) {
    std::vector<Vec> out;
    for (const auto& node : gcs.nodes) {
        if (node.dim < d) continue;
        for (const auto& piece : node.pieces) {
            Smooth g = piece.footprint();
            for (const auto& y : piece.zero_samples(tol))
                if (!gcs.support.has(piece.label) ||
                    gcs.support.of(piece.label).contains(y, 1e-9))
                    out.push_back(g(y));
        }
    }
    return out;
}

}  // namespace vfckit
