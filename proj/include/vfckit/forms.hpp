#pragma once

#include <map>
#include <string>
#include <vector>

#include "vfckit/expr.hpp"
#include "vfckit/orbifold.hpp"

namespace vfckit {

// Differential forms with expression coefficients, stored per strictly
// increasing multi-index. Exterior derivative is symbolic (the expression
// operator set is closed under d); pullback composes substitution with the
// symbolic Jacobian minors.

using MultiIndex = std::vector<int>;

// Sorts a multi-index in place, returns the permutation sign (0 on repeats).
inline int sort_sign(MultiIndex& idx) {
    int sign = 1;
    for (size_t i = 0; i < idx.size(); ++i)
        for (size_t j = i + 1; j < idx.size(); ++j) {
            if (idx[i] == idx[j]) return 0;
            if (idx[i] > idx[j]) {
                std::swap(idx[i], idx[j]);
                sign = -sign;
            }
        }
    return sign;
}

struct FormOnChart {
    int degree = 0;
    int dim = 0;
    std::map<MultiIndex, Expr> coeffs;  // keys strictly increasing, size == degree

    static FormOnChart zero(int degree, int dim) {
        FormOnChart f;
        f.degree = degree;
        f.dim = dim;
        return f;
    }

    static FormOnChart function(const Expr& e, int dim) {
        FormOnChart f;
        f.degree = 0;
        f.dim = dim;
        f.coeffs[{}] = e;
        return f;
    }

    void add_term(MultiIndex idx, const Expr& e) {
        int s = sort_sign(idx);
        if (s == 0) return;
        Expr term = s > 0 ? e : -e;
        auto it = coeffs.find(idx);
        if (it == coeffs.end()) coeffs[idx] = term;
        else it->second = it->second + term;
    }

    Expr coeff(const MultiIndex& idx) const {
        auto it = coeffs.find(idx);
        return it == coeffs.end() ? Expr(0.0) : it->second;
    }

    FormOnChart wedge(const FormOnChart& other) const {
        if (degree + other.degree > dim)
            throw VfcError(ErrCode::DEGREE_OVERFLOW, "wedge degree exceeds chart dimension");
        FormOnChart out = zero(degree + other.degree, dim);
        for (const auto& [i1, c1] : coeffs)
            for (const auto& [i2, c2] : other.coeffs) {
                MultiIndex idx = i1;
                idx.insert(idx.end(), i2.begin(), i2.end());
                out.add_term(std::move(idx), c1 * c2);
            }
        return out;
    }

    FormOnChart exterior_derivative() const {
        if (degree + 1 > dim)
            throw VfcError(ErrCode::DEGREE_OVERFLOW, "d raises degree past chart dimension");
        FormOnChart out = zero(degree + 1, dim);
        auto names = coord_names(dim);
        for (const auto& [idx, c] : coeffs)
            for (int j = 0; j < dim; ++j) {
                Expr dc = c.diff(names[j]);
                if (dc.is_const() && dc.const_value() == 0.0) continue;
                MultiIndex nidx;
                nidx.push_back(j);
                nidx.insert(nidx.end(), idx.begin(), idx.end());
                out.add_term(std::move(nidx), dc);
            }
        return out;
    }

    // Pullback along x -> F(x), F given by target-coordinates expressions in
    // source coordinates (src_dim variables y1..y{src_dim}).
    FormOnChart pullback(const std::vector<Expr>& map_exprs, int src_dim) const {
        FormOnChart out = zero(degree, src_dim);
        auto src_names = coord_names(src_dim);
        auto dst_names = coord_names(dim);
        std::map<std::string, Expr> sub;
        for (int i = 0; i < dim; ++i) sub[dst_names[i]] = map_exprs[i];
        // symbolic Jacobian dF_i/dx_j
        std::vector<std::vector<Expr>> jac(dim, std::vector<Expr>(src_dim, Expr(0.0)));
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < src_dim; ++j) jac[i][j] = map_exprs[i].diff(src_names[j]);

        std::vector<MultiIndex> src_indices = increasing_indices(src_dim, degree);
        for (const auto& [idx, c] : coeffs) {
            Expr pulled_c = c.substitute(sub);
            for (const auto& J : src_indices) {
                Expr minor = jac_minor(jac, idx, J);
                if (minor.is_const() && minor.const_value() == 0.0) continue;
                out.add_term(MultiIndex(J), pulled_c * minor);
            }
        }
        return out;
    }

    // Evaluate on tangent vectors at a point: sum_I c_I(p) det(v[I rows]).
    double evaluate(const Vec& p, const std::vector<Vec>& vectors) const {
        std::map<std::string, double> env;
        auto names = coord_names(dim);
        for (int i = 0; i < dim; ++i) env[names[i]] = p[i];
        double acc = 0.0;
        for (const auto& [idx, c] : coeffs) {
            Mat m(degree, degree);
            for (int r = 0; r < degree; ++r)
                for (int col = 0; col < degree; ++col) m(r, col) = vectors[col][idx[r]];
            acc += c.eval(env) * (degree == 0 ? 1.0 : m.determinant());
        }
        return acc;
    }

    double eval_coeff(const MultiIndex& idx, const Vec& p) const {
        std::map<std::string, double> env;
        auto names = coord_names(dim);
        for (int i = 0; i < dim; ++i) env[names[i]] = p[i];
        return coeff(idx).eval(env);
    }

    FormOnChart scaled(double a) const {
        FormOnChart out = zero(degree, dim);
        for (const auto& [idx, c] : coeffs) out.coeffs[idx] = Expr(a) * c;
        return out;
    }

    FormOnChart plus(const FormOnChart& o) const {
        FormOnChart out = *this;
        for (const auto& [idx, c] : o.coeffs) out.add_term(MultiIndex(idx), c);
        return out;
    }

    static std::vector<MultiIndex> increasing_indices(int dim, int k) {
        std::vector<MultiIndex> out;
        MultiIndex cur;
        build_indices(dim, k, 0, cur, out);
        return out;
    }

  private:
    static void build_indices(int dim, int k, int start, MultiIndex& cur,
                              std::vector<MultiIndex>& out) {
        if ((int)cur.size() == k) {
            out.push_back(cur);
            return;
        }
        for (int i = start; i < dim; ++i) {
            cur.push_back(i);
            build_indices(dim, k, i + 1, cur, out);
            cur.pop_back();
        }
    }

    static Expr jac_minor(const std::vector<std::vector<Expr>>& jac, const MultiIndex& rows,
                          const MultiIndex& cols) {
        int k = (int)rows.size();
        if (k == 0) return Expr(1.0);
        if (k == 1) return jac[rows[0]][cols[0]];
        // Laplace expansion; k <= 3 in practice.
        Expr acc(0.0);
        for (int j = 0; j < k; ++j) {
            MultiIndex sub_rows(rows.begin() + 1, rows.end());
            MultiIndex sub_cols;
            for (int c = 0; c < k; ++c)
                if (c != j) sub_cols.push_back(cols[c]);
            Expr term = jac[rows[0]][cols[j]] * jac_minor(jac, sub_rows, sub_cols);
            acc = (j % 2 == 0) ? acc + term : acc - term;
        }
        return acc;
    }
};

// A differential form on an atlas: one FormOnChart per chart label plus a
// declared invariance flag.
struct DifferentialForm {
    int degree = 0;
    std::map<std::string, FormOnChart> by_chart;
    bool declared_invariant = true;

    const FormOnChart& on(const std::string& label) const {
        auto it = by_chart.find(label);
        if (it == by_chart.end())
            throw VfcError(ErrCode::UNRESOLVED_LABEL, "form has no data on chart " + label);
        return it->second;
    }
};

// Pullback by a linear group element g (constant Jacobian).
inline FormOnChart pullback_linear(const FormOnChart& f, const Mat& g) {
    std::vector<Expr> comps;
    auto names = coord_names(f.dim);
    for (int r = 0; r < g.rows(); ++r) {
        Expr acc(0.0);
        for (int c = 0; c < g.cols(); ++c)
            acc = acc + Expr(g(r, c)) * Expr::var(names[c]);
        comps.push_back(acc);
    }
    return f.pullback(comps, f.dim);
}

// Max residual of |g^* f - f| over sample points and all group elements.
inline double invariance_residual(const FormOnChart& f, const OrbifoldChart& chart,
                                  int density = 8) {
    auto samples = chart.domain.sample_grid(density);
    double worst = 0.0;
    for (const auto& g : chart.group.elements) {
        FormOnChart pulled = pullback_linear(f, g);
        for (const auto& p : samples)
            for (const auto& [idx, c] : f.coeffs) {
                double a = f.eval_coeff(idx, p);
                double b = pulled.eval_coeff(idx, p);
                worst = std::max(worst, std::abs(a - b));
            }
    }
    return worst;
}

}  // namespace vfckit
