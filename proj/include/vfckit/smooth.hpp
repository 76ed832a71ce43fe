#pragma once

#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "vfckit/expr.hpp"
#include "vfckit/linalg.hpp"

namespace vfckit {

// Smooth maps R^n -> R^m with exact Jacobians, closed under the combinators
// the perturbation constructions need (composition, sums, bump cutoffs,
// expression-matrix application). Every node serializes deterministically via
// describe(), which is what makes seeded builds byte-comparable.

class SmoothNode {
  public:
    virtual ~SmoothNode() = default;
    virtual int n_in() const = 0;
    virtual int n_out() const = 0;
    virtual Vec eval(const Vec& x) const = 0;
    virtual Mat jac(const Vec& x) const = 0;
    virtual std::string describe() const = 0;
};

using SmoothPtr = std::shared_ptr<const SmoothNode>;

class Smooth {
  public:
    Smooth() = default;
    explicit Smooth(SmoothPtr n) : node_(std::move(n)) {}

    bool valid() const { return node_ != nullptr; }
    int n_in() const { return node_->n_in(); }
    int n_out() const { return node_->n_out(); }
    Vec operator()(const Vec& x) const { return node_->eval(x); }
    Mat jac(const Vec& x) const { return node_->jac(x); }
    std::string describe() const { return node_ ? node_->describe() : "<null>"; }

    // factories are free functions below
    SmoothPtr ptr() const { return node_; }

  private:
    SmoothPtr node_;
};

namespace detail {

inline std::string fmt_num(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

class ExprFnNode final : public SmoothNode {
  public:
    ExprFnNode(std::vector<Expr> comps, std::vector<std::string> names)
        : exprs_(std::move(comps)), names_(std::move(names)) {
        for (const auto& e : exprs_) {
            bound_.emplace_back(e, names_);
            std::vector<BoundExpr> row;
            for (const auto& n : names_) row.emplace_back(e.diff(n), names_);
            dbound_.push_back(std::move(row));
        }
    }
    int n_in() const override { return (int)names_.size(); }
    int n_out() const override { return (int)exprs_.size(); }
    Vec eval(const Vec& x) const override {
        Vec v(n_out());
        for (int i = 0; i < n_out(); ++i) v[i] = bound_[i].eval(x);
        return v;
    }
    Mat jac(const Vec& x) const override {
        Mat j(n_out(), n_in());
        for (int i = 0; i < n_out(); ++i)
            for (int k = 0; k < n_in(); ++k) j(i, k) = dbound_[i][k].eval(x);
        return j;
    }
    std::string describe() const override {
        std::string s = "expr[";
        for (size_t i = 0; i < exprs_.size(); ++i) s += (i ? ";" : "") + exprs_[i].str();
        return s + "]";
    }
    const std::vector<Expr>& exprs() const { return exprs_; }
    const std::vector<std::string>& names() const { return names_; }

  private:
    std::vector<Expr> exprs_;
    std::vector<std::string> names_;
    std::vector<BoundExpr> bound_;
    std::vector<std::vector<BoundExpr>> dbound_;
};

class ConstNode final : public SmoothNode {
  public:
    ConstNode(Vec v, int nin) : v_(std::move(v)), nin_(nin) {}
    int n_in() const override { return nin_; }
    int n_out() const override { return (int)v_.size(); }
    Vec eval(const Vec&) const override { return v_; }
    Mat jac(const Vec&) const override { return Mat::Zero(v_.size(), nin_); }
    std::string describe() const override {
        std::string s = "const[";
        for (int i = 0; i < v_.size(); ++i) s += (i ? "," : "") + fmt_num(v_[i]);
        return s + "]";
    }

  private:
    Vec v_;
    int nin_;
};

class SelectNode final : public SmoothNode {
  public:
    SelectNode(std::vector<int> idx, int nin) : idx_(std::move(idx)), nin_(nin) {}
    int n_in() const override { return nin_; }
    int n_out() const override { return (int)idx_.size(); }
    Vec eval(const Vec& x) const override {
        Vec v(idx_.size());
        for (size_t i = 0; i < idx_.size(); ++i) v[i] = x[idx_[i]];
        return v;
    }
    Mat jac(const Vec&) const override {
        Mat j = Mat::Zero(idx_.size(), nin_);
        for (size_t i = 0; i < idx_.size(); ++i) j(i, idx_[i]) = 1.0;
        return j;
    }
    std::string describe() const override {
        std::string s = "select[";
        for (size_t i = 0; i < idx_.size(); ++i) s += (i ? "," : "") + std::to_string(idx_[i]);
        return s + "/" + std::to_string(nin_) + "]";
    }

  private:
    std::vector<int> idx_;
    int nin_;
};

class AffineNode final : public SmoothNode {
  public:
    AffineNode(Mat a, Vec b) : a_(std::move(a)), b_(std::move(b)) {}
    int n_in() const override { return (int)a_.cols(); }
    int n_out() const override { return (int)a_.rows(); }
    Vec eval(const Vec& x) const override { return a_ * x + b_; }
    Mat jac(const Vec&) const override { return a_; }
    std::string describe() const override {
        std::string s = "affine[";
        for (int r = 0; r < a_.rows(); ++r)
            for (int c = 0; c < a_.cols(); ++c) s += fmt_num(a_(r, c)) + ",";
        s += "|";
        for (int i = 0; i < b_.size(); ++i) s += fmt_num(b_[i]) + ",";
        return s + "]";
    }

  private:
    Mat a_;
    Vec b_;
};

class ComposeNode final : public SmoothNode {
  public:
    ComposeNode(Smooth f, Smooth g) : f_(std::move(f)), g_(std::move(g)) {}
    int n_in() const override { return g_.n_in(); }
    int n_out() const override { return f_.n_out(); }
    Vec eval(const Vec& x) const override { return f_(g_(x)); }
    Mat jac(const Vec& x) const override {
        Vec mid = g_(x);
        return f_.jac(mid) * g_.jac(x);
    }
    std::string describe() const override {
        return "compose(" + f_.describe() + "," + g_.describe() + ")";
    }

  private:
    Smooth f_, g_;
};

class ConcatNode final : public SmoothNode {
  public:
    explicit ConcatNode(std::vector<Smooth> fs) : fs_(std::move(fs)) {}
    int n_in() const override { return fs_[0].n_in(); }
    int n_out() const override {
        int m = 0;
        for (const auto& f : fs_) m += f.n_out();
        return m;
    }
    Vec eval(const Vec& x) const override {
        Vec v(n_out());
        int at = 0;
        for (const auto& f : fs_) {
            v.segment(at, f.n_out()) = f(x);
            at += f.n_out();
        }
        return v;
    }
    Mat jac(const Vec& x) const override {
        Mat j(n_out(), n_in());
        int at = 0;
        for (const auto& f : fs_) {
            j.middleRows(at, f.n_out()) = f.jac(x);
            at += f.n_out();
        }
        return j;
    }
    std::string describe() const override {
        std::string s = "concat(";
        for (size_t i = 0; i < fs_.size(); ++i) s += (i ? "," : "") + fs_[i].describe();
        return s + ")";
    }

  private:
    std::vector<Smooth> fs_;
};

class SumNode final : public SmoothNode {
  public:
    SumNode(std::vector<double> coef, std::vector<Smooth> fs)
        : coef_(std::move(coef)), fs_(std::move(fs)) {}
    int n_in() const override { return fs_[0].n_in(); }
    int n_out() const override { return fs_[0].n_out(); }
    Vec eval(const Vec& x) const override {
        Vec v = Vec::Zero(n_out());
        for (size_t i = 0; i < fs_.size(); ++i) v += coef_[i] * fs_[i](x);
        return v;
    }
    Mat jac(const Vec& x) const override {
        Mat j = Mat::Zero(n_out(), n_in());
        for (size_t i = 0; i < fs_.size(); ++i) j += coef_[i] * fs_[i].jac(x);
        return j;
    }
    std::string describe() const override {
        std::string s = "sum(";
        for (size_t i = 0; i < fs_.size(); ++i)
            s += (i ? "," : "") + fmt_num(coef_[i]) + "*" + fs_[i].describe();
        return s + ")";
    }

  private:
    std::vector<double> coef_;
    std::vector<Smooth> fs_;
};

class ScalarMulNode final : public SmoothNode {
  public:
    ScalarMulNode(Smooth s, Smooth v) : s_(std::move(s)), v_(std::move(v)) {}
    int n_in() const override { return v_.n_in(); }
    int n_out() const override { return v_.n_out(); }
    Vec eval(const Vec& x) const override { return s_(x)[0] * v_(x); }
    Mat jac(const Vec& x) const override {
        double sv = s_(x)[0];
        return sv * v_.jac(x) + v_(x) * s_.jac(x);
    }
    std::string describe() const override {
        return "smul(" + s_.describe() + "," + v_.describe() + ")";
    }

  private:
    Smooth s_, v_;  // s_ scalar, v_ vector
};

class ScalarQuotNode final : public SmoothNode {
  public:
    ScalarQuotNode(Smooth num, Smooth den) : n_(std::move(num)), d_(std::move(den)) {}
    int n_in() const override { return n_.n_in(); }
    int n_out() const override { return 1; }
    Vec eval(const Vec& x) const override {
        Vec v(1);
        v[0] = n_(x)[0] / d_(x)[0];
        return v;
    }
    Mat jac(const Vec& x) const override {
        double nv = n_(x)[0], dv = d_(x)[0];
        return (n_.jac(x) * dv - d_.jac(x) * nv) / (dv * dv);
    }
    std::string describe() const override {
        return "quot(" + n_.describe() + "," + d_.describe() + ")";
    }

  private:
    Smooth n_, d_;
};

// Polynomial box bump: prod_i ((t_i-a_i)(b_i-t_i))^k scaled to peak 1,
// zero outside. C^{k-1}; polynomial inside the support so Gauss-Legendre
// integrates it exactly.
class BumpBoxNode final : public SmoothNode {
  public:
    BumpBoxNode(Vec lo, Vec hi, int k) : lo_(std::move(lo)), hi_(std::move(hi)), k_(k) {}
    int n_in() const override { return (int)lo_.size(); }
    int n_out() const override { return 1; }
    Vec eval(const Vec& x) const override {
        Vec v(1);
        v[0] = 1.0;
        for (int i = 0; i < lo_.size(); ++i) {
            double f = factor(i, x[i]);
            if (f <= 0.0) { v[0] = 0.0; return v; }
            v[0] *= std::pow(f, k_);
        }
        return v;
    }
    Mat jac(const Vec& x) const override {
        Mat j = Mat::Zero(1, n_in());
        double total = eval(x)[0];
        if (total == 0.0) return j;
        for (int i = 0; i < lo_.size(); ++i) {
            double f = factor(i, x[i]);
            double df = dfactor(i, x[i]);
            j(0, i) = total * k_ * df / f;
        }
        return j;
    }
    std::string describe() const override {
        std::string s = "bump[k=" + std::to_string(k_);
        for (int i = 0; i < lo_.size(); ++i)
            s += ";" + fmt_num(lo_[i]) + ":" + fmt_num(hi_[i]);
        return s + "]";
    }

  private:
    double factor(int i, double t) const {
        double h = 0.5 * (hi_[i] - lo_[i]);
        return (t - lo_[i]) * (hi_[i] - t) / (h * h);
    }
    double dfactor(int i, double t) const {
        double h = 0.5 * (hi_[i] - lo_[i]);
        return (lo_[i] + hi_[i] - 2.0 * t) / (h * h);
    }
    Vec lo_, hi_;
    int k_;
};

// Radial shell bump in |x|^2: ((ro^2-r2)(r2-ri^2))^k scaled, zero outside.
// Invariant under any orthogonal action, so no symmetrization is needed.
class BumpShellNode final : public SmoothNode {
  public:
    BumpShellNode(int dim, double r_inner, double r_outer, int k)
        : dim_(dim), ri_(r_inner), ro_(r_outer), k_(k) {}
    int n_in() const override { return dim_; }
    int n_out() const override { return 1; }
    Vec eval(const Vec& x) const override {
        Vec v(1);
        double r2 = x.squaredNorm();
        double f = profile(r2);
        v[0] = f <= 0.0 ? 0.0 : std::pow(f, k_);
        return v;
    }
    Mat jac(const Vec& x) const override {
        Mat j = Mat::Zero(1, dim_);
        double r2 = x.squaredNorm();
        double f = profile(r2);
        if (f <= 0.0) return j;
        double dfdr2 = dprofile(r2);
        double c = k_ * std::pow(f, k_ - 1) * dfdr2;
        for (int i = 0; i < dim_; ++i) j(0, i) = c * 2.0 * x[i];
        return j;
    }
    std::string describe() const override {
        return "shellbump[d=" + std::to_string(dim_) + ";k=" + std::to_string(k_) + ";" +
               fmt_num(ri_) + ":" + fmt_num(ro_) + "]";
    }

  private:
    double profile(double r2) const {
        double s = 0.25 * (ro_ * ro_ - ri_ * ri_) * (ro_ * ro_ - ri_ * ri_);
        return (ro_ * ro_ - r2) * (ri_ < 0 ? 1.0 : (r2 - ri_ * ri_)) / (ri_ < 0 ? (ro_ * ro_) : s);
    }
    double dprofile(double r2) const {
        if (ri_ < 0) return -1.0 / (ro_ * ro_);
        double s = 0.25 * (ro_ * ro_ - ri_ * ri_) * (ro_ * ro_ - ri_ * ri_);
        return (ro_ * ro_ + ri_ * ri_ - 2.0 * r2) / s;
    }
    int dim_;
    double ri_, ro_;  // ri < 0 means solid ball
    int k_;
};

// out = M(x) * v(x) with M a matrix of expressions over the same input.
class ExprMatApplyNode final : public SmoothNode {
  public:
    ExprMatApplyNode(std::vector<std::vector<Expr>> m, std::vector<std::string> names, Smooth v,
                     bool invert)
        : exprs_(std::move(m)), names_(std::move(names)), v_(std::move(v)), invert_(invert) {
        for (const auto& row : exprs_) {
            std::vector<BoundExpr> brow;
            std::vector<std::vector<BoundExpr>> drow;
            for (const auto& e : row) {
                brow.emplace_back(e, names_);
                std::vector<BoundExpr> ds;
                for (const auto& n : names_) ds.emplace_back(e.diff(n), names_);
                drow.push_back(std::move(ds));
            }
            bound_.push_back(std::move(brow));
            dbound_.push_back(std::move(drow));
        }
    }
    int n_in() const override { return (int)names_.size(); }
    int n_out() const override { return invert_ ? (int)exprs_[0].size() : (int)exprs_.size(); }
    Vec eval(const Vec& x) const override {
        Mat m = mat_at(x);
        Vec w = v_(x);
        if (!invert_) return m * w;
        Vec out;
        if (!solve_square(m, w, out))
            throw VfcError(ErrCode::SINGULAR_NORMAL_DERIVATIVE, "singular fiber matrix");
        return out;
    }
    Mat jac(const Vec& x) const override {
        Mat m = mat_at(x);
        Vec w = v_(x);
        Mat jw = v_.jac(x);
        if (!invert_) {
            Mat j = m * jw;
            for (int c = 0; c < n_in(); ++c) j.col(c) += dmat_at(x, c) * w;
            return j;
        }
        Eigen::PartialPivLU<Mat> lu(m);
        Vec u = lu.solve(w);
        Mat j = lu.solve(jw);
        for (int c = 0; c < n_in(); ++c) j.col(c) -= lu.solve(dmat_at(x, c) * u);
        return j;
    }
    std::string describe() const override {
        std::string s = invert_ ? "matinv[" : "mat[";
        for (const auto& row : exprs_)
            for (const auto& e : row) s += e.str() + ",";
        return s + "](" + v_.describe() + ")";
    }

  private:
    Mat mat_at(const Vec& x) const {
        Mat m(exprs_.size(), exprs_[0].size());
        for (size_t r = 0; r < exprs_.size(); ++r)
            for (size_t c = 0; c < exprs_[r].size(); ++c) m(r, c) = bound_[r][c].eval(x);
        return m;
    }
    Mat dmat_at(const Vec& x, int wrt) const {
        Mat m(exprs_.size(), exprs_[0].size());
        for (size_t r = 0; r < exprs_.size(); ++r)
            for (size_t c = 0; c < exprs_[r].size(); ++c) m(r, c) = dbound_[r][c][wrt].eval(x);
        return m;
    }
    std::vector<std::vector<Expr>> exprs_;
    std::vector<std::string> names_;
    Smooth v_;
    bool invert_;
    std::vector<std::vector<BoundExpr>> bound_;
    std::vector<std::vector<std::vector<BoundExpr>>> dbound_;
};

// Extension by zero outside a guard predicate. Smooth as long as the wrapped
// function vanishes to sufficient order near the guard boundary (bump
// supports are nested inside overlaps by construction).
class GuardNode final : public SmoothNode {
  public:
    GuardNode(Smooth f, std::function<bool(const Vec&)> inside, std::string tag)
        : f_(std::move(f)), inside_(std::move(inside)), tag_(std::move(tag)) {}
    int n_in() const override { return f_.n_in(); }
    int n_out() const override { return f_.n_out(); }
    Vec eval(const Vec& x) const override {
        if (!inside_(x)) return Vec::Zero(n_out());
        return f_(x);
    }
    Mat jac(const Vec& x) const override {
        if (!inside_(x)) return Mat::Zero(n_out(), n_in());
        return f_.jac(x);
    }
    std::string describe() const override { return "guard[" + tag_ + "](" + f_.describe() + ")"; }

  private:
    Smooth f_;
    std::function<bool(const Vec&)> inside_;
    std::string tag_;
};

// Equivariant averaging: F(x) = (1/N) sum_g rho(g) f(g^{-1} x).
class SymmetrizeNode final : public SmoothNode {
  public:
    SymmetrizeNode(Smooth f, std::vector<Mat> gs, std::vector<Mat> reps)
        : f_(std::move(f)), gs_(std::move(gs)), reps_(std::move(reps)) {}
    int n_in() const override { return f_.n_in(); }
    int n_out() const override { return f_.n_out(); }
    Vec eval(const Vec& x) const override {
        Vec v = Vec::Zero(n_out());
        for (size_t i = 0; i < gs_.size(); ++i) v += reps_[i] * f_(gs_[i].transpose() * x);
        return v / double(gs_.size());
    }
    Mat jac(const Vec& x) const override {
        Mat j = Mat::Zero(n_out(), n_in());
        for (size_t i = 0; i < gs_.size(); ++i)
            j += reps_[i] * f_.jac(gs_[i].transpose() * x) * gs_[i].transpose();
        return j / double(gs_.size());
    }
    std::string describe() const override {
        return "symmetrize[" + std::to_string(gs_.size()) + "](" + f_.describe() + ")";
    }

  private:
    Smooth f_;
    std::vector<Mat> gs_;    // orthogonal input actions (inverse = transpose)
    std::vector<Mat> reps_;  // output representations
};

}  // namespace detail

// ---- factories -------------------------------------------------------------

inline Smooth smooth_expr(std::vector<Expr> comps, std::vector<std::string> names) {
    return Smooth(std::make_shared<detail::ExprFnNode>(std::move(comps), std::move(names)));
}

inline Smooth smooth_expr1(const Expr& e, std::vector<std::string> names) {
    return smooth_expr(std::vector<Expr>{e}, std::move(names));
}

inline Smooth smooth_const(Vec v, int n_in) {
    return Smooth(std::make_shared<detail::ConstNode>(std::move(v), n_in));
}

inline Smooth smooth_select(std::vector<int> idx, int n_in) {
    return Smooth(std::make_shared<detail::SelectNode>(std::move(idx), n_in));
}

inline Smooth smooth_identity(int n) {
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    return smooth_select(std::move(idx), n);
}

inline Smooth smooth_affine(Mat a, Vec b) {
    return Smooth(std::make_shared<detail::AffineNode>(std::move(a), std::move(b)));
}

inline Smooth smooth_linear(Mat a) {
    Vec b = Vec::Zero(a.rows());
    return smooth_affine(std::move(a), std::move(b));
}

inline Smooth compose(Smooth f, Smooth g) {
    return Smooth(std::make_shared<detail::ComposeNode>(std::move(f), std::move(g)));
}

inline Smooth smooth_concat(std::vector<Smooth> fs) {
    return Smooth(std::make_shared<detail::ConcatNode>(std::move(fs)));
}

inline Smooth smooth_sum(std::vector<double> coef, std::vector<Smooth> fs) {
    return Smooth(std::make_shared<detail::SumNode>(std::move(coef), std::move(fs)));
}

inline Smooth operator+(const Smooth& a, const Smooth& b) { return smooth_sum({1, 1}, {a, b}); }
inline Smooth operator-(const Smooth& a, const Smooth& b) { return smooth_sum({1, -1}, {a, b}); }

inline Smooth scalar_mul(Smooth scalar, Smooth vec) {
    return Smooth(std::make_shared<detail::ScalarMulNode>(std::move(scalar), std::move(vec)));
}

inline Smooth scalar_quot(Smooth num, Smooth den) {
    return Smooth(std::make_shared<detail::ScalarQuotNode>(std::move(num), std::move(den)));
}

inline Smooth bump_box(Vec lo, Vec hi, int k = 4) {
    return Smooth(std::make_shared<detail::BumpBoxNode>(std::move(lo), std::move(hi), k));
}

inline Smooth bump_ball(int dim, double radius, int k = 4) {
    return Smooth(std::make_shared<detail::BumpShellNode>(dim, -1.0, radius, k));
}

inline Smooth bump_shell(int dim, double r_inner, double r_outer, int k = 4) {
    return Smooth(std::make_shared<detail::BumpShellNode>(dim, r_inner, r_outer, k));
}

inline Smooth exprmat_apply(std::vector<std::vector<Expr>> m, std::vector<std::string> names,
                            Smooth v) {
    return Smooth(std::make_shared<detail::ExprMatApplyNode>(std::move(m), std::move(names),
                                                             std::move(v), false));
}

inline Smooth exprmat_solve(std::vector<std::vector<Expr>> m, std::vector<std::string> names,
                            Smooth v) {
    return Smooth(std::make_shared<detail::ExprMatApplyNode>(std::move(m), std::move(names),
                                                             std::move(v), true));
}

inline Smooth symmetrize(Smooth f, std::vector<Mat> gs, std::vector<Mat> reps) {
    return Smooth(
        std::make_shared<detail::SymmetrizeNode>(std::move(f), std::move(gs), std::move(reps)));
}

inline Smooth guard(Smooth f, std::function<bool(const Vec&)> inside, std::string tag) {
    return Smooth(
        std::make_shared<detail::GuardNode>(std::move(f), std::move(inside), std::move(tag)));
}

}  // namespace vfckit
