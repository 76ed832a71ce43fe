#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "vfckit/errors.hpp"
#include "vfckit/linalg.hpp"

namespace vfckit {

// Scenario expression language: variables are named identifiers (y1..yn,
// w1..wk, t, eps), operators + - * / ^ and sin/cos/exp. The operator set is
// closed under symbolic differentiation; abs and friends are rejected at
// parse time as non-smooth.

enum class ExOp { Const, Var, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Exp };

struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
    ExOp op;
    double value = 0.0;      // Const
    std::string name;        // Var
    ExprPtr a, b;

    ExprNode(ExOp o, ExprPtr x, ExprPtr y) : op(o), a(std::move(x)), b(std::move(y)) {}
    explicit ExprNode(double v) : op(ExOp::Const), value(v) {}
    explicit ExprNode(std::string n) : op(ExOp::Var), name(std::move(n)) {}
};

class Expr {
  public:
    Expr() : node_(std::make_shared<ExprNode>(0.0)) {}
    explicit Expr(ExprPtr n) : node_(std::move(n)) {}
    explicit Expr(double v) : node_(std::make_shared<ExprNode>(v)) {}

    static Expr constant(double v) { return Expr(v); }
    static Expr var(const std::string& name) { return Expr(std::make_shared<ExprNode>(name)); }

    const ExprNode& node() const { return *node_; }
    ExprPtr ptr() const { return node_; }

    bool is_const() const { return node_->op == ExOp::Const; }
    double const_value() const { return node_->value; }

    friend Expr operator+(const Expr& x, const Expr& y) { return make(ExOp::Add, x, y); }
    friend Expr operator-(const Expr& x, const Expr& y) { return make(ExOp::Sub, x, y); }
    friend Expr operator*(const Expr& x, const Expr& y) { return make(ExOp::Mul, x, y); }
    friend Expr operator/(const Expr& x, const Expr& y) { return make(ExOp::Div, x, y); }
    Expr operator-() const { return make(ExOp::Neg, *this, Expr(ExprPtr())); }
    Expr pow(double e) const { return make(ExOp::Pow, *this, Expr(e)); }
    static Expr sin(const Expr& x) { return make(ExOp::Sin, x, Expr(ExprPtr())); }
    static Expr cos(const Expr& x) { return make(ExOp::Cos, x, Expr(ExprPtr())); }
    static Expr exp(const Expr& x) { return make(ExOp::Exp, x, Expr(ExprPtr())); }

    double eval(const std::map<std::string, double>& env) const { return eval_node(node_, env); }

    Expr diff(const std::string& v) const { return Expr(diff_node(node_, v)); }

    Expr substitute(const std::map<std::string, Expr>& sub) const {
        return Expr(subst_node(node_, sub));
    }

    void collect_vars(std::vector<std::string>& out) const { collect(node_, out); }

    std::string str() const {
        std::ostringstream os;
        print(node_, os, 0);
        return os.str();
    }

  private:
    ExprPtr node_;

    static Expr make(ExOp op, const Expr& x, const Expr& y) {
        // Light folding keeps derived expressions readable and deterministic.
        const ExprNode* xn = x.node_.get();
        const ExprNode* yn = y.node_ ? y.node_.get() : nullptr;
        auto cval = [](const ExprNode* n) { return n && n->op == ExOp::Const; };
        switch (op) {
            case ExOp::Add:
                if (cval(xn) && cval(yn)) return Expr(xn->value + yn->value);
                if (cval(xn) && xn->value == 0.0) return y;
                if (cval(yn) && yn->value == 0.0) return x;
                break;
            case ExOp::Sub:
                if (cval(xn) && cval(yn)) return Expr(xn->value - yn->value);
                if (cval(yn) && yn->value == 0.0) return x;
                break;
            case ExOp::Mul:
                if (cval(xn) && cval(yn)) return Expr(xn->value * yn->value);
                if ((cval(xn) && xn->value == 0.0) || (cval(yn) && yn->value == 0.0))
                    return Expr(0.0);
                if (cval(xn) && xn->value == 1.0) return y;
                if (cval(yn) && yn->value == 1.0) return x;
                break;
            case ExOp::Div:
                if (cval(xn) && xn->value == 0.0) return Expr(0.0);
                if (cval(yn) && yn->value == 1.0) return x;
                break;
            case ExOp::Pow:
                if (cval(yn) && yn->value == 1.0) return x;
                if (cval(yn) && yn->value == 0.0) return Expr(1.0);
                if (cval(xn) && cval(yn)) return Expr(std::pow(xn->value, yn->value));
                break;
            case ExOp::Neg:
                if (cval(xn)) return Expr(-xn->value);
                break;
            default:
                break;
        }
        return Expr(std::make_shared<ExprNode>(op, x.node_, y.node_));
    }

    static double eval_node(const ExprPtr& n, const std::map<std::string, double>& env) {
        switch (n->op) {
            case ExOp::Const: return n->value;
            case ExOp::Var: {
                auto it = env.find(n->name);
                if (it == env.end())
                    throw VfcError(ErrCode::TYPE_ERROR, "unbound variable " + n->name);
                return it->second;
            }
            case ExOp::Add: return eval_node(n->a, env) + eval_node(n->b, env);
            case ExOp::Sub: return eval_node(n->a, env) - eval_node(n->b, env);
            case ExOp::Mul: return eval_node(n->a, env) * eval_node(n->b, env);
            case ExOp::Div: return eval_node(n->a, env) / eval_node(n->b, env);
            case ExOp::Pow: return std::pow(eval_node(n->a, env), eval_node(n->b, env));
            case ExOp::Neg: return -eval_node(n->a, env);
            case ExOp::Sin: return std::sin(eval_node(n->a, env));
            case ExOp::Cos: return std::cos(eval_node(n->a, env));
            case ExOp::Exp: return std::exp(eval_node(n->a, env));
        }
        return 0.0;
    }

    static ExprPtr diff_node(const ExprPtr& n, const std::string& v) {
        Expr a = n->a ? Expr(n->a) : Expr(0.0);
        Expr b = n->b ? Expr(n->b) : Expr(0.0);
        switch (n->op) {
            case ExOp::Const: return Expr(0.0).ptr();
            case ExOp::Var: return Expr(n->name == v ? 1.0 : 0.0).ptr();
            case ExOp::Add: return (Expr(diff_node(n->a, v)) + Expr(diff_node(n->b, v))).ptr();
            case ExOp::Sub: return (Expr(diff_node(n->a, v)) - Expr(diff_node(n->b, v))).ptr();
            case ExOp::Mul:
                return (Expr(diff_node(n->a, v)) * b + a * Expr(diff_node(n->b, v))).ptr();
            case ExOp::Div:
                return ((Expr(diff_node(n->a, v)) * b - a * Expr(diff_node(n->b, v))) /
                        (b * b)).ptr();
            case ExOp::Pow: {
                if (n->b->op != ExOp::Const)
                    throw VfcError(ErrCode::TYPE_ERROR, "non-constant exponent in ^");
                double c = n->b->value;
                return (Expr(c) * a.pow(c - 1.0) * Expr(diff_node(n->a, v))).ptr();
            }
            case ExOp::Neg: return (-Expr(diff_node(n->a, v))).ptr();
            case ExOp::Sin: return (Expr::cos(a) * Expr(diff_node(n->a, v))).ptr();
            case ExOp::Cos: return (-Expr::sin(a) * Expr(diff_node(n->a, v))).ptr();
            case ExOp::Exp: return (Expr::exp(a) * Expr(diff_node(n->a, v))).ptr();
        }
        return Expr(0.0).ptr();
    }

    static ExprPtr subst_node(const ExprPtr& n, const std::map<std::string, Expr>& sub) {
        switch (n->op) {
            case ExOp::Const: return n;
            case ExOp::Var: {
                auto it = sub.find(n->name);
                return it == sub.end() ? n : it->second.ptr();
            }
            default: {
                Expr a = n->a ? Expr(subst_node(n->a, sub)) : Expr(ExprPtr());
                Expr b = n->b ? Expr(subst_node(n->b, sub)) : Expr(ExprPtr());
                switch (n->op) {
                    case ExOp::Add: return (a + b).ptr();
                    case ExOp::Sub: return (a - b).ptr();
                    case ExOp::Mul: return (a * b).ptr();
                    case ExOp::Div: return (a / b).ptr();
                    case ExOp::Pow: return make(ExOp::Pow, a, b).ptr();
                    case ExOp::Neg: return (-a).ptr();
                    case ExOp::Sin: return Expr::sin(a).ptr();
                    case ExOp::Cos: return Expr::cos(a).ptr();
                    case ExOp::Exp: return Expr::exp(a).ptr();
                    default: return n;
                }
            }
        }
    }

    static void collect(const ExprPtr& n, std::vector<std::string>& out) {
        if (n->op == ExOp::Var) {
            for (const auto& s : out)
                if (s == n->name) return;
            out.push_back(n->name);
            return;
        }
        if (n->a) collect(n->a, out);
        if (n->b) collect(n->b, out);
    }

    static void print(const ExprPtr& n, std::ostringstream& os, int parent_prec) {
        auto paren = [&](int prec, auto&& body) {
            bool need = prec < parent_prec;
            if (need) os << "(";
            body();
            if (need) os << ")";
        };
        switch (n->op) {
            case ExOp::Const: {
                std::ostringstream t;
                t.precision(17);
                t << n->value;
                std::string s = t.str();
                if (n->value < 0) { os << "(" << s << ")"; } else os << s;
                break;
            }
            case ExOp::Var: os << n->name; break;
            case ExOp::Add:
                paren(1, [&] { print(n->a, os, 1); os << "+"; print(n->b, os, 1); });
                break;
            case ExOp::Sub:
                paren(1, [&] { print(n->a, os, 1); os << "-"; print(n->b, os, 2); });
                break;
            case ExOp::Mul:
                paren(2, [&] { print(n->a, os, 2); os << "*"; print(n->b, os, 2); });
                break;
            case ExOp::Div:
                paren(2, [&] { print(n->a, os, 2); os << "/"; print(n->b, os, 3); });
                break;
            case ExOp::Pow:
                paren(3, [&] { print(n->a, os, 4); os << "^"; print(n->b, os, 4); });
                break;
            case ExOp::Neg:
                os << "(-";
                print(n->a, os, 3);
                os << ")";
                break;
            case ExOp::Sin: os << "sin("; print(n->a, os, 0); os << ")"; break;
            case ExOp::Cos: os << "cos("; print(n->a, os, 0); os << ")"; break;
            case ExOp::Exp: os << "exp("; print(n->a, os, 0); os << ")"; break;
        }
    }
};

// ---------------------------------------------------------------------------
// Parser

class ExprParser {
  public:
    // `allowed` restricts variable names; empty list admits any identifier
    // (the caller validates later).
    static Expr parse(const std::string& text, const std::vector<std::string>& allowed = {}) {
        ExprParser p(text, allowed);
        Expr e = p.parse_sum();
        p.skip_ws();
        if (p.pos_ < p.text_.size()) p.fail("unexpected trailing input");
        return e;
    }

  private:
    ExprParser(const std::string& t, const std::vector<std::string>& allowed)
        : text_(t), allowed_(allowed) {}

    const std::string& text_;
    const std::vector<std::string>& allowed_;
    size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& msg) {
        int line = 1, col = 1;
        for (size_t i = 0; i < pos_ && i < text_.size(); ++i) {
            if (text_[i] == '\n') { ++line; col = 1; } else ++col;
        }
        throw VfcError(ErrCode::PARSE_ERROR, msg + " at line " + std::to_string(line) +
                                                 ", column " + std::to_string(col));
    }

    void skip_ws() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) { ++pos_; return true; }
        return false;
    }

    Expr parse_sum() {
        Expr e = parse_term();
        while (true) {
            if (eat('+')) e = e + parse_term();
            else if (eat('-')) e = e - parse_term();
            else return e;
        }
    }

    Expr parse_term() {
        Expr e = parse_power();
        while (true) {
            if (eat('*')) e = e * parse_power();
            else if (eat('/')) e = e / parse_power();
            else return e;
        }
    }

    Expr parse_power() {
        Expr base = parse_unary();
        if (eat('^')) {
            Expr exponent = parse_unary();
            if (!exponent.is_const()) fail("exponent must be a numeric constant");
            return base.pow(exponent.const_value());
        }
        return base;
    }

    Expr parse_unary() {
        if (eat('-')) return -parse_unary();
        if (eat('+')) return parse_unary();
        return parse_primary();
    }

    Expr parse_primary() {
        skip_ws();
        if (pos_ >= text_.size()) fail("unexpected end of expression");
        char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            Expr e = parse_sum();
            if (!eat(')')) fail("missing )");
            return e;
        }
        if (std::isdigit((unsigned char)c) || c == '.') return parse_number();
        if (std::isalpha((unsigned char)c) || c == '_') return parse_ident();
        fail(std::string("unexpected character '") + c + "'");
    }

    Expr parse_number() {
        size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isdigit((unsigned char)text_[pos_]) || text_[pos_] == '.' ||
                text_[pos_] == 'e' || text_[pos_] == 'E' ||
                ((text_[pos_] == '+' || text_[pos_] == '-') && pos_ > start &&
                 (text_[pos_ - 1] == 'e' || text_[pos_ - 1] == 'E'))))
            ++pos_;
        try {
            return Expr(std::stod(text_.substr(start, pos_ - start)));
        } catch (...) {
            fail("malformed number");
        }
    }

    Expr parse_ident() {
        size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum((unsigned char)text_[pos_]) || text_[pos_] == '_'))
            ++pos_;
        std::string name = text_.substr(start, pos_ - start);
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == '(') {
            ++pos_;
            Expr arg = parse_sum();
            if (!eat(')')) fail("missing ) after " + name);
            if (name == "sin") return Expr::sin(arg);
            if (name == "cos") return Expr::cos(arg);
            if (name == "exp") return Expr::exp(arg);
            if (name == "abs") {
                pos_ = start;
                throw VfcError(ErrCode::TYPE_ERROR, "abs is not smooth and is forbidden");
            }
            pos_ = start;
            throw VfcError(ErrCode::TYPE_ERROR, "unknown function " + name);
        }
        if (!allowed_.empty()) {
            bool ok = false;
            for (const auto& a : allowed_)
                if (a == name) { ok = true; break; }
            if (!ok) {
                pos_ = start;
                throw VfcError(ErrCode::TYPE_ERROR, "unknown variable " + name);
            }
        }
        return Expr::var(name);
    }
};

// ---------------------------------------------------------------------------
// Bound expressions: variables resolved against a fixed name list so repeated
// evaluation in Newton/quadrature loops avoids map lookups.

class BoundExpr {
  public:
    BoundExpr() = default;
    BoundExpr(const Expr& e, const std::vector<std::string>& names) : expr_(e), names_(names) {
        std::vector<std::string> used;
        e.collect_vars(used);
        for (const auto& u : used) {
            bool found = false;
            for (const auto& n : names)
                if (n == u) { found = true; break; }
            if (!found) throw VfcError(ErrCode::TYPE_ERROR, "unknown variable " + u);
        }
        compile(e.ptr());
    }

    double eval(const Vec& x) const {
        stack_.clear();
        for (const auto& ins : prog_) {
            switch (ins.op) {
                case ExOp::Const: stack_.push_back(ins.value); break;
                case ExOp::Var: stack_.push_back(x[ins.index]); break;
                case ExOp::Neg: stack_.back() = -stack_.back(); break;
                case ExOp::Sin: stack_.back() = std::sin(stack_.back()); break;
                case ExOp::Cos: stack_.back() = std::cos(stack_.back()); break;
                case ExOp::Exp: stack_.back() = std::exp(stack_.back()); break;
                default: {
                    double b = stack_.back();
                    stack_.pop_back();
                    double& a = stack_.back();
                    switch (ins.op) {
                        case ExOp::Add: a += b; break;
                        case ExOp::Sub: a -= b; break;
                        case ExOp::Mul: a *= b; break;
                        case ExOp::Div: a /= b; break;
                        case ExOp::Pow: a = std::pow(a, b); break;
                        default: break;
                    }
                }
            }
        }
        return stack_.back();
    }

    const Expr& expr() const { return expr_; }
    const std::vector<std::string>& names() const { return names_; }

  private:
    struct Ins {
        ExOp op;
        double value = 0.0;
        int index = -1;
    };

    void compile(const ExprPtr& n) {
        switch (n->op) {
            case ExOp::Const: prog_.push_back({ExOp::Const, n->value, -1}); break;
            case ExOp::Var: {
                int idx = -1;
                for (int i = 0; i < (int)names_.size(); ++i)
                    if (names_[i] == n->name) { idx = i; break; }
                prog_.push_back({ExOp::Var, 0.0, idx});
                break;
            }
            default:
                compile(n->a);
                if (n->b) compile(n->b);
                prog_.push_back({n->op, 0.0, -1});
        }
    }

    Expr expr_;
    std::vector<std::string> names_;
    std::vector<Ins> prog_;
    mutable std::vector<double> stack_;
};

// Standard variable name lists.
inline std::vector<std::string> coord_names(int n, const std::string& prefix = "y") {
    std::vector<std::string> v;
    for (int i = 1; i <= n; ++i) v.push_back(prefix + std::to_string(i));
    return v;
}

}  // namespace vfckit
