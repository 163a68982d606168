#pragma once

// Closed-form expression trees for weights and potentials.
//
// Grammar (EBNF, also documented in README):
//   expr    = term { ("+" | "-") term }
//   term    = factor { ("*" | "/") factor }
//   factor  = [ "-" | "+" ] power
//   power   = primary [ "^" factor ]            (right associative)
//   primary = number | "x" | "e" | "pi"
//           | ("abs"|"sgn"|"log"|"exp") "(" expr ")"
//           | "piecewise" "(" expr "," const "," expr { "," const "," expr } ")"
//           | "(" expr ")"
//
// piecewise(sel, b1, e1, b2, e2, ..., ek) evaluates the selector `sel`,
// then picks e1 if sel < b1, e2 if sel < b2, ..., ek otherwise.
// Breakpoints must be constant expressions and strictly increasing.

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rbp {

struct ParseError : std::runtime_error {
    std::size_t pos;
    ParseError(std::size_t p, const std::string& msg)
        : std::runtime_error("parse error at position " + std::to_string(p) + ": " + msg),
          pos(p) {}
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    enum class Kind {
        Constant,
        Var,
        Add,
        Sub,
        Mul,
        Div,
        Pow,
        Neg,
        Abs,
        Sgn,
        Log,
        Exp,
        Piecewise
    };

    Kind kind;
    double value = 0.0;                // Constant
    std::vector<ExprPtr> kids;         // operands; Piecewise: [selector, e1, ..., ek]
    std::vector<double> breaks;        // Piecewise breakpoints, size == kids.size()-2

    double eval(double x) const {
        switch (kind) {
            case Kind::Constant: return value;
            case Kind::Var: return x;
            case Kind::Add: return kids[0]->eval(x) + kids[1]->eval(x);
            case Kind::Sub: return kids[0]->eval(x) - kids[1]->eval(x);
            case Kind::Mul: return kids[0]->eval(x) * kids[1]->eval(x);
            case Kind::Div: return kids[0]->eval(x) / kids[1]->eval(x);
            case Kind::Pow: {
                double base = kids[0]->eval(x);
                double ex = kids[1]->eval(x);
                double ri = std::round(ex);
                if (ex == ri && std::abs(ri) <= 64) {
                    // integer powers keep the sign of negative bases
                    double p = 1.0, bb = base;
                    long n = static_cast<long>(ri);
                    bool inv = n < 0;
                    if (inv) n = -n;
                    while (n) {
                        if (n & 1) p *= bb;
                        bb *= bb;
                        n >>= 1;
                    }
                    return inv ? 1.0 / p : p;
                }
                return std::pow(base, ex);
            }
            case Kind::Neg: return -kids[0]->eval(x);
            case Kind::Abs: return std::abs(kids[0]->eval(x));
            case Kind::Sgn: {
                double v = kids[0]->eval(x);
                return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0);
            }
            case Kind::Log: return std::log(kids[0]->eval(x));
            case Kind::Exp: return std::exp(kids[0]->eval(x));
            case Kind::Piecewise: {
                double s = kids[0]->eval(x);
                for (std::size_t i = 0; i < breaks.size(); ++i)
                    if (s < breaks[i]) return kids[i + 1]->eval(x);
                return kids.back()->eval(x);
            }
        }
        return std::nan("");
    }
};

// -- construction helpers -----------------------------------------------------

inline ExprPtr make_node(Expr::Kind k, std::vector<ExprPtr> kids = {}, double v = 0.0,
                         std::vector<double> breaks = {}) {
    auto e = std::make_shared<Expr>();
    e->kind = k;
    e->value = v;
    e->kids = std::move(kids);
    e->breaks = std::move(breaks);
    return e;
}

inline ExprPtr constant(double v) { return make_node(Expr::Kind::Constant, {}, v); }
inline ExprPtr variable() { return make_node(Expr::Kind::Var); }
inline ExprPtr add(ExprPtr a, ExprPtr b) { return make_node(Expr::Kind::Add, {a, b}); }
inline ExprPtr sub(ExprPtr a, ExprPtr b) { return make_node(Expr::Kind::Sub, {a, b}); }
inline ExprPtr mul(ExprPtr a, ExprPtr b) { return make_node(Expr::Kind::Mul, {a, b}); }
inline ExprPtr div(ExprPtr a, ExprPtr b) { return make_node(Expr::Kind::Div, {a, b}); }
inline ExprPtr neg(ExprPtr a) { return make_node(Expr::Kind::Neg, {a}); }
inline ExprPtr piecewise(ExprPtr selector, std::vector<double> breaks,
                         std::vector<ExprPtr> branches) {
    std::vector<ExprPtr> kids;
    kids.push_back(selector);
    for (auto& b : branches) kids.push_back(b);
    return make_node(Expr::Kind::Piecewise, std::move(kids), 0.0, std::move(breaks));
}

// Replaces every occurrence of the variable by `replacement` (including
// piecewise selectors, so branch selection follows the substituted argument).
inline ExprPtr substitute(const ExprPtr& e, const ExprPtr& replacement) {
    if (e->kind == Expr::Kind::Var) return replacement;
    if (e->kids.empty()) return e;
    auto out = std::make_shared<Expr>(*e);
    for (auto& k : out->kids) k = substitute(k, replacement);
    return out;
}

// -- parser -------------------------------------------------------------------

namespace detail {

class Parser {
public:
    explicit Parser(std::string_view s) : src_(s) {}

    ExprPtr parse() {
        auto e = parse_expr();
        skip_ws();
        if (pos_ != src_.size()) throw ParseError(pos_, "unexpected trailing input");
        return e;
    }

private:
    std::string_view src_;
    std::size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }
    bool eat(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    void expect(char c) {
        if (!eat(c)) throw ParseError(pos_, std::string("expected '") + c + "'");
    }
    char peek() {
        skip_ws();
        return pos_ < src_.size() ? src_[pos_] : '\0';
    }

    ExprPtr parse_expr() {
        auto lhs = parse_term();
        for (;;) {
            if (eat('+'))
                lhs = add(lhs, parse_term());
            else if (eat('-'))
                lhs = sub(lhs, parse_term());
            else
                return lhs;
        }
    }

    ExprPtr parse_term() {
        auto lhs = parse_factor();
        for (;;) {
            if (eat('*'))
                lhs = mul(lhs, parse_factor());
            else if (eat('/'))
                lhs = div(lhs, parse_factor());
            else
                return lhs;
        }
    }

    ExprPtr parse_factor() {
        if (eat('-')) return neg(parse_factor());
        eat('+');
        return parse_power();
    }

    ExprPtr parse_power() {
        auto base = parse_primary();
        if (eat('^')) return make_node(Expr::Kind::Pow, {base, parse_factor()});
        return base;
    }

    ExprPtr parse_primary() {
        skip_ws();
        if (pos_ >= src_.size()) throw ParseError(pos_, "unexpected end of input");
        char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            auto e = parse_expr();
            expect(')');
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c))) return parse_ident();
        throw ParseError(pos_, std::string("unexpected character '") + c + "'");
    }

    ExprPtr parse_number() {
        const char* begin = src_.data() + pos_;
        char* end = nullptr;
        double v = std::strtod(begin, &end);
        if (end == begin) throw ParseError(pos_, "malformed number");
        pos_ += static_cast<std::size_t>(end - begin);
        return constant(v);
    }

    ExprPtr parse_ident() {
        std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        std::string_view name = src_.substr(start, pos_ - start);
        if (name == "x") return variable();
        if (name == "e") return constant(std::exp(1.0));
        if (name == "pi") return constant(std::acos(-1.0));
        Expr::Kind k;
        if (name == "abs")
            k = Expr::Kind::Abs;
        else if (name == "sgn")
            k = Expr::Kind::Sgn;
        else if (name == "log")
            k = Expr::Kind::Log;
        else if (name == "exp")
            k = Expr::Kind::Exp;
        else if (name == "piecewise")
            return parse_piecewise(start);
        else
            throw ParseError(start, "unknown identifier '" + std::string(name) + "'");
        expect('(');
        auto arg = parse_expr();
        expect(')');
        return make_node(k, {arg});
    }

    ExprPtr parse_piecewise(std::size_t start) {
        expect('(');
        std::vector<ExprPtr> args;
        args.push_back(parse_expr());
        while (eat(',')) args.push_back(parse_expr());
        expect(')');
        // args = sel, b1, e1, b2, e2, ..., ek  -> need odd count >= 4? sel + pairs + last
        if (args.size() < 4 || args.size() % 2 != 0)
            throw ParseError(start, "piecewise needs selector, (break, expr) pairs and a final expr");
        ExprPtr sel = args[0];
        std::vector<double> breaks;
        std::vector<ExprPtr> branches;
        for (std::size_t i = 1; i + 1 < args.size(); i += 2) {
            double b = fold_constant(args[i], start);
            if (!breaks.empty() && b <= breaks.back())
                throw ParseError(start, "piecewise breakpoints must be strictly increasing");
            breaks.push_back(b);
            branches.push_back(args[i + 1]);
        }
        branches.push_back(args.back());
        return piecewise(sel, std::move(breaks), std::move(branches));
    }

    static double fold_constant(const ExprPtr& e, std::size_t pos) {
        double v0 = e->eval(0.123456), v1 = e->eval(0.654321);
        if (v0 != v1 || !std::isfinite(v0))
            throw ParseError(pos, "piecewise breakpoint must be a finite constant");
        return v0;
    }
};

}  // namespace detail

inline ExprPtr parse_expr(std::string_view text) { return detail::Parser(text).parse(); }

// -- printer ------------------------------------------------------------------

namespace detail {

inline void print_expr(const Expr& e, std::string& out);

inline void print_child(const Expr& e, std::string& out, bool parens) {
    if (parens) out += '(';
    print_expr(e, out);
    if (parens) out += ')';
}

inline int precedence(Expr::Kind k) {
    switch (k) {
        case Expr::Kind::Add:
        case Expr::Kind::Sub: return 1;
        case Expr::Kind::Mul:
        case Expr::Kind::Div: return 2;
        case Expr::Kind::Neg: return 3;
        case Expr::Kind::Pow: return 4;
        default: return 5;
    }
}

inline void print_expr(const Expr& e, std::string& out) {
    auto binary = [&](const char* op) {
        int p = precedence(e.kind);
        print_child(*e.kids[0], out, precedence(e.kids[0]->kind) < p);
        out += op;
        // right operand of -,/ needs parens at equal precedence
        print_child(*e.kids[1], out, precedence(e.kids[1]->kind) <= p);
    };
    switch (e.kind) {
        case Expr::Kind::Constant: {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", e.value);
            if (e.value < 0) {
                out += '(';
                out += buf;
                out += ')';
            } else {
                out += buf;
            }
            return;
        }
        case Expr::Kind::Var: out += 'x'; return;
        case Expr::Kind::Add: binary("+"); return;
        case Expr::Kind::Sub: binary("-"); return;
        case Expr::Kind::Mul: binary("*"); return;
        case Expr::Kind::Div: binary("/"); return;
        case Expr::Kind::Pow: binary("^"); return;
        case Expr::Kind::Neg:
            out += '-';
            print_child(*e.kids[0], out, precedence(e.kids[0]->kind) <= precedence(Expr::Kind::Neg));
            return;
        case Expr::Kind::Abs:
        case Expr::Kind::Sgn:
        case Expr::Kind::Log:
        case Expr::Kind::Exp: {
            const char* name = e.kind == Expr::Kind::Abs   ? "abs"
                               : e.kind == Expr::Kind::Sgn ? "sgn"
                               : e.kind == Expr::Kind::Log ? "log"
                                                           : "exp";
            out += name;
            out += '(';
            print_expr(*e.kids[0], out);
            out += ')';
            return;
        }
        case Expr::Kind::Piecewise: {
            out += "piecewise(";
            print_expr(*e.kids[0], out);
            for (std::size_t i = 0; i < e.breaks.size(); ++i) {
                char buf[40];
                std::snprintf(buf, sizeof buf, "%.17g", e.breaks[i]);
                out += ',';
                out += buf;
                out += ',';
                print_expr(*e.kids[i + 1], out);
            }
            out += ',';
            print_expr(*e.kids.back(), out);
            out += ')';
            return;
        }
    }
}

}  // namespace detail

inline std::string to_string(const ExprPtr& e) {
    std::string out;
    detail::print_expr(*e, out);
    return out;
}

}  // namespace rbp
