#include "gelfand/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <vector>

namespace gelfand::expr {

Expr constant(double c) {
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Constant;
    n->value = c;
    return n;
}

Expr variable() {
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Variable;
    return n;
}

Expr make(NodeKind kind, Expr lhs, Expr rhs) {
    auto n = std::make_shared<Node>();
    n->kind = kind;
    n->lhs = std::move(lhs);
    n->rhs = std::move(rhs);
    return n;
}

// ---------------------------------------------------------------- parsing

namespace {

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    Expr run() {
        skip_ws();
        if (pos_ >= text_.size())
            throw ParseError("empty input", 0);
        Expr e = parse_expr();
        skip_ws();
        if (pos_ < text_.size())
            throw ParseError("unexpected trailing input", pos_);
        return e;
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    bool accept(char c) {
        if (peek() == c) { ++pos_; return true; }
        return false;
    }

    Expr parse_expr() {
        Expr e = parse_term();
        for (;;) {
            if (accept('+')) e = make(NodeKind::Add, e, parse_term());
            else if (accept('-')) e = make(NodeKind::Sub, e, parse_term());
            else return e;
        }
    }

    Expr parse_term() {
        Expr e = parse_unary();
        for (;;) {
            if (accept('*')) e = make(NodeKind::Mul, e, parse_unary());
            else if (accept('/')) e = make(NodeKind::Div, e, parse_unary());
            else return e;
        }
    }

    Expr parse_unary() {
        if (accept('-')) {
            Expr e = parse_unary();
            if (e->kind == NodeKind::Constant) return constant(-e->value);
            return make(NodeKind::Sub, constant(0.0), e);
        }
        return parse_power();
    }

    Expr parse_power() {
        Expr base = parse_atom();
        if (accept('^')) return make(NodeKind::Pow, base, parse_unary());
        return base;
    }

    Expr parse_atom() {
        skip_ws();
        if (pos_ >= text_.size())
            throw ParseError("unexpected end of input", pos_);
        char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
            return parse_number();
        if (c == '(') {
            ++pos_;
            Expr e = parse_expr();
            if (!accept(')'))
                throw ParseError("expected ')'", pos_);
            return e;
        }
        if (std::isalpha(static_cast<unsigned char>(c)))
            return parse_identifier();
        throw ParseError(std::string("unexpected character '") + c + "'", pos_);
    }

    Expr parse_number() {
        const char* begin = text_.data() + pos_;
        char* end = nullptr;
        // text_ views a NUL-terminated buffer (parse() copies), so strtod is safe
        double v = std::strtod(begin, &end);
        if (end == begin)
            throw ParseError("malformed number", pos_);
        pos_ += static_cast<std::size_t>(end - begin);
        return constant(v);
    }

    Expr parse_identifier() {
        std::size_t start = pos_;
        while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        std::string_view name = text_.substr(start, pos_ - start);
        if (name == "u") return variable();
        if (name == "exp" || name == "log") {
            if (!accept('('))
                throw ParseError("expected '(' after function name", pos_);
            Expr arg = parse_expr();
            if (!accept(')'))
                throw ParseError("expected ')'", pos_);
            return make(name == "exp" ? NodeKind::Exp : NodeKind::Log, arg);
        }
        throw ParseError("unknown identifier '" + std::string(name) + "'", start);
    }
};

}  // namespace

Expr parse(std::string_view text) {
    std::string owned(text);   // guarantee NUL termination for strtod
    return Parser(owned).run();
}

// ----------------------------------------------------------- simplification

namespace {

bool is_const(const Expr& e, double v) {
    return e->kind == NodeKind::Constant && e->value == v;
}

}  // namespace

Expr simplify(const Expr& e) {
    switch (e->kind) {
    case NodeKind::Constant:
    case NodeKind::Variable:
        return e;
    case NodeKind::Exp: {
        Expr a = simplify(e->lhs);
        if (a->kind == NodeKind::Constant) return constant(std::exp(a->value));
        return make(NodeKind::Exp, a);
    }
    case NodeKind::Log: {
        Expr a = simplify(e->lhs);
        if (a->kind == NodeKind::Constant) {
            if (a->value <= 0.0)
                throw EvalError("log of non-positive constant in expression");
            return constant(std::log(a->value));
        }
        if (a->kind == NodeKind::Exp) return a->lhs;
        return make(NodeKind::Log, a);
    }
    default:
        break;
    }

    Expr a = simplify(e->lhs);
    Expr b = simplify(e->rhs);
    if (a->kind == NodeKind::Constant && b->kind == NodeKind::Constant) {
        switch (e->kind) {
        case NodeKind::Add: return constant(a->value + b->value);
        case NodeKind::Sub: return constant(a->value - b->value);
        case NodeKind::Mul: return constant(a->value * b->value);
        case NodeKind::Div:
            if (b->value == 0.0) throw EvalError("statically zero denominator");
            return constant(a->value / b->value);
        case NodeKind::Pow: return constant(std::pow(a->value, b->value));
        default: break;
        }
    }
    switch (e->kind) {
    case NodeKind::Add:
        if (is_const(a, 0.0)) return b;
        if (is_const(b, 0.0)) return a;
        break;
    case NodeKind::Sub:
        if (is_const(b, 0.0)) return a;
        break;
    case NodeKind::Mul:
        if (is_const(a, 0.0) || is_const(b, 0.0)) return constant(0.0);
        if (is_const(a, 1.0)) return b;
        if (is_const(b, 1.0)) return a;
        break;
    case NodeKind::Div:
        if (is_const(b, 0.0)) throw EvalError("statically zero denominator");
        if (is_const(a, 0.0)) return constant(0.0);
        if (is_const(b, 1.0)) return a;
        break;
    case NodeKind::Pow:
        if (is_const(b, 1.0)) return a;
        if (is_const(b, 0.0)) return constant(1.0);
        if (is_const(a, 1.0)) return constant(1.0);
        break;
    default:
        break;
    }
    return make(e->kind, a, b);
}

// ----------------------------------------------------------- differentiation

namespace {

Expr diff(const Expr& e) {
    switch (e->kind) {
    case NodeKind::Constant: return constant(0.0);
    case NodeKind::Variable: return constant(1.0);
    case NodeKind::Add: return make(NodeKind::Add, diff(e->lhs), diff(e->rhs));
    case NodeKind::Sub: return make(NodeKind::Sub, diff(e->lhs), diff(e->rhs));
    case NodeKind::Mul:
        return make(NodeKind::Add,
                    make(NodeKind::Mul, diff(e->lhs), e->rhs),
                    make(NodeKind::Mul, e->lhs, diff(e->rhs)));
    case NodeKind::Div:
        // (a/b)' = (a'b - ab') / b^2
        return make(NodeKind::Div,
                    make(NodeKind::Sub,
                         make(NodeKind::Mul, diff(e->lhs), e->rhs),
                         make(NodeKind::Mul, e->lhs, diff(e->rhs))),
                    make(NodeKind::Pow, e->rhs, constant(2.0)));
    case NodeKind::Pow:
        if (e->rhs->kind == NodeKind::Constant) {
            // c * a^(c-1) * a'
            double c = e->rhs->value;
            return make(NodeKind::Mul,
                        make(NodeKind::Mul, constant(c),
                             make(NodeKind::Pow, e->lhs, constant(c - 1.0))),
                        diff(e->lhs));
        }
        // a^b * (b' log a + b a'/a)
        return make(NodeKind::Mul, make(NodeKind::Pow, e->lhs, e->rhs),
                    make(NodeKind::Add,
                         make(NodeKind::Mul, diff(e->rhs), make(NodeKind::Log, e->lhs)),
                         make(NodeKind::Div, make(NodeKind::Mul, e->rhs, diff(e->lhs)), e->lhs)));
    case NodeKind::Exp:
        return make(NodeKind::Mul, diff(e->lhs), make(NodeKind::Exp, e->lhs));
    case NodeKind::Log:
        return make(NodeKind::Div, diff(e->lhs), e->lhs);
    }
    throw EvalError("malformed expression tree");
}

}  // namespace

Expr differentiate(const Expr& e) {
    return simplify(diff(e));
}

// ----------------------------------------------------------------- printing

namespace {

// shortest decimal that round-trips through strtod
std::string format_double(double v) {
    char buf[64];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

// precedence: Add/Sub 1, Mul/Div 2, Pow 3, atoms 4
int precedence(const Expr& e) {
    switch (e->kind) {
    case NodeKind::Add:
    case NodeKind::Sub: return 1;
    case NodeKind::Mul:
    case NodeKind::Div: return 2;
    case NodeKind::Pow: return 3;
    default: return 4;
    }
}

void print(const Expr& e, int parent_prec, std::string& out) {
    // negative constants act like unary minus: parenthesize below Mul level
    if (e->kind == NodeKind::Constant) {
        bool paren = e->value < 0.0 && parent_prec >= 3;
        if (paren) out += '(';
        out += format_double(e->value);
        if (paren) out += ')';
        return;
    }
    if (e->kind == NodeKind::Variable) { out += 'u'; return; }
    if (e->kind == NodeKind::Exp || e->kind == NodeKind::Log) {
        out += e->kind == NodeKind::Exp ? "exp(" : "log(";
        print(e->lhs, 0, out);
        out += ')';
        return;
    }

    int prec = precedence(e);
    // unary minus shorthand for 0 - x, binds like Add/Sub
    if (e->kind == NodeKind::Sub && is_const(e->lhs, 0.0)) {
        bool paren = parent_prec >= 2;
        if (paren) out += '(';
        out += '-';
        print(e->rhs, 2, out);
        if (paren) out += ')';
        return;
    }
    bool paren = prec < parent_prec;
    if (paren) out += '(';
    switch (e->kind) {
    case NodeKind::Add:
        print(e->lhs, prec, out); out += " + "; print(e->rhs, prec + 1, out);
        break;
    case NodeKind::Sub:
        print(e->lhs, prec, out); out += " - "; print(e->rhs, prec + 1, out);
        break;
    case NodeKind::Mul:
        print(e->lhs, prec, out); out += "*"; print(e->rhs, prec + 1, out);
        break;
    case NodeKind::Div:
        print(e->lhs, prec, out); out += "/"; print(e->rhs, prec + 1, out);
        break;
    case NodeKind::Pow:
        print(e->lhs, 4, out); out += "^"; print(e->rhs, prec, out);
        break;
    default:
        break;
    }
    if (paren) out += ')';
}

}  // namespace

std::string to_string(const Expr& e) {
    std::string out;
    print(e, 0, out);
    return out;
}

bool structurally_equal(const Expr& a, const Expr& b) {
    if (a.get() == b.get()) return true;
    if (a->kind != b->kind) return false;
    switch (a->kind) {
    case NodeKind::Constant: return a->value == b->value;
    case NodeKind::Variable: return true;
    case NodeKind::Exp:
    case NodeKind::Log: return structurally_equal(a->lhs, b->lhs);
    default:
        return structurally_equal(a->lhs, b->lhs) && structurally_equal(a->rhs, b->rhs);
    }
}

// --------------------------------------------------------------- evaluation

double eval(const Expr& e, double u) {
    switch (e->kind) {
    case NodeKind::Constant: return e->value;
    case NodeKind::Variable: return u;
    case NodeKind::Add: return eval(e->lhs, u) + eval(e->rhs, u);
    case NodeKind::Sub: return eval(e->lhs, u) - eval(e->rhs, u);
    case NodeKind::Mul: return eval(e->lhs, u) * eval(e->rhs, u);
    case NodeKind::Div: {
        double a = eval(e->lhs, u), b = eval(e->rhs, u);
        return a / b;
    }
    case NodeKind::Pow: {
        double a = eval(e->lhs, u), b = eval(e->rhs, u);
        double r = std::pow(a, b);
        if (std::isnan(r) && !std::isnan(a) && !std::isnan(b))
            throw EvalError("pow domain error (negative base, non-integer exponent)");
        return r;
    }
    case NodeKind::Exp: return std::exp(eval(e->lhs, u));
    case NodeKind::Log: {
        double a = eval(e->lhs, u);
        if (a <= 0.0)
            throw EvalError("log domain error: argument " + std::to_string(a));
        return std::log(a);
    }
    }
    throw EvalError("malformed expression tree");
}

std::optional<double> eval_log(const Expr& e, double u) {
    switch (e->kind) {
    case NodeKind::Constant:
        if (e->value <= 0.0) return std::nullopt;
        return std::log(e->value);
    case NodeKind::Variable:
        if (u < 0.0) return std::nullopt;
        return std::log(u);
    case NodeKind::Add:
    case NodeKind::Sub:
        return std::nullopt;   // additive: not structurally log-representable
    case NodeKind::Mul: {
        auto a = eval_log(e->lhs, u), b = eval_log(e->rhs, u);
        if (!a || !b) return std::nullopt;
        return *a + *b;
    }
    case NodeKind::Div: {
        auto a = eval_log(e->lhs, u), b = eval_log(e->rhs, u);
        if (!a || !b) return std::nullopt;
        return *a - *b;
    }
    case NodeKind::Pow: {
        auto a = eval_log(e->lhs, u);
        if (!a) return std::nullopt;
        return eval(e->rhs, u) * *a;
    }
    case NodeKind::Exp:
        return eval(e->lhs, u);
    case NodeKind::Log: {
        auto a = eval_log(e->lhs, u);
        if (!a || *a <= 0.0) return std::nullopt;
        return std::log(*a);
    }
    }
    return std::nullopt;
}

double SignedLog::to_double() const {
    if (sign == 0) return 0.0;
    return sign * std::exp(log_abs);
}

SignedLog SignedLog::from_double(double x) {
    if (x == 0.0) return {};
    return {x > 0.0 ? 1 : -1, std::log(std::abs(x))};
}

SignedLog SignedLog::add(const SignedLog& a, const SignedLog& b) {
    if (a.sign == 0) return b;
    if (b.sign == 0) return a;
    const SignedLog& hi = a.log_abs >= b.log_abs ? a : b;
    const SignedLog& lo = a.log_abs >= b.log_abs ? b : a;
    double d = lo.log_abs - hi.log_abs;   // <= 0
    if (a.sign == b.sign)
        return {a.sign, hi.log_abs + std::log1p(std::exp(d))};
    double m = -std::expm1(d);            // 1 - e^d in [0,1]
    if (m == 0.0) return {};              // exact cancellation
    return {hi.sign, hi.log_abs + std::log(m)};
}

SignedLog SignedLog::mul(const SignedLog& a, const SignedLog& b) {
    if (a.sign == 0 || b.sign == 0) return {};
    return {a.sign * b.sign, a.log_abs + b.log_abs};
}

SignedLog SignedLog::div(const SignedLog& a, const SignedLog& b) {
    if (b.sign == 0) throw EvalError("division by zero in log-domain evaluation");
    if (a.sign == 0) return {};
    return {a.sign * b.sign, a.log_abs - b.log_abs};
}

SignedLog eval_signed_log(const Expr& e, double u) {
    switch (e->kind) {
    case NodeKind::Constant: return SignedLog::from_double(e->value);
    case NodeKind::Variable: return SignedLog::from_double(u);
    case NodeKind::Add: return SignedLog::add(eval_signed_log(e->lhs, u), eval_signed_log(e->rhs, u));
    case NodeKind::Sub: {
        SignedLog b = eval_signed_log(e->rhs, u);
        b.sign = -b.sign;
        return SignedLog::add(eval_signed_log(e->lhs, u), b);
    }
    case NodeKind::Mul: return SignedLog::mul(eval_signed_log(e->lhs, u), eval_signed_log(e->rhs, u));
    case NodeKind::Div: return SignedLog::div(eval_signed_log(e->lhs, u), eval_signed_log(e->rhs, u));
    case NodeKind::Pow: {
        SignedLog a = eval_signed_log(e->lhs, u);
        double b = eval(e->rhs, u);
        if (a.sign == 0) {
            if (b < 0.0) throw EvalError("0^negative in log-domain evaluation");
            return b == 0.0 ? SignedLog{1, 0.0} : SignedLog{};
        }
        if (a.sign < 0) {
            double bi = std::nearbyint(b);
            if (bi != b) throw EvalError("pow domain error (negative base, non-integer exponent)");
            int sign = std::fmod(bi, 2.0) == 0.0 ? 1 : -1;
            return {sign, b * a.log_abs};
        }
        return {1, b * a.log_abs};
    }
    case NodeKind::Exp: return {1, eval(e->lhs, u)};
    case NodeKind::Log: {
        SignedLog a = eval_signed_log(e->lhs, u);
        if (a.sign <= 0) throw EvalError("log domain error in log-domain evaluation");
        return SignedLog::from_double(a.log_abs);
    }
    }
    throw EvalError("malformed expression tree");
}

}  // namespace gelfand::expr
