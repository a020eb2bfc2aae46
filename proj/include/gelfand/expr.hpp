#ifndef GELFAND_EXPR_HPP
#define GELFAND_EXPR_HPP

#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

// Expression trees for nonlinearities f(u): one variable, +-*/^, exp, log.
// Trees are immutable; nodes are shared freely across threads.

namespace gelfand::expr {

enum class NodeKind { Constant, Variable, Add, Sub, Mul, Div, Pow, Exp, Log };

struct Node;
using Expr = std::shared_ptr<const Node>;

struct Node {
    NodeKind kind;
    double value = 0.0;   // Constant only
    Expr lhs, rhs;        // rhs empty for unary Exp/Log
};

Expr constant(double c);
Expr variable();
Expr make(NodeKind kind, Expr lhs, Expr rhs = nullptr);

struct ParseError : std::runtime_error {
    std::size_t offset;   // byte offset into the input
    ParseError(const std::string& msg, std::size_t off)
        : std::runtime_error(msg + " (at byte " + std::to_string(off) + ")"), offset(off) {}
};

struct EvalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Grammar:
//   expr   := term (('+'|'-') term)*
//   term   := unary (('*'|'/') unary)*
//   unary  := '-' unary | power
//   power  := atom ('^' unary)?          (right-associative)
//   atom   := number | 'u' | ('exp'|'log') '(' expr ')' | '(' expr ')'
Expr parse(std::string_view text);

// Exact symbolic derivative, constant-folded afterwards.
Expr differentiate(const Expr& e);

// Constant folding and neutral-element elimination (x*1, x+0, x^1, ...).
// Rejects statically-zero denominators and log of non-positive constants.
Expr simplify(const Expr& e);

// Minimal-parentheses form; parse(to_string(e)) == simplify(e) structurally.
std::string to_string(const Expr& e);

bool structurally_equal(const Expr& a, const Expr& b);

// IEEE double evaluation; overflow passes through as +/-inf.
// Throws EvalError for log of a non-positive value and 0^negative.
double eval(const Expr& e, double u);

// log(eval(e,u)) by structural rules (log exp g = g, log ab = log a + log b,
// log a^c = c log a) without forming the possibly-overflowing value.
// nullopt when the tree contains an additive node whose log cannot be
// decomposed; callers fall back to log-sum-exp over the addends.
std::optional<double> eval_log(const Expr& e, double u);

// Value carried as sign and log-magnitude; total on well-formed trees.
// Additive nodes are combined by signed log-sum-exp, so this is the
// fallback eval_log callers reach for.
struct SignedLog {
    int sign = 0;          // -1, 0, +1
    double log_abs = -std::numeric_limits<double>::infinity();

    double to_double() const;
    static SignedLog from_double(double x);
    static SignedLog add(const SignedLog& a, const SignedLog& b);
    static SignedLog mul(const SignedLog& a, const SignedLog& b);
    static SignedLog div(const SignedLog& a, const SignedLog& b);
};

SignedLog eval_signed_log(const Expr& e, double u);

}  // namespace gelfand::expr

#endif
