#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// Syntax tree for the segment-structured heuristic language. A program is a
// list of uniquely named segments; its prediction at each step is the sum of
// the segment values. Trees are immutable value types after parsing.

namespace buildevo::dsl {

enum class ExprKind { number, string_lit, call, unary, binary };
enum class UnaryOp { neg, logical_not };
enum class BinaryOp {
    logical_or,
    logical_and,
    lt,
    le,
    gt,
    ge,
    eq,
    ne,
    add,
    sub,
    mul,
    divide,
};

struct Expr {
    ExprKind kind = ExprKind::number;
    double number = 0;       // ExprKind::number (always finite, non-negative)
    std::string text;        // string literal, or callee name for calls
    UnaryOp unary_op = UnaryOp::neg;
    BinaryOp binary_op = BinaryOp::add;
    std::vector<Expr> args;  // call arguments, unary operand, or binary lhs/rhs

    friend bool operator==(const Expr&, const Expr&) = default;
};

struct Segment {
    std::string name;
    Expr body;

    friend bool operator==(const Segment&, const Segment&) = default;
};

struct Program {
    std::vector<Segment> segments;

    friend bool operator==(const Program&, const Program&) = default;
};

inline Expr number(double v) {
    Expr e;
    e.kind = ExprKind::number;
    e.number = v;
    return e;
}

inline Expr call(std::string name, std::vector<Expr> args = {}) {
    Expr e;
    e.kind = ExprKind::call;
    e.text = std::move(name);
    e.args = std::move(args);
    return e;
}

inline Expr binary(BinaryOp op, Expr lhs, Expr rhs) {
    Expr e;
    e.kind = ExprKind::binary;
    e.binary_op = op;
    e.args.push_back(std::move(lhs));
    e.args.push_back(std::move(rhs));
    return e;
}

inline Expr unary(UnaryOp op, Expr operand) {
    Expr e;
    e.kind = ExprKind::unary;
    e.unary_op = op;
    e.args.push_back(std::move(operand));
    return e;
}

// ── Builtin registry (v1) ───────────────────────────────────────

inline constexpr int kBuiltinRegistryVersion = 1;

struct BuiltinSpec {
    std::string_view name;
    int arity;
    bool takes_string;  // argument must be a single string literal
};

inline constexpr std::array<BuiltinSpec, 26> kBuiltins{{
    {"lag", 1, false},        {"roll_mean", 1, false}, {"roll_min", 1, false},
    {"roll_max", 1, false},   {"hour", 0, false},      {"dow", 0, false},
    {"month", 0, false},      {"is_weekend", 0, false},{"temp", 0, false},
    {"humidity", 0, false},   {"wind", 0, false},      {"irradiance", 0, false},
    {"temp_lag", 1, false},   {"hdd", 1, false},       {"cdd", 1, false},
    {"sqft", 0, false},       {"year_built", 0, false},{"usage_is", 1, true},
    {"min", 2, false},        {"max", 2, false},       {"abs", 1, false},
    {"clamp", 3, false},      {"exp", 1, false},       {"log", 1, false},
    {"sqrt", 1, false},       {"if", 3, false},
}};

inline const BuiltinSpec* find_builtin(std::string_view name) {
    for (const auto& b : kBuiltins)
        if (b.name == name) return &b;
    return nullptr;
}

// ── Structural limits ───────────────────────────────────────────

inline constexpr int kMaxNodes = 512;   // expression nodes, summed over segments
inline constexpr int kMaxDepth = 32;    // expression nesting depth

inline int node_count(const Expr& e) {
    int n = 1;
    for (const auto& a : e.args) n += node_count(a);
    return n;
}

inline int node_count(const Program& p) {
    int n = 0;
    for (const auto& s : p.segments) n += node_count(s.body);
    return n;
}

inline int depth(const Expr& e) {
    int d = 0;
    for (const auto& a : e.args) d = std::max(d, depth(a));
    return d + 1;
}

inline int depth(const Program& p) {
    int d = 0;
    for (const auto& s : p.segments) d = std::max(d, depth(s.body));
    return d;
}

// ── Literal access (used by mechanical mutation) ────────────────

inline void collect_numbers(Expr& e, std::vector<Expr*>& out) {
    if (e.kind == ExprKind::number) out.push_back(&e);
    for (auto& a : e.args) collect_numbers(a, out);
}

inline std::vector<Expr*> collect_numbers(Program& p) {
    std::vector<Expr*> out;
    for (auto& s : p.segments) collect_numbers(s.body, out);
    return out;
}

}  // namespace buildevo::dsl
