#pragma once

#include <string>

#include "buildevo/common.hpp"
#include "buildevo/dsl/ast.hpp"

// Canonical formatter. Output depends only on tree structure, parenthesizes
// minimally, and reparses to a structurally equal tree for any
// parser-producible AST (number literals are non-negative there; unary minus
// is its own node).

namespace buildevo::dsl {

namespace detail {

inline int precedence(const Expr& e) {
    switch (e.kind) {
        case ExprKind::binary:
            switch (e.binary_op) {
                case BinaryOp::logical_or: return 1;
                case BinaryOp::logical_and: return 2;
                case BinaryOp::lt:
                case BinaryOp::le:
                case BinaryOp::gt:
                case BinaryOp::ge:
                case BinaryOp::eq:
                case BinaryOp::ne: return 3;
                case BinaryOp::add:
                case BinaryOp::sub: return 4;
                case BinaryOp::mul:
                case BinaryOp::divide: return 5;
            }
            return 0;
        case ExprKind::unary: return 6;
        default: return 7;  // atoms never need parentheses
    }
}

inline const char* op_text(BinaryOp op) {
    switch (op) {
        case BinaryOp::logical_or: return "||";
        case BinaryOp::logical_and: return "&&";
        case BinaryOp::lt: return "<";
        case BinaryOp::le: return "<=";
        case BinaryOp::gt: return ">";
        case BinaryOp::ge: return ">=";
        case BinaryOp::eq: return "==";
        case BinaryOp::ne: return "!=";
        case BinaryOp::add: return "+";
        case BinaryOp::sub: return "-";
        case BinaryOp::mul: return "*";
        case BinaryOp::divide: return "/";
    }
    return "?";
}

inline bool is_comparison(BinaryOp op) {
    switch (op) {
        case BinaryOp::lt:
        case BinaryOp::le:
        case BinaryOp::gt:
        case BinaryOp::ge:
        case BinaryOp::eq:
        case BinaryOp::ne: return true;
        default: return false;
    }
}

inline void print_expr(const Expr& e, std::string& out) {
    auto child = [&](const Expr& c, bool needs_parens) {
        if (needs_parens) out.push_back('(');
        print_expr(c, out);
        if (needs_parens) out.push_back(')');
    };
    switch (e.kind) {
        case ExprKind::number:
            out += format_double(e.number);
            break;
        case ExprKind::string_lit:
            out.push_back('"');
            out += e.text;
            out.push_back('"');
            break;
        case ExprKind::call: {
            out += e.text;
            out.push_back('(');
            for (size_t i = 0; i < e.args.size(); ++i) {
                if (i) out += ", ";
                print_expr(e.args[i], out);
            }
            out.push_back(')');
            break;
        }
        case ExprKind::unary: {
            out.push_back(e.unary_op == UnaryOp::neg ? '-' : '!');
            child(e.args[0], precedence(e.args[0]) < 6);
            break;
        }
        case ExprKind::binary: {
            const int p = precedence(e);
            // Left-associative reparse: a right child at equal precedence
            // keeps its parentheses. Comparisons never chain, so an equal-
            // precedence child is parenthesized on either side.
            const bool left_parens =
                precedence(e.args[0]) < p ||
                (is_comparison(e.binary_op) && precedence(e.args[0]) == p);
            child(e.args[0], left_parens);
            out.push_back(' ');
            out += op_text(e.binary_op);
            out.push_back(' ');
            child(e.args[1], precedence(e.args[1]) <= p);
            break;
        }
    }
}

}  // namespace detail

inline std::string print_canonical(const Expr& e) {
    std::string out;
    detail::print_expr(e, out);
    return out;
}

inline std::string print_canonical(const Program& p) {
    std::string out;
    for (size_t i = 0; i < p.segments.size(); ++i) {
        if (i) out.push_back('\n');
        out += "segment ";
        out += p.segments[i].name;
        out += " {\n  ";
        detail::print_expr(p.segments[i].body, out);
        out += "\n}";
    }
    return out;
}

}  // namespace buildevo::dsl
