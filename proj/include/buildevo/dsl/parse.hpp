#pragma once

#include <cctype>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "buildevo/common.hpp"
#include "buildevo/dsl/ast.hpp"

// Recursive-descent parser for the heuristic language:
//
//   program  := segment+
//   segment  := "segment" IDENT "{" expr "}"
//   expr     := or ;  or := and ("||" and)* ;  and := cmp ("&&" cmp)*
//   cmp      := add (("<"|"<="|">"|">="|"=="|"!=") add)?
//   add      := mul (("+"|"-") mul)* ;  mul := unary (("*"|"/") unary)*
//   unary    := ("-"|"!") unary | atom
//   atom     := NUMBER | STRING | call | "(" expr ")"
//   call     := IDENT "(" (expr ("," expr)*)? ")"
//
// `#` starts a line comment. parse() also validates: at least one segment,
// unique segment names, node/depth budgets, known builtins with exact arity,
// and string literals confined to the usage_is argument.

namespace buildevo::dsl {

struct SyntaxError : std::runtime_error {
    int line;
    int col;
    std::string expected;
    SyntaxError(int line_, int col_, std::string expected_)
        : std::runtime_error("syntax error at " + std::to_string(line_) + ":" +
                             std::to_string(col_) + ": expected " + expected_),
          line(line_),
          col(col_),
          expected(std::move(expected_)) {}
};

struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& reason)
        : std::runtime_error("invalid program: " + reason) {}
};

namespace detail {

enum class Tok {
    ident, number, string, lbrace, rbrace, lparen, rparen, comma,
    oror, andand, bang, lt, le, gt, ge, eq, ne, plus, minus, star, slash, eof,
};

struct Token {
    Tok kind = Tok::eof;
    std::string text;
    double num = 0;
    int line = 1;
    int col = 1;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    Token next() {
        skip_blanks();
        Token t;
        t.line = line_;
        t.col = col_;
        if (pos_ >= src_.size()) return t;
        const char c = src_[pos_];
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t start = pos_;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                advance();
            t.kind = Tok::ident;
            t.text = std::string(src_.substr(start, pos_ - start));
            return t;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) return lex_number(t);
        if (c == '"') return lex_string(t);
        advance();
        switch (c) {
            case '{': t.kind = Tok::lbrace; return t;
            case '}': t.kind = Tok::rbrace; return t;
            case '(': t.kind = Tok::lparen; return t;
            case ')': t.kind = Tok::rparen; return t;
            case ',': t.kind = Tok::comma; return t;
            case '+': t.kind = Tok::plus; return t;
            case '-': t.kind = Tok::minus; return t;
            case '*': t.kind = Tok::star; return t;
            case '/': t.kind = Tok::slash; return t;
            case '!':
                if (peek() == '=') { advance(); t.kind = Tok::ne; } else t.kind = Tok::bang;
                return t;
            case '<':
                if (peek() == '=') { advance(); t.kind = Tok::le; } else t.kind = Tok::lt;
                return t;
            case '>':
                if (peek() == '=') { advance(); t.kind = Tok::ge; } else t.kind = Tok::gt;
                return t;
            case '=':
                if (peek() == '=') { advance(); t.kind = Tok::eq; return t; }
                throw SyntaxError(t.line, t.col, "'=='");
            case '|':
                if (peek() == '|') { advance(); t.kind = Tok::oror; return t; }
                throw SyntaxError(t.line, t.col, "'||'");
            case '&':
                if (peek() == '&') { advance(); t.kind = Tok::andand; return t; }
                throw SyntaxError(t.line, t.col, "'&&'");
            default:
                throw SyntaxError(t.line, t.col, "a token");
        }
    }

private:
    char peek() const { return pos_ < src_.size() ? src_[pos_] : '\0'; }
    char peek2() const { return pos_ + 1 < src_.size() ? src_[pos_ + 1] : '\0'; }

    void advance() {
        if (src_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    void skip_blanks() {
        while (pos_ < src_.size()) {
            const char c = src_[pos_];
            if (c == '#') {
                while (pos_ < src_.size() && src_[pos_] != '\n') advance();
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else {
                break;
            }
        }
    }

    Token lex_number(Token t) {
        const size_t start = pos_;
        while (std::isdigit(static_cast<unsigned char>(peek()))) advance();
        if (peek() == '.' && std::isdigit(static_cast<unsigned char>(peek2()))) {
            advance();
            while (std::isdigit(static_cast<unsigned char>(peek()))) advance();
        }
        if ((peek() == 'e' || peek() == 'E')) {
            const char sign = peek2();
            const bool signed_exp = sign == '+' || sign == '-';
            const size_t digit_at = pos_ + (signed_exp ? 2 : 1);
            if (digit_at < src_.size() &&
                std::isdigit(static_cast<unsigned char>(src_[digit_at]))) {
                advance();
                if (signed_exp) advance();
                while (std::isdigit(static_cast<unsigned char>(peek()))) advance();
            }
        }
        const auto text = src_.substr(start, pos_ - start);
        auto v = parse_double(text);
        if (!v) throw SyntaxError(t.line, t.col, "a representable number");
        t.kind = Tok::number;
        t.num = *v;
        t.text = std::string(text);
        return t;
    }

    Token lex_string(Token t) {
        advance();  // opening quote
        const size_t start = pos_;
        while (pos_ < src_.size() && src_[pos_] != '"' && src_[pos_] != '\n') advance();
        if (pos_ >= src_.size() || src_[pos_] != '"')
            throw SyntaxError(t.line, t.col, "closing '\"'");
        t.kind = Tok::string;
        t.text = std::string(src_.substr(start, pos_ - start));
        advance();  // closing quote
        return t;
    }

    std::string_view src_;
    size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

class Parser {
public:
    explicit Parser(std::string_view src) : lex_(src) { shift(); }

    Program program() {
        Program p;
        p.segments.push_back(segment());
        while (cur_.kind == Tok::ident && cur_.text == "segment")
            p.segments.push_back(segment());
        expect(Tok::eof, "'segment' or end of input");
        return p;
    }

private:
    Segment segment() {
        if (cur_.kind != Tok::ident || cur_.text != "segment")
            fail("'segment'");
        shift();
        if (cur_.kind != Tok::ident) fail("segment name");
        Segment s;
        s.name = cur_.text;
        shift();
        expect(Tok::lbrace, "'{'");
        s.body = expr();
        expect(Tok::rbrace, "'}'");
        return s;
    }

    Expr expr() {
        Guard g(*this);
        return or_expr();
    }

    Expr or_expr() {
        Expr e = and_expr();
        while (accept(Tok::oror))
            e = make_binary(BinaryOp::logical_or, std::move(e), and_expr());
        return e;
    }

    Expr and_expr() {
        Expr e = cmp_expr();
        while (accept(Tok::andand))
            e = make_binary(BinaryOp::logical_and, std::move(e), cmp_expr());
        return e;
    }

    Expr cmp_expr() {
        Expr e = add_expr();
        std::optional<BinaryOp> op;
        switch (cur_.kind) {
            case Tok::lt: op = BinaryOp::lt; break;
            case Tok::le: op = BinaryOp::le; break;
            case Tok::gt: op = BinaryOp::gt; break;
            case Tok::ge: op = BinaryOp::ge; break;
            case Tok::eq: op = BinaryOp::eq; break;
            case Tok::ne: op = BinaryOp::ne; break;
            default: break;
        }
        if (op) {
            shift();
            e = make_binary(*op, std::move(e), add_expr());
        }
        return e;
    }

    Expr add_expr() {
        Expr e = mul_expr();
        while (cur_.kind == Tok::plus || cur_.kind == Tok::minus) {
            const BinaryOp op = cur_.kind == Tok::plus ? BinaryOp::add : BinaryOp::sub;
            shift();
            e = make_binary(op, std::move(e), mul_expr());
        }
        return e;
    }

    Expr mul_expr() {
        Expr e = unary_expr();
        while (cur_.kind == Tok::star || cur_.kind == Tok::slash) {
            const BinaryOp op = cur_.kind == Tok::star ? BinaryOp::mul : BinaryOp::divide;
            shift();
            e = make_binary(op, std::move(e), unary_expr());
        }
        return e;
    }

    Expr unary_expr() {
        Guard g(*this);
        if (accept(Tok::minus)) {
            bump();
            return unary(UnaryOp::neg, unary_expr());
        }
        if (accept(Tok::bang)) {
            bump();
            return unary(UnaryOp::logical_not, unary_expr());
        }
        return atom();
    }

    Expr atom() {
        if (cur_.kind == Tok::number) {
            bump();
            Expr e = number(cur_.num);
            shift();
            return e;
        }
        if (cur_.kind == Tok::string) {
            bump();
            Expr e;
            e.kind = ExprKind::string_lit;
            e.text = cur_.text;
            shift();
            return e;
        }
        if (cur_.kind == Tok::lparen) {
            shift();
            Expr e = expr();
            expect(Tok::rparen, "')'");
            return e;
        }
        if (cur_.kind == Tok::ident) {
            std::string name = cur_.text;
            shift();
            expect(Tok::lparen, "'(' after callee name");
            std::vector<Expr> args;
            if (cur_.kind != Tok::rparen) {
                args.push_back(expr());
                while (accept(Tok::comma)) args.push_back(expr());
            }
            expect(Tok::rparen, "')'");
            bump();
            return call(std::move(name), std::move(args));
        }
        fail("a number, string, call, or '('");
    }

    // Node budget enforced during parsing so validation never recurses over
    // an unboundedly large tree.
    void bump() {
        if (++nodes_ > 4 * kMaxNodes)
            throw ValidationError("program exceeds " + std::to_string(kMaxNodes) + " nodes");
    }

    Expr make_binary(BinaryOp op, Expr lhs, Expr rhs) {
        bump();
        return binary(op, std::move(lhs), std::move(rhs));
    }

    struct Guard {
        Parser& p;
        explicit Guard(Parser& parser) : p(parser) {
            if (++p.depth_ > 4 * kMaxDepth)
                throw ValidationError("expression nesting exceeds the depth limit");
        }
        ~Guard() { --p.depth_; }
    };

    void shift() { cur_ = lex_.next(); }

    bool accept(Tok k) {
        if (cur_.kind != k) return false;
        shift();
        return true;
    }

    void expect(Tok k, const char* what) {
        if (cur_.kind != k) fail(what);
        shift();
    }

    [[noreturn]] void fail(const char* what) const {
        throw SyntaxError(cur_.line, cur_.col, what);
    }

    Lexer lex_;
    Token cur_;
    int depth_ = 0;
    int nodes_ = 0;
};

inline void validate_expr(const Expr& e) {
    switch (e.kind) {
        case ExprKind::string_lit:
            throw ValidationError("string literals are only allowed as the usage_is argument");
        case ExprKind::call: {
            const BuiltinSpec* b = find_builtin(e.text);
            if (!b) throw ValidationError("unknown builtin: " + e.text);
            if (static_cast<int>(e.args.size()) != b->arity)
                throw ValidationError(e.text + " expects " + std::to_string(b->arity) +
                                      " argument(s), got " + std::to_string(e.args.size()));
            if (b->takes_string) {
                if (e.args[0].kind != ExprKind::string_lit)
                    throw ValidationError(e.text + " requires a string literal argument");
                return;  // the string argument is consumed here, not recursed into
            }
            break;
        }
        default:
            break;
    }
    for (const auto& a : e.args) validate_expr(a);
}

}  // namespace detail

inline void validate(const Program& p) {
    if (p.segments.empty())
        throw ValidationError("program must contain at least one segment");
    std::set<std::string> names;
    for (const auto& s : p.segments)
        if (!names.insert(s.name).second)
            throw ValidationError("duplicate segment name: " + s.name);
    if (node_count(p) > kMaxNodes)
        throw ValidationError("program exceeds " + std::to_string(kMaxNodes) + " nodes");
    if (depth(p) > kMaxDepth)
        throw ValidationError("program exceeds nesting depth " + std::to_string(kMaxDepth));
    for (const auto& s : p.segments) detail::validate_expr(s.body);
}

inline Program parse(std::string_view source) {
    detail::Parser parser(source);
    Program p = parser.program();
    validate(p);
    return p;
}

inline std::optional<Program> try_parse(std::string_view source) {
    try {
        return parse(source);
    } catch (const SyntaxError&) {
        return std::nullopt;
    } catch (const ValidationError&) {
        return std::nullopt;
    }
}

}  // namespace buildevo::dsl
