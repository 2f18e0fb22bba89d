#pragma once

// Arithmetic over x, y and r2 = x^2 + y^2: numbers, + - * / ^, parentheses,
// exp, sin, cos. Parsed once into a tree and evaluated per point.

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <string>
#include <string_view>

#include "lake/error.hpp"
#include "lake/geometry.hpp"

namespace lake {

class Expression {
public:
    Expression() = default;

    static Expression parse(std::string_view text)
    {
        Parser p{text};
        Expression e;
        e.text_ = std::string(text);
        e.root_ = p.expr();
        p.skip();
        if (p.pos != text.size())
            p.error("unexpected '" + std::string(1, text[p.pos]) + "'");
        return e;
    }

    double operator()(double x, double y) const { return eval(*root_, x, y); }
    double operator()(Vec2 p) const { return eval(*root_, p.x, p.y); }
    const std::string& text() const { return text_; }
    bool empty() const { return !root_; }

private:
    enum class Op { num, x, y, r2, neg, add, sub, mul, div, pow, exp, sin, cos };

    struct Node {
        Op op;
        double value = 0.0;
        std::shared_ptr<const Node> lhs;
        std::shared_ptr<const Node> rhs;
    };
    using NodePtr = std::shared_ptr<const Node>;

    static NodePtr make(Op op, NodePtr l = {}, NodePtr r = {}, double v = 0.0)
    {
        return std::make_shared<const Node>(Node{op, v, std::move(l), std::move(r)});
    }

    static double eval(const Node& n, double x, double y)
    {
        switch (n.op) {
        case Op::num: return n.value;
        case Op::x: return x;
        case Op::y: return y;
        case Op::r2: return x * x + y * y;
        case Op::neg: return -eval(*n.lhs, x, y);
        case Op::add: return eval(*n.lhs, x, y) + eval(*n.rhs, x, y);
        case Op::sub: return eval(*n.lhs, x, y) - eval(*n.rhs, x, y);
        case Op::mul: return eval(*n.lhs, x, y) * eval(*n.rhs, x, y);
        case Op::div: return eval(*n.lhs, x, y) / eval(*n.rhs, x, y);
        case Op::pow: return std::pow(eval(*n.lhs, x, y), eval(*n.rhs, x, y));
        case Op::exp: return std::exp(eval(*n.lhs, x, y));
        case Op::sin: return std::sin(eval(*n.lhs, x, y));
        case Op::cos: return std::cos(eval(*n.lhs, x, y));
        }
        return 0.0;
    }

    struct Parser {
        std::string_view s;
        std::size_t pos = 0;

        [[noreturn]] void error(const std::string& msg) const
        {
            fail(ErrorKind::config_validation,
                 "expression \"" + std::string(s) + "\" at column " + std::to_string(pos + 1) + ": " + msg);
        }

        void skip()
        {
            while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos])))
                ++pos;
        }

        bool eat(char c)
        {
            skip();
            if (pos < s.size() && s[pos] == c) {
                ++pos;
                return true;
            }
            return false;
        }

        NodePtr expr()
        {
            NodePtr l = term();
            for (;;) {
                if (eat('+'))
                    l = make(Op::add, l, term());
                else if (eat('-'))
                    l = make(Op::sub, l, term());
                else
                    return l;
            }
        }

        NodePtr term()
        {
            NodePtr l = unary();
            for (;;) {
                if (eat('*'))
                    l = make(Op::mul, l, unary());
                else if (eat('/'))
                    l = make(Op::div, l, unary());
                else
                    return l;
            }
        }

        // Unary minus binds looser than ^, so -x^2 is -(x^2).
        NodePtr unary()
        {
            if (eat('-'))
                return make(Op::neg, unary());
            if (eat('+'))
                return unary();
            NodePtr base = primary();
            if (eat('^'))
                return make(Op::pow, base, unary());
            return base;
        }

        NodePtr primary()
        {
            skip();
            if (pos >= s.size())
                error("unexpected end of input");
            const char c = s[pos];
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
                const std::string tail(s.substr(pos));
                char* end = nullptr;
                const double v = std::strtod(tail.c_str(), &end);
                if (end == tail.c_str())
                    error("bad number");
                pos += static_cast<std::size_t>(end - tail.c_str());
                return make(Op::num, {}, {}, v);
            }
            if (std::isalpha(static_cast<unsigned char>(c))) {
                const std::size_t start = pos;
                while (pos < s.size() && std::isalnum(static_cast<unsigned char>(s[pos])))
                    ++pos;
                const std::string_view id = s.substr(start, pos - start);
                if (id == "x")
                    return make(Op::x);
                if (id == "y")
                    return make(Op::y);
                if (id == "r2")
                    return make(Op::r2);
                Op f;
                if (id == "exp")
                    f = Op::exp;
                else if (id == "sin")
                    f = Op::sin;
                else if (id == "cos")
                    f = Op::cos;
                else {
                    pos = start;
                    error("unknown name '" + std::string(id) + "'");
                }
                if (!eat('('))
                    error("expected '(' after " + std::string(id));
                NodePtr arg = expr();
                if (!eat(')'))
                    error("expected ')'");
                return make(f, arg);
            }
            if (eat('(')) {
                NodePtr e = expr();
                if (!eat(')'))
                    error("expected ')'");
                return e;
            }
            error("unexpected '" + std::string(1, c) + "'");
        }
    };

    std::string text_;
    NodePtr root_;
};

} // namespace lake
