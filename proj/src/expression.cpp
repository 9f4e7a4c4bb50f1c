#include "rgc/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <vector>

namespace rgc {

struct Expression::Node {
    enum Kind { Num, Var, Add, Sub, Mul, Div, Pow, Neg, Exp, Log, Sin, Cos } kind;
    double value = 0.0;
    std::string name;
    std::shared_ptr<const Node> a, b;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Node = Expression::Node;

NodePtr make(Node::Kind k, NodePtr a = nullptr, NodePtr b = nullptr) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

struct Parser {
    const std::string& s;
    size_t pos = 0;

    explicit Parser(const std::string& text) : s(text) {}

    [[noreturn]] void fail(const std::string& what) const {
        throw std::invalid_argument("expression error at position " + std::to_string(pos) +
                                    ": " + what + " in '" + s + "'");
    }
    void skip() {
        while (pos < s.size() && std::isspace((unsigned char)s[pos])) ++pos;
    }
    bool eat(char c) {
        skip();
        if (pos < s.size() && s[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }

    NodePtr parse_expr() {
        NodePtr lhs = parse_term();
        for (;;) {
            if (eat('+'))
                lhs = make(Node::Add, lhs, parse_term());
            else if (eat('-'))
                lhs = make(Node::Sub, lhs, parse_term());
            else
                return lhs;
        }
    }
    NodePtr parse_term() {
        NodePtr lhs = parse_unary();
        for (;;) {
            if (eat('*'))
                lhs = make(Node::Mul, lhs, parse_unary());
            else if (eat('/'))
                lhs = make(Node::Div, lhs, parse_unary());
            else
                return lhs;
        }
    }
    NodePtr parse_unary() {
        if (eat('-')) return make(Node::Neg, parse_unary());
        if (eat('+')) return parse_unary();
        return parse_power();
    }
    NodePtr parse_power() {
        NodePtr base = parse_atom();
        if (eat('^')) return make(Node::Pow, base, parse_unary());  // right assoc
        return base;
    }
    NodePtr parse_atom() {
        skip();
        if (pos >= s.size()) fail("unexpected end of input");
        char c = s[pos];
        if (c == '(') {
            ++pos;
            NodePtr e = parse_expr();
            if (!eat(')')) fail("missing ')'");
            return e;
        }
        if (std::isdigit((unsigned char)c) || c == '.') {
            char* end = nullptr;
            double v = std::strtod(s.c_str() + pos, &end);
            if (end == s.c_str() + pos) fail("bad number");
            pos = end - s.c_str();
            auto n = std::make_shared<Node>();
            n->kind = Node::Num;
            n->value = v;
            return n;
        }
        if (std::isalpha((unsigned char)c)) {
            size_t start = pos;
            while (pos < s.size() && (std::isalnum((unsigned char)s[pos]) || s[pos] == '_')) ++pos;
            std::string id = s.substr(start, pos - start);
            if (id == "exp" || id == "log" || id == "sin" || id == "cos") {
                if (!eat('(')) fail("expected '(' after " + id);
                NodePtr arg = parse_expr();
                if (!eat(')')) fail("missing ')'");
                Node::Kind k = id == "exp"   ? Node::Exp
                               : id == "log" ? Node::Log
                               : id == "sin" ? Node::Sin
                                             : Node::Cos;
                return make(k, arg);
            }
            if (id == "pi") {
                auto n = std::make_shared<Node>();
                n->kind = Node::Num;
                n->value = 3.14159265358979323846;
                return n;
            }
            if (id == "x" || id == "y" || id == "theta" || id == "phi" || id == "rho") {
                auto n = std::make_shared<Node>();
                n->kind = Node::Var;
                n->name = id;
                return n;
            }
            fail("unknown identifier '" + id + "'");
        }
        fail(std::string("unexpected character '") + c + "'");
    }
};

double eval_node(const Node& n, const std::map<std::string, double>& vars) {
    switch (n.kind) {
        case Node::Num: return n.value;
        case Node::Var: {
            auto it = vars.find(n.name);
            if (it == vars.end())
                throw std::invalid_argument("variable '" + n.name + "' not available here");
            return it->second;
        }
        case Node::Add: return eval_node(*n.a, vars) + eval_node(*n.b, vars);
        case Node::Sub: return eval_node(*n.a, vars) - eval_node(*n.b, vars);
        case Node::Mul: return eval_node(*n.a, vars) * eval_node(*n.b, vars);
        case Node::Div: return eval_node(*n.a, vars) / eval_node(*n.b, vars);
        case Node::Pow: return std::pow(eval_node(*n.a, vars), eval_node(*n.b, vars));
        case Node::Neg: return -eval_node(*n.a, vars);
        case Node::Exp: return std::exp(eval_node(*n.a, vars));
        case Node::Log: return std::log(eval_node(*n.a, vars));
        case Node::Sin: return std::sin(eval_node(*n.a, vars));
        case Node::Cos: return std::cos(eval_node(*n.a, vars));
    }
    return 0.0;
}

}  // namespace

Expression Expression::parse(const std::string& text) {
    Parser p(text);
    Expression e;
    e.root_ = p.parse_expr();
    p.skip();
    if (p.pos != text.size()) p.fail("trailing input");
    e.text_ = text;
    return e;
}

double Expression::eval(const std::map<std::string, double>& vars) const {
    if (!root_) throw std::logic_error("empty expression");
    return eval_node(*root_, vars);
}

}  // namespace rgc
