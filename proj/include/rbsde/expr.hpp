#pragma once

#include <cctype>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rbsde/common.hpp"

namespace rbsde {

// Tiny arithmetic expression compiler for user-defined drivers g(t, y, z)
// with scalar z. Supported: + - * / ^, parentheses, numbers, the variables
// t, y, z, and abs, sqrt, exp, log, sin, cos, min, max, pow.

class Expression {
public:
    explicit Expression(const std::string& src) : src_(src), pos_(0) {
        root_ = parse_sum();
        skip_ws();
        if (pos_ != src_.size())
            throw ConfigError("expression: trailing input at position " + std::to_string(pos_) +
                              " in '" + src_ + "'");
    }

    double eval(double t, double y, double z) const {
        return root_->eval(t, y, z);
    }

private:
    struct Node {
        virtual ~Node() = default;
        virtual double eval(double t, double y, double z) const = 0;
    };
    using NodePtr = std::unique_ptr<Node>;

    struct Const : Node {
        double v;
        explicit Const(double v) : v(v) {}
        double eval(double, double, double) const override { return v; }
    };
    struct Var : Node {
        char which;
        explicit Var(char w) : which(w) {}
        double eval(double t, double y, double z) const override {
            switch (which) {
                case 't': return t;
                case 'y': return y;
                default: return z;
            }
        }
    };
    struct Unary : Node {
        std::function<double(double)> f;
        NodePtr a;
        double eval(double t, double y, double z) const override { return f(a->eval(t, y, z)); }
    };
    struct Binary : Node {
        std::function<double(double, double)> f;
        NodePtr a, b;
        double eval(double t, double y, double z) const override {
            return f(a->eval(t, y, z), b->eval(t, y, z));
        }
    };

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool consume(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) { ++pos_; return true; }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < src_.size() ? src_[pos_] : '\0';
    }

    NodePtr parse_sum() {
        NodePtr a = parse_product();
        for (;;) {
            if (consume('+')) a = make_bin([](double x, double y) { return x + y; }, std::move(a), parse_product());
            else if (consume('-')) a = make_bin([](double x, double y) { return x - y; }, std::move(a), parse_product());
            else return a;
        }
    }

    NodePtr parse_product() {
        NodePtr a = parse_factor();
        for (;;) {
            if (consume('*')) a = make_bin([](double x, double y) { return x * y; }, std::move(a), parse_factor());
            else if (consume('/')) a = make_bin([](double x, double y) { return x / y; }, std::move(a), parse_factor());
            else return a;
        }
    }

    NodePtr parse_factor() {
        if (consume('-')) {
            auto u = std::make_unique<Unary>();
            u->f = [](double x) { return -x; };
            u->a = parse_factor();
            return u;
        }
        NodePtr base = parse_primary();
        if (consume('^'))
            return make_bin([](double x, double y) { return std::pow(x, y); }, std::move(base), parse_factor());
        return base;
    }

    NodePtr parse_primary() {
        skip_ws();
        if (pos_ >= src_.size()) throw ConfigError("expression: unexpected end of input in '" + src_ + "'");
        const char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (c == '(') {
            ++pos_;
            NodePtr e = parse_sum();
            if (!consume(')')) throw ConfigError("expression: missing ')' in '" + src_ + "'");
            return e;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) return parse_ident();
        throw ConfigError(std::string("expression: unexpected character '") + c + "' in '" + src_ + "'");
    }

    NodePtr parse_number() {
        std::size_t end = pos_;
        while (end < src_.size() &&
               (std::isdigit(static_cast<unsigned char>(src_[end])) || src_[end] == '.' ||
                src_[end] == 'e' || src_[end] == 'E' ||
                ((src_[end] == '+' || src_[end] == '-') && end > pos_ &&
                 (src_[end - 1] == 'e' || src_[end - 1] == 'E'))))
            ++end;
        const std::string tok = src_.substr(pos_, end - pos_);
        try {
            const double v = std::stod(tok);
            pos_ = end;
            return std::make_unique<Const>(v);
        } catch (...) {
            throw ConfigError("expression: bad number '" + tok + "'");
        }
    }

    NodePtr parse_ident() {
        std::size_t end = pos_;
        while (end < src_.size() && std::isalpha(static_cast<unsigned char>(src_[end]))) ++end;
        const std::string name = src_.substr(pos_, end - pos_);
        pos_ = end;
        if (name == "t" || name == "y" || name == "z") return std::make_unique<Var>(name[0]);
        if (name == "pi") return std::make_unique<Const>(3.14159265358979323846);

        if (!consume('(')) throw ConfigError("expression: unknown variable '" + name + "'");
        std::vector<NodePtr> args;
        if (peek() != ')') {
            args.push_back(parse_sum());
            while (consume(',')) args.push_back(parse_sum());
        }
        if (!consume(')')) throw ConfigError("expression: missing ')' after '" + name + "('");

        auto un = [&](std::function<double(double)> f) -> NodePtr {
            if (args.size() != 1) throw ConfigError("expression: '" + name + "' takes 1 argument");
            auto u = std::make_unique<Unary>();
            u->f = std::move(f);
            u->a = std::move(args[0]);
            return u;
        };
        auto bin = [&](std::function<double(double, double)> f) -> NodePtr {
            if (args.size() != 2) throw ConfigError("expression: '" + name + "' takes 2 arguments");
            auto b = std::make_unique<Binary>();
            b->f = std::move(f);
            b->a = std::move(args[0]);
            b->b = std::move(args[1]);
            return b;
        };
        if (name == "abs") return un([](double x) { return std::abs(x); });
        if (name == "sqrt") return un([](double x) { return std::sqrt(x); });
        if (name == "exp") return un([](double x) { return std::exp(x); });
        if (name == "log") return un([](double x) { return std::log(x); });
        if (name == "sin") return un([](double x) { return std::sin(x); });
        if (name == "cos") return un([](double x) { return std::cos(x); });
        if (name == "min") return bin([](double a, double b) { return std::min(a, b); });
        if (name == "max") return bin([](double a, double b) { return std::max(a, b); });
        if (name == "pow") return bin([](double a, double b) { return std::pow(a, b); });
        throw ConfigError("expression: unknown function '" + name + "'");
    }

    static NodePtr make_bin(std::function<double(double, double)> f, NodePtr a, NodePtr b) {
        auto n = std::make_unique<Binary>();
        n->f = std::move(f);
        n->a = std::move(a);
        n->b = std::move(b);
        return n;
    }

    std::string src_;
    std::size_t pos_;
    NodePtr root_;
};

}  // namespace rbsde
