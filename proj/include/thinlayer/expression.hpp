#pragma once

// Small arithmetic expression language for scenario coefficients, reactions,
// and initial data.  Variables: t, y1, y2, x1, x2, z.  Operators + - * / ^
// (with unary minus), functions sin, cos, exp, abs, min, max, the constant
// pi, and parentheses.  Parse errors carry exact 1-based line/column
// positions.  Printing uses full parentheses so that parse -> print -> parse
// is structurally the identity.

#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace thinlayer {

struct SourcePos {
    int line = 1;
    int col = 1;
};

class ParseError : public std::runtime_error {
  public:
    ParseError(SourcePos pos, const std::string& message)
        : std::runtime_error("line " + std::to_string(pos.line) + ", col " + std::to_string(pos.col) + ": " + message),
          pos_(pos),
          message_(message) {}

    SourcePos pos() const { return pos_; }
    const std::string& message() const { return message_; }

  private:
    SourcePos pos_;
    std::string message_;
};

enum class Var : int { t = 0, y1 = 1, y2 = 2, x1 = 3, x2 = 4, z = 5 };

inline constexpr unsigned var_bit(Var v) { return 1u << static_cast<int>(v); }

inline const char* var_name(Var v) {
    static constexpr std::array<const char*, 6> names = {"t", "y1", "y2", "x1", "x2", "z"};
    return names[static_cast<std::size_t>(v)];
}

/// Variable bindings for evaluation; `bound` is a bitmask of the fields that
/// carry meaningful values.  Evaluating an expression whose free variables
/// are not covered by the mask is an error.
struct Bindings {
    std::array<double, 6> values{};
    unsigned bound = 0;

    Bindings& set(Var v, double x) {
        values[static_cast<std::size_t>(v)] = x;
        bound |= var_bit(v);
        return *this;
    }
    Bindings& t(double x) { return set(Var::t, x); }
    Bindings& y(double y1, double y2) { return set(Var::y1, y1).set(Var::y2, y2); }
    Bindings& x(double x1, double x2) { return set(Var::x1, x1).set(Var::x2, x2); }
    Bindings& z(double x) { return set(Var::z, x); }
};

class Expression {
  public:
    enum class Op : int { Number, Pi, Variable, Neg, Add, Sub, Mul, Div, Pow, Sin, Cos, Exp, Abs, Min, Max };

    struct Node {
        Op op = Op::Number;
        double number = 0.0;
        Var var = Var::t;
        int a = -1;
        int b = -1;
    };

    Expression() = default;

    bool empty() const { return nodes_.empty(); }

    static Expression parse(std::string_view src) {
        Parser p(src);
        return p.run();
    }

    /// Bitmask of variables the expression references.
    unsigned free_vars() const {
        unsigned mask = 0;
        for (const Node& n : nodes_)
            if (n.op == Op::Variable)
                mask |= var_bit(n.var);
        return mask;
    }

    double eval(const Bindings& b) const {
        if (nodes_.empty())
            throw std::logic_error("Expression::eval: empty expression");
        const unsigned missing = free_vars() & ~b.bound;
        if (missing != 0) {
            for (int v = 0; v < 6; ++v)
                if (missing & (1u << v))
                    throw std::invalid_argument(std::string("Expression::eval: unbound variable ") +
                                                var_name(static_cast<Var>(v)));
        }
        return eval_unchecked(b.values);
    }

    /// Evaluation without the binding-mask check; callers validate coverage
    /// once outside their hot loops.  Nodes are stored in topological order
    /// (children before parents), so a single forward sweep suffices.
    double eval_unchecked(const std::array<double, 6>& v) const {
        double stack_buf[128];
        std::vector<double> heap_buf;
        double* vals = stack_buf;
        if (nodes_.size() > 128) {
            heap_buf.resize(nodes_.size());
            vals = heap_buf.data();
        }
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const Node& n = nodes_[i];
            switch (n.op) {
                case Op::Number: vals[i] = n.number; break;
                case Op::Pi: vals[i] = pi_value(); break;
                case Op::Variable: vals[i] = v[static_cast<std::size_t>(n.var)]; break;
                case Op::Neg: vals[i] = -vals[n.a]; break;
                case Op::Add: vals[i] = vals[n.a] + vals[n.b]; break;
                case Op::Sub: vals[i] = vals[n.a] - vals[n.b]; break;
                case Op::Mul: vals[i] = vals[n.a] * vals[n.b]; break;
                case Op::Div: vals[i] = vals[n.a] / vals[n.b]; break;
                case Op::Pow: vals[i] = std::pow(vals[n.a], vals[n.b]); break;
                case Op::Sin: vals[i] = std::sin(vals[n.a]); break;
                case Op::Cos: vals[i] = std::cos(vals[n.a]); break;
                case Op::Exp: vals[i] = std::exp(vals[n.a]); break;
                case Op::Abs: vals[i] = std::abs(vals[n.a]); break;
                case Op::Min: vals[i] = std::min(vals[n.a], vals[n.b]); break;
                case Op::Max: vals[i] = std::max(vals[n.a], vals[n.b]); break;
            }
        }
        return vals[nodes_.size() - 1];
    }

    std::string to_string() const {
        if (nodes_.empty())
            return "";
        return print(static_cast<int>(nodes_.size()) - 1);
    }

    bool operator==(const Expression& other) const {
        if (nodes_.empty() || other.nodes_.empty())
            return nodes_.empty() == other.nodes_.empty();
        return structurally_equal(*this, static_cast<int>(nodes_.size()) - 1, other,
                                  static_cast<int>(other.nodes_.size()) - 1);
    }
    bool operator!=(const Expression& other) const { return !(*this == other); }

    /// Direct AST construction (used by the generator-based round-trip test).
    static Expression number(double v) {
        // Negative literals cannot come out of the parser (the lexer only
        // produces nonnegative numbers and '-' becomes Neg), so canonicalize
        // to keep parse(to_string(e)) == e structural.
        if (v < 0.0)
            return unary(Op::Neg, number(-v));
        Expression e;
        e.nodes_.push_back({Op::Number, v, Var::t, -1, -1});
        return e;
    }
    static Expression pi() {
        Expression e;
        e.nodes_.push_back({Op::Pi, 0.0, Var::t, -1, -1});
        return e;
    }
    static Expression variable(Var v) {
        Expression e;
        e.nodes_.push_back({Op::Variable, 0.0, v, -1, -1});
        return e;
    }
    static Expression unary(Op op, Expression a) {
        Expression e = std::move(a);
        const int ia = static_cast<int>(e.nodes_.size()) - 1;
        e.nodes_.push_back({op, 0.0, Var::t, ia, -1});
        return e;
    }
    static Expression binary(Op op, Expression a, const Expression& b) {
        Expression e = std::move(a);
        const int offset = static_cast<int>(e.nodes_.size());
        for (Node n : b.nodes_) {
            if (n.a >= 0)
                n.a += offset;
            if (n.b >= 0)
                n.b += offset;
            e.nodes_.push_back(n);
        }
        const int ia = offset - 1;
        const int ib = static_cast<int>(e.nodes_.size()) - 1;
        e.nodes_.push_back({op, 0.0, Var::t, ia, ib});
        return e;
    }

    static double pi_value() { return 3.14159265358979323846; }

    const std::vector<Node>& nodes() const { return nodes_; }

  private:
    std::vector<Node> nodes_;

    static bool structurally_equal(const Expression& x, int ix, const Expression& y, int iy) {
        const Node& a = x.nodes_[static_cast<std::size_t>(ix)];
        const Node& b = y.nodes_[static_cast<std::size_t>(iy)];
        if (a.op != b.op)
            return false;
        switch (a.op) {
            case Op::Number: return a.number == b.number;
            case Op::Pi: return true;
            case Op::Variable: return a.var == b.var;
            default: break;
        }
        if ((a.a >= 0) != (b.a >= 0) || (a.b >= 0) != (b.b >= 0))
            return false;
        if (a.a >= 0 && !structurally_equal(x, a.a, y, b.a))
            return false;
        if (a.b >= 0 && !structurally_equal(x, a.b, y, b.b))
            return false;
        return true;
    }

    std::string print(int idx) const {
        const Node& n = nodes_[static_cast<std::size_t>(idx)];
        switch (n.op) {
            case Op::Number: {
                char buf[40];
                std::snprintf(buf, sizeof buf, "%.17g", n.number);
                return buf;
            }
            case Op::Pi: return "pi";
            case Op::Variable: return var_name(n.var);
            case Op::Neg: return "(-" + print(n.a) + ")";
            case Op::Add: return "(" + print(n.a) + " + " + print(n.b) + ")";
            case Op::Sub: return "(" + print(n.a) + " - " + print(n.b) + ")";
            case Op::Mul: return "(" + print(n.a) + " * " + print(n.b) + ")";
            case Op::Div: return "(" + print(n.a) + " / " + print(n.b) + ")";
            case Op::Pow: return "(" + print(n.a) + " ^ " + print(n.b) + ")";
            case Op::Sin: return "sin(" + print(n.a) + ")";
            case Op::Cos: return "cos(" + print(n.a) + ")";
            case Op::Exp: return "exp(" + print(n.a) + ")";
            case Op::Abs: return "abs(" + print(n.a) + ")";
            case Op::Min: return "min(" + print(n.a) + ", " + print(n.b) + ")";
            case Op::Max: return "max(" + print(n.a) + ", " + print(n.b) + ")";
        }
        return "";
    }

    class Parser {
      public:
        explicit Parser(std::string_view src) : src_(src) {}

        Expression run() {
            next_token();
            Expression e;
            e.nodes_.reserve(16);
            parse_sum(e);
            if (tok_.kind != Token::End)
                throw ParseError(tok_.pos, "unexpected trailing input");
            return e;
        }

      private:
        struct Token {
            enum Kind { End, Number, Ident, Punct } kind = End;
            SourcePos pos;
            double number = 0.0;
            std::string ident;
            char punct = 0;
        };

        std::string_view src_;
        std::size_t at_ = 0;
        SourcePos pos_{1, 1};
        Token tok_;

        void advance_char() {
            if (src_[at_] == '\n') {
                ++pos_.line;
                pos_.col = 1;
            } else {
                ++pos_.col;
            }
            ++at_;
        }

        void next_token() {
            while (at_ < src_.size() && (src_[at_] == ' ' || src_[at_] == '\t' || src_[at_] == '\r' || src_[at_] == '\n'))
                advance_char();
            tok_ = Token{};
            tok_.pos = pos_;
            if (at_ >= src_.size()) {
                tok_.kind = Token::End;
                return;
            }
            const char c = src_[at_];
            if (std::isdigit(static_cast<unsigned char>(c)) ||
                (c == '.' && at_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[at_ + 1])))) {
                const std::size_t start = at_;
                while (at_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[at_])))
                    advance_char();
                if (at_ < src_.size() && src_[at_] == '.') {
                    advance_char();
                    while (at_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[at_])))
                        advance_char();
                }
                if (at_ < src_.size() && (src_[at_] == 'e' || src_[at_] == 'E')) {
                    std::size_t save = at_;
                    SourcePos save_pos = pos_;
                    advance_char();
                    if (at_ < src_.size() && (src_[at_] == '+' || src_[at_] == '-'))
                        advance_char();
                    if (at_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[at_]))) {
                        while (at_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[at_])))
                            advance_char();
                    } else {
                        at_ = save;  // bare 'e' belongs to the next token
                        pos_ = save_pos;
                    }
                }
                tok_.kind = Token::Number;
                tok_.number = std::strtod(std::string(src_.substr(start, at_ - start)).c_str(), nullptr);
                return;
            }
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                const std::size_t start = at_;
                while (at_ < src_.size() &&
                       (std::isalnum(static_cast<unsigned char>(src_[at_])) || src_[at_] == '_'))
                    advance_char();
                tok_.kind = Token::Ident;
                tok_.ident = std::string(src_.substr(start, at_ - start));
                return;
            }
            if (c == '+' || c == '-' || c == '*' || c == '/' || c == '^' || c == '(' || c == ')' || c == ',') {
                tok_.kind = Token::Punct;
                tok_.punct = c;
                advance_char();
                return;
            }
            throw ParseError(pos_, std::string("unexpected character '") + c + "'");
        }

        bool is_punct(char c) const { return tok_.kind == Token::Punct && tok_.punct == c; }

        int parse_sum(Expression& e) {
            int lhs = parse_product(e);
            while (is_punct('+') || is_punct('-')) {
                const Op op = tok_.punct == '+' ? Op::Add : Op::Sub;
                next_token();
                const int rhs = parse_product(e);
                lhs = push(e, {op, 0.0, Var::t, lhs, rhs});
            }
            return lhs;
        }

        int parse_product(Expression& e) {
            int lhs = parse_unary(e);
            while (is_punct('*') || is_punct('/')) {
                const Op op = tok_.punct == '*' ? Op::Mul : Op::Div;
                next_token();
                const int rhs = parse_unary(e);
                lhs = push(e, {op, 0.0, Var::t, lhs, rhs});
            }
            return lhs;
        }

        int parse_unary(Expression& e) {
            if (is_punct('-')) {
                next_token();
                const int a = parse_unary(e);
                return push(e, {Op::Neg, 0.0, Var::t, a, -1});
            }
            return parse_power(e);
        }

        int parse_power(Expression& e) {
            const int base = parse_atom(e);
            if (is_punct('^')) {
                next_token();
                const int exponent = parse_unary(e);  // right-associative, allows 2^-3
                return push(e, {Op::Pow, 0.0, Var::t, base, exponent});
            }
            return base;
        }

        int parse_atom(Expression& e) {
            if (tok_.kind == Token::Number) {
                const double v = tok_.number;
                next_token();
                return push(e, {Op::Number, v, Var::t, -1, -1});
            }
            if (tok_.kind == Token::Ident) {
                const std::string name = tok_.ident;
                const SourcePos pos = tok_.pos;
                if (name == "pi") {
                    next_token();
                    return push(e, {Op::Pi, 0.0, Var::t, -1, -1});
                }
                for (int v = 0; v < 6; ++v) {
                    if (name == var_name(static_cast<Var>(v))) {
                        next_token();
                        return push(e, {Op::Variable, 0.0, static_cast<Var>(v), -1, -1});
                    }
                }
                const Op fn = function_op(name);
                if (fn == Op::Number)
                    throw ParseError(pos, "unknown identifier '" + name + "'");
                next_token();
                if (!is_punct('('))
                    throw ParseError(tok_.pos, "expected '(' after function name '" + name + "'");
                next_token();
                const int a = parse_sum(e);
                int b = -1;
                const bool binary_fn = fn == Op::Min || fn == Op::Max;
                if (binary_fn) {
                    if (!is_punct(','))
                        throw ParseError(tok_.pos, "expected ',' in call to '" + name + "'");
                    next_token();
                    b = parse_sum(e);
                } else if (is_punct(',')) {
                    throw ParseError(tok_.pos, "function '" + name + "' takes one argument");
                }
                if (!is_punct(')'))
                    throw ParseError(tok_.pos, "expected ')' to close call to '" + name + "'");
                next_token();
                return push(e, {fn, 0.0, Var::t, a, b});
            }
            if (is_punct('(')) {
                next_token();
                const int inner = parse_sum(e);
                if (!is_punct(')'))
                    throw ParseError(tok_.pos, "expected ')'");
                next_token();
                return inner;
            }
            if (tok_.kind == Token::End)
                throw ParseError(tok_.pos, "unexpected end of expression");
            throw ParseError(tok_.pos, std::string("unexpected '") + tok_.punct + "'");
        }

        static Op function_op(const std::string& name) {
            if (name == "sin") return Op::Sin;
            if (name == "cos") return Op::Cos;
            if (name == "exp") return Op::Exp;
            if (name == "abs") return Op::Abs;
            if (name == "min") return Op::Min;
            if (name == "max") return Op::Max;
            return Op::Number;  // sentinel: not a function
        }

        static int push(Expression& e, Node n) {
            e.nodes_.push_back(n);
            return static_cast<int>(e.nodes_.size()) - 1;
        }
    };
};

}  // namespace thinlayer
