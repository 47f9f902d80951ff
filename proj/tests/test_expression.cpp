#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <string>

#include "thinlayer/expression.hpp"

using namespace thinlayer;
using Op = Expression::Op;

namespace {

struct ValueCase {
    const char* src;
    double expected;
};

struct ErrorCase {
    const char* src;
    int line;
    int col;
    const char* fragment;  // must appear in the error message
};

double eval_const(const char* src) { return Expression::parse(src).eval(Bindings{}); }

Expression random_expr(std::mt19937_64& gen, int depth) {
    const auto pick = [&gen](int n) { return static_cast<int>(gen() % static_cast<unsigned long long>(n)); };
    if (depth <= 0) {
        switch (pick(4)) {
            case 0: return Expression::pi();
            case 1: return Expression::variable(static_cast<Var>(pick(6)));
            default: return Expression::number(static_cast<double>(pick(801) - 400) / 8.0);
        }
    }
    switch (pick(11)) {
        case 0: return Expression::unary(Op::Neg, random_expr(gen, depth - 1));
        case 1: return Expression::unary(Op::Sin, random_expr(gen, depth - 1));
        case 2: return Expression::unary(Op::Cos, random_expr(gen, depth - 1));
        case 3: return Expression::unary(Op::Exp, random_expr(gen, depth - 1));
        case 4: return Expression::unary(Op::Abs, random_expr(gen, depth - 1));
        case 5: return Expression::binary(Op::Add, random_expr(gen, depth - 1), random_expr(gen, depth - 1));
        case 6: return Expression::binary(Op::Sub, random_expr(gen, depth - 1), random_expr(gen, depth - 1));
        case 7: return Expression::binary(Op::Mul, random_expr(gen, depth - 1), random_expr(gen, depth - 1));
        case 8: return Expression::binary(Op::Min, random_expr(gen, depth - 1), random_expr(gen, depth - 1));
        case 9: return Expression::binary(Op::Max, random_expr(gen, depth - 1), random_expr(gen, depth - 1));
        default:
            // Keep exponents small integers so values stay finite.
            return Expression::binary(Op::Pow, Expression::unary(Op::Abs, random_expr(gen, depth - 1)),
                                      Expression::number(static_cast<double>(pick(3))));
    }
}

}  // namespace

TEST_CASE("expression grammar: precedence, associativity, literals, functions") {
    const ValueCase cases[] = {
        {"1 + 2*3", 7.0},
        {"(1 + 2)*3", 9.0},
        {"2^3^2", 512.0},          // right-associative power
        {"-2^2", -4.0},            // unary minus binds looser than power
        {"2^-3", 0.125},           // unary minus allowed in the exponent
        {"1 - 2 - 3", -4.0},       // left-associative subtraction
        {"6 / 3 / 2", 1.0},        // left-associative division
        {"--3", 3.0},
        {"pi", 3.14159265358979323846},
        {"abs(-3.5)", 3.5},
        {"exp(0)", 1.0},
        {"min(2, 1 + 5)", 2.0},
        {"max(-1, -2)", -1.0},
        {"2e3", 2000.0},
        {".5", 0.5},
        {"1.5e-2", 0.015},
        {"2e2", 200.0},
        {"1 +\n 2", 3.0},
    };
    for (const ValueCase& c : cases) {
        INFO(c.src);
        REQUIRE_THAT(eval_const(c.src), Catch::Matchers::WithinAbs(c.expected, 1e-15));
    }
    REQUIRE_THAT(eval_const("sin(pi/2)"), Catch::Matchers::WithinAbs(1.0, 1e-15));
    REQUIRE_THAT(eval_const("cos(pi)"), Catch::Matchers::WithinAbs(-1.0, 1e-15));
}

TEST_CASE("expression grammar: parse errors carry exact positions") {
    const ErrorCase cases[] = {
        {"", 1, 1, "unexpected end of expression"},
        {"1 +", 1, 4, "unexpected end of expression"},
        {"2 ^", 1, 4, "unexpected end of expression"},
        {"(1 + 2", 1, 7, "expected ')'"},
        {"1 + * 2", 1, 5, "unexpected '*'"},
        {")", 1, 1, "unexpected ')'"},
        {"foo(1)", 1, 1, "unknown identifier 'foo'"},
        {"x3", 1, 1, "unknown identifier 'x3'"},
        {"_f", 1, 1, "unknown identifier '_f'"},
        {"sin 1", 1, 5, "expected '(' after function name 'sin'"},
        {"sin(1, 2)", 1, 6, "function 'sin' takes one argument"},
        {"min(1)", 1, 6, "expected ',' in call to 'min'"},
        {"min(1 2)", 1, 7, "expected ',' in call to 'min'"},
        {"min(1, 2", 1, 9, "expected ')' to close call to 'min'"},
        {"abs()", 1, 5, "unexpected ')'"},
        {"1 @ 2", 1, 3, "unexpected character '@'"},
        {"1 2", 1, 3, "unexpected trailing input"},
        {"pi(2)", 1, 3, "unexpected trailing input"},
        {"1..2", 1, 3, "unexpected trailing input"},  // lexes as "1." then ".2"
        {"1 . 2", 1, 3, "unexpected character '.'"},
        {"1 +\n@", 2, 1, "unexpected character '@'"},
        {"1 +\n (x1", 2, 5, "expected ')'"},
    };
    for (const ErrorCase& c : cases) {
        INFO(c.src);
        try {
            Expression::parse(c.src);
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.pos().line == c.line);
            CHECK(e.pos().col == c.col);
            CHECK_THAT(e.message(), Catch::Matchers::ContainsSubstring(c.fragment));
            CHECK_THAT(std::string(e.what()),
                       Catch::Matchers::ContainsSubstring("line " + std::to_string(c.line) + ", col " +
                                                          std::to_string(c.col)));
        }
    }
}

TEST_CASE("free variables and unbound-variable reporting") {
    const Expression e = Expression::parse("x1*t + z");
    REQUIRE(e.free_vars() == (var_bit(Var::x1) | var_bit(Var::t) | var_bit(Var::z)));

    Bindings b;
    b.t(2.0).x(3.0, 0.0);
    REQUIRE_THROWS_WITH(e.eval(b), Catch::Matchers::ContainsSubstring("unbound variable z"));
    b.z(4.0);
    REQUIRE(e.eval(b) == 10.0);

    const Expression constant = Expression::parse("1 + 2");
    REQUIRE(constant.free_vars() == 0u);
}

TEST_CASE("structural equality distinguishes operand order") {
    REQUIRE(Expression::parse("1 + 2") == Expression::parse("1+2"));
    REQUIRE(Expression::parse("1 + 2") != Expression::parse("2 + 1"));
    REQUIRE(Expression::parse("sin(x1)") != Expression::parse("cos(x1)"));
    REQUIRE(Expression::parse("(x1)") == Expression::parse("x1"));
}

TEST_CASE("print-parse round trip is the structural identity on 100 random trees") {
    std::mt19937_64 gen(987654321);
    Bindings b;
    b.t(0.3).y(0.6, -0.4).x(1.1, -0.7).z(0.9);
    for (int trial = 0; trial < 100; ++trial) {
        const Expression e = random_expr(gen, 1 + trial % 4);
        const std::string text = e.to_string();
        INFO("trial " << trial << ": " << text);
        const Expression back = Expression::parse(text);
        REQUIRE(back == e);
        const double v1 = e.eval(b);
        const double v2 = back.eval(b);
        REQUIRE((v1 == v2 || (std::isnan(v1) && std::isnan(v2))));
    }
}

TEST_CASE("printing uses full parentheses and 17 significant digits") {
    REQUIRE(Expression::parse("1+2*3").to_string() == "(1 + (2 * 3))");
    REQUIRE(Expression::parse("0.1").to_string() == "0.10000000000000001");
    REQUIRE(Expression::parse("-x2").to_string() == "(-x2)");
    REQUIRE(Expression::parse("min(t, z)").to_string() == "min(t, z)");
}
