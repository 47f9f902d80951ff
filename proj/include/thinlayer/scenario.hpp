#pragma once

// Scenario description: geometry, diffusion coefficients, reaction terms,
// initial data, time horizon, and study parameters, read from a line-oriented
// `key = value` config with sections [geometry] [coefficients] [reactions]
// [initial] [time] [study].  Expression values are quoted strings in the
// coefficient DSL; matrices are symmetric 2x2 literals [[a,b],[b,c]].
//
// Validation is sampling-based and uses fixed, documented lattices so that
// its verdicts are deterministic:
//   - coercivity of D_M: y1 in {i/64}, y2 in {-1 + (2k+1)/64}, 64x64 points;
//   - Lipschitz quotients of reactions: 17 t-points in [0, T], the same y
//     lattice (collapsed when the reaction does not reference y), and 33
//     z-points in [-10, 10] with quotients over adjacent pairs; a bound that
//     grows by more than 25% from the |z| <= 5 window to the full window is
//     reported as a Lipschitz violation;
//   - y1-periodicity: |e(y1) - e(y1 + 1)| <= 1e-9 on the lattice;
//   - interface trace compatibility of the initial data at 64 tangential
//     sample points, tolerance 1e-9.

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "thinlayer/expression.hpp"
#include "thinlayer/fem.hpp"
#include "thinlayer/grid.hpp"

namespace thinlayer {

/// Exact unit-fraction representation used for epsilon values ("1/8" or a
/// decimal that round-trips to one).
inline int parse_inverse_epsilon(const std::string& text, SourcePos pos) {
    const auto slash = text.find('/');
    if (slash != std::string::npos) {
        int p = 0, q = 0;
        try {
            std::size_t used = 0;
            p = std::stoi(text.substr(0, slash), &used);
            if (used != slash)
                throw std::invalid_argument("");
            q = std::stoi(text.substr(slash + 1), &used);
            if (used != text.size() - slash - 1)
                throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw ParseError(pos, "malformed rational '" + text + "'");
        }
        if (p <= 0 || q <= 0 || q % p != 0)
            throw ParseError(pos, "epsilon must be a unit fraction ('" + text + "' is not)");
        const int inv = q / p;
        if (inv < 2)
            throw ParseError(pos, "epsilon must be at most 1/2");
        return inv;
    }
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size() || !(v > 0.0))
        throw ParseError(pos, "malformed epsilon '" + text + "'");
    try {
        return LayerGeometry::from_epsilon(1, 1, v).inv_epsilon;
    } catch (const std::exception& e) {
        throw ParseError(pos, e.what());
    }
}

struct Scenario {
    std::string name = "scenario";
    std::string digest;  // FNV-1a 64 of the source text, hex

    int H = 1;
    int sigma_len = 1;
    std::optional<int> inv_epsilon;  // optional default epsilon for single runs

    Mat2 D_plus = Mat2::identity();
    Mat2 D_minus = Mat2::identity();
    Expression dm11 = Expression::number(1.0);
    Expression dm12 = Expression::number(0.0);
    Expression dm22 = Expression::number(1.0);

    Expression f_plus = Expression::number(0.0);
    Expression f_minus = Expression::number(0.0);
    Expression g_M = Expression::number(0.0);

    Expression init_plus = Expression::number(0.0);
    Expression init_minus = Expression::number(0.0);
    Expression init_M = Expression::number(0.0);

    double T = 0.25;
    std::vector<int> study_inv_epsilons;  // sweep for `study`
    int resolution = 4;                   // per-period / cell resolution N
    int stripe_length = 8;                // boundary-layer truncation L

    LayerGeometry geometry(int inv_eps) const { return LayerGeometry::create(H, sigma_len, inv_eps); }

    Mat2 layer_coefficient(double y1, double y2) const {
        Bindings b;
        b.y(y1, y2);
        return Mat2{dm11.eval_unchecked(b.values), dm12.eval_unchecked(b.values), dm22.eval_unchecked(b.values)};
    }

    double reaction_f(bool plus, double t, double y1, double y2, double z) const {
        Bindings b;
        b.t(t).y(y1, y2).z(z);
        return (plus ? f_plus : f_minus).eval_unchecked(b.values);
    }

    double reaction_g(double t, double y1, double y2, double z) const {
        Bindings b;
        b.t(t).y(y1, y2).z(z);
        return g_M.eval_unchecked(b.values);
    }

    /// Cell average int_{Y^2} f(t, y, z) dy over the unit square (measure 1),
    /// via the fixed 8x8 midpoint lattice.  Expressions that do not reference
    /// y evaluate once; this equals the quadrature value bit for bit because
    /// the lattice has a power-of-two point count.
    double bulk_reaction_average(bool plus, double t, double z) const {
        const Expression& e = plus ? f_plus : f_minus;
        return midpoint_y_integral(e, t, z, false);
    }

    /// Layer integral int_Z g(t, y, z) dy over Z = (0,1) x (-1,1), measure 2.
    double layer_reaction_integral(double t, double z) const {
        return midpoint_y_integral(g_M, t, z, true);
    }

    double initial_bulk(bool plus, double x1, double x2) const {
        Bindings b;
        b.x(x1, x2);
        return (plus ? init_plus : init_minus).eval_unchecked(b.values);
    }

    double initial_layer(double x1) const {
        Bindings b;
        b.x(x1, 0.0);
        return init_M.eval_unchecked(b.values);
    }

  private:
    double midpoint_y_integral(const Expression& e, double t, double z, bool over_layer_cell) const {
        const double measure = over_layer_cell ? 2.0 : 1.0;
        Bindings b;
        b.t(t).z(z);
        if ((e.free_vars() & (var_bit(Var::y1) | var_bit(Var::y2))) == 0) {
            b.y(0.0, 0.0);
            return e.eval_unchecked(b.values) * measure;
        }
        double sum = 0.0;
        for (int i = 0; i < 8; ++i) {
            const double y1 = (i + 0.5) / 8.0;
            for (int k = 0; k < 8; ++k) {
                const double y2 = over_layer_cell ? -1.0 + (2 * k + 1) / 8.0 : (k + 0.5) / 8.0;
                b.y(y1, y2);
                sum += e.eval_unchecked(b.values);
            }
        }
        return sum / 64.0 * measure;
    }
};

inline std::string fnv1a_hex(const std::string& data) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace detail {

struct ConfigValue {
    std::string text;
    int line = 1;
    int col = 1;  // column of the first value character
};

inline std::string trim(const std::string& s, int* col_shift = nullptr) {
    std::size_t a = 0, b = s.size();
    while (a < b && (s[a] == ' ' || s[a] == '\t'))
        ++a;
    while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r'))
        --b;
    if (col_shift)
        *col_shift = static_cast<int>(a);
    return s.substr(a, b - a);
}

inline Expression parse_quoted_expression(const ConfigValue& v) {
    if (v.text.size() < 2 || v.text.front() != '"' || v.text.back() != '"')
        throw ParseError({v.line, v.col}, "expected a quoted expression string");
    const std::string inner = v.text.substr(1, v.text.size() - 2);
    try {
        return Expression::parse(inner);
    } catch (const ParseError& e) {
        // Positions inside a quoted single-line expression shift by the
        // opening quote's column.
        throw ParseError({v.line, v.col + e.pos().col}, e.message());
    }
}

inline double parse_number(const ConfigValue& v) {
    char* end = nullptr;
    const double x = std::strtod(v.text.c_str(), &end);
    if (end != v.text.c_str() + v.text.size() || v.text.empty())
        throw ParseError({v.line, v.col}, "malformed number '" + v.text + "'");
    return x;
}

inline int parse_int(const ConfigValue& v) {
    try {
        std::size_t used = 0;
        const int x = std::stoi(v.text, &used);
        if (used != v.text.size())
            throw std::invalid_argument("");
        return x;
    } catch (const std::exception&) {
        throw ParseError({v.line, v.col}, "malformed integer '" + v.text + "'");
    }
}

inline Mat2 parse_matrix(const ConfigValue& v) {
    // [[a, b], [c, d]] with numeric entries and c == b (symmetry).
    const std::string& s = v.text;
    std::size_t at = 0;
    auto pos_of = [&](std::size_t i) { return SourcePos{v.line, v.col + static_cast<int>(i)}; };
    auto skip_ws = [&] {
        while (at < s.size() && (s[at] == ' ' || s[at] == '\t'))
            ++at;
    };
    auto expect = [&](char c) {
        skip_ws();
        if (at >= s.size() || s[at] != c)
            throw ParseError(pos_of(at), std::string("expected '") + c + "' in matrix literal");
        ++at;
    };
    auto number = [&]() {
        skip_ws();
        char* end = nullptr;
        const double x = std::strtod(s.c_str() + at, &end);
        if (end == s.c_str() + at)
            throw ParseError(pos_of(at), "expected a number in matrix literal");
        at = static_cast<std::size_t>(end - s.c_str());
        return x;
    };
    expect('[');
    expect('[');
    const double a11 = number();
    expect(',');
    const double a12 = number();
    expect(']');
    expect(',');
    expect('[');
    skip_ws();
    const std::size_t a21_at = at;
    const double a21 = number();
    expect(',');
    const double a22 = number();
    expect(']');
    expect(']');
    skip_ws();
    if (at != s.size())
        throw ParseError(pos_of(at), "trailing input after matrix literal");
    if (a21 != a12)
        throw ParseError(pos_of(a21_at), "matrix must be symmetric ([[a,b],[b,c]])");
    return Mat2{a11, a12, a22};
}

inline std::vector<int> parse_epsilon_list(const ConfigValue& v) {
    std::vector<int> out;
    std::size_t start = 0;
    int col = v.col;
    while (start <= v.text.size()) {
        std::size_t comma = v.text.find(',', start);
        const std::string piece_raw = v.text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        int shift = 0;
        const std::string piece = trim(piece_raw, &shift);
        if (piece.empty())
            throw ParseError({v.line, col + shift}, "empty entry in epsilon list");
        out.push_back(parse_inverse_epsilon(piece, {v.line, col + shift}));
        if (comma == std::string::npos)
            break;
        col = v.col + static_cast<int>(comma) + 1;
        start = comma + 1;
    }
    return out;
}

}  // namespace detail

/// Parses a scenario config document.  Throws ParseError with file-accurate
/// line/column positions for syntax errors, unknown sections or keys,
/// duplicate keys, and malformed values.
inline Scenario parse_scenario_text(const std::string& text, const std::string& name = "scenario") {
    using detail::ConfigValue;

    Scenario sc;
    sc.name = name;
    sc.digest = fnv1a_hex(text);

    static const std::vector<std::pair<std::string, std::vector<std::string>>> schema = {
        {"geometry", {"H", "sigma_len", "epsilon"}},
        {"coefficients", {"D_plus", "D_minus", "D_M", "D_M_11", "D_M_12", "D_M_22"}},
        {"reactions", {"f_plus", "f_minus", "g_M"}},
        {"initial", {"init_plus", "init_minus", "init_M"}},
        {"time", {"T"}},
        {"study", {"epsilons", "resolution", "stripe_length"}},
    };

    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    std::string section;
    std::vector<std::string> seen_keys;
    bool dm_scalar_seen = false, dm_entries_seen = false;

    while (std::getline(in, line)) {
        ++line_no;
        // Strip comments ('#' outside quotes).
        bool in_quotes = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"')
                in_quotes = !in_quotes;
            else if (line[i] == '#' && !in_quotes) {
                line.resize(i);
                break;
            }
        }
        int indent = 0;
        const std::string stripped = detail::trim(line, &indent);
        if (stripped.empty())
            continue;

        if (stripped.front() == '[') {
            if (stripped.back() != ']')
                throw ParseError({line_no, indent + 1}, "unterminated section header");
            const std::string sec = stripped.substr(1, stripped.size() - 2);
            bool known = false;
            for (const auto& [s, keys] : schema)
                known = known || s == sec;
            if (!known)
                throw ParseError({line_no, indent + 2}, "unknown section [" + sec + "]");
            section = sec;
            continue;
        }

        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ParseError({line_no, indent + 1}, "expected 'key = value'");
        int key_shift = 0;
        const std::string key = detail::trim(stripped.substr(0, eq), &key_shift);
        if (key.empty())
            throw ParseError({line_no, indent + 1}, "missing key before '='");
        if (section.empty())
            throw ParseError({line_no, indent + 1 + key_shift}, "key '" + key + "' appears before any [section]");

        bool key_known = false;
        for (const auto& [s, keys] : schema) {
            if (s != section)
                continue;
            for (const auto& k : keys)
                key_known = key_known || k == key;
        }
        if (!key_known)
            throw ParseError({line_no, indent + 1 + key_shift}, "unknown key '" + key + "' in [" + section + "]");

        const std::string qualified = section + "." + key;
        for (const auto& k : seen_keys)
            if (k == qualified)
                throw ParseError({line_no, indent + 1 + key_shift}, "duplicate key '" + key + "' in [" + section + "]");
        seen_keys.push_back(qualified);

        int val_shift = 0;
        const std::string value_text = detail::trim(stripped.substr(eq + 1), &val_shift);
        ConfigValue value{value_text, line_no, indent + static_cast<int>(eq) + 2 + val_shift};
        if (value_text.empty())
            throw ParseError({value.line, value.col}, "missing value for key '" + key + "'");

        if (qualified == "geometry.H") {
            sc.H = detail::parse_int(value);
        } else if (qualified == "geometry.sigma_len") {
            sc.sigma_len = detail::parse_int(value);
        } else if (qualified == "geometry.epsilon") {
            sc.inv_epsilon = parse_inverse_epsilon(value.text, {value.line, value.col});
        } else if (qualified == "coefficients.D_plus") {
            sc.D_plus = detail::parse_matrix(value);
        } else if (qualified == "coefficients.D_minus") {
            sc.D_minus = detail::parse_matrix(value);
        } else if (qualified == "coefficients.D_M") {
            if (dm_entries_seen)
                throw ParseError({value.line, value.col}, "D_M conflicts with D_M_11/D_M_12/D_M_22");
            dm_scalar_seen = true;
            sc.dm11 = detail::parse_quoted_expression(value);
            sc.dm22 = sc.dm11;
            sc.dm12 = Expression::number(0.0);
        } else if (qualified == "coefficients.D_M_11" || qualified == "coefficients.D_M_12" ||
                   qualified == "coefficients.D_M_22") {
            if (dm_scalar_seen)
                throw ParseError({value.line, value.col}, "D_M_11/D_M_12/D_M_22 conflict with scalar D_M");
            dm_entries_seen = true;
            Expression e = detail::parse_quoted_expression(value);
            if (key == "D_M_11")
                sc.dm11 = std::move(e);
            else if (key == "D_M_12")
                sc.dm12 = std::move(e);
            else
                sc.dm22 = std::move(e);
        } else if (qualified == "reactions.f_plus") {
            sc.f_plus = detail::parse_quoted_expression(value);
        } else if (qualified == "reactions.f_minus") {
            sc.f_minus = detail::parse_quoted_expression(value);
        } else if (qualified == "reactions.g_M") {
            sc.g_M = detail::parse_quoted_expression(value);
        } else if (qualified == "initial.init_plus") {
            sc.init_plus = detail::parse_quoted_expression(value);
        } else if (qualified == "initial.init_minus") {
            sc.init_minus = detail::parse_quoted_expression(value);
        } else if (qualified == "initial.init_M") {
            sc.init_M = detail::parse_quoted_expression(value);
        } else if (qualified == "time.T") {
            sc.T = detail::parse_number(value);
            if (!(sc.T > 0.0))
                throw ParseError({value.line, value.col}, "T must be positive");
        } else if (qualified == "study.epsilons") {
            sc.study_inv_epsilons = detail::parse_epsilon_list(value);
        } else if (qualified == "study.resolution") {
            sc.resolution = detail::parse_int(value);
            if (sc.resolution < 2)
                throw ParseError({value.line, value.col}, "resolution must be >= 2");
        } else if (qualified == "study.stripe_length") {
            sc.stripe_length = detail::parse_int(value);
            if (sc.stripe_length < 2)
                throw ParseError({value.line, value.col}, "stripe_length must be >= 2");
        }
    }

    if (sc.H < 1)
        throw ParseError({1, 1}, "geometry.H must be a positive integer");
    if (sc.sigma_len < 1)
        throw ParseError({1, 1}, "geometry.sigma_len must be a positive integer");
    return sc;
}

inline Scenario parse_scenario_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open scenario file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string name = path;
    const auto slash = name.find_last_of("/\\");
    if (slash != std::string::npos)
        name = name.substr(slash + 1);
    const auto dot = name.find_last_of('.');
    if (dot != std::string::npos && dot > 0)
        name = name.substr(0, dot);
    return parse_scenario_text(buf.str(), name);
}

struct Diagnostic {
    std::string code;     // A1, A2, A3, A5-trace, periodicity, finite, vars
    std::string key;      // offending scenario key
    std::string message;
};

struct ValidationReport {
    std::vector<Diagnostic> diagnostics;
    double coercivity_min = std::numeric_limits<double>::infinity();
    std::vector<std::pair<std::string, double>> lipschitz_bounds;

    bool ok() const { return diagnostics.empty(); }
};

namespace detail {

struct LipschitzSample {
    double bound_inner = 0.0;  // max quotient with both endpoints in |z| <= 5
    double bound_full = 0.0;
    bool finite = true;
};

inline LipschitzSample sample_lipschitz(const Expression& e, double T) {
    LipschitzSample out;
    if ((e.free_vars() & var_bit(Var::z)) == 0) {
        return out;  // constant in z: Lipschitz with bound 0
    }
    const bool uses_y = (e.free_vars() & (var_bit(Var::y1) | var_bit(Var::y2))) != 0;
    const bool uses_t = (e.free_vars() & var_bit(Var::t)) != 0;
    const int ny = uses_y ? 64 : 1;
    const int nt = uses_t ? 17 : 1;
    std::array<double, 33> zs;
    for (int k = 0; k < 33; ++k)
        zs[static_cast<std::size_t>(k)] = -10.0 + 20.0 * k / 32.0;

    Bindings b;
    for (int it = 0; it < nt; ++it) {
        const double t = nt == 1 ? 0.0 : T * it / (nt - 1);
        for (int i = 0; i < ny; ++i) {
            for (int j = 0; j < ny; ++j) {
                const double y1 = static_cast<double>(i) / 64.0;
                const double y2 = -1.0 + (2.0 * j + 1.0) / 64.0;
                b.t(t).y(y1, y2);
                double prev = 0.0;
                for (int k = 0; k < 33; ++k) {
                    b.z(zs[static_cast<std::size_t>(k)]);
                    const double v = e.eval_unchecked(b.values);
                    if (!std::isfinite(v))
                        out.finite = false;
                    if (k > 0) {
                        const double q = std::abs(v - prev) / (zs[1] - zs[0]);
                        out.bound_full = std::max(out.bound_full, q);
                        if (std::abs(zs[static_cast<std::size_t>(k)]) <= 5.0 + 1e-12 &&
                            std::abs(zs[static_cast<std::size_t>(k - 1)]) <= 5.0 + 1e-12)
                            out.bound_inner = std::max(out.bound_inner, q);
                    }
                    prev = v;
                }
            }
        }
    }
    return out;
}

inline bool y1_periodic(const Expression& e, double T) {
    if ((e.free_vars() & var_bit(Var::y1)) == 0)
        return true;
    Bindings b;
    b.t(T / 2).z(1.0);
    for (int i = 0; i < 64; ++i) {
        for (int j = 0; j < 8; ++j) {
            const double y1 = static_cast<double>(i) / 64.0;
            const double y2 = -1.0 + (2.0 * j + 1.0) / 8.0;
            b.y(y1, y2);
            const double a = e.eval_unchecked(b.values);
            b.y(y1 + 1.0, y2);
            const double bb = e.eval_unchecked(b.values);
            if (!(std::abs(a - bb) <= 1e-9))
                return false;
        }
    }
    return true;
}

}  // namespace detail

/// Checks the scenario's structural assumptions by sampling: coercivity of
/// the diffusion tensors, uniform-in-z Lipschitz behavior of the reactions,
/// y1-periodicity of microscopic fields, variable usage per slot, and trace
/// compatibility of the initial data on the interface.
inline ValidationReport validate(const Scenario& sc) {
    ValidationReport rep;
    auto add = [&rep](const std::string& code, const std::string& key, const std::string& msg) {
        rep.diagnostics.push_back({code, key, msg});
    };

    // Variable usage per slot.
    struct Slot {
        const char* key;
        const Expression* e;
        unsigned allowed;
    };
    const unsigned y_mask = var_bit(Var::y1) | var_bit(Var::y2);
    const unsigned reaction_mask = var_bit(Var::t) | y_mask | var_bit(Var::z);
    const unsigned x_mask = var_bit(Var::x1) | var_bit(Var::x2);
    const std::vector<Slot> slots = {
        {"D_M_11", &sc.dm11, y_mask},          {"D_M_12", &sc.dm12, y_mask},
        {"D_M_22", &sc.dm22, y_mask},          {"f_plus", &sc.f_plus, reaction_mask},
        {"f_minus", &sc.f_minus, reaction_mask}, {"g_M", &sc.g_M, reaction_mask},
        {"init_plus", &sc.init_plus, x_mask},  {"init_minus", &sc.init_minus, x_mask},
        {"init_M", &sc.init_M, var_bit(Var::x1)},
    };
    for (const Slot& s : slots) {
        const unsigned extra = s.e->free_vars() & ~s.allowed;
        if (extra != 0) {
            std::string names;
            for (int v = 0; v < 6; ++v)
                if (extra & (1u << v))
                    names += std::string(names.empty() ? "" : ", ") + var_name(static_cast<Var>(v));
            add("vars", s.key, "expression references variables not available here: " + names);
        }
    }
    if (!rep.diagnostics.empty())
        return rep;  // later samplers assume the variable contracts hold

    // A1: uniform coercivity.  Constant bulk tensors are checked analytically;
    // the layer tensor is sampled on the 64x64 lattice.
    if (!(sc.D_plus.min_eigenvalue() > 0.0))
        add("A1", "D_plus", "bulk tensor is not positive definite");
    if (!(sc.D_minus.min_eigenvalue() > 0.0))
        add("A1", "D_minus", "bulk tensor is not positive definite");
    {
        double cmin = std::numeric_limits<double>::infinity();
        bool finite = true;
        for (int i = 0; i < 64; ++i) {
            for (int j = 0; j < 64; ++j) {
                const double y1 = static_cast<double>(i) / 64.0;
                const double y2 = -1.0 + (2.0 * j + 1.0) / 64.0;
                const Mat2 d = sc.layer_coefficient(y1, y2);
                if (!std::isfinite(d.a11) || !std::isfinite(d.a12) || !std::isfinite(d.a22))
                    finite = false;
                cmin = std::min(cmin, d.min_eigenvalue());
            }
        }
        rep.coercivity_min = std::min({cmin, sc.D_plus.min_eigenvalue(), sc.D_minus.min_eigenvalue()});
        if (!finite)
            add("finite", "D_M", "layer tensor evaluates to a non-finite value on the sample lattice");
        else if (!(cmin >= 1e-9))
            add("A1", "D_M", "layer tensor sampled minimum eigenvalue " + std::to_string(cmin) + " is below 1e-9");
    }

    // A2/A3: Lipschitz sampling of the reactions.
    const std::vector<std::pair<std::string, const Expression*>> reactions = {
        {"f_plus", &sc.f_plus}, {"f_minus", &sc.f_minus}, {"g_M", &sc.g_M}};
    for (const auto& [key, e] : reactions) {
        const detail::LipschitzSample s = detail::sample_lipschitz(*e, sc.T);
        rep.lipschitz_bounds.emplace_back(key, s.bound_full);
        const std::string code = key == "g_M" ? "A3" : "A2";
        if (!s.finite)
            add("finite", key, "reaction evaluates to a non-finite value on the sample lattice");
        else if (s.bound_full > 1.25 * s.bound_inner + 1e-12)
            add(code, key,
                "sampled Lipschitz bound grows with the z window (" + std::to_string(s.bound_inner) + " on |z|<=5 vs " +
                    std::to_string(s.bound_full) + " on |z|<=10); not uniformly Lipschitz");
    }

    // Periodicity in y1 of the microscopic fields.
    const std::vector<std::pair<std::string, const Expression*>> periodic_fields = {
        {"D_M_11", &sc.dm11}, {"D_M_12", &sc.dm12}, {"D_M_22", &sc.dm22},
        {"f_plus", &sc.f_plus}, {"f_minus", &sc.f_minus}, {"g_M", &sc.g_M}};
    for (const auto& [key, e] : periodic_fields) {
        if (!detail::y1_periodic(*e, sc.T))
            add("periodicity", key, "expression is not 1-periodic in y1 on the sample lattice");
    }

    // A5': initial trace compatibility on the interface.
    {
        double worst = 0.0;
        bool finite = true;
        for (int i = 0; i < 64; ++i) {
            const double x1 = static_cast<double>(sc.sigma_len) * i / 64.0;
            const double vp = sc.initial_bulk(true, x1, 0.0);
            const double vm = sc.initial_bulk(false, x1, 0.0);
            const double vM = sc.initial_layer(x1);
            if (!std::isfinite(vp) || !std::isfinite(vm) || !std::isfinite(vM))
                finite = false;
            worst = std::max({worst, std::abs(vp - vM), std::abs(vm - vM)});
        }
        if (!finite)
            add("finite", "init", "initial data evaluates to a non-finite value on the sample lattice");
        else if (!(worst <= 1e-9))
            add("A5-trace", "init",
                "initial bulk traces and layer data differ by " + std::to_string(worst) + " on the interface");
    }

    return rep;
}

}  // namespace thinlayer
