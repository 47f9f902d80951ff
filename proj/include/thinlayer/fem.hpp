#pragma once

// Q1 (bilinear quadrilateral) assembly on the structured grids, with 2x2
// Gauss quadrature.  Coefficients are evaluated at quadrature points, so
// matrix-valued diffusion fields and region-dependent weights share one
// element loop.  The same quadrature evaluates the discrete L2/H1 error
// integrals, which keeps energy bookkeeping consistent with assembly.

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "thinlayer/grid.hpp"
#include "thinlayer/sparse.hpp"

namespace thinlayer {

/// Symmetric 2x2 coefficient matrix.
struct Mat2 {
    double a11 = 0.0;
    double a12 = 0.0;
    double a22 = 0.0;

    static Mat2 identity() { return {1.0, 0.0, 1.0}; }
    static Mat2 scalar(double s) { return {s, 0.0, s}; }

    double min_eigenvalue() const {
        const double mean = 0.5 * (a11 + a22);
        const double rad = std::sqrt(0.25 * (a11 - a22) * (a11 - a22) + a12 * a12);
        return mean - rad;
    }

    Mat2 scaled(double s) const { return {s * a11, s * a12, s * a22}; }
};

namespace quadrature {

/// 2x2 Gauss points on the reference square [0,1]^2 and their weights
/// (weight 1/4 each, so the rule integrates reference-cell averages).
inline const std::array<double, 2>& gauss01() {
    static const std::array<double, 2> pts = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
    return pts;
}

}  // namespace quadrature

/// Values and gradients of the four bilinear shape functions at a reference
/// point (xi, eta) in [0,1]^2; local node order is (0,0), (1,0), (1,1), (0,1).
struct ShapeEval {
    std::array<double, 4> n;
    std::array<double, 4> dxi;
    std::array<double, 4> deta;
};

inline ShapeEval q1_shapes(double xi, double eta) {
    ShapeEval s;
    s.n = {(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta};
    s.dxi = {-(1 - eta), (1 - eta), eta, -eta};
    s.deta = {-(1 - xi), -xi, xi, 1 - xi};
    return s;
}

/// Shape evaluations at the four Gauss points of the reference square, in
/// the same (eta outer, xi inner) order used by element_quadrature.
inline const std::array<ShapeEval, 4>& q1_gauss_shapes() {
    static const std::array<ShapeEval, 4> table = [] {
        std::array<ShapeEval, 4> t{};
        const auto& pts = quadrature::gauss01();
        int k = 0;
        for (double eta : pts)
            for (double xi : pts)
                t[static_cast<std::size_t>(k++)] = q1_shapes(xi, eta);
        return t;
    }();
    return table;
}

/// Local node -> global node map for element (i, j).
inline std::array<int, 4> element_nodes(const StructuredGrid& g, int i, int j) {
    return {g.node(i, j), g.node(i + 1, j), g.node(i + 1, j + 1), g.node(i, j + 1)};
}

/// Physical coordinates of the 2x2 Gauss points of element (i, j), paired
/// with the local reference coordinates.
struct ElementQuadrature {
    std::array<double, 4> x1;
    std::array<double, 4> x2;
    std::array<double, 4> xi;
    std::array<double, 4> eta;
    double hx = 0.0;
    double hy = 0.0;
};

inline ElementQuadrature element_quadrature(const StructuredGrid& g, int i, int j) {
    ElementQuadrature q;
    q.hx = g.tan_spacing;
    q.hy = g.vert_spacing(j);
    const double x0 = g.tan_coord(i);
    const double y0 = g.vert_coord(j);
    const auto& pts = quadrature::gauss01();
    int k = 0;
    for (double eta : pts) {
        for (double xi : pts) {
            q.xi[k] = xi;
            q.eta[k] = eta;
            q.x1[k] = x0 + xi * q.hx;
            q.x2[k] = y0 + eta * q.hy;
            ++k;
        }
    }
    return q;
}

/// Exact Q1 element mass matrix scaled by `weight` (tensor-product Simpson
/// form hx*hy/36 * [[4,2,1,2],...]).
inline std::array<std::array<double, 4>, 4> q1_element_mass(double hx, double hy, double weight) {
    const double s = weight * hx * hy / 36.0;
    return {{{4 * s, 2 * s, 1 * s, 2 * s},
             {2 * s, 4 * s, 2 * s, 1 * s},
             {1 * s, 2 * s, 4 * s, 2 * s},
             {2 * s, 1 * s, 2 * s, 4 * s}}};
}

/// Element stiffness with a (possibly varying) symmetric coefficient matrix
/// evaluated at the four Gauss points: entries int_E (D grad phi_a).grad phi_b.
inline std::array<std::array<double, 4>, 4> q1_element_stiffness(double hx, double hy,
                                                                 const std::array<Mat2, 4>& d_at_gauss,
                                                                 const std::array<double, 4>& xi,
                                                                 const std::array<double, 4>& eta) {
    std::array<std::array<double, 4>, 4> k{};
    const double jac = hx * hy;
    for (int q = 0; q < 4; ++q) {
        const ShapeEval s = q1_shapes(xi[q], eta[q]);
        std::array<double, 4> gx, gy;
        for (int a = 0; a < 4; ++a) {
            gx[a] = s.dxi[a] / hx;
            gy[a] = s.deta[a] / hy;
        }
        const Mat2& d = d_at_gauss[q];
        const double w = 0.25 * jac;
        for (int a = 0; a < 4; ++a) {
            const double dx = d.a11 * gx[a] + d.a12 * gy[a];
            const double dy = d.a12 * gx[a] + d.a22 * gy[a];
            for (int b = 0; b < 4; ++b)
                k[a][b] += w * (dx * gx[b] + dy * gy[b]);
        }
    }
    return k;
}

/// Coefficient field: region plus physical quadrature position -> 2x2 matrix.
using CoefficientFn = std::function<Mat2(Region, double x1, double x2)>;

/// Assembles the stiffness matrix int (D grad u).grad v with the coefficient
/// evaluated at quadrature points.
inline SparseMatrix assemble_stiffness(const StructuredGrid& g, const CoefficientFn& coeff) {
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(g.num_cells()) * 16);
    for (int j = 0; j < g.vert_cells(); ++j) {
        const Region reg = g.region(j);
        for (int i = 0; i < g.tan_cells; ++i) {
            const ElementQuadrature q = element_quadrature(g, i, j);
            std::array<Mat2, 4> d;
            for (int k = 0; k < 4; ++k)
                d[k] = coeff(reg, q.x1[k], q.x2[k]);
            const auto ke = q1_element_stiffness(q.hx, q.hy, d, q.xi, q.eta);
            const auto nodes = element_nodes(g, i, j);
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b)
                    t.push_back({nodes[a], nodes[b], ke[a][b]});
        }
    }
    return SparseMatrix::from_triplets(g.num_nodes(), g.num_nodes(), std::move(t));
}

/// Assembles the mass matrix with a constant weight per region; regions whose
/// weight is zero are skipped entirely (used for per-region reaction loads).
inline SparseMatrix assemble_mass(const StructuredGrid& g, const std::function<double(Region)>& weight) {
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(g.num_cells()) * 16);
    for (int j = 0; j < g.vert_cells(); ++j) {
        const double w = weight(g.region(j));
        if (w == 0.0)
            continue;
        const double hy = g.vert_spacing(j);
        const auto me = q1_element_mass(g.tan_spacing, hy, w);
        for (int i = 0; i < g.tan_cells; ++i) {
            const auto nodes = element_nodes(g, i, j);
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b)
                    t.push_back({nodes[a], nodes[b], me[a][b]});
        }
    }
    return SparseMatrix::from_triplets(g.num_nodes(), g.num_nodes(), std::move(t));
}

/// Lumped mass vector (row sums of the weighted mass matrix); equals the
/// quadrature weight of each nodal hat function, so it doubles as the
/// discrete zero-mean weight vector for cell problems.
inline std::vector<double> lumped_mass(const StructuredGrid& g, const std::function<double(Region)>& weight) {
    std::vector<double> m(static_cast<std::size_t>(g.num_nodes()), 0.0);
    for (int j = 0; j < g.vert_cells(); ++j) {
        const double w = weight(g.region(j));
        if (w == 0.0)
            continue;
        const double cell = 0.25 * w * g.tan_spacing * g.vert_spacing(j);
        for (int i = 0; i < g.tan_cells; ++i)
            for (int nd : element_nodes(g, i, j))
                m[static_cast<std::size_t>(nd)] += cell;
    }
    return m;
}

/// Consistent P1 mass application on a periodic tangential line with spacing
/// h: (M q)_i = h/6 (q_{i-1} + 4 q_i + q_{i+1}).
inline std::vector<double> line_mass_apply(const std::vector<double>& q, double h) {
    const std::size_t n = q.size();
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t prev = (i + n - 1) % n;
        const std::size_t next = (i + 1) % n;
        out[i] = h / 6.0 * (q[prev] + 4.0 * q[i] + q[next]);
    }
    return out;
}

/// Gradient of a Q1 nodal field at a reference point of element (i, j).
inline void q1_gradient(const StructuredGrid& g, const std::vector<double>& u, int i, int j, double xi, double eta,
                        double hx, double hy, double& gx, double& gy) {
    const ShapeEval s = q1_shapes(xi, eta);
    const auto nodes = element_nodes(g, i, j);
    gx = 0.0;
    gy = 0.0;
    for (int a = 0; a < 4; ++a) {
        const double v = u[static_cast<std::size_t>(nodes[a])];
        gx += v * s.dxi[a] / hx;
        gy += v * s.deta[a] / hy;
    }
}

struct NormsSq {
    double l2 = 0.0;
    double h1_semi = 0.0;
};

/// Q1-consistent squared L2 and H1-seminorm integrals of the difference of
/// two nodal fields over the elements of one region (or all elements).
inline NormsSq difference_norms_sq(const StructuredGrid& g, const std::vector<double>& u, const std::vector<double>& v,
                                   std::optional<Region> only = std::nullopt) {
    if (static_cast<int>(u.size()) != g.num_nodes() || static_cast<int>(v.size()) != g.num_nodes())
        throw std::invalid_argument("difference_norms_sq: field size mismatch");
    NormsSq out;
    const auto& shapes = q1_gauss_shapes();
    for (int j = 0; j < g.vert_cells(); ++j) {
        if (only && g.region(j) != *only)
            continue;
        const double hy = g.vert_spacing(j);
        const double hx = g.tan_spacing;
        const double w = 0.25 * hx * hy;
        for (int i = 0; i < g.tan_cells; ++i) {
            const auto nodes = element_nodes(g, i, j);
            std::array<double, 4> d;
            for (int a = 0; a < 4; ++a)
                d[a] = u[static_cast<std::size_t>(nodes[a])] - v[static_cast<std::size_t>(nodes[a])];
            for (const ShapeEval& s : shapes) {
                double val = 0.0, gx = 0.0, gy = 0.0;
                for (int a = 0; a < 4; ++a) {
                    val += d[a] * s.n[a];
                    gx += d[a] * s.dxi[a];
                    gy += d[a] * s.deta[a];
                }
                gx /= hx;
                gy /= hy;
                out.l2 += w * val * val;
                out.h1_semi += w * (gx * gx + gy * gy);
            }
        }
    }
    return out;
}

/// Energy int_E |grad u|^2 over a vertical band of elements [j0, j1).
inline double band_gradient_energy(const StructuredGrid& g, const std::vector<double>& u, int j0, int j1) {
    double e = 0.0;
    const auto& pts = quadrature::gauss01();
    for (int j = j0; j < j1; ++j) {
        const double hy = g.vert_spacing(j);
        const double hx = g.tan_spacing;
        const double w = 0.25 * hx * hy;
        for (int i = 0; i < g.tan_cells; ++i) {
            for (double eta : pts) {
                for (double xi : pts) {
                    double gx, gy;
                    q1_gradient(g, u, i, j, xi, eta, hx, hy, gx, gy);
                    e += w * (gx * gx + gy * gy);
                }
            }
        }
    }
    return e;
}

/// Weighted integral of a nodal field: 1^T M u with the given region weights.
inline double weighted_integral(const StructuredGrid& g, const std::vector<double>& u,
                                const std::function<double(Region)>& weight) {
    const std::vector<double> m = lumped_mass(g, weight);
    return dot(m, u);
}

}  // namespace thinlayer
