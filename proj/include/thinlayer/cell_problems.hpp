#pragma once

// Unit-cell problems on Z = (0,1) x (-1,1) and boundary-layer problems on
// truncated semi-infinite stripes.  These provide the ingredients of the
// effective interface model: the first-order cell function and effective
// tangential coefficient, the bulk boundary-layer correctors matched to the
// cell function's traces, the consistent (variational) interface fluxes,
// and the second-order cell function driven by those fluxes.
//
// Weak forms (all with tangentially periodic Q1 spaces):
//   first order:   int_Z D (grad w + e1) . grad phi = 0,  zero co-normal flux
//                  on the top/bottom faces, zero weighted mean;
//   effective      d* = 1/|Z| int_Z D (grad w + e1) . (grad w + e1);
//   boundary layer: -div(D_bulk grad w) = 0 on (0,1) x (0,L), w = trace at
//                  y2 = 0, homogeneous Neumann at the truncation plane;
//   second order:  int_Z D grad w2 . grad phi = -sum_{S^+-} int q phi, where
//                  q is the co-normal boundary-layer flux data; the
//                  right-hand side is projected onto the solvable range and
//                  the removed component is recorded as the compatibility
//                  defect.

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "thinlayer/fem.hpp"
#include "thinlayer/grid.hpp"
#include "thinlayer/sparse.hpp"

namespace thinlayer {

using LayerCoefficient = std::function<Mat2(double y1, double y2)>;

struct CellSolveOptions {
    double tolerance = 1e-11;
    int max_iterations = 20000;
};

struct FirstOrderCell {
    std::vector<double> w;  // nodal values, zero weighted mean
    SolveReport report;
};

/// Solves the first-order cell problem in the tangential direction e1.
inline FirstOrderCell solve_cell_first_order(const StructuredGrid& grid, const LayerCoefficient& coefficient,
                                             const CellSolveOptions& opt = {}) {
    if (!grid.tan_periodic)
        throw std::invalid_argument("solve_cell_first_order: cell grid must be tangentially periodic");
    const CoefficientFn coeff = [&coefficient](Region, double y1, double y2) { return coefficient(y1, y2); };
    const SparseMatrix k = assemble_stiffness(grid, coeff);

    // Load: -int_Z (D e1) . grad phi_i.
    std::vector<double> load(static_cast<std::size_t>(grid.num_nodes()), 0.0);
    const auto& pts = quadrature::gauss01();
    for (int j = 0; j < grid.vert_cells(); ++j) {
        const double hy = grid.vert_spacing(j);
        const double hx = grid.tan_spacing;
        const double w = 0.25 * hx * hy;
        for (int i = 0; i < grid.tan_cells; ++i) {
            const auto nodes = element_nodes(grid, i, j);
            const double x0 = grid.tan_coord(i);
            const double y0 = grid.vert_coord(j);
            for (double eta : pts) {
                for (double xi : pts) {
                    const Mat2 d = coefficient(x0 + xi * hx, y0 + eta * hy);
                    const ShapeEval s = q1_shapes(xi, eta);
                    for (int a = 0; a < 4; ++a) {
                        const double gx = s.dxi[a] / hx;
                        const double gy = s.deta[a] / hy;
                        load[static_cast<std::size_t>(nodes[a])] -= w * (d.a11 * gx + d.a12 * gy);
                    }
                }
            }
        }
    }

    const std::vector<double> weights = lumped_mass(grid, [](Region) { return 1.0; });
    auto [w, report] = solve_cg(k, load, opt.tolerance, opt.max_iterations,
                                Nullspace::weighted_constants(weights));
    return {std::move(w), std::move(report)};
}

/// Effective tangential coefficient d* = 1/|Z| int_Z D (grad w + e1).(grad w + e1).
inline double effective_tensor(const StructuredGrid& grid, const LayerCoefficient& coefficient,
                               const std::vector<double>& w) {
    if (static_cast<int>(w.size()) != grid.num_nodes())
        throw std::invalid_argument("effective_tensor: cell solution does not match the grid");
    double acc = 0.0;
    const auto& pts = quadrature::gauss01();
    for (int j = 0; j < grid.vert_cells(); ++j) {
        const double hy = grid.vert_spacing(j);
        const double hx = grid.tan_spacing;
        const double wq = 0.25 * hx * hy;
        for (int i = 0; i < grid.tan_cells; ++i) {
            const double x0 = grid.tan_coord(i);
            const double y0 = grid.vert_coord(j);
            for (double eta : pts) {
                for (double xi : pts) {
                    double gx, gy;
                    q1_gradient(grid, w, i, j, xi, eta, hx, hy, gx, gy);
                    gx += 1.0;  // grad w + e1
                    const Mat2 d = coefficient(x0 + xi * hx, y0 + eta * hy);
                    acc += wq * (gx * (d.a11 * gx + d.a12 * gy) + gy * (d.a12 * gx + d.a22 * gy));
                }
            }
        }
    }
    return acc / grid.measure();
}

/// Least-squares decay rate of slab energies E_k ~ exp(-2 omega k).  The fit
/// skips the first slab (near-field) and the last (truncation-affected);
/// returns +infinity when the fitted energies vanish.
struct DecayFit {
    double omega = 0.0;
    double max_ratio = 0.0;  // max E_{k+1}/E_k over the fitted pairs
    int first = 0;
    int last = 0;  // inclusive fit range
};

inline DecayFit decay_rate(const std::vector<double>& slab_energies) {
    const int n = static_cast<int>(slab_energies.size());
    if (n < 3)
        throw std::invalid_argument("decay_rate: need at least 3 slab energies");

    double e_max = 0.0;
    for (double e : slab_energies)
        e_max = std::max(e_max, e);

    DecayFit fit;
    if (e_max <= 1e-300) {  // constant trace: every slab is exactly flat
        fit.omega = std::numeric_limits<double>::infinity();
        return fit;
    }

    // True slab energies decay geometrically through the bottom of double
    // precision within a few slabs; below the relative floor they are solver
    // noise.  The fit and the ratio check use only the resolvable prefix,
    // skipping the near-field slab unless nothing else remains.
    const double floor = 1e-14 * e_max;
    int first = 1;
    int last = 1;
    for (int k = 1; k <= n - 2; ++k)
        if (slab_energies[static_cast<std::size_t>(k)] >= floor)
            last = k;
    if (last == 1)
        first = 0;
    fit.first = first;
    fit.last = last;

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int count = 0;
    for (int k = first; k <= last; ++k) {
        const double e = slab_energies[static_cast<std::size_t>(k)];
        if (e <= 1e-300) {
            fit.omega = std::numeric_limits<double>::infinity();
            return fit;
        }
        const double x = static_cast<double>(k);
        const double y = std::log(e);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++count;
    }
    const double denom = count * sxx - sx * sx;
    fit.omega = -0.5 * (count * sxy - sx * sy) / denom;
    for (int k = first; k <= last && k + 1 < n; ++k) {
        const double ek = slab_energies[static_cast<std::size_t>(k)];
        const double ek1 = slab_energies[static_cast<std::size_t>(k + 1)];
        if (ek >= floor)
            fit.max_ratio = std::max(fit.max_ratio, ek1 / ek);
    }
    return fit;
}

struct BoundaryLayerSolution {
    StructuredGrid grid;          // stripe grid the solution lives on
    Mat2 coefficient;             // constant bulk tensor
    std::vector<double> w;        // nodal values including the Dirichlet row
    std::vector<double> slab_energies;  // one entry per unit-height band
    DecayFit decay;
    SolveReport report;
};

/// Solves the truncated boundary-layer problem with the given trace at
/// y2 = 0 (one value per tangential node).
inline BoundaryLayerSolution solve_boundary_layer(const StripeGeometry& geometry, const Mat2& d_bulk,
                                                  const std::vector<double>& trace,
                                                  const CellSolveOptions& opt = {}) {
    BoundaryLayerSolution out;
    out.grid = build_stripe_grid(geometry);
    out.coefficient = d_bulk;
    const StructuredGrid& g = out.grid;
    const int nt = g.tan_nodes();
    if (static_cast<int>(trace.size()) != nt)
        throw std::invalid_argument("solve_boundary_layer: trace size does not match the stripe grid");

    const SparseMatrix k = assemble_stiffness(g, [&d_bulk](Region, double, double) { return d_bulk; });

    // Dirichlet elimination: unknowns are the nodes off the trace row.
    const int n = g.num_nodes();
    const int dir_row = g.dirichlet_row;
    std::vector<int> to_free(static_cast<std::size_t>(n), -1);
    std::vector<int> free_nodes;
    free_nodes.reserve(static_cast<std::size_t>(n - nt));
    for (int j = 0; j < g.vert_nodes(); ++j) {
        if (j == dir_row)
            continue;
        for (int i = 0; i < nt; ++i) {
            to_free[static_cast<std::size_t>(g.node(i, j))] = static_cast<int>(free_nodes.size());
            free_nodes.push_back(g.node(i, j));
        }
    }

    std::vector<double> full(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < nt; ++i)
        full[static_cast<std::size_t>(g.node(i, dir_row))] = trace[static_cast<std::size_t>(i)];

    std::vector<Triplet> kff;
    std::vector<double> rhs(free_nodes.size(), 0.0);
    const auto& offsets = k.row_offsets();
    const auto& cols = k.col_indices();
    const auto& vals = k.values();
    for (std::size_t fi = 0; fi < free_nodes.size(); ++fi) {
        const int r = free_nodes[fi];
        for (int kk = offsets[static_cast<std::size_t>(r)]; kk < offsets[static_cast<std::size_t>(r) + 1]; ++kk) {
            const int c = cols[static_cast<std::size_t>(kk)];
            const double v = vals[static_cast<std::size_t>(kk)];
            if (to_free[static_cast<std::size_t>(c)] >= 0)
                kff.push_back({static_cast<int>(fi), to_free[static_cast<std::size_t>(c)], v});
            else
                rhs[fi] -= v * full[static_cast<std::size_t>(c)];
        }
    }
    const SparseMatrix a = SparseMatrix::from_triplets(static_cast<int>(free_nodes.size()),
                                                       static_cast<int>(free_nodes.size()), std::move(kff));
    auto [x, report] = solve_cg(a, rhs, opt.tolerance, opt.max_iterations);
    out.report = std::move(report);
    for (std::size_t fi = 0; fi < free_nodes.size(); ++fi)
        full[static_cast<std::size_t>(free_nodes[fi])] = x[fi];
    out.w = std::move(full);

    // Slab energies over unit-height bands, counted away from the interface.
    const int res = geometry.resolution;
    out.slab_energies.resize(static_cast<std::size_t>(geometry.length), 0.0);
    for (int band = 0; band < geometry.length; ++band) {
        int j0, j1;
        if (geometry.orientation > 0) {
            j0 = band * res;
            j1 = (band + 1) * res;
        } else {
            j1 = g.vert_cells() - band * res;
            j0 = j1 - res;
        }
        out.slab_energies[static_cast<std::size_t>(band)] = band_gradient_energy(g, out.w, j0, j1);
    }

    // Energies below the solve's own resolution are numerically zero: a
    // constant-trace stripe must report no decaying content at all, not a
    // rate fitted to CG noise.
    double trace_scale = 0.0;
    for (double v : trace)
        trace_scale = std::max(trace_scale, std::abs(v));
    const double floor = (opt.tolerance * trace_scale) * (opt.tolerance * trace_scale);
    for (double& e : out.slab_energies) {
        if (e <= floor)
            e = 0.0;
    }

    out.decay = decay_rate(out.slab_energies);
    return out;
}

/// Consistent co-normal flux data on the trace row of a boundary-layer
/// solution.  `variational[i]` is the residual functional int q phi_i with
/// q = -D grad w . nu (nu the outer normal of the layer cell Z on that
/// interface); `nodal` divides by the lumped line mass for reporting.
/// `defect` is |sum_i variational_i|, which vanishes for an exactly solved
/// truncated stripe (zero net flux).
struct FluxProfile {
    std::vector<double> nodal;
    std::vector<double> variational;
    double defect = 0.0;

    static FluxProfile from_nodal(const std::vector<double>& q, double spacing) {
        FluxProfile f;
        f.nodal = q;
        f.variational = line_mass_apply(q, spacing);
        double s = 0.0;
        for (double v : f.variational)
            s += v;
        f.defect = std::abs(s);
        return f;
    }
};

inline FluxProfile boundary_flux(const BoundaryLayerSolution& bl) {
    const StructuredGrid& g = bl.grid;
    const SparseMatrix k = assemble_stiffness(g, [&bl](Region, double, double) { return bl.coefficient; });
    const std::vector<double> residual = k.multiply(bl.w);
    const int nt = g.tan_nodes();
    FluxProfile f;
    f.variational.resize(static_cast<std::size_t>(nt));
    f.nodal.resize(static_cast<std::size_t>(nt));
    double total = 0.0;
    for (int i = 0; i < nt; ++i) {
        const double r = residual[static_cast<std::size_t>(g.node(i, g.dirichlet_row))];
        f.variational[static_cast<std::size_t>(i)] = r;
        f.nodal[static_cast<std::size_t>(i)] = r / g.tan_spacing;
        total += r;
    }
    f.defect = std::abs(total);
    return f;
}

struct SecondOrderCell {
    std::vector<double> w;  // nodal values, zero weighted mean
    double compatibility_defect = 0.0;  // |constant component removed from the load|
    SolveReport report;
};

/// Solves the second-order cell problem driven by the boundary-layer fluxes
/// on S^+ and S^- (Neumann data q with -D grad w2 . nu = q).
inline SecondOrderCell solve_cell_second_order(const StructuredGrid& grid, const LayerCoefficient& coefficient,
                                               const FluxProfile& flux_plus, const FluxProfile& flux_minus,
                                               const CellSolveOptions& opt = {}) {
    const int nt = grid.tan_nodes();
    if (static_cast<int>(flux_plus.variational.size()) != nt || static_cast<int>(flux_minus.variational.size()) != nt)
        throw std::invalid_argument("solve_cell_second_order: flux profiles do not match the cell grid");

    const CoefficientFn coeff = [&coefficient](Region, double y1, double y2) { return coefficient(y1, y2); };
    const SparseMatrix k = assemble_stiffness(grid, coeff);

    std::vector<double> load(static_cast<std::size_t>(grid.num_nodes()), 0.0);
    double total = 0.0;
    for (int i = 0; i < nt; ++i) {
        const double lp = -flux_plus.variational[static_cast<std::size_t>(i)];
        const double lm = -flux_minus.variational[static_cast<std::size_t>(i)];
        load[static_cast<std::size_t>(grid.node(i, grid.iface_plus))] += lp;
        load[static_cast<std::size_t>(grid.node(i, grid.iface_minus))] += lm;
        total += lp + lm;
    }

    const std::vector<double> weights = lumped_mass(grid, [](Region) { return 1.0; });
    auto [w, report] = solve_cg(k, load, opt.tolerance, opt.max_iterations,
                                Nullspace::weighted_constants(weights));
    SecondOrderCell out;
    out.w = std::move(w);
    out.compatibility_defect = std::abs(total);
    out.report = std::move(report);
    return out;
}

/// All cell-scale data a study needs, computed once per resolution: the
/// first-order cell function, effective coefficient, boundary layers on both
/// sides, their fluxes, and the second-order cell function.
struct CellData {
    int resolution = 0;
    int stripe_length = 0;
    StructuredGrid cell_grid;
    std::vector<double> w1;
    double d_star = 0.0;
    BoundaryLayerSolution bl_plus;
    BoundaryLayerSolution bl_minus;
    FluxProfile flux_plus;
    FluxProfile flux_minus;
    std::vector<double> w2;
    double compatibility_defect = 0.0;
    double residual_w1 = 0.0;  // final relative CG residuals
    double residual_w2 = 0.0;
};

inline CellData build_cell_data(const LayerCoefficient& coefficient, const Mat2& d_plus, const Mat2& d_minus,
                                int resolution, int stripe_length, const CellSolveOptions& opt = {}) {
    CellData data;
    data.resolution = resolution;
    data.stripe_length = stripe_length;
    data.cell_grid = build_cell_grid(CellGeometry::create(resolution));

    FirstOrderCell first = solve_cell_first_order(data.cell_grid, coefficient, opt);
    if (!first.report.converged)
        throw std::runtime_error("build_cell_data: first-order cell solve did not converge");
    data.residual_w1 = first.report.relative_residual;
    data.w1 = std::move(first.w);
    data.d_star = effective_tensor(data.cell_grid, coefficient, data.w1);

    const int nt = data.cell_grid.tan_nodes();
    std::vector<double> trace_plus(static_cast<std::size_t>(nt));
    std::vector<double> trace_minus(static_cast<std::size_t>(nt));
    for (int i = 0; i < nt; ++i) {
        trace_plus[static_cast<std::size_t>(i)] =
            data.w1[static_cast<std::size_t>(data.cell_grid.node(i, data.cell_grid.iface_plus))];
        trace_minus[static_cast<std::size_t>(i)] =
            data.w1[static_cast<std::size_t>(data.cell_grid.node(i, data.cell_grid.iface_minus))];
    }

    data.bl_plus = solve_boundary_layer(StripeGeometry::create(stripe_length, resolution, +1), d_plus, trace_plus, opt);
    data.bl_minus = solve_boundary_layer(StripeGeometry::create(stripe_length, resolution, -1), d_minus, trace_minus, opt);
    if (!data.bl_plus.report.converged || !data.bl_minus.report.converged)
        throw std::runtime_error("build_cell_data: boundary-layer solve did not converge");
    data.flux_plus = boundary_flux(data.bl_plus);
    data.flux_minus = boundary_flux(data.bl_minus);

    SecondOrderCell second = solve_cell_second_order(data.cell_grid, coefficient, data.flux_plus, data.flux_minus, opt);
    if (!second.report.converged)
        throw std::runtime_error("build_cell_data: second-order cell solve did not converge");
    data.residual_w2 = second.report.relative_residual;
    data.w2 = std::move(second.w);
    data.compatibility_defect = second.compatibility_defect;
    return data;
}

}  // namespace thinlayer
