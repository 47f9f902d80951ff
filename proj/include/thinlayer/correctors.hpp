#pragma once

// Two-scale approximations of the resolved solution, assembled from a macro
// state and the unit-cell data.  Both orders live on the fixed-domain grids
// (shifted bulks plus the physical layer band):
//
//   order 1:  bulk   c0(x)
//             layer  cM(x1) + eps d1cM(x1) w1(x/eps)
//   order 2:  bulk   c0(x) + eps psi(x2) d1c0(x) w_bl(xbar/eps, x2/eps)
//             layer  order 1 + eps^2 d1cM(x1) w2(x/eps)
//
// Unit-cell coordinates at grid nodes come from lattice indices, matching
// the micro assembly.  The cutoff psi localizes the boundary-layer corrector
// near the interface so the approximation is unchanged at the outer
// boundaries.

#include <algorithm>
#include <cmath>
#include <vector>

#include "thinlayer/cell_problems.hpp"
#include "thinlayer/grid.hpp"
#include "thinlayer/macro_solver.hpp"
#include "thinlayer/micro_solver.hpp"

namespace thinlayer {

/// Quintic cutoff in the vertical coordinate: identically 1 for |x2| <= H/4,
/// identically 0 for |x2| >= 3H/4, C^2 smoothstep blend between (value 1/2
/// at |x2| = H/2).
inline double cutoff_psi(double x2, double H) {
    const double a = std::abs(x2);
    const double lo = 0.25 * H;
    const double hi = 0.75 * H;
    if (a <= lo)
        return 1.0;
    if (a >= hi)
        return 0.0;
    const double u = (a - lo) / (hi - lo);
    const double s = u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
    return 1.0 - s;
}

/// Bilinear sample of a nodal field on a uniform tensor grid: tangential
/// coordinate wraps periodically, vertical coordinates beyond the grid clamp
/// to the boundary row (the constant extension used past stripe truncation).
inline double periodic_sample(const StructuredGrid& g, const std::vector<double>& u, double y1, double y2) {
    const double ut = y1 / g.tan_spacing;
    double flt = std::floor(ut);
    double fu = ut - flt;
    if (fu > 1.0 - 1e-12) {
        flt += 1.0;
        fu = 0.0;
    }
    const int i0 = static_cast<int>(flt);

    const double h = g.vert_spacing(0);
    const double vt = (y2 - g.vert_coord(0)) / h;
    double flv = std::floor(vt);
    double fv = vt - flv;
    if (fv > 1.0 - 1e-12) {
        flv += 1.0;
        fv = 0.0;
    }
    int j0 = static_cast<int>(flv);
    if (j0 < 0) {
        j0 = 0;
        fv = 0.0;
    }
    if (j0 > g.vert_nodes() - 2) {
        j0 = g.vert_nodes() - 2;
        fv = 1.0;
    }
    const double v00 = u[static_cast<std::size_t>(g.node(i0, j0))];
    const double v10 = u[static_cast<std::size_t>(g.node(i0 + 1, j0))];
    const double v01 = u[static_cast<std::size_t>(g.node(i0, j0 + 1))];
    const double v11 = u[static_cast<std::size_t>(g.node(i0 + 1, j0 + 1))];
    return (1 - fv) * ((1 - fu) * v00 + fu * v10) + fv * ((1 - fu) * v01 + fu * v11);
}

struct CorrectorDomain {
    LayerGeometry geom;
    int resolution = 0;  // per-period lattice resolution N
    FixedDomainGrids grids;
};

inline CorrectorDomain make_corrector_domain(const LayerGeometry& geom, int resolution) {
    return {geom, resolution, make_fixed_domain_grids(geom, resolution)};
}

/// Nodal values of a two-scale approximation on the fixed-domain grids, with
/// the sup-norm interface mismatches recorded as diagnostics (the
/// approximations are discontinuous across the interfaces at positive eps).
struct ApproximationField {
    std::vector<double> bulk_plus;
    std::vector<double> bulk_minus;
    std::vector<double> layer;
    double jump_plus = 0.0;
    double jump_minus = 0.0;
};

namespace detail {

inline void record_jumps(ApproximationField& f, const CorrectorDomain& dom) {
    const StructuredGrid& gp = dom.grids.bulk_plus;
    const StructuredGrid& gm = dom.grids.bulk_minus;
    const StructuredGrid& gl = dom.grids.layer;
    const int top = gl.vert_nodes() - 1;
    const int bot_minus = gm.vert_nodes() - 1;
    double jp = 0.0, jm = 0.0;
    for (int i = 0; i < gl.tan_nodes(); ++i) {
        jp = std::max(jp, std::abs(f.layer[static_cast<std::size_t>(gl.node(i, top))] -
                                   f.bulk_plus[static_cast<std::size_t>(gp.node(i, 0))]));
        jm = std::max(jm, std::abs(f.layer[static_cast<std::size_t>(gl.node(i, 0))] -
                                   f.bulk_minus[static_cast<std::size_t>(gm.node(i, bot_minus))]));
    }
    f.jump_plus = jp;
    f.jump_minus = jm;
}

}  // namespace detail

/// First-order approximation: plain macro values in the bulks, macro trace
/// plus the eps-scaled first cell corrector across the layer.
inline ApproximationField build_capp1(const CorrectorDomain& dom, const CellData& cells,
                                      const MacroFieldView& macro) {
    const int n = dom.resolution;
    const double eps = dom.geom.epsilon();
    ApproximationField out;

    for (const StructuredGrid* g : {&dom.grids.bulk_plus, &dom.grids.bulk_minus}) {
        std::vector<double>& dst = g == &dom.grids.bulk_plus ? out.bulk_plus : out.bulk_minus;
        dst.resize(static_cast<std::size_t>(g->num_nodes()));
        for (int k = 0; k < g->vert_nodes(); ++k) {
            const double x2 = g->vert_coord(k);
            for (int i = 0; i < g->tan_nodes(); ++i)
                dst[static_cast<std::size_t>(g->node(i, k))] = macro.value(g->tan_coord(i), x2);
        }
    }

    const StructuredGrid& gl = dom.grids.layer;
    const int nt = gl.tan_nodes();
    out.layer.resize(static_cast<std::size_t>(gl.num_nodes()));
    std::vector<double> cm(static_cast<std::size_t>(nt)), dcm(static_cast<std::size_t>(nt));
    for (int i = 0; i < nt; ++i) {
        const double x1 = gl.tan_coord(i);
        cm[static_cast<std::size_t>(i)] = macro.sigma_value(x1);
        dcm[static_cast<std::size_t>(i)] = macro.sigma_tangential_derivative(x1);
    }
    for (int k = 0; k < gl.vert_nodes(); ++k) {
        const double y2 = static_cast<double>(k - n) / static_cast<double>(n);
        for (int i = 0; i < nt; ++i) {
            const double y1 = detail::cell_coord(i, n, 0.0);
            const double w1 = periodic_sample(cells.cell_grid, cells.w1, y1, y2);
            out.layer[static_cast<std::size_t>(gl.node(i, k))] =
                cm[static_cast<std::size_t>(i)] + eps * dcm[static_cast<std::size_t>(i)] * w1;
        }
    }
    detail::record_jumps(out, dom);
    return out;
}

/// Second-order approximation: adds the cutoff boundary-layer corrector in
/// the bulks and the eps^2-scaled second cell corrector across the layer.
inline ApproximationField build_capp2(const CorrectorDomain& dom, const CellData& cells,
                                      const MacroFieldView& macro) {
    const int n = dom.resolution;
    const double eps = dom.geom.epsilon();
    const double H = static_cast<double>(dom.geom.H);
    ApproximationField out = build_capp1(dom, cells, macro);

    // Bulk boundary-layer terms.
    struct Side {
        const StructuredGrid* g;
        std::vector<double>* dst;
        const BoundaryLayerSolution* bl;
        int sign;
    };
    const Side sides[2] = {{&dom.grids.bulk_plus, &out.bulk_plus, &cells.bl_plus, +1},
                           {&dom.grids.bulk_minus, &out.bulk_minus, &cells.bl_minus, -1}};
    for (const Side& s : sides) {
        const StructuredGrid& g = *s.g;
        const int nv = g.vert_nodes();
        for (int k = 0; k < nv; ++k) {
            const double x2 = g.vert_coord(k);
            const double psi = cutoff_psi(x2, H);
            if (psi == 0.0)
                continue;
            // Stripe coordinate: lattice distance from the interface row, in
            // cell units, signed with the stripe orientation.
            const int dist = s.sign > 0 ? k : nv - 1 - k;
            const double y2 = static_cast<double>(s.sign) * static_cast<double>(dist) / static_cast<double>(n);
            for (int i = 0; i < g.tan_nodes(); ++i) {
                const double x1 = g.tan_coord(i);
                const double y1 = detail::cell_coord(i, n, 0.0);
                const double wb = periodic_sample(s.bl->grid, s.bl->w, y1, y2);
                (*s.dst)[static_cast<std::size_t>(g.node(i, k))] +=
                    eps * psi * macro.tangential_derivative(x1, x2) * wb;
            }
        }
    }

    // Layer second-order term.
    const StructuredGrid& gl = dom.grids.layer;
    const int nt = gl.tan_nodes();
    std::vector<double> dcm(static_cast<std::size_t>(nt));
    for (int i = 0; i < nt; ++i)
        dcm[static_cast<std::size_t>(i)] = macro.sigma_tangential_derivative(gl.tan_coord(i));
    for (int k = 0; k < gl.vert_nodes(); ++k) {
        const double y2 = static_cast<double>(k - n) / static_cast<double>(n);
        for (int i = 0; i < nt; ++i) {
            const double y1 = detail::cell_coord(i, n, 0.0);
            const double w2 = periodic_sample(cells.cell_grid, cells.w2, y1, y2);
            out.layer[static_cast<std::size_t>(gl.node(i, k))] +=
                eps * eps * dcm[static_cast<std::size_t>(i)] * w2;
        }
    }
    detail::record_jumps(out, dom);
    return out;
}

}  // namespace thinlayer
