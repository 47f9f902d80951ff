#pragma once

// Resolved (microscopic) problem on sigma x (-H - eps, H + eps): standard
// reaction-diffusion in the bulks, and mass, diffusion, and reaction all
// weighted 1/eps inside the thin layer, whose coefficient field is the
// periodic cell coefficient evaluated at x/eps.  The grid from
// build_micro_grid resolves every microscopic period with the same N x N
// lattice as the unit-cell solves, and unit-cell coordinates at quadrature
// points are computed from lattice indices (i + xi)/N, never by dividing
// physical coordinates, so the layer assembly is an exact rescaling of the
// cell assembly.
//
// Time stepping matches the macro solver: semi-implicit Euler with explicit
// reactions against the region mass matrices.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "thinlayer/fem.hpp"
#include "thinlayer/grid.hpp"
#include "thinlayer/scenario.hpp"
#include "thinlayer/sparse.hpp"

namespace thinlayer {

struct MicroState {
    double t = 0.0;
    std::vector<double> c;
};

/// Fixed-domain grids associated with a micro discretization: the bulk grids
/// are the -+eps shifts of the bulk rows onto Sigma x (0, H) and
/// Sigma x (-H, 0), the layer grid is the physical layer band.
struct FixedDomainGrids {
    StructuredGrid bulk_plus;
    StructuredGrid bulk_minus;
    StructuredGrid layer;
};

struct MicroSystem {
    const Scenario* scenario = nullptr;
    LayerGeometry geom;
    int resolution = 0;  // per-period lattice resolution N
    StructuredGrid grid;

    SparseMatrix M;  // bulk mass + (1/eps) layer mass
    SparseMatrix K;  // bulk stiffness + (1/eps) layer stiffness
    SparseMatrix M_bulk_plus;
    SparseMatrix M_bulk_minus;
    SparseMatrix M_layer;  // carries the 1/eps weight

    FixedDomainGrids fixed;  // error norms and correctors live here
};

namespace detail {

/// Fractional unit-cell coordinate of lattice index `idx` out of N, offset by
/// a reference quadrature coordinate: ((idx mod N) + ref) / N in [0, 1).
inline double cell_coord(int idx, int n, double ref) {
    int r = idx % n;
    if (r < 0)
        r += n;
    return (static_cast<double>(r) + ref) / static_cast<double>(n);
}

inline StructuredGrid make_fixed_grid(const StructuredGrid& micro, int row0, int row1, double y0, double y1,
                                      Region tag, bool anchor_start) {
    StructuredGrid g;
    g.tan_cells = micro.tan_cells;
    g.tan_spacing = micro.tan_spacing;
    g.tan_periodic = true;
    const int nv = row1 - row0;
    g.vert_coords.resize(static_cast<std::size_t>(nv) + 1);
    g.vert_region.assign(static_cast<std::size_t>(nv), tag);
    g.vert_coords.front() = y0;
    g.vert_coords.back() = y1;
    // Interior coordinates are anchored at the interface end so they match
    // the shifted micro-grid coordinates bit for bit.
    for (int k = 1; k < nv; ++k) {
        g.vert_coords[static_cast<std::size_t>(k)] =
            anchor_start ? y0 + static_cast<double>(k) * micro.tan_spacing
                         : y1 - static_cast<double>(nv - k) * micro.tan_spacing;
    }
    return g;
}

}  // namespace detail

/// Builds the fixed-domain grids for a given thin-layer discretization
/// without assembling anything; the same construction the micro system uses.
inline FixedDomainGrids make_fixed_domain_grids(const LayerGeometry& geom, int resolution) {
    const StructuredGrid g = build_micro_grid(geom, resolution);
    const double H = static_cast<double>(geom.H);
    const double eps = geom.epsilon();
    FixedDomainGrids fx;
    fx.bulk_plus = detail::make_fixed_grid(g, g.iface_plus, g.vert_cells(), 0.0, H, Region::BulkPlus, true);
    fx.bulk_minus = detail::make_fixed_grid(g, 0, g.iface_minus, -H, 0.0, Region::BulkMinus, false);
    fx.layer = detail::make_fixed_grid(g, g.iface_minus, g.iface_plus, -eps, eps, Region::Layer, true);
    fx.layer.vert_coords[static_cast<std::size_t>(resolution)] = 0.0;  // exact midline
    return fx;
}

inline MicroSystem assemble_micro(const Scenario& sc, const LayerGeometry& geom, int resolution) {
    MicroSystem sys;
    sys.scenario = &sc;
    sys.geom = geom;
    sys.resolution = resolution;
    sys.grid = build_micro_grid(geom, resolution);

    const StructuredGrid& g = sys.grid;
    const int n = resolution;
    const int jm = g.iface_minus;
    const int jp = g.iface_plus;
    const double inv_eps = static_cast<double>(geom.inv_epsilon);
    const int nn = g.num_nodes();

    // Stiffness: constant bulk blocks, periodic-cell coefficient in the
    // layer with the 1/eps scaling.  Unit-cell quadrature coordinates come
    // from lattice indices, so every layer element with the same index
    // offsets sees bit-identical coefficient samples.
    {
        std::vector<Triplet> t;
        t.reserve(static_cast<std::size_t>(g.num_cells()) * 16);
        for (int j = 0; j < g.vert_cells(); ++j) {
            const Region reg = g.region(j);
            const double hy = g.vert_spacing(j);
            const double hx = g.tan_spacing;
            if (reg != Region::Layer) {
                const Mat2 d = reg == Region::BulkPlus ? sc.D_plus : sc.D_minus;
                const std::array<Mat2, 4> dq = {d, d, d, d};
                const auto& pts = quadrature::gauss01();
                const std::array<double, 4> xi = {pts[0], pts[1], pts[0], pts[1]};
                const std::array<double, 4> eta = {pts[0], pts[0], pts[1], pts[1]};
                const auto ke = q1_element_stiffness(hx, hy, dq, xi, eta);
                for (int i = 0; i < g.tan_cells; ++i) {
                    const auto nodes = element_nodes(g, i, j);
                    for (int a = 0; a < 4; ++a)
                        for (int b = 0; b < 4; ++b)
                            t.push_back({nodes[a], nodes[b], ke[a][b]});
                }
            } else {
                const int jl = j - jm;  // layer-local element row in [0, 2N)
                const auto& pts = quadrature::gauss01();
                const std::array<double, 4> xi = {pts[0], pts[1], pts[0], pts[1]};
                const std::array<double, 4> eta = {pts[0], pts[0], pts[1], pts[1]};
                for (int i = 0; i < g.tan_cells; ++i) {
                    std::array<Mat2, 4> dq;
                    for (int q = 0; q < 4; ++q) {
                        const double y1 = detail::cell_coord(i, n, xi[q]);
                        const double y2 = (static_cast<double>(jl - n) + eta[q]) / static_cast<double>(n);
                        dq[static_cast<std::size_t>(q)] = sc.layer_coefficient(y1, y2).scaled(inv_eps);
                    }
                    const auto ke = q1_element_stiffness(hx, hy, dq, xi, eta);
                    const auto nodes = element_nodes(g, i, j);
                    for (int a = 0; a < 4; ++a)
                        for (int b = 0; b < 4; ++b)
                            t.push_back({nodes[a], nodes[b], ke[a][b]});
                }
            }
        }
        sys.K = SparseMatrix::from_triplets(nn, nn, std::move(t));
    }

    sys.M = assemble_mass(g, [inv_eps](Region r) { return r == Region::Layer ? inv_eps : 1.0; });
    sys.M_bulk_plus = assemble_mass(g, [](Region r) { return r == Region::BulkPlus ? 1.0 : 0.0; });
    sys.M_bulk_minus = assemble_mass(g, [](Region r) { return r == Region::BulkMinus ? 1.0 : 0.0; });
    sys.M_layer = assemble_mass(g, [inv_eps](Region r) { return r == Region::Layer ? inv_eps : 0.0; });

    sys.fixed = make_fixed_domain_grids(geom, resolution);
    return sys;
}

/// Initial state: shifted bulk data init_pm(x1, x2 -+ eps) on the bulk rows,
/// init_M(x1) across the layer.  The interface rows take the layer value;
/// trace compatibility makes the two prescriptions agree there.
inline MicroState micro_initial_state(const MicroSystem& sys) {
    const StructuredGrid& g = sys.grid;
    const Scenario& sc = *sys.scenario;
    const double h = g.tan_spacing;
    MicroState s;
    s.c.resize(static_cast<std::size_t>(g.num_nodes()));
    for (int j = 0; j < g.vert_nodes(); ++j) {
        for (int i = 0; i < g.tan_nodes(); ++i) {
            const double x1 = g.tan_coord(i);
            double v;
            if (j > sys.grid.iface_plus)
                v = sc.initial_bulk(true, x1, static_cast<double>(j - g.iface_plus) * h);
            else if (j < sys.grid.iface_minus)
                v = sc.initial_bulk(false, x1, static_cast<double>(j - g.iface_minus) * h);
            else
                v = sc.initial_layer(x1);
            s.c[static_cast<std::size_t>(g.node(i, j))] = v;
        }
    }
    return s;
}

/// Weighted total mass: bulk integrals plus (1/eps) times the layer integral
/// (equals 1^T M c).
inline double micro_total_mass(const MicroSystem& sys, const std::vector<double>& c) {
    const std::vector<double> mc = sys.M.multiply(c);
    double s = 0.0;
    for (double v : mc)
        s += v;
    return s;
}

class MicroStepper {
  public:
    MicroStepper(const MicroSystem& sys, double dt, double tol = 1e-12, int max_iterations = 20000)
        : sys_(sys), dt_(dt), tol_(tol), max_iterations_(max_iterations) {
        if (!(dt > 0.0))
            throw std::invalid_argument("MicroStepper: dt must be positive");
        a_ = SparseMatrix::add_scaled(sys.M, dt, sys.K);
    }

    double dt() const { return dt_; }
    long total_iterations() const { return total_iterations_; }
    const SparseMatrix& system_matrix() const { return a_; }

    void anchor(double t0) {
        t0_ = t0;
        t0_set_ = true;
        steps_taken_ = 0;
    }

    /// The semi-implicit right-hand side M c + dt (reaction loads at t).
    std::vector<double> right_hand_side(const MicroState& state) const {
        const Scenario& sc = *sys_.scenario;
        const StructuredGrid& g = sys_.grid;
        const int n = sys_.resolution;
        const int nt = g.tan_nodes();
        const int jm = g.iface_minus;
        const int jp = g.iface_plus;
        const double t = state.t;

        std::vector<double> b = sys_.M.multiply(state.c);
        std::vector<double> r(state.c.size(), 0.0);
        std::vector<double> tmp;

        // Bulk reactions evaluated pointwise at the unit-cell coordinate of
        // each node; both components of y wrap periodically.
        for (int j = jp; j < g.vert_nodes(); ++j) {
            const double y2 = detail::cell_coord(j - jp, n, 0.0);
            for (int i = 0; i < nt; ++i) {
                const std::size_t nd = static_cast<std::size_t>(g.node(i, j));
                r[nd] = sc.reaction_f(true, t, detail::cell_coord(i, n, 0.0), y2, state.c[nd]);
            }
        }
        sys_.M_bulk_plus.multiply(r, tmp);
        axpy(dt_, tmp, b);

        std::fill(r.begin(), r.end(), 0.0);
        for (int j = 0; j <= jm; ++j) {
            const double y2 = detail::cell_coord(j - jm, n, 0.0);
            for (int i = 0; i < nt; ++i) {
                const std::size_t nd = static_cast<std::size_t>(g.node(i, j));
                r[nd] = sc.reaction_f(false, t, detail::cell_coord(i, n, 0.0), y2, state.c[nd]);
            }
        }
        sys_.M_bulk_minus.multiply(r, tmp);
        axpy(dt_, tmp, b);

        // Layer reaction at the unscaled cell coordinate y2 in [-1, 1].
        std::fill(r.begin(), r.end(), 0.0);
        for (int j = jm; j <= jp; ++j) {
            const double y2 = static_cast<double>(j - jm - n) / static_cast<double>(n);
            for (int i = 0; i < nt; ++i) {
                const std::size_t nd = static_cast<std::size_t>(g.node(i, j));
                r[nd] = sc.reaction_g(t, detail::cell_coord(i, n, 0.0), y2, state.c[nd]);
            }
        }
        sys_.M_layer.multiply(r, tmp);
        axpy(dt_, tmp, b);
        return b;
    }

    void step(MicroState& state) {
        const std::vector<double> b = right_hand_side(state);
        auto [c_new, report] = solve_cg(a_, b, tol_, max_iterations_, Nullspace::none(), &state.c);
        if (!report.converged)
            throw SolverError("micro step: CG did not converge (relative residual " +
                              std::to_string(report.relative_residual) + ")");
        total_iterations_ += report.iterations;
        state.c = std::move(c_new);
        ++steps_taken_;
        state.t = t0_set_ ? t0_ + static_cast<double>(steps_taken_) * dt_ : state.t + dt_;
    }

  private:
    const MicroSystem& sys_;
    double dt_;
    double tol_;
    int max_iterations_;
    SparseMatrix a_;
    long total_iterations_ = 0;
    long steps_taken_ = 0;
    double t0_ = 0.0;
    bool t0_set_ = false;
};

/// Per-region nodal fields of a micro state after the exact +-eps shift onto
/// the fixed domains; values live on the system's fixed-domain grids.
struct MicroRegionalFields {
    std::vector<double> bulk_plus;
    std::vector<double> bulk_minus;
    std::vector<double> layer;
};

inline MicroRegionalFields shift_to_fixed_domains(const MicroSystem& sys, const std::vector<double>& c) {
    const StructuredGrid& g = sys.grid;
    const int nt = g.tan_nodes();
    const int jm = g.iface_minus;
    const int jp = g.iface_plus;
    MicroRegionalFields out;
    out.bulk_plus.resize(static_cast<std::size_t>(sys.fixed.bulk_plus.num_nodes()));
    out.bulk_minus.resize(static_cast<std::size_t>(sys.fixed.bulk_minus.num_nodes()));
    out.layer.resize(static_cast<std::size_t>(sys.fixed.layer.num_nodes()));
    for (int k = 0; k < sys.fixed.bulk_plus.vert_nodes(); ++k)
        for (int i = 0; i < nt; ++i)
            out.bulk_plus[static_cast<std::size_t>(sys.fixed.bulk_plus.node(i, k))] =
                c[static_cast<std::size_t>(g.node(i, jp + k))];
    for (int k = 0; k < sys.fixed.bulk_minus.vert_nodes(); ++k)
        for (int i = 0; i < nt; ++i)
            out.bulk_minus[static_cast<std::size_t>(sys.fixed.bulk_minus.node(i, k))] =
                c[static_cast<std::size_t>(g.node(i, k))];
    for (int k = 0; k < sys.fixed.layer.vert_nodes(); ++k)
        for (int i = 0; i < nt; ++i)
            out.layer[static_cast<std::size_t>(sys.fixed.layer.node(i, k))] =
                c[static_cast<std::size_t>(g.node(i, jm + k))];
    return out;
}

struct MicroRunResult {
    MicroState final_state;
    std::vector<MicroState> snapshots;
    long total_cg_iterations = 0;
    int steps = 0;
    double mass_initial = 0.0;
    double mass_final = 0.0;
};

inline MicroRunResult solve_micro(const MicroSystem& sys, double T, double dt,
                                  const std::vector<double>& snapshot_times = {}) {
    if (!(T > 0.0))
        throw std::invalid_argument("solve_micro: T must be positive");
    const int steps = [&] {
        const int s = static_cast<int>(std::ceil(T / dt - 1e-9));
        return s < 1 ? 1 : s;
    }();
    const double h = T / static_cast<double>(steps);

    MicroRunResult out;
    MicroState state = micro_initial_state(sys);
    out.mass_initial = micro_total_mass(sys, state.c);
    MicroStepper stepper(sys, h);
    stepper.anchor(0.0);

    std::vector<int> snap_steps;
    for (double ts : snapshot_times) {
        int k = static_cast<int>(std::llround(ts / h));
        snap_steps.push_back(std::max(0, std::min(steps, k)));
    }
    auto maybe_snapshot = [&](int k) {
        for (std::size_t q = 0; q < snap_steps.size(); ++q)
            if (snap_steps[q] == k)
                out.snapshots.push_back(state);
    };
    maybe_snapshot(0);
    for (int k = 0; k < steps; ++k) {
        stepper.step(state);
        maybe_snapshot(k + 1);
    }
    out.total_cg_iterations = stepper.total_iterations();
    out.steps = steps;
    out.mass_final = micro_total_mass(sys, state.c);
    out.final_state = std::move(state);
    return out;
}

}  // namespace thinlayer
