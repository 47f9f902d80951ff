#pragma once

// Effective (macroscopic) problem on the fixed domain Sigma x (-H, H): bulk
// reaction-diffusion in both slabs coupled through the interface Sigma,
// which carries its own evolution with weight |Z| = 2 on mass and tangential
// stiffness (effective coefficient d*) and the layer-cell-integrated
// reaction.  One conforming grid holds both bulks; the interface unknowns
// are the shared row at x2 = 0, so trace continuity is built in.
//
// Time stepping is semi-implicit Euler: diffusion implicit, reactions
// explicit,
//   (M + dt K) c_new = M c_old + dt (Mb+ fbar+(c_old) + Mb- fbar-(c_old)
//                                    + line-mass gbar(c_old) on Sigma),
// where fbar averages f over the unit cell and gbar integrates g over Z.

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "thinlayer/fem.hpp"
#include "thinlayer/grid.hpp"
#include "thinlayer/scenario.hpp"
#include "thinlayer/sparse.hpp"

namespace thinlayer {

inline constexpr double interface_weight() { return 2.0; }  // |Z|

/// Grid over Sigma x (-H, H) with `cells_per_unit` elements per unit length
/// in both directions; the interface row sits exactly at x2 = 0.
inline StructuredGrid build_macro_grid(int H, int sigma_len, int cells_per_unit) {
    if (cells_per_unit < 1)
        throw std::invalid_argument("build_macro_grid: cells_per_unit must be >= 1");
    StructuredGrid g;
    g.tan_cells = sigma_len * cells_per_unit;
    g.tan_spacing = 1.0 / static_cast<double>(cells_per_unit);
    g.tan_periodic = true;
    const int nv = 2 * H * cells_per_unit;
    const int sigma_row = H * cells_per_unit;
    g.vert_coords.resize(static_cast<std::size_t>(nv) + 1);
    g.vert_region.resize(static_cast<std::size_t>(nv));
    g.vert_coords.front() = -static_cast<double>(H);
    g.vert_coords[static_cast<std::size_t>(sigma_row)] = 0.0;
    g.vert_coords.back() = static_cast<double>(H);
    for (int j = 1; j < nv; ++j) {
        if (j != sigma_row)
            g.vert_coords[static_cast<std::size_t>(j)] =
                static_cast<double>(j - sigma_row) / static_cast<double>(cells_per_unit);
    }
    for (int j = 0; j < nv; ++j)
        g.vert_region[static_cast<std::size_t>(j)] = j < sigma_row ? Region::BulkMinus : Region::BulkPlus;
    g.iface_minus = sigma_row;
    g.iface_plus = sigma_row;
    return g;
}

struct MacroSystem {
    const Scenario* scenario = nullptr;
    StructuredGrid grid;
    int sigma_row = -1;
    double d_star = 1.0;
    SparseMatrix M;   // bulk mass + |Z| interface line mass
    SparseMatrix K;   // bulk stiffness + |Z| d* interface line stiffness
    SparseMatrix M_bulk_plus;   // reaction-load masses, one region each
    SparseMatrix M_bulk_minus;
};

inline MacroSystem assemble_macro(const Scenario& sc, double d_star, const StructuredGrid& grid) {
    MacroSystem sys;
    sys.scenario = &sc;
    sys.grid = grid;
    sys.sigma_row = grid.iface_plus;
    sys.d_star = d_star;
    if (sys.sigma_row < 0 || grid.iface_minus != grid.iface_plus)
        throw std::invalid_argument("assemble_macro: grid has no single interface row");

    const Mat2 dp = sc.D_plus;
    const Mat2 dm = sc.D_minus;
    const SparseMatrix k_bulk = assemble_stiffness(
        grid, [&dp, &dm](Region r, double, double) { return r == Region::BulkPlus ? dp : dm; });
    const SparseMatrix m_bulk = assemble_mass(grid, [](Region) { return 1.0; });

    // Interface line terms with weight |Z|.
    const double w = interface_weight();
    const double h = grid.tan_spacing;
    std::vector<Triplet> mt, kt;
    const int nt = grid.tan_nodes();
    for (int i = 0; i < nt; ++i) {
        const int n0 = grid.node(i, sys.sigma_row);
        const int n1 = grid.node(i + 1, sys.sigma_row);
        const double me = w * h / 6.0;
        mt.push_back({n0, n0, 2 * me});
        mt.push_back({n1, n1, 2 * me});
        mt.push_back({n0, n1, me});
        mt.push_back({n1, n0, me});
        const double ke = w * d_star / h;
        kt.push_back({n0, n0, ke});
        kt.push_back({n1, n1, ke});
        kt.push_back({n0, n1, -ke});
        kt.push_back({n1, n0, -ke});
    }
    const int n = grid.num_nodes();
    sys.M = SparseMatrix::add_scaled(m_bulk, 1.0, SparseMatrix::from_triplets(n, n, std::move(mt)));
    sys.K = SparseMatrix::add_scaled(k_bulk, 1.0, SparseMatrix::from_triplets(n, n, std::move(kt)));
    sys.M_bulk_plus = assemble_mass(grid, [](Region r) { return r == Region::BulkPlus ? 1.0 : 0.0; });
    sys.M_bulk_minus = assemble_mass(grid, [](Region r) { return r == Region::BulkMinus ? 1.0 : 0.0; });
    return sys;
}

struct MacroState {
    double t = 0.0;
    std::vector<double> c;
};

inline MacroState macro_initial_state(const MacroSystem& sys) {
    const StructuredGrid& g = sys.grid;
    MacroState s;
    s.c.resize(static_cast<std::size_t>(g.num_nodes()));
    for (int j = 0; j < g.vert_nodes(); ++j) {
        const double x2 = g.vert_coord(j);
        for (int i = 0; i < g.tan_nodes(); ++i) {
            const double x1 = g.tan_coord(i);
            double v;
            if (j == sys.sigma_row)
                v = sys.scenario->initial_layer(x1);
            else if (j > sys.sigma_row)
                v = sys.scenario->initial_bulk(true, x1, x2);
            else
                v = sys.scenario->initial_bulk(false, x1, x2);
            s.c[static_cast<std::size_t>(g.node(i, j))] = v;
        }
    }
    return s;
}

/// Weighted total mass: sum of bulk integrals plus |Z| times the interface
/// line integral (equals 1^T M c by construction of M).
inline double macro_total_mass(const MacroSystem& sys, const std::vector<double>& c) {
    const std::vector<double> mc = sys.M.multiply(c);
    double s = 0.0;
    for (double v : mc)
        s += v;
    return s;
}

/// Advances macro states one semi-implicit step at a time; the system matrix
/// M + dt K is factored into a cached CSR sum once per dt.
class MacroStepper {
  public:
    MacroStepper(const MacroSystem& sys, double dt, double tol = 1e-12, int max_iterations = 20000)
        : sys_(sys), dt_(dt), tol_(tol), max_iterations_(max_iterations) {
        if (!(dt > 0.0))
            throw std::invalid_argument("MacroStepper: dt must be positive");
        a_ = SparseMatrix::add_scaled(sys.M, dt, sys.K);
    }

    double dt() const { return dt_; }
    long total_iterations() const { return total_iterations_; }
    const SparseMatrix& system_matrix() const { return a_; }

    /// The semi-implicit right-hand side M c + dt (reaction loads at t).
    std::vector<double> right_hand_side(const MacroState& state) const {
        const Scenario& sc = *sys_.scenario;
        const StructuredGrid& g = sys_.grid;
        const int nt = g.tan_nodes();
        const double t = state.t;

        std::vector<double> b = sys_.M.multiply(state.c);

        // Bulk reactions, cell-averaged in y, evaluated nodally on the rows
        // their region mass touches.
        std::vector<double> r(state.c.size(), 0.0);
        std::vector<double> tmp;
        for (int j = sys_.sigma_row; j < g.vert_nodes(); ++j)
            for (int i = 0; i < nt; ++i) {
                const std::size_t nd = static_cast<std::size_t>(g.node(i, j));
                r[nd] = sc.bulk_reaction_average(true, t, state.c[nd]);
            }
        sys_.M_bulk_plus.multiply(r, tmp);
        axpy(dt_, tmp, b);
        std::fill(r.begin(), r.end(), 0.0);
        for (int j = 0; j <= sys_.sigma_row; ++j)
            for (int i = 0; i < nt; ++i) {
                const std::size_t nd = static_cast<std::size_t>(g.node(i, j));
                r[nd] = sc.bulk_reaction_average(false, t, state.c[nd]);
            }
        sys_.M_bulk_minus.multiply(r, tmp);
        axpy(dt_, tmp, b);

        // Interface reaction: int_Z g dy against the 1D line mass.
        std::vector<double> gbar(static_cast<std::size_t>(nt));
        for (int i = 0; i < nt; ++i)
            gbar[static_cast<std::size_t>(i)] =
                sc.layer_reaction_integral(t, state.c[static_cast<std::size_t>(g.node(i, sys_.sigma_row))]);
        const std::vector<double> gload = line_mass_apply(gbar, g.tan_spacing);
        for (int i = 0; i < nt; ++i)
            b[static_cast<std::size_t>(g.node(i, sys_.sigma_row))] += dt_ * gload[static_cast<std::size_t>(i)];
        return b;
    }

    void step(MacroState& state) {
        const std::vector<double> b = right_hand_side(state);
        auto [c_new, report] = solve_cg(a_, b, tol_, max_iterations_, Nullspace::none(), &state.c);
        if (!report.converged)
            throw SolverError("macro step: CG did not converge (relative residual " +
                              std::to_string(report.relative_residual) + ")");
        total_iterations_ += report.iterations;
        state.c = std::move(c_new);
        ++steps_taken_;
        state.t = t0_set_ ? t0_ + static_cast<double>(steps_taken_) * dt_ : state.t + dt_;
    }

    /// Anchors subsequent step times to t0 + k dt (avoids accumulation drift).
    void anchor(double t0) {
        t0_ = t0;
        t0_set_ = true;
        steps_taken_ = 0;
    }

  private:
    const MacroSystem& sys_;
    double dt_;
    double tol_;
    int max_iterations_;
    SparseMatrix a_;
    long total_iterations_ = 0;
    long steps_taken_ = 0;
    double t0_ = 0.0;
    bool t0_set_ = false;
};

struct MacroRunResult {
    MacroState final_state;
    std::vector<MacroState> snapshots;
    long total_cg_iterations = 0;
    int steps = 0;
};

inline double default_step_size(double epsilon) { return std::min(1e-3, 0.25 * epsilon * epsilon); }

inline int step_count_for(double T, double dt) {
    const int steps = static_cast<int>(std::ceil(T / dt - 1e-9));
    return steps < 1 ? 1 : steps;
}

/// Runs the macro problem to time T with uniform steps dt' = T/steps where
/// steps = ceil(T/dt); snapshot times snap to the nearest step.
inline MacroRunResult solve_macro(const MacroSystem& sys, double T, double dt,
                                  const std::vector<double>& snapshot_times = {}) {
    if (!(T > 0.0))
        throw std::invalid_argument("solve_macro: T must be positive");
    const int steps = step_count_for(T, dt);
    const double h = T / static_cast<double>(steps);

    MacroRunResult out;
    MacroState state = macro_initial_state(sys);
    MacroStepper stepper(sys, h);
    stepper.anchor(0.0);

    std::vector<int> snap_steps;
    for (double ts : snapshot_times) {
        int k = static_cast<int>(std::llround(ts / h));
        k = std::max(0, std::min(steps, k));
        snap_steps.push_back(k);
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
    out.final_state = std::move(state);
    return out;
}

/// Read access to a macro state for corrector assembly: bilinear values,
/// second-order central tangential derivatives per grid row, sampled with
/// periodic cubic interpolation tangentially (linear between rows).
class MacroFieldView {
  public:
    MacroFieldView(const MacroSystem& sys, const MacroState& state) : grid_(&sys.grid), sigma_row_(sys.sigma_row), c_(&state.c) {
        const StructuredGrid& g = *grid_;
        const int nt = g.tan_nodes();
        dtan_.resize(static_cast<std::size_t>(g.num_nodes()));
        const double inv2h = 1.0 / (2.0 * g.tan_spacing);
        for (int j = 0; j < g.vert_nodes(); ++j) {
            for (int i = 0; i < nt; ++i) {
                const double right = (*c_)[static_cast<std::size_t>(g.node(i + 1, j))];
                const double left = (*c_)[static_cast<std::size_t>(g.node(i - 1, j))];
                dtan_[static_cast<std::size_t>(g.node(i, j))] = (right - left) * inv2h;
            }
        }
    }

    double value(double x1, double x2) const {
        const StructuredGrid& g = *grid_;
        double fu;
        int i0;
        locate_tan(x1, i0, fu);
        double fv;
        int j0;
        locate_vert(x2, j0, fv);
        const auto& c = *c_;
        const double v00 = c[static_cast<std::size_t>(g.node(i0, j0))];
        const double v10 = c[static_cast<std::size_t>(g.node(i0 + 1, j0))];
        const double v01 = c[static_cast<std::size_t>(g.node(i0, j0 + 1))];
        const double v11 = c[static_cast<std::size_t>(g.node(i0 + 1, j0 + 1))];
        return (1 - fv) * ((1 - fu) * v00 + fu * v10) + fv * ((1 - fu) * v01 + fu * v11);
    }

    /// Tangential derivative field, cubic tangentially, linear vertically.
    double tangential_derivative(double x1, double x2) const {
        double fv;
        int j0;
        locate_vert(x2, j0, fv);
        const double lo = cubic_row(dtan_, j0, x1);
        const double hi = cubic_row(dtan_, j0 + 1, x1);
        return (1 - fv) * lo + fv * hi;
    }

    double sigma_value(double x1) const {
        const StructuredGrid& g = *grid_;
        double fu;
        int i0;
        locate_tan(x1, i0, fu);
        const auto& c = *c_;
        return (1 - fu) * c[static_cast<std::size_t>(g.node(i0, sigma_row_))] +
               fu * c[static_cast<std::size_t>(g.node(i0 + 1, sigma_row_))];
    }

    double sigma_tangential_derivative(double x1) const { return cubic_row(dtan_, sigma_row_, x1); }

  private:
    const StructuredGrid* grid_;
    int sigma_row_;
    const std::vector<double>* c_;
    std::vector<double> dtan_;

    void locate_tan(double x1, int& i0, double& frac) const {
        const StructuredGrid& g = *grid_;
        const double u = x1 / g.tan_spacing;
        double fl = std::floor(u);
        frac = u - fl;
        // A sample sitting within one ulp below a node counts as that node.
        if (frac > 1.0 - 1e-12) {
            fl += 1.0;
            frac = 0.0;
        }
        i0 = static_cast<int>(fl);
    }

    void locate_vert(double x2, int& j0, double& frac) const {
        const StructuredGrid& g = *grid_;
        const double h = g.vert_spacing(0);  // uniform macro grid
        const double v = (x2 - g.vert_coord(0)) / h;
        double fl = std::floor(v);
        frac = v - fl;
        if (frac > 1.0 - 1e-12) {
            fl += 1.0;
            frac = 0.0;
        }
        j0 = static_cast<int>(fl);
        if (j0 < 0) {
            j0 = 0;
            frac = 0.0;
        }
        if (j0 > g.vert_nodes() - 2) {
            j0 = g.vert_nodes() - 2;
            frac = 1.0;
        }
    }

    double cubic_row(const std::vector<double>& field, int j, double x1) const {
        const StructuredGrid& g = *grid_;
        double frac;
        int i0;
        locate_tan(x1, i0, frac);
        const double p0 = field[static_cast<std::size_t>(g.node(i0 - 1, j))];
        const double p1 = field[static_cast<std::size_t>(g.node(i0, j))];
        const double p2 = field[static_cast<std::size_t>(g.node(i0 + 1, j))];
        const double p3 = field[static_cast<std::size_t>(g.node(i0 + 2, j))];
        const double u = frac;
        return p1 + 0.5 * u * (p2 - p0 + u * (2 * p0 - 5 * p1 + 4 * p2 - p3 + u * (3 * (p1 - p2) + p3 - p0)));
    }
};

}  // namespace thinlayer
