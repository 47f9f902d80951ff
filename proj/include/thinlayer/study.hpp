#pragma once

// Error harness: space-time error norms of the two-scale approximations,
// epsilon sweeps with lockstep micro/macro runs, and convergence-rate fits.
//
// A study fixes one per-period resolution N and reuses it for the cell
// solves, the micro grids, and the macro reference grid (tangential spacing
// = finest eps / N), so every epsilon point compares fields assembled from
// the same quadrature lattice and the discretization floor cancels from the
// fitted rates.  The time step is shared across the sweep:
// dt = min(max_dt, eps_min^2 / 4), snapped so it divides T.

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "thinlayer/cell_problems.hpp"
#include "thinlayer/correctors.hpp"
#include "thinlayer/fem.hpp"
#include "thinlayer/macro_solver.hpp"
#include "thinlayer/micro_solver.hpp"
#include "thinlayer/scenario.hpp"

namespace thinlayer {

struct ErrorNorms {
    double l2 = 0.0;
    double h1 = 0.0;  // full H1 norm sqrt(l2^2 + seminorm^2)
};

inline ErrorNorms h1_error(const StructuredGrid& g, const std::vector<double>& u, const std::vector<double>& v,
                           std::optional<Region> only = std::nullopt) {
    const NormsSq s = difference_norms_sq(g, u, v, only);
    return {std::sqrt(s.l2), std::sqrt(s.l2 + s.h1_semi)};
}

/// L2-in-time combination of per-step squared spatial norms at uniform dt:
/// trapezoidal rule on the squares, then square root.
inline double l2_time_norm(const std::vector<double>& squared, double dt) {
    if (squared.size() < 2)
        throw std::invalid_argument("l2_time_norm: need at least two time levels");
    double s = 0.5 * (squared.front() + squared.back());
    for (std::size_t k = 1; k + 1 < squared.size(); ++k)
        s += squared[k];
    return std::sqrt(s * dt);
}

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual = 0.0;  // l2 norm of log-space fit residuals
};

/// Least-squares slope of log(error) against log(epsilon).  Requires at
/// least three points; a nonpositive error short-circuits to the +infinity
/// sentinel (errors at rounding level carry no rate information).
inline RateFit fit_rate(const std::vector<double>& epsilons, const std::vector<double>& errors) {
    if (epsilons.size() != errors.size())
        throw std::invalid_argument("fit_rate: size mismatch");
    if (epsilons.size() < 3)
        throw std::invalid_argument("fit_rate: need at least 3 points");
    for (double e : errors) {
        if (!(e > 0.0))
            return {std::numeric_limits<double>::infinity(), 0.0, 0.0};
    }
    const std::size_t n = epsilons.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double x = std::log(epsilons[k]);
        const double y = std::log(errors[k]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double denom = static_cast<double>(n) * sxx - sx * sx;
    // The difference cancels to rounding noise when all abscissae coincide.
    if (std::abs(denom) <= 1e-12 * (static_cast<double>(n) * sxx + sx * sx))
        throw std::invalid_argument("fit_rate: degenerate abscissae");
    RateFit fit;
    fit.slope = (static_cast<double>(n) * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / static_cast<double>(n);
    double rss = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double r = std::log(errors[k]) - (fit.intercept + fit.slope * std::log(epsilons[k]));
        rss += r * r;
    }
    fit.residual = std::sqrt(rss);
    return fit;
}

/// Full error report for one epsilon point.  Order index 0 holds the
/// first-order approximation, index 1 the second-order one.
struct ErrorReport {
    int inv_epsilon = 0;
    double epsilon = 0.0;
    int steps = 0;

    std::array<double, 2> bulk_plus{};   // L2(0,T; H1) errors
    std::array<double, 2> bulk_minus{};
    std::array<double, 2> layer{};
    std::array<double, 2> composite{};   // bulk+ + bulk- + eps^{-1/2} layer
    std::array<double, 2> linf_l2{};     // max-in-time combined L2 error
    std::array<double, 2> jump_max{};    // interface jump diagnostic, max over time

    double apriori = 0.0;  // max-in-time bulk L2 + eps^{-1/2} layer L2 of the micro solution
    double mass_initial = 0.0;
    double mass_final = 0.0;
    long micro_cg = 0;
    long macro_cg = 0;
    double seconds = 0.0;
};

/// Runs micro and macro in lockstep for one epsilon, accumulating the
/// composite norms across the time levels (the H1 misfit over [dt, T], the
/// sup-in-time diagnostics over every level).  The macro trajectory is
/// recomputed per point; with the shared grid and dt it is deterministic and
/// identical across points, which trades a little compute for not holding
/// every time level of the reference solution in memory.
inline ErrorReport run_epsilon_point(const Scenario& sc, const CellData& cells, const MacroSystem& macro_sys,
                                     int inv_epsilon, int resolution, double T, double dt) {
    const auto wall0 = std::chrono::steady_clock::now();
    const LayerGeometry geom = LayerGeometry::create(sc.H, sc.sigma_len, inv_epsilon);
    const MicroSystem micro = assemble_micro(sc, geom, resolution);
    const CorrectorDomain dom{geom, resolution, micro.fixed};

    const int steps = step_count_for(T, dt);
    const double h = T / static_cast<double>(steps);

    MicroStepper micro_step(micro, h);
    MacroStepper macro_step(macro_sys, h);
    MicroState ms = micro_initial_state(micro);
    MacroState cs = macro_initial_state(macro_sys);
    micro_step.anchor(0.0);
    macro_step.anchor(0.0);

    ErrorReport rep;
    rep.inv_epsilon = inv_epsilon;
    rep.epsilon = geom.epsilon();
    rep.steps = steps;
    rep.mass_initial = micro_total_mass(micro, ms.c);

    const double inv_sqrt_eps = 1.0 / std::sqrt(geom.epsilon());
    std::array<std::array<std::vector<double>, 3>, 2> sq;  // [order][region] squared H1 errors
    std::array<std::vector<double>, 2> l2sum;
    std::vector<double> apriori_vals;
    for (auto& per_order : sq)
        for (auto& v : per_order)
            v.reserve(static_cast<std::size_t>(steps) + 1);
    const std::vector<double> zero_p(static_cast<std::size_t>(micro.fixed.bulk_plus.num_nodes()), 0.0);
    const std::vector<double> zero_m(static_cast<std::size_t>(micro.fixed.bulk_minus.num_nodes()), 0.0);
    const std::vector<double> zero_l(static_cast<std::size_t>(micro.fixed.layer.num_nodes()), 0.0);

    // The H1 misfit is integrated over [dt, T] only.  At t = 0 the corrector
    // carries the full cell oscillation while the initial data is flat; the
    // flow develops that oscillation within an O(eps^2) transient, so a fixed
    // dt/2 trapezoid weight on the initial level would overstate the true
    // time integral by a factor of order dt/eps^2 once eps^2 < dt.  The
    // sup-in-time diagnostics still see every level including t = 0.
    auto accumulate = [&](bool include_h1) {
        const MicroRegionalFields f = shift_to_fixed_domains(micro, ms.c);
        const MacroFieldView view(macro_sys, cs);
        const ApproximationField a1 = build_capp1(dom, cells, view);
        const ApproximationField a2 = build_capp2(dom, cells, view);
        const ApproximationField* apps[2] = {&a1, &a2};
        for (int o = 0; o < 2; ++o) {
            const NormsSq dp = difference_norms_sq(micro.fixed.bulk_plus, f.bulk_plus, apps[o]->bulk_plus);
            const NormsSq dm = difference_norms_sq(micro.fixed.bulk_minus, f.bulk_minus, apps[o]->bulk_minus);
            const NormsSq dl = difference_norms_sq(micro.fixed.layer, f.layer, apps[o]->layer);
            if (include_h1) {
                sq[static_cast<std::size_t>(o)][0].push_back(dp.l2 + dp.h1_semi);
                sq[static_cast<std::size_t>(o)][1].push_back(dm.l2 + dm.h1_semi);
                sq[static_cast<std::size_t>(o)][2].push_back(dl.l2 + dl.h1_semi);
            }
            l2sum[static_cast<std::size_t>(o)].push_back(std::sqrt(dp.l2) + std::sqrt(dm.l2) +
                                                         inv_sqrt_eps * std::sqrt(dl.l2));
            rep.jump_max[static_cast<std::size_t>(o)] =
                std::max(rep.jump_max[static_cast<std::size_t>(o)], std::max(apps[o]->jump_plus, apps[o]->jump_minus));
        }
        const NormsSq np = difference_norms_sq(micro.fixed.bulk_plus, f.bulk_plus, zero_p);
        const NormsSq nm = difference_norms_sq(micro.fixed.bulk_minus, f.bulk_minus, zero_m);
        const NormsSq nl = difference_norms_sq(micro.fixed.layer, f.layer, zero_l);
        apriori_vals.push_back(std::sqrt(np.l2) + std::sqrt(nm.l2) + inv_sqrt_eps * std::sqrt(nl.l2));
    };

    accumulate(false);
    for (int k = 0; k < steps; ++k) {
        micro_step.step(ms);
        macro_step.step(cs);
        accumulate(true);
    }

    rep.mass_final = micro_total_mass(micro, ms.c);
    for (int o = 0; o < 2; ++o) {
        const double bp = l2_time_norm(sq[static_cast<std::size_t>(o)][0], h);
        const double bm = l2_time_norm(sq[static_cast<std::size_t>(o)][1], h);
        const double lay = l2_time_norm(sq[static_cast<std::size_t>(o)][2], h);
        rep.bulk_plus[static_cast<std::size_t>(o)] = bp;
        rep.bulk_minus[static_cast<std::size_t>(o)] = bm;
        rep.layer[static_cast<std::size_t>(o)] = lay;
        rep.composite[static_cast<std::size_t>(o)] = bp + bm + inv_sqrt_eps * lay;
        rep.linf_l2[static_cast<std::size_t>(o)] =
            *std::max_element(l2sum[static_cast<std::size_t>(o)].begin(), l2sum[static_cast<std::size_t>(o)].end());
    }
    rep.apriori = *std::max_element(apriori_vals.begin(), apriori_vals.end());
    rep.micro_cg = micro_step.total_iterations();
    rep.macro_cg = macro_step.total_iterations();
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    return rep;
}

struct StudyOptions {
    std::vector<int> inv_epsilons;  // empty: use the scenario's sweep
    int resolution = 0;             // 0: use the scenario's value
    int stripe_length = 0;          // 0: use the scenario's value
    double max_dt = 1e-3;
    int jobs = 0;  // 0: all available cores
};

struct StudyReport {
    std::string scenario_name;
    std::string scenario_digest;
    int resolution = 0;
    int stripe_length = 0;
    int macro_cells_per_unit = 0;
    double T = 0.0;
    double dt = 0.0;

    double d_star = 0.0;
    double omega_plus = 0.0;
    double omega_minus = 0.0;
    double compatibility_defect = 0.0;

    std::vector<ErrorReport> points;  // sorted coarse to fine

    std::array<double, 2> rate{};              // fitted p1, p2
    std::array<double, 2> rate_residual{};
    std::array<int, 2> rate_points_used{};
    std::array<bool, 2> discretization_limited{};  // finest halving gained < 10 %
    std::array<bool, 2> excluded_finest{};         // point dropped from the fit

    double apriori_slope = 0.0;
    double seconds_total = 0.0;
};

using StudyLog = std::function<void(const std::string&)>;

inline StudyReport run_study(const Scenario& sc, const StudyOptions& opt = {}, const StudyLog& log = {}) {
    const auto wall0 = std::chrono::steady_clock::now();

    std::vector<int> invs = opt.inv_epsilons.empty() ? sc.study_inv_epsilons : opt.inv_epsilons;
    if (invs.size() < 3)
        throw std::invalid_argument("run_study: rate fits need at least 3 epsilon points");
    std::sort(invs.begin(), invs.end());
    if (std::adjacent_find(invs.begin(), invs.end()) != invs.end())
        throw std::invalid_argument("run_study: duplicate epsilon in sweep");

    const int resolution = opt.resolution > 0 ? opt.resolution : sc.resolution;
    const int stripe_length = opt.stripe_length > 0 ? opt.stripe_length : sc.stripe_length;

    StudyReport rep;
    rep.scenario_name = sc.name;
    rep.scenario_digest = sc.digest;
    rep.resolution = resolution;
    rep.stripe_length = stripe_length;
    rep.T = sc.T;

    auto say = [&](const std::string& s) {
        if (log)
            log(s);
    };

    say("cell problems at resolution " + std::to_string(resolution) + ", stripe length " +
        std::to_string(stripe_length));
    const CellData cells = build_cell_data([&sc](double y1, double y2) { return sc.layer_coefficient(y1, y2); },
                                           sc.D_plus, sc.D_minus, resolution, stripe_length);
    rep.d_star = cells.d_star;
    rep.omega_plus = cells.bl_plus.decay.omega;
    rep.omega_minus = cells.bl_minus.decay.omega;
    rep.compatibility_defect = cells.compatibility_defect;

    const int max_inv = invs.back();
    rep.macro_cells_per_unit = resolution * max_inv;
    const StructuredGrid macro_grid = build_macro_grid(sc.H, sc.sigma_len, rep.macro_cells_per_unit);
    const MacroSystem macro_sys = assemble_macro(sc, cells.d_star, macro_grid);
    say("macro reference grid: " + std::to_string(macro_grid.num_nodes()) + " nodes");

    const double eps_min = 1.0 / static_cast<double>(max_inv);
    double dt = std::min(opt.max_dt, 0.25 * eps_min * eps_min);
    const int steps = step_count_for(sc.T, dt);
    dt = sc.T / static_cast<double>(steps);
    rep.dt = dt;
    say("time stepping: " + std::to_string(steps) + " steps of dt = " + std::to_string(dt));

    rep.points.resize(invs.size());
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::exception_ptr failure = nullptr;

    auto worker = [&]() {
        while (true) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= invs.size())
                return;
            try {
                rep.points[idx] = run_epsilon_point(sc, cells, macro_sys, invs[idx], resolution, sc.T, dt);
                std::lock_guard<std::mutex> lk(mu);
                say("epsilon 1/" + std::to_string(invs[idx]) + ": composite1 = " +
                    std::to_string(rep.points[idx].composite[0]) + ", composite2 = " +
                    std::to_string(rep.points[idx].composite[1]));
            } catch (...) {
                std::lock_guard<std::mutex> lk(mu);
                if (!failure)
                    failure = std::current_exception();
                return;
            }
        }
    };

    int jobs = opt.jobs > 0 ? opt.jobs : static_cast<int>(std::thread::hardware_concurrency());
    jobs = std::max(1, std::min<int>(jobs, static_cast<int>(invs.size())));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(jobs));
        for (int k = 0; k < jobs; ++k)
            pool.emplace_back(worker);
        for (auto& th : pool)
            th.join();
    }
    if (failure)
        std::rethrow_exception(failure);

    // Rate fits, coarse-to-fine, with the discretization-limited rule: if
    // the finest halving improved the composite by less than 10 %, that
    // point sits on the resolution floor; it is flagged, and dropped from
    // the fit when at least three points remain.
    std::vector<double> epsv;
    epsv.reserve(invs.size());
    for (int inv : invs)
        epsv.push_back(1.0 / static_cast<double>(inv));
    for (int o = 0; o < 2; ++o) {
        std::vector<double> errs;
        errs.reserve(rep.points.size());
        for (const ErrorReport& p : rep.points)
            errs.push_back(p.composite[static_cast<std::size_t>(o)]);
        const std::size_t n = errs.size();
        const bool limited = errs[n - 1] > 0.9 * errs[n - 2];
        const bool exclude = limited && n >= 4;
        std::vector<double> fe(epsv.begin(), epsv.end() - (exclude ? 1 : 0));
        std::vector<double> fr(errs.begin(), errs.end() - (exclude ? 1 : 0));
        const RateFit fit = fit_rate(fe, fr);
        rep.rate[static_cast<std::size_t>(o)] = fit.slope;
        rep.rate_residual[static_cast<std::size_t>(o)] = fit.residual;
        rep.rate_points_used[static_cast<std::size_t>(o)] = static_cast<int>(fe.size());
        rep.discretization_limited[static_cast<std::size_t>(o)] = limited;
        rep.excluded_finest[static_cast<std::size_t>(o)] = exclude;
    }

    {
        std::vector<double> ap;
        ap.reserve(rep.points.size());
        for (const ErrorReport& p : rep.points)
            ap.push_back(p.apriori);
        rep.apriori_slope = fit_rate(epsv, ap).slope;
    }

    rep.seconds_total = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    return rep;
}

}  // namespace thinlayer
