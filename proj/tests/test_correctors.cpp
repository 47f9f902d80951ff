#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "thinlayer/correctors.hpp"
#include "thinlayer/grid.hpp"
#include "thinlayer/macro_solver.hpp"
#include "thinlayer/scenario.hpp"

using namespace thinlayer;

namespace {

// Shared cell data for an oscillatory microstructure; computed once.
const CellData& oscillatory_cells() {
    static const CellData data = build_cell_data(
        [](double y1, double) { return Mat2::scalar(2.0 + std::sin(2.0 * Expression::pi_value() * y1)); },
        Mat2::identity(), Mat2::identity(), 4, 8);
    return data;
}

MacroSystem make_macro(const Scenario& sc, int cells_per_unit) {
    return assemble_macro(sc, 1.0, build_macro_grid(sc.H, sc.sigma_len, cells_per_unit));
}

const Scenario& blank_scenario() {
    static const Scenario sc = parse_scenario_text("[geometry]\nH = 1\n", "corrector-test");
    return sc;
}

}  // namespace

TEST_CASE("cutoff is one near the interface, zero near the outer boundary") {
    CHECK(cutoff_psi(0.0, 1.0) == 1.0);
    CHECK(cutoff_psi(0.25, 1.0) == 1.0);
    CHECK(cutoff_psi(-0.2, 1.0) == 1.0);
    CHECK(cutoff_psi(0.75, 1.0) == 0.0);
    CHECK(cutoff_psi(-0.9, 1.0) == 0.0);
    CHECK(cutoff_psi(0.5, 1.0) == 0.5);
    CHECK(cutoff_psi(-0.5, 1.0) == 0.5);

    // Scales with the bulk height.
    CHECK(cutoff_psi(0.5, 2.0) == 1.0);
    CHECK(cutoff_psi(1.0, 2.0) == 0.5);
    CHECK(cutoff_psi(1.5, 2.0) == 0.0);

    // Monotone decay across the blend region.
    double prev = 1.0;
    for (int k = 1; k <= 10; ++k) {
        const double v = cutoff_psi(0.25 + 0.05 * k, 1.0);
        CHECK(v <= prev);
        CHECK(v >= 0.0);
        prev = v;
    }
    CHECK(cutoff_psi(0.3, 1.0) > 0.9);
    CHECK(cutoff_psi(0.7, 1.0) < 0.1);
}

TEST_CASE("periodic sampling wraps tangentially and clamps vertically") {
    const StructuredGrid g = build_rectangle_grid(1.0, 4, 0.0, 1.0, 2, true);
    std::vector<double> u(static_cast<std::size_t>(g.num_nodes()));
    for (int j = 0; j < g.vert_nodes(); ++j)
        for (int i = 0; i < g.tan_nodes(); ++i)
            u[static_cast<std::size_t>(g.node(i, j))] = 10.0 * j + i;

    // Node hits are exact.
    CHECK(periodic_sample(g, u, 0.25, 0.5) == u[static_cast<std::size_t>(g.node(1, 1))]);
    CHECK(periodic_sample(g, u, 0.0, 0.0) == u[static_cast<std::size_t>(g.node(0, 0))]);

    // One full period away gives the same value.
    CHECK(periodic_sample(g, u, 0.125, 0.5) == periodic_sample(g, u, 1.125, 0.5));

    // The last cell interpolates toward the wrapped first column.
    const double left = u[static_cast<std::size_t>(g.node(3, 0))];
    const double right = u[static_cast<std::size_t>(g.node(0, 0))];
    CHECK_THAT(periodic_sample(g, u, 0.875, 0.0), Catch::Matchers::WithinAbs(0.5 * (left + right), 1e-14));

    // Vertical samples outside the grid clamp to the boundary rows.
    CHECK(periodic_sample(g, u, 0.25, -3.0) == u[static_cast<std::size_t>(g.node(1, 0))]);
    CHECK(periodic_sample(g, u, 0.25, 9.0) == u[static_cast<std::size_t>(g.node(1, 2))]);

    // Cell-center sample averages the four corners.
    const double mid = periodic_sample(g, u, 0.125, 0.25);
    const double expect = 0.25 * (u[static_cast<std::size_t>(g.node(0, 0))] + u[static_cast<std::size_t>(g.node(1, 0))] +
                                  u[static_cast<std::size_t>(g.node(0, 1))] + u[static_cast<std::size_t>(g.node(1, 1))]);
    CHECK_THAT(mid, Catch::Matchers::WithinAbs(expect, 1e-14));
}

TEST_CASE("constant macro data passes through both orders unchanged") {
    const Scenario& sc = blank_scenario();
    const MacroSystem sys = make_macro(sc, 4);
    MacroState s = macro_initial_state(sys);
    std::fill(s.c.begin(), s.c.end(), 3.0);
    const MacroFieldView view(sys, s);

    const CorrectorDomain dom = make_corrector_domain(LayerGeometry::create(1, 1, 4), 4);
    const ApproximationField a1 = build_capp1(dom, oscillatory_cells(), view);
    const ApproximationField a2 = build_capp2(dom, oscillatory_cells(), view);

    for (double v : a1.bulk_plus)
        CHECK(v == 3.0);
    for (double v : a1.layer)
        CHECK(v == 3.0);
    for (double v : a2.bulk_minus)
        CHECK(v == 3.0);
    for (double v : a2.layer)
        CHECK(v == 3.0);
    CHECK(a1.jump_plus == 0.0);
    CHECK(a1.jump_minus == 0.0);
    CHECK(a2.jump_plus == 0.0);
    CHECK(a2.jump_minus == 0.0);
}

TEST_CASE("orders agree wherever the cutoff vanishes") {
    const Scenario& sc = blank_scenario();
    const MacroSystem sys = make_macro(sc, 8);
    MacroState s = macro_initial_state(sys);
    const StructuredGrid& mg = sys.grid;
    for (int j = 0; j < mg.vert_nodes(); ++j)
        for (int i = 0; i < mg.tan_nodes(); ++i)
            s.c[static_cast<std::size_t>(mg.node(i, j))] =
                std::cos(2.0 * Expression::pi_value() * mg.tan_coord(i)) * std::exp(-mg.vert_coord(j));
    const MacroFieldView view(sys, s);

    const CorrectorDomain dom = make_corrector_domain(LayerGeometry::create(1, 1, 8), 4);
    const ApproximationField a1 = build_capp1(dom, oscillatory_cells(), view);
    const ApproximationField a2 = build_capp2(dom, oscillatory_cells(), view);

    const StructuredGrid& gp = dom.grids.bulk_plus;
    bool saw_far = false, saw_near = false;
    double near_gap = 0.0;
    for (int k = 0; k < gp.vert_nodes(); ++k) {
        const double x2 = gp.vert_coord(k);
        for (int i = 0; i < gp.tan_nodes(); ++i) {
            const std::size_t nd = static_cast<std::size_t>(gp.node(i, k));
            if (std::abs(x2) >= 0.75) {
                CHECK(a2.bulk_plus[nd] == a1.bulk_plus[nd]);
                saw_far = true;
            } else if (std::abs(x2) <= 0.25) {
                near_gap = std::max(near_gap, std::abs(a2.bulk_plus[nd] - a1.bulk_plus[nd]));
                saw_near = true;
            }
        }
    }
    CHECK(saw_far);
    CHECK(saw_near);
    CHECK(near_gap > 1e-6);  // the boundary-layer term is actually present
}

TEST_CASE("interface jump is eps-small at first order and repaired at second") {
    // Macro data without vertical variation: the first-order jump at the top
    // interface is exactly eps * d1cM * w1 trace, and the cutoff equals one
    // there, so the second-order boundary-layer term cancels it down to the
    // eps^2 w2 contribution.
    const Scenario& sc = blank_scenario();
    const MacroSystem sys = make_macro(sc, 8);
    MacroState s = macro_initial_state(sys);
    const StructuredGrid& mg = sys.grid;
    for (int j = 0; j < mg.vert_nodes(); ++j)
        for (int i = 0; i < mg.tan_nodes(); ++i)
            s.c[static_cast<std::size_t>(mg.node(i, j))] = std::cos(2.0 * Expression::pi_value() * mg.tan_coord(i));
    const MacroFieldView view(sys, s);

    const CellData& cells = oscillatory_cells();
    const int n = 4;
    const LayerGeometry geom = LayerGeometry::create(1, 1, 4);
    const double eps = geom.epsilon();
    const CorrectorDomain dom = make_corrector_domain(geom, n);
    const ApproximationField a1 = build_capp1(dom, cells, view);
    const ApproximationField a2 = build_capp2(dom, cells, view);

    const StructuredGrid& gl = dom.grids.layer;
    const StructuredGrid& cg = cells.cell_grid;
    const int top = gl.vert_nodes() - 1;
    double expect1 = 0.0, expect2 = 0.0;
    for (int i = 0; i < gl.tan_nodes(); ++i) {
        const double dcm = view.sigma_tangential_derivative(gl.tan_coord(i));
        const int ic = ((i % n) + n) % n;
        const double w1t = cells.w1[static_cast<std::size_t>(cg.node(ic, cg.vert_nodes() - 1))];
        const double w2t = cells.w2[static_cast<std::size_t>(cg.node(ic, cg.vert_nodes() - 1))];
        expect1 = std::max(expect1, std::abs(eps * dcm * w1t));
        expect2 = std::max(expect2, std::abs(eps * eps * dcm * w2t));
    }
    REQUIRE(expect1 > 1e-4);  // nontrivial corrector trace

    CHECK_THAT(a1.jump_plus, Catch::Matchers::WithinAbs(expect1, 1e-12));
    CHECK_THAT(a2.jump_plus, Catch::Matchers::WithinAbs(expect2, 1e-11));
    CHECK(a2.jump_plus < a1.jump_plus);

    // Same repair at the bottom interface.
    CHECK(a1.jump_minus > 1e-6);
    CHECK(a2.jump_minus < a1.jump_minus);
    CHECK(std::abs(a2.jump_minus) < 10.0 * expect2 + 1e-11);

    // Bulk values at the interface row: capp1 is the plain macro trace (the
    // interpolated field, which differs from the analytic cosine off-node).
    const StructuredGrid& gp = dom.grids.bulk_plus;
    for (int i = 0; i < gp.tan_nodes(); ++i)
        CHECK_THAT(a1.bulk_plus[static_cast<std::size_t>(gp.node(i, 0))],
                   Catch::Matchers::WithinAbs(view.sigma_value(gp.tan_coord(i)), 1e-14));
}

TEST_CASE("approximations are linear in the macro data") {
    const Scenario& sc = blank_scenario();
    const MacroSystem sys = make_macro(sc, 8);
    MacroState s1 = macro_initial_state(sys);
    const StructuredGrid& mg = sys.grid;
    for (int j = 0; j < mg.vert_nodes(); ++j)
        for (int i = 0; i < mg.tan_nodes(); ++i)
            s1.c[static_cast<std::size_t>(mg.node(i, j))] =
                std::sin(2.0 * Expression::pi_value() * mg.tan_coord(i)) * (1.0 + 0.3 * mg.vert_coord(j));
    MacroState s2 = s1;
    for (double& v : s2.c)
        v *= -2.5;

    const MacroFieldView view1(sys, s1);
    const MacroFieldView view2(sys, s2);
    const CorrectorDomain dom = make_corrector_domain(LayerGeometry::create(1, 1, 4), 4);
    const ApproximationField a = build_capp2(dom, oscillatory_cells(), view1);
    const ApproximationField b = build_capp2(dom, oscillatory_cells(), view2);

    REQUIRE(a.bulk_plus.size() == b.bulk_plus.size());
    REQUIRE(a.layer.size() == b.layer.size());
    for (std::size_t k = 0; k < a.bulk_plus.size(); ++k)
        CHECK_THAT(b.bulk_plus[k], Catch::Matchers::WithinAbs(-2.5 * a.bulk_plus[k], 1e-12));
    for (std::size_t k = 0; k < a.layer.size(); ++k)
        CHECK_THAT(b.layer[k], Catch::Matchers::WithinAbs(-2.5 * a.layer[k], 1e-12));
    CHECK_THAT(b.jump_plus, Catch::Matchers::WithinAbs(2.5 * a.jump_plus, 1e-12));
}
