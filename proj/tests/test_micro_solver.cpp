#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "thinlayer/fem.hpp"
#include "thinlayer/micro_solver.hpp"
#include "thinlayer/scenario.hpp"
#include "thinlayer/sparse.hpp"

using namespace thinlayer;

namespace {

Scenario scn(const std::string& body) { return parse_scenario_text(body, "micro-test"); }

std::vector<double> matrix_column(const SparseMatrix& a, int n, int j) {
    std::vector<double> e(static_cast<std::size_t>(n), 0.0);
    e[static_cast<std::size_t>(j)] = 1.0;
    return a.multiply(e);
}

double hat_energy(const SparseMatrix& a, int n, int node) {
    return matrix_column(a, n, node)[static_cast<std::size_t>(node)];
}

double sup_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v)
        m = std::max(m, std::abs(x));
    return m;
}

}  // namespace

TEST_CASE("layer blocks carry the 1/eps weight, bulk blocks do not") {
    const Scenario sc = scn("[coefficients]\nD_M = \"1\"\n");
    const LayerGeometry geom = LayerGeometry::create(1, 1, 2);
    const MicroSystem sys = assemble_micro(sc, geom, 2);

    const StructuredGrid& g = sys.grid;
    REQUIRE(g.num_nodes() == 52);
    REQUIRE(g.iface_minus == 4);
    REQUIRE(g.iface_plus == 8);

    // Reference operators on the same grid without the layer weight.
    const SparseMatrix k_plain =
        assemble_stiffness(g, [](Region, double, double) { return Mat2::identity(); });
    const SparseMatrix m_plain = assemble_mass(g, [](Region) { return 1.0; });
    const int n = g.num_nodes();

    const int mid_layer = g.node(1, 6);  // support strictly inside the layer
    const int deep_bulk = g.node(1, 2);  // support strictly inside a bulk
    CHECK_THAT(hat_energy(sys.K, n, mid_layer),
               Catch::Matchers::WithinRel(2.0 * hat_energy(k_plain, n, mid_layer), 1e-13));
    CHECK_THAT(hat_energy(sys.M, n, mid_layer),
               Catch::Matchers::WithinRel(2.0 * hat_energy(m_plain, n, mid_layer), 1e-13));
    CHECK_THAT(hat_energy(sys.K, n, deep_bulk),
               Catch::Matchers::WithinRel(hat_energy(k_plain, n, deep_bulk), 1e-13));
    CHECK_THAT(hat_energy(sys.M, n, deep_bulk),
               Catch::Matchers::WithinRel(hat_energy(m_plain, n, deep_bulk), 1e-13));

    // Stiffness annihilates constants despite the region weights.
    const std::vector<double> ones(static_cast<std::size_t>(n), 1.0);
    CHECK(sup_norm(sys.K.multiply(ones)) < 1e-11);

    // 1^T M 1 = 2 H sigma + (1/eps)(2 eps sigma): the layer weight cancels
    // the layer thickness, so the weighted area is 4 for every eps.
    CHECK(micro_total_mass(sys, ones) == Catch::Approx(4.0).margin(1e-12));
    const MicroSystem sys4 = assemble_micro(sc, LayerGeometry::create(1, 1, 4), 2);
    const std::vector<double> ones4(static_cast<std::size_t>(sys4.grid.num_nodes()), 1.0);
    CHECK(micro_total_mass(sys4, ones4) == Catch::Approx(4.0).margin(1e-12));
}

TEST_CASE("layer coefficient samples repeat exactly across periods") {
    // Unit-cell coordinates come from lattice indices, so elements one period
    // apart assemble bit-identical entries even though their physical
    // coordinates differ by eps.
    const Scenario sc = scn("[coefficients]\nD_M = \"2 + sin(2*pi*y1)\"\n");
    const int N = 4;
    const MicroSystem sys = assemble_micro(sc, LayerGeometry::create(1, 1, 2), N);
    const StructuredGrid& g = sys.grid;
    const int n = g.num_nodes();
    const int jm = g.iface_minus;

    const std::vector<double> col_a = matrix_column(sys.K, n, g.node(0, jm + 1));
    const std::vector<double> col_b = matrix_column(sys.K, n, g.node(N, jm + 1));
    // Entries agree to the last bits; only multi-element accumulation order
    // can differ between the two columns.
    for (int di = -1; di <= 1; ++di)
        for (int dj = 0; dj <= 2; ++dj)
            CHECK_THAT(col_a[static_cast<std::size_t>(g.node(di, jm + dj))],
                       Catch::Matchers::WithinULP(col_b[static_cast<std::size_t>(g.node(N + di, jm + dj))], 4));
}

TEST_CASE("initial state shifts bulk data onto the fixed domains") {
    const Scenario sc = scn(
        "[initial]\n"
        "init_plus = \"1 + x2\"\n"
        "init_minus = \"5 - x2\"\n"
        "init_M = \"3 + x1\"\n");
    const LayerGeometry geom = LayerGeometry::create(1, 1, 2);
    const MicroSystem sys = assemble_micro(sc, geom, 2);
    const StructuredGrid& g = sys.grid;
    const double h = g.tan_spacing;
    REQUIRE(h == 0.25);

    const MicroState s = micro_initial_state(sys);
    const int jm = g.iface_minus;
    const int jp = g.iface_plus;

    // Bulk rows sample the data at the fixed-domain offset from the
    // interface, not at the physical coordinate.
    CHECK(s.c[static_cast<std::size_t>(g.node(0, jp + 1))] == 1.0 + h);
    CHECK(s.c[static_cast<std::size_t>(g.node(0, jp + 4))] == 2.0);
    CHECK(s.c[static_cast<std::size_t>(g.node(0, jm - 2))] == 5.0 + 2.0 * h);
    CHECK(s.c[static_cast<std::size_t>(g.node(0, 0))] == 6.0);

    // Every layer row, interfaces included, takes the interface datum.
    for (int j = jm; j <= jp; ++j) {
        CHECK(s.c[static_cast<std::size_t>(g.node(0, j))] == 3.0);
        CHECK(s.c[static_cast<std::size_t>(g.node(1, j))] == 3.25);
    }
}

TEST_CASE("fixed-domain shift relabels rows without changing values") {
    const Scenario sc = scn("[geometry]\nH = 1\n");
    const MicroSystem sys = assemble_micro(sc, LayerGeometry::create(1, 1, 2), 2);
    const StructuredGrid& g = sys.grid;
    const int nt = g.tan_nodes();

    std::vector<double> c(static_cast<std::size_t>(g.num_nodes()));
    for (int j = 0; j < g.vert_nodes(); ++j)
        for (int i = 0; i < nt; ++i)
            c[static_cast<std::size_t>(g.node(i, j))] = 100.0 * j + i;

    const MicroRegionalFields f = shift_to_fixed_domains(sys, c);
    const FixedDomainGrids& fx = sys.fixed;
    REQUIRE(f.bulk_plus.size() == static_cast<std::size_t>(fx.bulk_plus.num_nodes()));
    REQUIRE(f.bulk_minus.size() == static_cast<std::size_t>(fx.bulk_minus.num_nodes()));
    REQUIRE(f.layer.size() == static_cast<std::size_t>(fx.layer.num_nodes()));

    const int jm = g.iface_minus;
    const int jp = g.iface_plus;
    for (int i = 0; i < nt; ++i) {
        CHECK(f.bulk_plus[static_cast<std::size_t>(fx.bulk_plus.node(i, 0))] ==
              c[static_cast<std::size_t>(g.node(i, jp))]);
        CHECK(f.bulk_plus[static_cast<std::size_t>(fx.bulk_plus.node(i, 2))] ==
              c[static_cast<std::size_t>(g.node(i, jp + 2))]);
        CHECK(f.bulk_minus[static_cast<std::size_t>(fx.bulk_minus.node(i, jm))] ==
              c[static_cast<std::size_t>(g.node(i, jm))]);
        CHECK(f.bulk_minus[static_cast<std::size_t>(fx.bulk_minus.node(i, 0))] ==
              c[static_cast<std::size_t>(g.node(i, 0))]);
        CHECK(f.layer[static_cast<std::size_t>(fx.layer.node(i, 0))] ==
              c[static_cast<std::size_t>(g.node(i, jm))]);
        CHECK(f.layer[static_cast<std::size_t>(fx.layer.node(i, jp - jm))] ==
              c[static_cast<std::size_t>(g.node(i, jp))]);
    }

    // Fixed-domain extents: bulks on (0, H) and (-H, 0), layer on (-eps, eps)
    // with an exact midline.
    CHECK(fx.bulk_plus.vert_coord(0) == 0.0);
    CHECK(fx.bulk_plus.vert_coords.back() == 1.0);
    CHECK(fx.bulk_minus.vert_coord(0) == -1.0);
    CHECK(fx.bulk_minus.vert_coords.back() == 0.0);
    CHECK(fx.layer.vert_coord(0) == -0.5);
    CHECK(fx.layer.vert_coords.back() == 0.5);
    CHECK(fx.layer.vert_coord(2) == 0.0);
}

TEST_CASE("nodal reactions sample the wrapped unit-cell coordinates") {
    const Scenario sc = scn(
        "[reactions]\n"
        "f_plus = \"sin(2*pi*y1)\"\n"
        "g_M = \"y2\"\n");
    const int N = 4;
    const MicroSystem sys = assemble_micro(sc, LayerGeometry::create(1, 1, 2), N);
    const StructuredGrid& g = sys.grid;
    const int jm = g.iface_minus;
    const int jp = g.iface_plus;

    MicroState zero;
    zero.c.assign(static_cast<std::size_t>(g.num_nodes()), 0.0);
    MicroStepper stepper(sys, 1e-3);
    const std::vector<double> b = stepper.right_hand_side(zero);

    // f+ = sin(2 pi y1) with N = 4: positive load at y1 = 1/4, negative at
    // y1 = 3/4, repeating with period N in the tangential index.
    CHECK(b[static_cast<std::size_t>(g.node(1, jp + 2))] > 1e-10);
    CHECK(b[static_cast<std::size_t>(g.node(3, jp + 2))] < -1e-10);
    CHECK(b[static_cast<std::size_t>(g.node(1, jp + 2))] ==
          Catch::Approx(b[static_cast<std::size_t>(g.node(1 + N, jp + 2))]).margin(1e-18));

    // g = y2 is odd across the layer midline: positive load at the top
    // interface, negative at the bottom, cancellation at the midline.
    CHECK(b[static_cast<std::size_t>(g.node(0, jp))] > 1e-10);
    CHECK(b[static_cast<std::size_t>(g.node(0, jm))] < -1e-10);
    CHECK(std::abs(b[static_cast<std::size_t>(g.node(0, jm + N))]) < 1e-15);
}

TEST_CASE("pure diffusion conserves the layer-weighted total mass") {
    const Scenario sc = scn(
        "[coefficients]\n"
        "D_M = \"2 + sin(2*pi*y1)\"\n"
        "[initial]\n"
        "init_plus = \"2 + cos(2*pi*x1)*exp(-2*x2^2)\"\n"
        "init_minus = \"2 + cos(2*pi*x1)*exp(-2*x2^2)\"\n"
        "init_M = \"2 + cos(2*pi*x1)\"\n");
    const MicroSystem sys = assemble_micro(sc, LayerGeometry::create(1, 1, 2), 2);

    MicroState s = micro_initial_state(sys);
    const double m0 = micro_total_mass(sys, s.c);
    REQUIRE(m0 > 1.0);

    MicroStepper stepper(sys, 1e-3, 1e-14);
    stepper.anchor(0.0);
    double worst = 0.0;
    for (int k = 0; k < 200; ++k) {
        stepper.step(s);
        worst = std::max(worst, std::abs(micro_total_mass(sys, s.c) - m0));
    }
    CHECK(worst <= 1e-12 * m0);
}

TEST_CASE("one semi-implicit layer step matches dense elimination") {
    const Scenario sc = scn(
        "[coefficients]\n"
        "D_plus = [[2, 0.3], [0.3, 1]]\n"
        "D_minus = [[1, -0.2], [-0.2, 1.5]]\n"
        "D_M = \"2 + sin(2*pi*y1)\"\n"
        "[reactions]\n"
        "f_plus = \"0.5*z/(1+z^2)\"\n"
        "f_minus = \"cos(z)\"\n"
        "g_M = \"-z + sin(2*pi*y1)\"\n"
        "[initial]\n"
        "init_plus = \"cos(2*pi*x1)*exp(-2*x2^2)\"\n"
        "init_minus = \"sin(2*pi*x1)*(1 + x2)\"\n"
        "init_M = \"cos(2*pi*x1)\"\n");
    const MicroSystem sys = assemble_micro(sc, LayerGeometry::create(1, 1, 2), 2);
    const int n = sys.grid.num_nodes();
    REQUIRE(n == 52);

    MicroState s = micro_initial_state(sys);
    MicroStepper stepper(sys, 1e-3);
    stepper.anchor(0.0);

    const std::vector<double> b = stepper.right_hand_side(s);
    std::vector<double> a_flat(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        const std::vector<double> col = matrix_column(stepper.system_matrix(), n, j);
        for (int i = 0; i < n; ++i)
            a_flat[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)] =
                col[static_cast<std::size_t>(i)];
    }
    const std::vector<double> exact = solve_dense_oracle(a_flat, b);

    stepper.step(s);
    const double scale = sup_norm(exact);
    REQUIRE(scale > 0.0);
    double err = 0.0;
    for (int i = 0; i < n; ++i)
        err = std::max(err, std::abs(s.c[static_cast<std::size_t>(i)] - exact[static_cast<std::size_t>(i)]));
    CHECK(err <= 1e-10 * scale);
    CHECK(s.t == Catch::Approx(1e-3).margin(1e-18));
}

TEST_CASE("run driver records masses, steps, and snapshots") {
    const Scenario sc = scn(
        "[initial]\n"
        "init_plus = \"1 + cos(2*pi*x1)*exp(-2*x2^2)\"\n"
        "init_minus = \"1\"\n"
        "init_M = \"1 + cos(2*pi*x1)\"\n");
    const MicroSystem sys = assemble_micro(sc, LayerGeometry::create(1, 1, 2), 2);

    const MicroRunResult run = solve_micro(sys, 0.01, 2e-3, {0.0, 0.01});
    CHECK(run.steps == 5);
    REQUIRE(run.snapshots.size() == 2);
    CHECK(run.snapshots[0].t == 0.0);
    CHECK(run.snapshots[1].t == Catch::Approx(0.01).margin(1e-14));
    CHECK(run.snapshots[1].c == run.final_state.c);
    CHECK(run.total_cg_iterations > 0);
    CHECK(run.mass_initial == Catch::Approx(micro_total_mass(sys, run.snapshots[0].c)).margin(1e-15));
    CHECK(run.mass_final == Catch::Approx(micro_total_mass(sys, run.final_state.c)).margin(1e-15));
    CHECK(std::abs(run.mass_final - run.mass_initial) < 1e-10);

    CHECK_THROWS_AS(solve_micro(sys, 0.0, 1e-3), std::invalid_argument);
    CHECK_THROWS_AS(MicroStepper(sys, 0.0), std::invalid_argument);
}
