#include <catch2/catch_amalgamated.hpp>

#include "thinlayer/grid.hpp"

using namespace thinlayer;

TEST_CASE("layer geometry accepts unit fractions and rejects everything else") {
    const LayerGeometry g = LayerGeometry::from_epsilon(1, 1, 0.25);
    REQUIRE(g.inv_epsilon == 4);
    REQUIRE(g.epsilon() == 0.25);

    REQUIRE_THROWS_AS(LayerGeometry::from_epsilon(1, 1, 0.3), std::invalid_argument);
    REQUIRE_THROWS_AS(LayerGeometry::from_epsilon(1, 1, 0.6), std::invalid_argument);
    REQUIRE_THROWS_AS(LayerGeometry::from_epsilon(1, 1, -0.25), std::invalid_argument);
    REQUIRE_THROWS_AS(LayerGeometry::create(0, 1, 4), std::invalid_argument);
    REQUIRE_THROWS_AS(LayerGeometry::create(1, 0, 4), std::invalid_argument);
    REQUIRE_THROWS_AS(LayerGeometry::create(1, 1, 1), std::invalid_argument);
}

TEST_CASE("micro grid anchors interfaces exactly and fills uniform spacing") {
    const LayerGeometry g = LayerGeometry::create(1, 1, 4);
    const StructuredGrid grid = build_micro_grid(g, 2);
    const double h = 0.25 / 2.0;

    REQUIRE(grid.tan_cells == 8);
    REQUIRE(grid.tan_spacing == h);
    REQUIRE(grid.tan_periodic);
    REQUIRE(grid.vert_nodes() == 21);
    REQUIRE(grid.iface_minus == 8);
    REQUIRE(grid.iface_plus == 12);

    // Anchor rows are exact; no accumulated roundoff is tolerated there.
    REQUIRE(grid.vert_coord(0) == -1.25);
    REQUIRE(grid.vert_coord(8) == -0.25);
    REQUIRE(grid.vert_coord(10) == 0.0);
    REQUIRE(grid.vert_coord(12) == 0.25);
    REQUIRE(grid.vert_coord(20) == 1.25);

    for (int j = 0; j < grid.vert_cells(); ++j)
        REQUIRE_THAT(grid.vert_spacing(j), Catch::Matchers::WithinAbs(h, 1e-15));

    REQUIRE(grid.region(0) == Region::BulkMinus);
    REQUIRE(grid.region(7) == Region::BulkMinus);
    REQUIRE(grid.region(8) == Region::Layer);
    REQUIRE(grid.region(11) == Region::Layer);
    REQUIRE(grid.region(12) == Region::BulkPlus);

    REQUIRE_THAT(grid.measure(), Catch::Matchers::WithinAbs(2.5, 1e-15));
    REQUIRE_THAT(grid.region_measure(Region::Layer), Catch::Matchers::WithinAbs(0.5, 1e-15));
    REQUIRE_THAT(grid.region_measure(Region::BulkPlus), Catch::Matchers::WithinAbs(1.0, 1e-15));
}

TEST_CASE("periodic index wrapping handles negatives and overflow") {
    const StructuredGrid grid = build_micro_grid(LayerGeometry::create(1, 1, 4), 2);
    REQUIRE(grid.tan_nodes() == 8);
    REQUIRE(grid.wrap_tan(-1) == 7);
    REQUIRE(grid.wrap_tan(8) == 0);
    REQUIRE(grid.wrap_tan(-9) == 7);
    REQUIRE(grid.wrap_tan(17) == 1);
    REQUIRE(grid.node(-1, 2) == 2 * 8 + 7);
}

TEST_CASE("cell grid spans the unit cell with an exact midline") {
    const StructuredGrid grid = build_cell_grid(CellGeometry::create(4));
    REQUIRE(grid.tan_cells == 4);
    REQUIRE(grid.vert_nodes() == 9);
    REQUIRE(grid.vert_coord(0) == -1.0);
    REQUIRE(grid.vert_coord(4) == 0.0);
    REQUIRE(grid.vert_coord(8) == 1.0);
    REQUIRE(grid.iface_minus == 0);
    REQUIRE(grid.iface_plus == 8);
    REQUIRE_THAT(grid.measure(), Catch::Matchers::WithinAbs(2.0, 1e-15));
    REQUIRE_THROWS_AS(CellGeometry::create(1), std::invalid_argument);
}

TEST_CASE("stripe grids carry trace and truncation rows on the right ends") {
    const StructuredGrid up = build_stripe_grid(StripeGeometry::create(3, 4, +1));
    REQUIRE(up.vert_nodes() == 13);
    REQUIRE(up.vert_coord(0) == 0.0);
    REQUIRE(up.vert_coord(12) == 3.0);
    REQUIRE(up.dirichlet_row == 0);
    REQUIRE(up.truncation_row == 12);

    const StructuredGrid down = build_stripe_grid(StripeGeometry::create(3, 4, -1));
    REQUIRE(down.vert_coord(0) == -3.0);
    REQUIRE(down.vert_coord(12) == 0.0);
    REQUIRE(down.dirichlet_row == 12);
    REQUIRE(down.truncation_row == 0);

    REQUIRE_THROWS_AS(StripeGeometry::create(1, 4, +1), std::invalid_argument);
    REQUIRE_THROWS_AS(StripeGeometry::create(3, 4, 0), std::invalid_argument);
}

TEST_CASE("rectangle grid switches node count with periodicity") {
    const StructuredGrid open = build_rectangle_grid(2.0, 4, 0.0, 1.0, 2, false);
    REQUIRE(open.tan_nodes() == 5);
    REQUIRE(open.num_nodes() == 15);
    const StructuredGrid wrap = build_rectangle_grid(2.0, 4, 0.0, 1.0, 2, true);
    REQUIRE(wrap.tan_nodes() == 4);
    REQUIRE(wrap.num_nodes() == 12);
    REQUIRE_THROWS_AS(build_rectangle_grid(0.0, 4, 0.0, 1.0, 2), std::invalid_argument);
}
