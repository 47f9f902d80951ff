#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "thinlayer/fem.hpp"

using namespace thinlayer;

namespace {

std::vector<double> nodal_field(const StructuredGrid& g, double (*f)(double, double)) {
    std::vector<double> u(static_cast<std::size_t>(g.num_nodes()));
    for (int j = 0; j < g.vert_nodes(); ++j)
        for (int i = 0; i < g.tan_nodes(); ++i)
            u[static_cast<std::size_t>(g.node(i, j))] = f(g.tan_coord(i), g.vert_coord(j));
    return u;
}

}  // namespace

TEST_CASE("element mass matrix on a 2x1 element") {
    const auto m = q1_element_mass(2.0, 1.0, 1.0);
    REQUIRE_THAT(m[0][0], Catch::Matchers::WithinAbs(2.0 / 9.0, 1e-15));
    REQUIRE_THAT(m[0][1], Catch::Matchers::WithinAbs(1.0 / 9.0, 1e-15));
    REQUIRE_THAT(m[0][2], Catch::Matchers::WithinAbs(1.0 / 18.0, 1e-15));
    double total = 0.0;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            total += m[a][b];
    REQUIRE_THAT(total, Catch::Matchers::WithinAbs(2.0, 1e-14));  // element area
}

TEST_CASE("element stiffness reproduces the unit-square laplacian stencil") {
    const auto& pts = quadrature::gauss01();
    const std::array<double, 4> xi = {pts[0], pts[1], pts[0], pts[1]};
    const std::array<double, 4> eta = {pts[0], pts[0], pts[1], pts[1]};
    const std::array<Mat2, 4> d = {Mat2::identity(), Mat2::identity(), Mat2::identity(), Mat2::identity()};
    const auto k = q1_element_stiffness(1.0, 1.0, d, xi, eta);
    REQUIRE_THAT(k[0][0], Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-14));
    REQUIRE_THAT(k[0][1], Catch::Matchers::WithinAbs(-1.0 / 6.0, 1e-14));
    REQUIRE_THAT(k[0][2], Catch::Matchers::WithinAbs(-1.0 / 3.0, 1e-14));
    REQUIRE_THAT(k[0][3], Catch::Matchers::WithinAbs(-1.0 / 6.0, 1e-14));
    for (int a = 0; a < 4; ++a) {
        double row = 0.0;
        for (int b = 0; b < 4; ++b)
            row += k[a][b];
        REQUIRE_THAT(row, Catch::Matchers::WithinAbs(0.0, 1e-15));
    }
}

TEST_CASE("assembled stiffness annihilates constants") {
    const StructuredGrid g = build_rectangle_grid(1.0, 5, -0.5, 0.5, 4, true);
    const SparseMatrix k = assemble_stiffness(g, [](Region, double x1, double x2) {
        return Mat2{2.0 + x1 * x1, 0.25 * x2, 1.0 + std::abs(x2)};
    });
    const std::vector<double> ones(static_cast<std::size_t>(g.num_nodes()), 1.0);
    for (double v : k.multiply(ones))
        REQUIRE_THAT(v, Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("difference norms are exact for an affine field") {
    // u - v = x1 on the unit square: |u-v|_L2^2 = 1/3, |grad(u-v)|_L2^2 = 1.
    const StructuredGrid g = build_rectangle_grid(1.0, 4, 0.0, 1.0, 4, false);
    const std::vector<double> u = nodal_field(g, [](double x1, double) { return x1; });
    const std::vector<double> v(static_cast<std::size_t>(g.num_nodes()), 0.0);
    const NormsSq n = difference_norms_sq(g, u, v);
    REQUIRE_THAT(n.l2, Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-14));
    REQUIRE_THAT(n.h1_semi, Catch::Matchers::WithinAbs(1.0, 1e-14));

    REQUIRE_THROWS_AS(difference_norms_sq(g, std::vector<double>(3, 0.0), v), std::invalid_argument);
}

TEST_CASE("region-restricted norms integrate over that region only") {
    const LayerGeometry geom = LayerGeometry::create(1, 1, 4);
    const StructuredGrid g = build_micro_grid(geom, 2);
    const std::vector<double> ones(static_cast<std::size_t>(g.num_nodes()), 1.0);
    const std::vector<double> zero(static_cast<std::size_t>(g.num_nodes()), 0.0);
    const NormsSq layer = difference_norms_sq(g, ones, zero, Region::Layer);
    REQUIRE_THAT(layer.l2, Catch::Matchers::WithinAbs(g.region_measure(Region::Layer), 1e-14));
    REQUIRE_THAT(layer.h1_semi, Catch::Matchers::WithinAbs(0.0, 1e-15));
    const NormsSq bulk = difference_norms_sq(g, ones, zero, Region::BulkPlus);
    REQUIRE_THAT(bulk.l2, Catch::Matchers::WithinAbs(1.0, 1e-14));
}

TEST_CASE("mass matrices integrate region-weighted measures") {
    const LayerGeometry geom = LayerGeometry::create(1, 1, 4);
    const StructuredGrid g = build_micro_grid(geom, 2);
    const std::vector<double> ones(static_cast<std::size_t>(g.num_nodes()), 1.0);

    const SparseMatrix m = assemble_mass(g, [](Region) { return 1.0; });
    double total = 0.0;
    for (double v : m.multiply(ones))
        total += v;
    REQUIRE_THAT(total, Catch::Matchers::WithinAbs(g.measure(), 1e-13));

    // Layer-only weight: mass concentrates on the layer band.
    const SparseMatrix ml = assemble_mass(g, [](Region r) { return r == Region::Layer ? 4.0 : 0.0; });
    double layer_total = 0.0;
    for (double v : ml.multiply(ones))
        layer_total += v;
    REQUIRE_THAT(layer_total, Catch::Matchers::WithinAbs(4.0 * g.region_measure(Region::Layer), 1e-13));

    // Lumped mass equals the consistent row sums.
    const std::vector<double> lump = lumped_mass(g, [](Region) { return 1.0; });
    const std::vector<double> rows = m.multiply(ones);
    for (std::size_t i = 0; i < lump.size(); ++i)
        REQUIRE_THAT(lump[i], Catch::Matchers::WithinAbs(rows[i], 1e-15));
}

TEST_CASE("periodic line mass applies the 1-4-1 stencil") {
    const double h = 0.5;
    std::vector<double> q(4, 0.0);
    q[1] = 1.0;
    const std::vector<double> out = line_mass_apply(q, h);
    REQUIRE_THAT(out[0], Catch::Matchers::WithinAbs(h / 6.0, 1e-15));
    REQUIRE_THAT(out[1], Catch::Matchers::WithinAbs(4.0 * h / 6.0, 1e-15));
    REQUIRE_THAT(out[2], Catch::Matchers::WithinAbs(h / 6.0, 1e-15));
    REQUIRE_THAT(out[3], Catch::Matchers::WithinAbs(0.0, 1e-15));

    const std::vector<double> c(5, 2.0);
    double total = 0.0;
    for (double v : line_mass_apply(c, 0.25))
        total += v;
    REQUIRE_THAT(total, Catch::Matchers::WithinAbs(2.0 * 5 * 0.25, 1e-14));
}

TEST_CASE("band gradient energy of a vertical ramp is the band area") {
    const StructuredGrid g = build_rectangle_grid(2.0, 4, 0.0, 1.0, 4, true);
    const std::vector<double> u = nodal_field(g, [](double, double x2) { return x2; });
    REQUIRE_THAT(band_gradient_energy(g, u, 1, 3), Catch::Matchers::WithinAbs(1.0, 1e-14));
    REQUIRE_THAT(band_gradient_energy(g, u, 0, 4), Catch::Matchers::WithinAbs(2.0, 1e-14));
}

TEST_CASE("weighted integral matches the measure for the unit field") {
    const StructuredGrid g = build_micro_grid(LayerGeometry::create(1, 1, 4), 2);
    const std::vector<double> ones(static_cast<std::size_t>(g.num_nodes()), 1.0);
    REQUIRE_THAT(weighted_integral(g, ones, [](Region) { return 1.0; }),
                 Catch::Matchers::WithinAbs(g.measure(), 1e-13));
}
