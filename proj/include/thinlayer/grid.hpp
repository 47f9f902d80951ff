#pragma once

// Geometry descriptions and structured-grid builders.  All domains are
// tensor products of a tangential interval (periodic for the physical layer
// and for unit-cell problems) and a vertical coordinate list.  Interfaces
// always coincide with vertical grid lines; they are stored as node-row
// indices so that downstream shifts and trace extractions are exact
// relabelings rather than floating-point searches.

#include <cmath>
#include <stdexcept>
#include <vector>

namespace thinlayer {

enum class Region { BulkMinus = 0, Layer = 1, BulkPlus = 2 };

/// Thin-layer geometry in dimension 2: bulk slabs of height H above and
/// below a layer of half-thickness epsilon, tangential period sigma_len.
/// 1/epsilon must be an integer so that the layer tiles the tangential
/// period with whole microscopic cells.
struct LayerGeometry {
    int H = 1;
    int sigma_len = 1;
    int inv_epsilon = 4;

    static LayerGeometry create(int H, int sigma_len, int inv_epsilon) {
        if (H < 1)
            throw std::invalid_argument("LayerGeometry: H must be a positive integer");
        if (sigma_len < 1)
            throw std::invalid_argument("LayerGeometry: sigma_len must be a positive integer");
        if (inv_epsilon < 2)
            throw std::invalid_argument("LayerGeometry: 1/epsilon must be an integer >= 2");
        return LayerGeometry{H, sigma_len, inv_epsilon};
    }

    /// Accepts epsilon as a double but requires it to round-trip to an exact
    /// unit fraction (so 0.25 is fine, 0.3 is rejected).
    static LayerGeometry from_epsilon(int H, int sigma_len, double epsilon) {
        if (!(epsilon > 0.0) || epsilon > 0.5)
            throw std::invalid_argument("LayerGeometry: epsilon must lie in (0, 1/2]");
        const double inv = 1.0 / epsilon;
        const double rounded = std::round(inv);
        if (std::abs(inv - rounded) > 1e-9 * inv)
            throw std::invalid_argument("LayerGeometry: 1/epsilon must be an integer");
        return create(H, sigma_len, static_cast<int>(rounded));
    }

    double epsilon() const { return 1.0 / static_cast<double>(inv_epsilon); }
    static constexpr int dim() { return 2; }
};

/// Unit cell Z = (0,1) x (-1,1), discretized with `resolution` tangential
/// intervals and 2*resolution vertical intervals (spacing 1/resolution).
struct CellGeometry {
    int resolution = 4;

    static CellGeometry create(int resolution) {
        if (resolution < 2)
            throw std::invalid_argument("CellGeometry: resolution must be >= 2");
        return CellGeometry{resolution};
    }
};

/// Semi-infinite stripe (0,1) x (0, +inf) or (0,1) x (-inf, 0), truncated at
/// |y2| = length with a homogeneous Neumann condition on the cut plane.
struct StripeGeometry {
    int length = 8;
    int resolution = 4;
    int orientation = +1;  // +1: stripe above y2 = 0, -1: below

    static StripeGeometry create(int length, int resolution, int orientation) {
        if (length < 2)
            throw std::invalid_argument("StripeGeometry: truncation length must be >= 2");
        if (resolution < 2)
            throw std::invalid_argument("StripeGeometry: resolution must be >= 2");
        if (orientation != +1 && orientation != -1)
            throw std::invalid_argument("StripeGeometry: orientation must be +1 or -1");
        return StripeGeometry{length, resolution, orientation};
    }
};

/// Tensor-product grid: uniform tangential direction (optionally periodic)
/// times an explicit vertical coordinate list with a region tag per vertical
/// interval.  Node numbering is row-major with the tangential index fastest.
struct StructuredGrid {
    int tan_cells = 0;
    double tan_spacing = 0.0;
    bool tan_periodic = true;
    std::vector<double> vert_coords;
    std::vector<Region> vert_region;  // one tag per vertical interval

    int iface_minus = -1;  // vertical node index of the lower interface marker
    int iface_plus = -1;   // vertical node index of the upper interface marker
    int dirichlet_row = -1;    // stripe grids: row carrying the trace data
    int truncation_row = -1;   // stripe grids: row carrying the cut plane

    int tan_nodes() const { return tan_periodic ? tan_cells : tan_cells + 1; }
    int vert_nodes() const { return static_cast<int>(vert_coords.size()); }
    int vert_cells() const { return vert_nodes() - 1; }
    int num_nodes() const { return tan_nodes() * vert_nodes(); }
    int num_cells() const { return tan_cells * vert_cells(); }

    int wrap_tan(int i) const {
        if (!tan_periodic)
            return i;
        const int n = tan_nodes();
        i %= n;
        return i < 0 ? i + n : i;
    }

    int node(int i, int j) const { return j * tan_nodes() + wrap_tan(i); }
    double tan_coord(int i) const { return static_cast<double>(i) * tan_spacing; }
    double vert_coord(int j) const { return vert_coords[static_cast<std::size_t>(j)]; }
    double vert_spacing(int j) const { return vert_coords[static_cast<std::size_t>(j) + 1] - vert_coords[static_cast<std::size_t>(j)]; }
    Region region(int j) const { return vert_region[static_cast<std::size_t>(j)]; }

    double tan_extent() const { return static_cast<double>(tan_cells) * tan_spacing; }

    /// Total measure of the grid, summed cell by cell.
    double measure() const {
        double s = 0.0;
        for (int j = 0; j < vert_cells(); ++j)
            s += vert_spacing(j);
        return s * tan_extent();
    }

    double region_measure(Region r) const {
        double s = 0.0;
        for (int j = 0; j < vert_cells(); ++j)
            if (vert_region[static_cast<std::size_t>(j)] == r)
                s += vert_spacing(j);
        return s * tan_extent();
    }
};

/// Micro grid over sigma x (-H - eps, H + eps): uniform spacing eps/N in both
/// directions (N = per-period resolution), so every microscopic period is
/// resolved by the same N x N lattice and the interfaces S_eps^-/+ land on
/// grid lines.  Bulk vertical spacing equals the layer spacing, which makes
/// the +-eps shift onto the fixed bulk domains an exact node relabeling.
inline StructuredGrid build_micro_grid(const LayerGeometry& g, int per_period_resolution) {
    if (per_period_resolution < 2)
        throw std::invalid_argument("build_micro_grid: per-period resolution must be >= 2");
    const int n = per_period_resolution;
    const int m = g.inv_epsilon;
    const double eps = g.epsilon();
    const double h = eps / static_cast<double>(n);

    StructuredGrid grid;
    grid.tan_cells = g.sigma_len * n * m;
    grid.tan_spacing = h;
    grid.tan_periodic = true;

    const int bulk_intervals = g.H * n * m;  // H / (eps/N)
    const int layer_intervals = 2 * n;
    const int total = 2 * bulk_intervals + layer_intervals;
    grid.vert_coords.resize(static_cast<std::size_t>(total) + 1);
    grid.vert_region.resize(static_cast<std::size_t>(total));

    // Anchor coordinates are assigned exactly; interior nodes are filled by
    // uniform subdivision between anchors.
    const int j_sminus = bulk_intervals;
    const int j_splus = bulk_intervals + layer_intervals;
    grid.vert_coords.front() = -(static_cast<double>(g.H) + eps);
    grid.vert_coords[static_cast<std::size_t>(j_sminus)] = -eps;
    grid.vert_coords[static_cast<std::size_t>(j_sminus + n)] = 0.0;
    grid.vert_coords[static_cast<std::size_t>(j_splus)] = eps;
    grid.vert_coords.back() = static_cast<double>(g.H) + eps;
    for (int j = 1; j < bulk_intervals; ++j)
        grid.vert_coords[static_cast<std::size_t>(j)] = -eps - static_cast<double>(bulk_intervals - j) * h;
    for (int j = 1; j < layer_intervals; ++j) {
        if (j != n)
            grid.vert_coords[static_cast<std::size_t>(j_sminus + j)] = static_cast<double>(j - n) * h;
    }
    for (int j = 1; j < bulk_intervals; ++j)
        grid.vert_coords[static_cast<std::size_t>(j_splus + j)] = eps + static_cast<double>(j) * h;

    for (int j = 0; j < total; ++j) {
        grid.vert_region[static_cast<std::size_t>(j)] =
            j < j_sminus ? Region::BulkMinus : (j < j_splus ? Region::Layer : Region::BulkPlus);
    }
    grid.iface_minus = j_sminus;
    grid.iface_plus = j_splus;
    return grid;
}

/// Cell grid over Z = (0,1) x (-1,1) with spacing 1/resolution, periodic in
/// the tangential direction.  The interface markers carry S^- (bottom) and
/// S^+ (top) rows.
inline StructuredGrid build_cell_grid(const CellGeometry& g) {
    const int r = g.resolution;
    StructuredGrid grid;
    grid.tan_cells = r;
    grid.tan_spacing = 1.0 / static_cast<double>(r);
    grid.tan_periodic = true;
    grid.vert_coords.resize(static_cast<std::size_t>(2 * r) + 1);
    grid.vert_region.assign(static_cast<std::size_t>(2 * r), Region::Layer);
    grid.vert_coords.front() = -1.0;
    grid.vert_coords[static_cast<std::size_t>(r)] = 0.0;
    grid.vert_coords.back() = 1.0;
    for (int j = 1; j < 2 * r; ++j) {
        if (j != r)
            grid.vert_coords[static_cast<std::size_t>(j)] = static_cast<double>(j - r) / static_cast<double>(r);
    }
    grid.iface_minus = 0;
    grid.iface_plus = 2 * r;
    return grid;
}

/// Stripe grid over (0,1) x (0, L) (orientation +1) or (0,1) x (-L, 0)
/// (orientation -1) with spacing 1/resolution in both directions.
inline StructuredGrid build_stripe_grid(const StripeGeometry& g) {
    const int r = g.resolution;
    const int nv = g.length * r;
    StructuredGrid grid;
    grid.tan_cells = r;
    grid.tan_spacing = 1.0 / static_cast<double>(r);
    grid.tan_periodic = true;
    grid.vert_coords.resize(static_cast<std::size_t>(nv) + 1);
    grid.vert_region.assign(static_cast<std::size_t>(nv), Region::Layer);
    if (g.orientation > 0) {
        grid.vert_coords.front() = 0.0;
        grid.vert_coords.back() = static_cast<double>(g.length);
        for (int j = 1; j < nv; ++j)
            grid.vert_coords[static_cast<std::size_t>(j)] = static_cast<double>(j) / static_cast<double>(r);
        grid.dirichlet_row = 0;
        grid.truncation_row = nv;
    } else {
        grid.vert_coords.front() = -static_cast<double>(g.length);
        grid.vert_coords.back() = 0.0;
        for (int j = 1; j < nv; ++j)
            grid.vert_coords[static_cast<std::size_t>(j)] = static_cast<double>(j - nv) / static_cast<double>(r);
        grid.dirichlet_row = nv;
        grid.truncation_row = 0;
    }
    return grid;
}

/// Uniform rectangle grid (0, tan_extent) x (y0, y1), used for fixed-domain
/// error norms and by unit tests that need a plain square.
inline StructuredGrid build_rectangle_grid(double tan_extent, int nx, double y0, double y1, int ny,
                                           bool periodic = false, Region tag = Region::Layer) {
    if (nx < 1 || ny < 1 || !(tan_extent > 0.0) || !(y1 > y0))
        throw std::invalid_argument("build_rectangle_grid: invalid extents");
    StructuredGrid grid;
    grid.tan_cells = nx;
    grid.tan_spacing = tan_extent / static_cast<double>(nx);
    grid.tan_periodic = periodic;
    grid.vert_coords.resize(static_cast<std::size_t>(ny) + 1);
    grid.vert_region.assign(static_cast<std::size_t>(ny), tag);
    grid.vert_coords.front() = y0;
    grid.vert_coords.back() = y1;
    for (int j = 1; j < ny; ++j)
        grid.vert_coords[static_cast<std::size_t>(j)] = y0 + (y1 - y0) * static_cast<double>(j) / static_cast<double>(ny);
    return grid;
}

}  // namespace thinlayer
