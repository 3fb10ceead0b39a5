#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fracheeger/field.hpp"
#include "fracheeger/params.hpp"

namespace fracheeger {

enum class Shape { interval, square, ball, l_shape, custom_mask };

inline const char* shape_name(Shape s) {
    switch (s) {
        case Shape::interval: return "interval";
        case Shape::square: return "square";
        case Shape::ball: return "ball";
        case Shape::l_shape: return "l_shape";
        case Shape::custom_mask: return "custom_mask";
    }
    return "?";
}

inline Shape shape_from_name(const std::string& name) {
    if (name == "interval") return Shape::interval;
    if (name == "square") return Shape::square;
    if (name == "ball") return Shape::ball;
    if (name == "l_shape") return Shape::l_shape;
    if (name == "custom_mask") return Shape::custom_mask;
    throw std::invalid_argument("unknown shape '" + name + "'");
}

/// Uniform Cartesian discretization of a bounded domain by cell centers.
///
/// The bounding box [origin, origin + extent]^N is split into n_per_axis
/// cells per axis of width h; a cell belongs to the domain when its center
/// does. All nodes are therefore strictly interior, which keeps every
/// exterior-tail distance positive.
struct DomainGrid {
    Shape shape = Shape::interval;
    int dim = 1;
    int n_per_axis = 0;
    double h = 0.0;
    double extent = 0.0;
    std::array<double, 2> origin{0.0, 0.0};

    std::vector<std::array<double, 2>> nodes;  ///< cell centers (y = 0 in 1D)
    std::vector<std::array<int, 2>> cells;     ///< integer lattice coordinates of each node
    std::vector<int> node_of_cell;             ///< lattice -> node index, -1 outside the mask
    std::vector<std::vector<int>> orbits;      ///< partition of node indices under the symmetry group
    std::vector<std::vector<int>> symmetry_maps; ///< node permutations generating the group

    std::size_t size() const { return nodes.size(); }
    double cell_volume() const { return dim == 1 ? h : h * h; }
    double volume() const { return double(size()) * cell_volume(); }
    /// Bounding-box diagonal, used as the diameter proxy for truncation checks.
    double diameter() const { return extent * std::sqrt(double(dim)); }

    bool cell_in_lattice(int ix, int iy) const {
        return ix >= 0 && ix < n_per_axis && (dim == 1 || (iy >= 0 && iy < n_per_axis));
    }
    int node_at(int ix, int iy) const {
        if (!cell_in_lattice(ix, iy)) return -1;
        return node_of_cell[dim == 1 ? std::size_t(ix) : std::size_t(iy) * n_per_axis + ix];
    }
    bool in_mask(int ix, int iy) const { return node_at(ix, iy) >= 0; }
};

/// Candidate subset E of the interior mask, with its measure and (once a
/// perimeter evaluation has run) its nonlocal perimeter and Cheeger quotient.
struct SubsetCandidate {
    std::vector<std::uint8_t> members;  ///< one flag per interior node
    double measure = 0.0;
    double s_perimeter = 0.0;
    double quotient = 0.0;

    std::size_t count() const {
        std::size_t c = 0;
        for (auto m : members) c += (m != 0);
        return c;
    }
    bool empty() const { return count() == 0; }
};

namespace detail {

// Index maps of the discrete symmetry generators. Each generator is an exact
// permutation of lattice indices, so orbit computation involves no floating
// point at all.
struct IndexMap {
    bool flip_x = false, flip_y = false, swap_xy = false;
    std::array<int, 2> apply(std::array<int, 2> c, int n) const {
        if (flip_x) c[0] = n - 1 - c[0];
        if (flip_y) c[1] = n - 1 - c[1];
        if (swap_xy) std::swap(c[0], c[1]);
        return c;
    }
};

inline std::vector<IndexMap> symmetry_generators(Shape shape, int dim) {
    std::vector<IndexMap> gens;
    switch (shape) {
        case Shape::interval:
            gens.push_back({true, false, false});
            break;
        case Shape::square:
        case Shape::ball:
            gens.push_back({true, false, false});
            if (dim == 2) {
                gens.push_back({false, true, false});
                gens.push_back({false, false, true});
            }
            break;
        case Shape::l_shape:
            gens.push_back({false, false, true});
            break;
        case Shape::custom_mask:
            break;
    }
    return gens;
}

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

inline void finalize_grid(DomainGrid& g) {
    if (g.nodes.empty()) throw std::invalid_argument("build_grid: interior mask is empty");

    const auto gens = symmetry_generators(g.shape, g.dim);
    UnionFind uf(g.size());
    g.symmetry_maps.clear();
    for (const auto& gen : gens) {
        std::vector<int> perm(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
            auto img = gen.apply(g.cells[i], g.n_per_axis);
            int j = g.node_at(img[0], img[1]);
            if (j < 0)
                throw std::logic_error("build_grid: interior mask is not invariant under its symmetry group");
            perm[i] = j;
            uf.unite(int(i), j);
        }
        g.symmetry_maps.push_back(std::move(perm));
    }
    std::vector<std::vector<int>> orbits_by_root(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) orbits_by_root[uf.find(int(i))].push_back(int(i));
    g.orbits.clear();
    for (auto& o : orbits_by_root)
        if (!o.empty()) g.orbits.push_back(std::move(o));
}

} // namespace detail

/// Builds the grid for one of the named shapes.
///
/// Default extents: interval and square cover (0,1)^N, l_shape is the unit
/// square minus its upper-right quadrant, ball is the radius-1 ball centred
/// at the origin (extent 2). Passing extent != 0 rescales the bounding box.
inline DomainGrid build_grid(Shape shape, int n_per_axis, const FracParams& params, double extent = 0.0) {
    if (n_per_axis < 2) throw std::invalid_argument("build_grid: n_per_axis must be at least 2");
    if (shape == Shape::custom_mask)
        throw std::invalid_argument("build_grid: custom masks are built via build_custom_grid");
    if (shape == Shape::interval && params.dim != 1)
        throw std::invalid_argument("build_grid: interval requires dim = 1");
    if ((shape == Shape::square || shape == Shape::l_shape) && params.dim != 2)
        throw std::invalid_argument("build_grid: " + std::string(shape_name(shape)) + " requires dim = 2");

    DomainGrid g;
    g.shape = shape;
    g.dim = params.dim;
    g.n_per_axis = n_per_axis;
    g.extent = extent > 0.0 ? extent : (shape == Shape::ball ? 2.0 : 1.0);
    g.h = g.extent / n_per_axis;
    if (shape == Shape::ball) g.origin = {-g.extent / 2.0, -g.extent / 2.0};

    const double radius = g.extent / 2.0;
    const int ny = g.dim == 1 ? 1 : n_per_axis;
    g.node_of_cell.assign(std::size_t(n_per_axis) * ny, -1);
    for (int iy = 0; iy < ny; ++iy) {
        for (int ix = 0; ix < n_per_axis; ++ix) {
            const double x = g.origin[0] + (ix + 0.5) * g.h;
            const double y = g.dim == 1 ? 0.0 : g.origin[1] + (iy + 0.5) * g.h;
            bool inside = true;
            switch (shape) {
                case Shape::interval:
                case Shape::square:
                    break;
                case Shape::ball:
                    inside = (g.dim == 1 ? x * x : x * x + y * y) < radius * radius;
                    break;
                case Shape::l_shape:
                    inside = x < g.extent / 2.0 || y < g.extent / 2.0;
                    break;
                case Shape::custom_mask:
                    break;
            }
            if (inside) {
                g.node_of_cell[std::size_t(iy) * n_per_axis + ix] = int(g.nodes.size());
                g.nodes.push_back({x, y});
                g.cells.push_back({ix, iy});
            }
        }
    }
    detail::finalize_grid(g);
    return g;
}

/// Builds a grid from an explicit 0/1 mask (row-major; row r is the slab of
/// cells with iy = r). Custom grids carry the trivial symmetry group.
inline DomainGrid build_custom_grid(const std::vector<std::uint8_t>& mask, int n_per_axis, double h,
                                    const FracParams& params) {
    if (n_per_axis < 1) throw std::invalid_argument("build_custom_grid: n_per_axis must be positive");
    if (!(h > 0.0)) throw std::invalid_argument("build_custom_grid: h must be positive");
    const int ny = params.dim == 1 ? 1 : n_per_axis;
    if (mask.size() != std::size_t(n_per_axis) * ny)
        throw std::invalid_argument("build_custom_grid: mask size does not match n^dim");

    DomainGrid g;
    g.shape = Shape::custom_mask;
    g.dim = params.dim;
    g.n_per_axis = n_per_axis;
    g.h = h;
    g.extent = n_per_axis * h;
    g.node_of_cell.assign(mask.size(), -1);
    for (int iy = 0; iy < ny; ++iy) {
        for (int ix = 0; ix < n_per_axis; ++ix) {
            if (!mask[std::size_t(iy) * n_per_axis + ix]) continue;
            g.node_of_cell[std::size_t(iy) * n_per_axis + ix] = int(g.nodes.size());
            g.nodes.push_back({(ix + 0.5) * h, g.dim == 1 ? 0.0 : (iy + 0.5) * h});
            g.cells.push_back({ix, iy});
        }
    }
    detail::finalize_grid(g);
    return g;
}

/// Reads a mask file: one header line "N h" followed by a whitespace
/// separated 0/1 matrix (n values in 1D, n*n values row-major in 2D).
inline DomainGrid load_custom_grid(const std::filesystem::path& path, double s, double p) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open mask file '" + path.string() + "'");
    int dim = 0;
    double h = 0.0;
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("mask file '" + path.string() + "' is empty");
    {
        std::istringstream hs(header);
        if (!(hs >> dim >> h)) throw std::runtime_error("mask file header must be 'N h'");
    }
    std::vector<std::uint8_t> mask;
    int tok = 0;
    while (in >> tok) {
        if (tok != 0 && tok != 1) throw std::runtime_error("mask entries must be 0 or 1");
        mask.push_back(std::uint8_t(tok));
    }
    std::size_t n = 0;
    if (dim == 1) {
        n = mask.size();
    } else {
        n = std::size_t(std::llround(std::sqrt(double(mask.size()))));
        if (n * n != mask.size())
            throw std::runtime_error("2D mask must be square, got " + std::to_string(mask.size()) + " entries");
    }
    if (n < 1) throw std::runtime_error("mask file has no entries");
    return build_custom_grid(mask, int(n), h, FracParams(dim, s, p));
}

inline void save_custom_mask(const std::filesystem::path& path, const DomainGrid& g) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write mask file '" + path.string() + "'");
    out << g.dim << " " << g.h << "\n";
    const int ny = g.dim == 1 ? 1 : g.n_per_axis;
    for (int iy = 0; iy < ny; ++iy) {
        for (int ix = 0; ix < g.n_per_axis; ++ix)
            out << (g.in_mask(ix, iy) ? 1 : 0) << (ix + 1 == g.n_per_axis ? "" : " ");
        out << "\n";
    }
}

/// Lebesgue measure of the discretized domain: interior cell count times h^N.
inline double measure(const DomainGrid& g) { return g.volume(); }

/// Largest within-orbit oscillation of a field. Zero means the field is
/// exactly invariant under the discrete symmetry group; for ball grids this
/// is the numerical surrogate for radiality.
inline double orbit_spread(const DomainGrid& g, const ScalarField& u) {
    require_same_size(u, g.size(), "orbit_spread");
    double worst = 0.0;
    for (const auto& orbit : g.orbits) {
        double lo = u[std::size_t(orbit[0])], hi = lo;
        for (int i : orbit) {
            lo = std::min(lo, u[std::size_t(i)]);
            hi = std::max(hi, u[std::size_t(i)]);
        }
        worst = std::max(worst, hi - lo);
    }
    return worst;
}

} // namespace fracheeger
