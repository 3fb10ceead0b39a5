#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "fracheeger/field.hpp"
#include "fracheeger/grid.hpp"
#include "fracheeger/parallel.hpp"
#include "fracheeger/params.hpp"

namespace fracheeger {

/// The two kernel families. Energies and weak forms use |x-y|^-(N+sp),
/// perimeters use |x-y|^-(N+s). They are assembled by the same code path but
/// must never be interchanged.
enum class WeightFamily { energy, perimeter };

inline const char* family_name(WeightFamily f) { return f == WeightFamily::energy ? "energy" : "perimeter"; }

struct AssemblyOptions {
    /// Subdivided quadrature on touching cell pairs (midpoint on 4^N
    /// subcells per cell). Disable only for hand-checked fixtures.
    bool refine_touching_pairs = true;
};

/// Exact integral of |x-y|^-exponent over the region |y-x| > rho.
/// Diverges unless exponent > dim, which is also the assembler guard.
inline double tail_far_field(double rho, double exponent, int dim) {
    if (!(exponent > dim))
        throw std::invalid_argument("tail integral diverges: exponent " + std::to_string(exponent) +
                                    " must exceed the dimension " + std::to_string(dim));
    if (!(rho > 0.0)) throw std::invalid_argument("tail_far_field: rho must be positive");
    const double surface = dim == 1 ? 2.0 : 2.0 * std::numbers::pi;
    return surface * std::pow(rho, double(dim) - exponent) / (exponent - double(dim));
}

/// Precomputed pair weights and exterior-tail coefficients for one grid, one
/// kernel family and one parameter set. Pair weights live in the strict
/// upper triangle (dense storage, capped at 8192 nodes).
struct KernelWeights {
    WeightFamily family = WeightFamily::energy;
    double exponent = 0.0;
    int dim = 1;
    int n_per_axis = 0;
    Shape shape = Shape::interval;
    double extent = 0.0;
    double h = 0.0;
    double cell_volume = 0.0;
    double s = 0.0;
    double p = 0.0;
    double truncation_radius = 0.0;
    std::size_t count = 0;

    std::vector<double> pair;  ///< w_ij over i < j, row-major triangle
    std::vector<double> tail;  ///< kappa_i, one entry per node

    std::size_t tri_index(std::size_t i, std::size_t j) const {
        return i * (2 * count - i - 1) / 2 + (j - i - 1);
    }
    double w(std::size_t i, std::size_t j) const {
        if (i == j) return 0.0;
        if (i > j) std::swap(i, j);
        return pair[tri_index(i, j)];
    }
};

namespace detail {

inline std::int64_t pair_dist2(const DomainGrid& g, std::size_t i, std::size_t j) {
    const std::int64_t dx = g.cells[i][0] - g.cells[j][0];
    const std::int64_t dy = g.cells[i][1] - g.cells[j][1];
    return dx * dx + dy * dy;
}

/// d2 -> d2^(-exponent/2) for integer squared lattice offsets.
inline std::vector<double> pair_kernel_table(std::int64_t max_d2, double exponent) {
    std::vector<double> t(std::size_t(max_d2) + 1, 0.0);
    for (std::int64_t d2 = 1; d2 <= max_d2; ++d2)
        t[std::size_t(d2)] = std::pow(double(d2), -0.5 * exponent);
    return t;
}

/// Subdivided midpoint weight for a touching pair at lattice offset v, as a
/// multiple of h^(2N-exponent). Both cells are split into 4 subcells per
/// axis; subcell center offsets are exact integers in units of h/8.
inline double refined_pair_factor(int vx, int vy, int dim, double exponent) {
    double sum = 0.0;
    if (dim == 1) {
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) {
                const int dx = 8 * vx + 2 * (a - b);
                sum += std::pow(double(std::int64_t(dx) * dx), -0.5 * exponent);
            }
        return sum * std::pow(8.0, exponent) / 16.0;
    }
    for (int ax = 0; ax < 4; ++ax)
        for (int ay = 0; ay < 4; ++ay)
            for (int bx = 0; bx < 4; ++bx)
                for (int by = 0; by < 4; ++by) {
                    const std::int64_t dx = 8 * vx + 2 * (ax - bx);
                    const std::int64_t dy = 8 * vy + 2 * (ay - by);
                    sum += std::pow(double(dx * dx + dy * dy), -0.5 * exponent);
                }
    return sum * std::pow(8.0, exponent) / 256.0;
}

/// Subdivided midpoint value of the single integral over one exterior cell
/// at lattice offset v (m subcells per axis), as a multiple of
/// h^(N-exponent). m = 1 reduces to the plain midpoint value |v|^-exponent.
inline double refined_tail_factor(int vx, int vy, int m, int dim, double exponent) {
    double sum = 0.0;
    if (dim == 1) {
        for (int b = 0; b < m; ++b) {
            const std::int64_t dx = 2 * m * vx + (2 * b + 1 - m);
            sum += std::pow(double(dx * dx), -0.5 * exponent);
        }
        return sum * std::pow(2.0 * m, exponent) / m;
    }
    for (int bx = 0; bx < m; ++bx)
        for (int by = 0; by < m; ++by) {
            const std::int64_t dx = 2 * m * vx + (2 * bx + 1 - m);
            const std::int64_t dy = 2 * m * vy + (2 * by + 1 - m);
            sum += std::pow(double(dx * dx + dy * dy), -0.5 * exponent);
        }
    return sum * std::pow(2.0 * m, exponent) / (m * m);
}

/// Prefix sums of the radial lattice series: sum over integer vectors v != 0
/// with |v|^2 <= t of |v|^-exponent. Shared by all nodes; per-node cutoffs
/// select a prefix.
struct RadialPrefix {
    std::vector<std::int64_t> r2;
    std::vector<double> prefix;

    double sum_up_to(double t2) const {
        // last entry with r2 <= t2
        auto it = std::upper_bound(r2.begin(), r2.end(), std::int64_t(std::floor(t2)));
        if (it == r2.begin()) return 0.0;
        return prefix[std::size_t(it - r2.begin()) - 1];
    }
};

inline RadialPrefix build_radial_prefix(std::int64_t T, double exponent) {
    const std::int64_t T2 = T * T;
    std::vector<std::int32_t> counts(std::size_t(T2) + 1, 0);
    for (std::int64_t vx = -T; vx <= T; ++vx)
        for (std::int64_t vy = -T; vy <= T; ++vy) {
            const std::int64_t d2 = vx * vx + vy * vy;
            if (d2 >= 1 && d2 <= T2) counts[std::size_t(d2)]++;
        }
    RadialPrefix rp;
    double acc = 0.0;
    for (std::int64_t d2 = 1; d2 <= T2; ++d2) {
        if (counts[std::size_t(d2)] == 0) continue;
        acc += counts[std::size_t(d2)] * std::pow(double(d2), -0.5 * exponent);
        rp.r2.push_back(d2);
        rp.prefix.push_back(acc);
    }
    return rp;
}

/// Exact exterior tail in one dimension: closed-form integral over every
/// exterior cell of the aligned truncation box plus the exact remainder
/// beyond the box. The total telescopes to the true integral.
inline void assemble_tails_1d(const DomainGrid& g, double exponent, double R, std::vector<double>& tail) {
    const double e = exponent;
    const double c = g.origin[0] + g.extent / 2.0;
    const std::int64_t k_lo = std::int64_t(std::floor((c - R - g.origin[0]) / g.h));
    const std::int64_t k_hi = std::int64_t(std::ceil((c + R - g.origin[0]) / g.h));
    const double box_lo = g.origin[0] + k_lo * g.h;
    const double box_hi = g.origin[0] + k_hi * g.h;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = g.nodes[i][0];
        double kappa = (std::pow(x - box_lo, 1.0 - e) + std::pow(box_hi - x, 1.0 - e)) / (e - 1.0);
        for (std::int64_t k = k_lo; k < k_hi; ++k) {
            if (k >= 0 && k < g.n_per_axis && g.node_at(int(k), 0) >= 0) continue;
            const double a = g.origin[0] + k * g.h;
            const double b = a + g.h;
            if (b <= x)
                kappa += (std::pow(x - b, 1.0 - e) - std::pow(x - a, 1.0 - e)) / (e - 1.0);
            else
                kappa += (std::pow(a - x, 1.0 - e) - std::pow(b - x, 1.0 - e)) / (e - 1.0);
        }
        tail[i] = kappa;
    }
}

/// Two-dimensional tails. For each node the exterior within the inscribed
/// ball of radius rho_i (distance to the truncation box) is a lattice sum;
/// the closed-form radial integral covers everything beyond. The lattice sum
/// over the full ball is shared between nodes through RadialPrefix and the
/// interior cells are subtracted, so the per-node cost stays O(M). Exterior
/// cells near the node are re-quadratured with subcell midpoints.
inline void assemble_tails_2d(const DomainGrid& g, double exponent, double R,
                              const std::vector<double>& pair_table, std::vector<double>& tail) {
    const double e = exponent;
    const double h = g.h;
    double box_lo[2], box_hi[2];
    for (int ax = 0; ax < 2; ++ax) {
        const double c = g.origin[std::size_t(ax)] + g.extent / 2.0;
        box_lo[ax] = g.origin[std::size_t(ax)] + std::floor((c - R - g.origin[std::size_t(ax)]) / h) * h;
        box_hi[ax] = g.origin[std::size_t(ax)] + std::ceil((c + R - g.origin[std::size_t(ax)]) / h) * h;
    }
    const std::size_t M = g.size();
    std::vector<double> rho(M);
    double rho_max = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
        double r = box_hi[0] - g.nodes[i][0];
        r = std::min(r, g.nodes[i][0] - box_lo[0]);
        r = std::min(r, box_hi[1] - g.nodes[i][1]);
        r = std::min(r, g.nodes[i][1] - box_lo[1]);
        rho[i] = r;
        rho_max = std::max(rho_max, r);
    }
    const auto radial = build_radial_prefix(std::int64_t(std::ceil(rho_max / h)), e);
    const double scale = std::pow(h, 2.0 - e);

    // refined factors for the near exterior cells, keyed by |offset| pattern
    std::map<std::pair<int, int>, double> near_factor;
    for (int vx = 0; vx <= 4; ++vx)
        for (int vy = 0; vy <= vx; ++vy) {
            const int v2 = vx * vx + vy * vy;
            if (v2 < 1 || v2 > 18) continue;
            const int m = v2 <= 2 ? 8 : 4;
            near_factor[{vx, vy}] = refined_tail_factor(vx, vy, m, 2, e);
        }

    par::chunked_for(
        M, par::default_chunks(M),
        [&](std::size_t, std::size_t ib, std::size_t ie) {
            for (std::size_t i = ib; i < ie; ++i) {
                const double t2 = (rho[i] / h) * (rho[i] / h);
                double sum = radial.sum_up_to(t2);
                for (std::size_t j = 0; j < M; ++j) {
                    if (j == i) continue;
                    const std::int64_t d2 = pair_dist2(g, i, j);
                    if (double(d2) <= t2) sum -= pair_table[std::size_t(d2)];
                }
                double kappa = scale * sum + tail_far_field(rho[i], e, 2);
                for (int vx = -4; vx <= 4; ++vx)
                    for (int vy = -4; vy <= 4; ++vy) {
                        const int v2 = vx * vx + vy * vy;
                        if (v2 < 1 || v2 > 18 || double(v2) > t2) continue;
                        if (g.node_at(g.cells[i][0] + vx, g.cells[i][1] + vy) >= 0) continue;
                        const auto key = std::make_pair(std::max(std::abs(vx), std::abs(vy)),
                                                        std::min(std::abs(vx), std::abs(vy)));
                        kappa += scale * (near_factor.at(key) - pair_table[std::size_t(v2)]);
                    }
                tail[i] = kappa;
            }
        },
        [](std::size_t) {});
}

} // namespace detail

/// Assembles pair weights w_ij = h^2N |x_i - x_j|^-exponent (subdivided
/// midpoint quadrature on touching pairs) and the exterior-tail coefficients
/// kappa_i for the requested family.
inline KernelWeights assemble_weights(const DomainGrid& grid, const FracParams& params, WeightFamily family,
                                      double truncation_radius, const AssemblyOptions& opts = {}) {
    if (params.dim != grid.dim) throw std::invalid_argument("assemble_weights: params/grid dimension mismatch");
    const double exponent =
        family == WeightFamily::energy ? params.energy_exponent() : params.perimeter_exponent();
    if (!(exponent > grid.dim))
        throw std::invalid_argument("assemble_weights: kernel exponent must exceed the dimension");
    if (!(truncation_radius > grid.diameter()))
        throw std::invalid_argument("assemble_weights: truncation radius " + std::to_string(truncation_radius) +
                                    " must exceed the domain diameter " + std::to_string(grid.diameter()));
    const std::size_t M = grid.size();
    if (M > 8192) throw std::invalid_argument("assemble_weights: dense pair storage is capped at 8192 nodes");

    KernelWeights W;
    W.family = family;
    W.exponent = exponent;
    W.dim = grid.dim;
    W.n_per_axis = grid.n_per_axis;
    W.shape = grid.shape;
    W.extent = grid.extent;
    W.h = grid.h;
    W.cell_volume = grid.cell_volume();
    W.s = params.s;
    W.p = params.p;
    W.truncation_radius = truncation_radius;
    W.count = M;
    W.pair.assign(M * (M - 1) / 2, 0.0);
    W.tail.assign(M, 0.0);

    const std::int64_t span = grid.n_per_axis - 1;
    const std::int64_t max_d2 = grid.dim * span * span;
    const auto table = detail::pair_kernel_table(max_d2, exponent);
    const double c_pair = std::pow(grid.h, 2.0 * grid.dim - exponent);

    double touch_factor[3] = {0.0, 0.0, 0.0};  // indexed by |v|^2
    if (opts.refine_touching_pairs) {
        touch_factor[1] = detail::refined_pair_factor(1, 0, grid.dim, exponent);
        if (grid.dim == 2) touch_factor[2] = detail::refined_pair_factor(1, 1, 2, exponent);
    }

    par::chunked_for(
        M, par::default_chunks(M),
        [&](std::size_t, std::size_t ib, std::size_t ie) {
            for (std::size_t i = ib; i < ie; ++i) {
                std::size_t idx = W.tri_index(i, i + 1);
                for (std::size_t j = i + 1; j < M; ++j, ++idx) {
                    const std::int64_t d2 = detail::pair_dist2(grid, i, j);
                    if (opts.refine_touching_pairs && d2 <= grid.dim)
                        W.pair[idx] = c_pair * touch_factor[std::size_t(d2)];
                    else
                        W.pair[idx] = c_pair * table[std::size_t(d2)];
                }
            }
        },
        [](std::size_t) {});

    if (grid.dim == 1)
        detail::assemble_tails_1d(grid, exponent, truncation_radius, W.tail);
    else
        detail::assemble_tails_2d(grid, exponent, truncation_radius, table, W.tail);
    return W;
}

namespace detail {
inline void check_energy_eval(const KernelWeights& W, const ScalarField& u, double p, const char* what) {
    if (W.family != WeightFamily::energy)
        throw std::invalid_argument(std::string(what) + ": energy-family weights required");
    if (std::abs(p - W.p) > 1e-12)
        throw std::invalid_argument(std::string(what) + ": p does not match the assembled kernel exponent");
    require_same_size(u, W.count, what);
}
} // namespace detail

/// Discrete Gagliardo p-energy: the interior double sum over ordered pairs
/// plus twice the exterior-tail contribution,
///   S_p(u) = sum_{i != j} w_ij |u_i-u_j|^p + 2 sum_i h^N kappa_i |u_i|^p.
inline double seminorm_p(const KernelWeights& W, const ScalarField& u, double p) {
    detail::check_energy_eval(W, u, p, "seminorm_p");
    const std::size_t M = W.count;
    double interior = 0.0;
    std::size_t idx = 0;
    for (std::size_t i = 0; i < M; ++i) {
        const double ui = u[i];
        for (std::size_t j = i + 1; j < M; ++j, ++idx) {
            const double d = ui - u[j];
            if (d != 0.0) interior += W.pair[idx] * std::pow(std::abs(d), p);
        }
    }
    double exterior = 0.0;
    for (std::size_t i = 0; i < M; ++i)
        if (u[i] != 0.0) exterior += W.tail[i] * std::pow(std::abs(u[i]), p);
    return 2.0 * interior + 2.0 * W.cell_volume * exterior;
}

/// Weak pairing of the fractional p-Laplacian of u against v. Satisfies
/// weak_action(u, u, p) == seminorm_p(u, p).
inline double weak_action(const KernelWeights& W, const ScalarField& u, const ScalarField& v, double p) {
    detail::check_energy_eval(W, u, p, "weak_action");
    require_same_size(v, W.count, "weak_action");
    const std::size_t M = W.count;
    const double pm1 = p - 1.0;
    double interior = 0.0;
    std::size_t idx = 0;
    for (std::size_t i = 0; i < M; ++i) {
        const double ui = u[i], vi = v[i];
        for (std::size_t j = i + 1; j < M; ++j, ++idx) {
            const double d = ui - u[j];
            if (d == 0.0) continue;
            const double J = std::copysign(std::pow(std::abs(d), pm1), d);
            interior += W.pair[idx] * J * (vi - v[j]);
        }
    }
    double exterior = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
        if (u[i] == 0.0) continue;
        exterior += W.tail[i] * std::copysign(std::pow(std::abs(u[i]), pm1), u[i]) * v[i];
    }
    return 2.0 * interior + 2.0 * W.cell_volume * exterior;
}

// ---------------------------------------------------------------------------
// Binary weight cache. Files are keyed by (shape, n, s, p, family, R, extent)
// and carry a version header; a cache hit is bit-identical to recomputation
// because assembly itself is deterministic.
// ---------------------------------------------------------------------------

namespace detail {
constexpr char weights_magic[8] = {'F', 'C', 'K', 'W', '0', '0', '0', '1'};

template <class T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
void read_pod(std::istream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
}
} // namespace detail

inline std::string weights_cache_name(Shape shape, int n, double s, double p, WeightFamily family, double R,
                                      double extent) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s_n%d_s%.17g_p%.17g_%s_R%.17g_e%.17g.fkw", shape_name(shape), n, s, p,
                  family_name(family), R, extent);
    return buf;
}

inline void save_weights(const KernelWeights& W, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write weight cache '" + path.string() + "'");
    out.write(detail::weights_magic, sizeof detail::weights_magic);
    detail::write_pod(out, std::int32_t(W.family == WeightFamily::energy ? 0 : 1));
    detail::write_pod(out, std::int32_t(W.shape));
    detail::write_pod(out, std::int32_t(W.dim));
    detail::write_pod(out, std::int32_t(W.n_per_axis));
    detail::write_pod(out, std::uint64_t(W.count));
    for (double d : {W.exponent, W.extent, W.h, W.cell_volume, W.s, W.p, W.truncation_radius})
        detail::write_pod(out, d);
    out.write(reinterpret_cast<const char*>(W.pair.data()), std::streamsize(W.pair.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(W.tail.data()), std::streamsize(W.tail.size() * sizeof(double)));
    if (!out) throw std::runtime_error("short write on weight cache '" + path.string() + "'");
}

inline KernelWeights load_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open weight cache '" + path.string() + "'");
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, detail::weights_magic, sizeof magic) != 0)
        throw std::runtime_error("weight cache '" + path.string() + "': bad magic or version");
    KernelWeights W;
    std::int32_t fam = 0, shape = 0, dim = 0, n = 0;
    std::uint64_t count = 0;
    detail::read_pod(in, fam);
    detail::read_pod(in, shape);
    detail::read_pod(in, dim);
    detail::read_pod(in, n);
    detail::read_pod(in, count);
    W.family = fam == 0 ? WeightFamily::energy : WeightFamily::perimeter;
    W.shape = Shape(shape);
    W.dim = dim;
    W.n_per_axis = n;
    W.count = count;
    detail::read_pod(in, W.exponent);
    detail::read_pod(in, W.extent);
    detail::read_pod(in, W.h);
    detail::read_pod(in, W.cell_volume);
    detail::read_pod(in, W.s);
    detail::read_pod(in, W.p);
    detail::read_pod(in, W.truncation_radius);
    W.pair.resize(count * (count - 1) / 2);
    W.tail.resize(count);
    in.read(reinterpret_cast<char*>(W.pair.data()), std::streamsize(W.pair.size() * sizeof(double)));
    in.read(reinterpret_cast<char*>(W.tail.data()), std::streamsize(W.tail.size() * sizeof(double)));
    if (!in) throw std::runtime_error("weight cache '" + path.string() + "' is truncated");
    return W;
}

/// Loads from the cache directory when a file with the matching key exists,
/// otherwise assembles and stores the result.
inline KernelWeights load_or_assemble(const std::filesystem::path& cache_dir, const DomainGrid& grid,
                                      const FracParams& params, WeightFamily family, double truncation_radius,
                                      const AssemblyOptions& opts = {}) {
    const auto path =
        cache_dir / weights_cache_name(grid.shape, grid.n_per_axis, params.s, params.p, family,
                                       truncation_radius, grid.extent);
    if (std::filesystem::exists(path)) {
        KernelWeights W = load_weights(path);
        if (W.shape == grid.shape && W.dim == grid.dim && W.n_per_axis == grid.n_per_axis && W.s == params.s &&
            W.p == params.p && W.family == family && W.truncation_radius == truncation_radius &&
            W.extent == grid.extent && W.count == grid.size())
            return W;
    }
    KernelWeights W = assemble_weights(grid, params, family, truncation_radius, opts);
    std::filesystem::create_directories(cache_dir);
    save_weights(W, path);
    return W;
}

} // namespace fracheeger
