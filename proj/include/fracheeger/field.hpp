#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace fracheeger {

/// Node-indexed real values on the interior mask of a grid, extended by zero
/// to the rest of space. The extension is implicit: only interior values are
/// stored, exterior contributions enter through precomputed tail
/// coefficients.
struct ScalarField {
    std::vector<double> values;

    ScalarField() = default;
    explicit ScalarField(std::size_t n, double fill = 0.0) : values(n, fill) {}
    explicit ScalarField(std::vector<double> v) : values(std::move(v)) {}

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
    double* data() { return values.data(); }
    const double* data() const { return values.data(); }
    auto begin() { return values.begin(); }
    auto end() { return values.end(); }
    auto begin() const { return values.begin(); }
    auto end() const { return values.end(); }

    bool operator==(const ScalarField&) const = default;
};

inline double sup_norm(const ScalarField& u) {
    double m = 0.0;
    for (double v : u.values) m = std::max(m, std::abs(v));
    return m;
}

/// h^N * sum |u_i|
inline double l1_norm(const ScalarField& u, double cell_volume) {
    double s = 0.0;
    for (double v : u.values) s += std::abs(v);
    return cell_volume * s;
}

/// h^N * sum |u_i|^p  (the p-th power of the L^p norm, no root taken)
inline double lp_power_sum(const ScalarField& u, double cell_volume, double p) {
    double s = 0.0;
    if (p == 2.0) {
        for (double v : u.values) s += v * v;
    } else {
        for (double v : u.values) s += std::pow(std::abs(v), p);
    }
    return cell_volume * s;
}

inline double lp_norm(const ScalarField& u, double cell_volume, double p) {
    return std::pow(lp_power_sum(u, cell_volume, p), 1.0 / p);
}

inline void require_same_size(const ScalarField& a, std::size_t n, const char* what) {
    if (a.size() != n)
        throw std::invalid_argument(std::string(what) + ": field size " + std::to_string(a.size()) +
                                    " does not match grid size " + std::to_string(n));
}

} // namespace fracheeger
