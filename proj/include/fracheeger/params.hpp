#pragma once

#include <stdexcept>
#include <string>

namespace fracheeger {

/// Parameter triple (N, s, p) of the fractional problem together with the
/// two kernel exponents derived from it.
///
/// The energy family uses the exponent N + s*p (Gagliardo seminorms, weak
/// forms, eigenvalue problems); the perimeter family uses N + s (nonlocal
/// perimeters and Cheeger quotients). Keeping both on one object avoids
/// mixing the two kernels by accident.
struct FracParams {
    int dim;    ///< spatial dimension N, 1 or 2
    double s;   ///< fractional order, 0 < s < 1
    double p;   ///< integrability exponent, p > 1

    FracParams(int dim_, double s_, double p_) : dim(dim_), s(s_), p(p_) {
        if (dim != 1 && dim != 2)
            throw std::invalid_argument("FracParams: dim must be 1 or 2, got " + std::to_string(dim));
        if (!(s > 0.0 && s < 1.0))
            throw std::invalid_argument("FracParams: s must lie in (0,1), got " + std::to_string(s));
        if (!(p > 1.0))
            throw std::invalid_argument("FracParams: p must exceed 1, got " + std::to_string(p));
        // The standing assumption p < N/s is enforced in dimension two.  The
        // one-dimensional fixtures are kept as an extension (closed-form tail
        // integrals, exhaustive subset oracles) and may have s*p >= 1.
        if (dim >= 2 && !(p < double(dim) / s))
            throw std::invalid_argument("FracParams: p must be below N/s = " +
                                        std::to_string(double(dim) / s) + ", got " + std::to_string(p));
    }

    /// Kernel exponent N + s*p of the energy family.
    double energy_exponent() const { return dim + s * p; }

    /// Kernel exponent N + s of the perimeter family.
    double perimeter_exponent() const { return dim + s; }
};

} // namespace fracheeger
