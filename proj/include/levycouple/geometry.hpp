#pragma once

#include <algorithm>
#include <cmath>

#include "levycouple/vec.hpp"

namespace levycouple::geometry {

// Pairs closer than this are treated as already met: the reflection plane is
// ill-conditioned and the map degrades to the identity.
inline constexpr double kDegeneratePairTol = 1e-12;

// Householder reflection of z across the hyperplane orthogonal to x - y.
// Isometric involution; the identity when x == y.
inline Vec reflect(const Vec& x, const Vec& y, const Vec& z) {
    Vec w = x - y;
    double n2 = w.squaredNorm();
    if (std::sqrt(n2) < kDegeneratePairTol) return z;
    return z - (2.0 * w.dot(z) / n2) * w;
}

// Clamp the norm of v to at most kappa, preserving direction.
inline Vec clamp_norm(const Vec& v, double kappa) {
    double n = v.norm();
    if (n <= kappa) return v;
    return (kappa / n) * v;
}

} // namespace levycouple::geometry
