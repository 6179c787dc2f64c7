#pragma once

// Test-side reference computations, deliberately independent of the library's
// quadrature and measure code: plain recursive Simpson and brute-force atom
// sums. Expected values in the test files are frozen against these.

#include <cmath>
#include <functional>
#include <vector>

#include "levycouple/vec.hpp"

namespace oracle {

inline double simpson_rec(const std::function<double(double)>& f, double a, double b,
                          double fa, double fm, double fb, double whole, double tol, int depth) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double simpson(const std::function<double(double)>& f, double a, double b,
                      double tol = 1e-10, int depth = 40) {
    if (b <= a) return 0.0;
    double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth);
}

struct AtomRef {
    levycouple::Vec loc;
    double mass;
};

inline double atom_tail(const std::vector<AtomRef>& atoms, double r) {
    double s = 0.0;
    for (const auto& a : atoms)
        if (a.loc.norm() >= r) s += a.mass;
    return s;
}

inline double atom_second_moment(const std::vector<AtomRef>& atoms, double r) {
    double s = 0.0;
    for (const auto& a : atoms)
        if (a.loc.norm() <= r) s += a.mass * a.loc.squaredNorm();
    return s;
}

inline double atom_mass_at(const std::vector<AtomRef>& atoms, const levycouple::Vec& p) {
    double s = 0.0;
    for (const auto& a : atoms)
        if ((a.loc - p).lpNorm<Eigen::Infinity>() <= 1e-9) s += a.mass;
    return s;
}

inline double atom_overlap(const std::vector<AtomRef>& atoms, const levycouple::Vec& x, double eps) {
    double s = 0.0;
    for (const auto& a : atoms)
        if (a.loc.norm() > eps) s += std::min(a.mass, atom_mass_at(atoms, a.loc - x));
    return s;
}

} // namespace oracle
