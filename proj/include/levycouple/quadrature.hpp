#pragma once

// Adaptive one-dimensional quadrature built on a 15-point Gauss-Kronrod rule.
// Integrands with integrable endpoint singularities are handled by the caller
// pre-splitting panels geometrically toward the singular end; all Kronrod
// nodes are interior, so endpoint values are never evaluated.

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <vector>

#include "levycouple/errors.hpp"

namespace levycouple::quad {

struct Options {
    double abs_tol = 1e-11;
    double rel_tol = 1e-9;
    int max_panels = 4000;
};

struct Result {
    double value = 0.0;
    double error = 0.0;
    int panels = 0;
};

namespace detail {

// QUADPACK dqk15 nodes and weights on [-1, 1].
inline constexpr double kKronrodNodes[8] = {
    0.9914553711208126, 0.9491079123427585, 0.8648644233597691, 0.7415311855993944,
    0.5860872354676911, 0.4058451513773972, 0.2077849550078985, 0.0};
inline constexpr double kKronrodWeights[8] = {
    0.0229353220105292, 0.0630920926299785, 0.1047900103222502, 0.1406532597155259,
    0.1690047266392679, 0.1903505780647854, 0.2044329400752989, 0.2094821410847278};
inline constexpr double kGaussWeights[4] = {
    0.1294849661688697, 0.2797053914892767, 0.3818300505051189, 0.4179591836734694};

struct Panel {
    double a, b, value, error;
    bool operator<(const Panel& o) const { return error < o.error; }
};

template <typename F>
Panel eval_panel(const F& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double fk[15];
    for (int i = 0; i < 7; ++i) {
        fk[i] = f(c - h * kKronrodNodes[i]);
        fk[14 - i] = f(c + h * kKronrodNodes[i]);
    }
    fk[7] = f(c);
    double gk = 0.0;
    for (int i = 0; i < 7; ++i) gk += kKronrodWeights[i] * (fk[i] + fk[14 - i]);
    gk += kKronrodWeights[7] * fk[7];
    double g = kGaussWeights[3] * fk[7];
    for (int i = 0; i < 3; ++i) g += kGaussWeights[i] * (fk[2 * i + 1] + fk[13 - 2 * i]);
    gk *= h;
    g *= h;
    if (!std::isfinite(gk))
        throw QuadratureFailure("non-finite integrand value inside panel");
    return Panel{a, b, gk, std::abs(gk - g)};
}

} // namespace detail

// Sorted, deduplicated panel edges for [a, b] with interior breakpoints and
// optional geometric refinement toward either endpoint (for integrable
// singularities there).
inline std::vector<double> make_edges(double a, double b, std::vector<double> breaks = {},
                                      int geom_toward_a = 0, int geom_toward_b = 0) {
    std::vector<double> e;
    e.push_back(a);
    e.push_back(b);
    for (double x : breaks)
        if (x > a && x < b) e.push_back(x);
    std::sort(e.begin(), e.end());
    e.erase(std::unique(e.begin(), e.end(),
                        [](double u, double v) { return std::abs(u - v) <= 1e-15 * (std::abs(u) + std::abs(v)); }),
            e.end());
    auto refine = [&](bool toward_left, int levels) {
        if (levels <= 0) return;
        std::vector<double> extra;
        double lo = e.front(), hi = e[1];
        if (!toward_left) {
            lo = e[e.size() - 2];
            hi = e.back();
        }
        double w = hi - lo;
        for (int k = 1; k <= levels; ++k) {
            double t = w * std::pow(0.5, k);
            extra.push_back(toward_left ? lo + t : hi - t);
        }
        e.insert(e.end(), extra.begin(), extra.end());
        std::sort(e.begin(), e.end());
    };
    refine(true, geom_toward_a);
    refine(false, geom_toward_b);
    return e;
}

template <typename F>
Result integrate(const F& f, const std::vector<double>& edges, const Options& opts = {}) {
    if (edges.size() < 2) return {};
    std::priority_queue<detail::Panel> heap;
    double total = 0.0, err = 0.0;
    int panels = 0;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        if (edges[i + 1] <= edges[i]) continue;
        auto p = detail::eval_panel(f, edges[i], edges[i + 1]);
        total += p.value;
        err += p.error;
        heap.push(p);
        ++panels;
    }
    while (err > opts.abs_tol + opts.rel_tol * std::abs(total) && !heap.empty()) {
        if (panels >= opts.max_panels)
            throw QuadratureFailure("panel budget exhausted before reaching tolerance");
        auto worst = heap.top();
        heap.pop();
        double mid = 0.5 * (worst.a + worst.b);
        if (mid <= worst.a || mid >= worst.b) continue; // panel at fp resolution
        auto left = detail::eval_panel(f, worst.a, mid);
        auto right = detail::eval_panel(f, mid, worst.b);
        total += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        ++panels;
    }
    return {total, err, panels};
}

template <typename F>
Result integrate(const F& f, double a, double b, const Options& opts = {}) {
    return integrate(f, make_edges(a, b), opts);
}

// Integral over (0, b] where f may blow up integrably at 0: geometric panels
// toward 0, stopped once a panel's contribution is negligible against the
// accumulated value.
template <typename F>
Result integrate_to_zero(const F& f, double b, const Options& opts = {}) {
    Result acc;
    double hi = b;
    for (int k = 0; k < 400; ++k) {
        double lo = hi * 0.5;
        auto r = integrate(f, make_edges(lo, hi), opts);
        acc.value += r.value;
        acc.error += r.error;
        acc.panels += r.panels;
        if (k > 8 && std::abs(r.value) <= 0.25 * (opts.abs_tol + opts.rel_tol * std::abs(acc.value)))
            return acc;
        hi = lo;
    }
    throw QuadratureFailure("integral toward 0 did not converge");
}

// Integral over [a, inf). tail_bound(b) must bound |integral from b to inf|;
// panels double in width until the bound is negligible.
template <typename F, typename TailBound>
Result integrate_to_infinity(const F& f, double a, const TailBound& tail_bound,
                             const Options& opts = {}) {
    Result acc;
    double lo = a;
    double width = std::max(a, 1.0);
    for (int k = 0; k < 200; ++k) {
        double hi = lo + width;
        auto r = integrate(f, make_edges(lo, hi), opts);
        acc.value += r.value;
        acc.error += r.error;
        acc.panels += r.panels;
        double rem = tail_bound(hi);
        if (rem <= 0.5 * (opts.abs_tol + opts.rel_tol * std::abs(acc.value))) {
            acc.error += rem;
            return acc;
        }
        lo = hi;
        width *= 2.0;
    }
    throw QuadratureFailure("tail integral did not converge");
}

} // namespace levycouple::quad
