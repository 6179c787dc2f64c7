#include "levycouple/measures.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "levycouple/quadrature.hpp"

namespace levycouple::measures {

double sphere_surface_area(int d) {
    // |S^{d-1}| = 2 pi^{d/2} / Gamma(d/2); equals 2 for d = 1 (two signs).
    return 2.0 * std::pow(3.14159265358979323846, 0.5 * d) / std::tgamma(0.5 * d);
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double surface_area(int d) { return sphere_surface_area(d); }

quad::Options quad_opts(const TruncationConfig& cfg) {
    quad::Options o;
    o.abs_tol = 1e-13;
    o.rel_tol = 1e-10;
    o.max_panels = std::max(256, cfg.quad_points * 16);
    return o;
}

// Integral of f(s) q(s) s^{d-1} over [lo, hi] with hi possibly infinite and
// no a-priori tail bound: panels double in width and the sum is accepted once
// three consecutive panels are negligible.
template <typename F>
double radial_outer(const LevyMeasure& nu, const F& f, double lo, double hi,
                    const quad::Options& opts) {
    auto integrand = [&](double s) { return f(s) * nu.radial_density(s) * std::pow(s, nu.dim() - 1); };
    if (std::isfinite(hi)) {
        if (hi <= lo) return 0.0;
        return quad::integrate(integrand, quad::make_edges(lo, hi, {1.0}), opts).value;
    }
    double acc = 0.0;
    double a = lo;
    double width = std::max(lo, 1.0);
    int quiet = 0;
    for (int k = 0; k < 200; ++k) {
        double b = a + width;
        double v = quad::integrate(integrand, quad::make_edges(a, b), opts).value;
        acc += v;
        if (std::abs(v) <= 0.02 * (opts.abs_tol + opts.rel_tol * std::abs(acc))) {
            if (++quiet >= 3) return acc;
        } else {
            quiet = 0;
        }
        a = b;
        width *= 2.0;
    }
    throw QuadratureFailure("radial tail integral did not settle");
}

template <typename F>
double radial_inner(const LevyMeasure& nu, const F& f, double hi, const quad::Options& opts) {
    if (hi <= 0.0) return 0.0;
    auto integrand = [&](double s) { return f(s) * nu.radial_density(s) * std::pow(s, nu.dim() - 1); };
    return quad::integrate_to_zero(integrand, hi, opts).value;
}

} // namespace

LevyMeasure LevyMeasure::discrete(int d, std::vector<Atom> atoms) {
    if (d < 1) throw Error("dimension must be at least 1");
    if (atoms.empty()) throw Error("discrete measure needs at least one atom");
    for (const auto& a : atoms) {
        if (a.location.size() != d) throw Error("atom dimension mismatch");
        if (!(a.mass > 0.0)) throw Error("atom masses must be positive");
        if (a.location.norm() < 1e-300) throw Error("atom at the origin is not allowed");
    }
    LevyMeasure nu;
    nu.kind_ = Kind::DiscreteAtoms;
    nu.dim_ = d;
    nu.atoms_ = std::move(atoms);
    nu.range_bound_ = 0.0;
    for (const auto& a : nu.atoms_) nu.range_bound_ = std::max(nu.range_bound_, a.location.norm());
    nu.symmetric_ = true;
    for (const auto& a : nu.atoms_) {
        double mirror = nu.atom_mass_near(-a.location);
        if (std::abs(mirror - a.mass) > 1e-12 * (1.0 + a.mass)) {
            nu.symmetric_ = false;
            break;
        }
    }
    return nu;
}

LevyMeasure LevyMeasure::radial(int d, std::function<double(double)> q, double range_bound) {
    if (d < 1) throw Error("dimension must be at least 1");
    if (!q) throw Error("radial profile must be callable");
    if (!(range_bound > 0.0)) throw Error("range bound must be positive");
    LevyMeasure nu;
    nu.kind_ = Kind::RadialDensity;
    nu.dim_ = d;
    nu.symmetric_ = true;
    nu.range_bound_ = range_bound;
    nu.profile_ = std::move(q);

    double probe = std::min(range_bound, 1.0);
    for (int k = 0; k < 40; ++k) {
        double r = probe * std::pow(0.7, k);
        if (nu.profile_(r) < 0.0) throw Error("radial profile must be nonnegative");
    }
    // Levy integrability: second moment near 0 plus mass beyond 1 must be finite.
    try {
        jump_second_moment(nu, std::min(1.0, range_bound));
        if (range_bound > 1.0) tail_mass(nu, 1.0);
    } catch (const QuadratureFailure& e) {
        throw IntegrabilityViolation(std::string("radial profile fails the jump integrability check: ") + e.what());
    }
    return nu;
}

LevyMeasure LevyMeasure::stable(int d, double alpha, double c) {
    if (d < 1) throw Error("dimension must be at least 1");
    if (!(alpha > 0.0 && alpha < 2.0)) throw Error("stable index must lie in (0, 2)");
    if (!(c > 0.0)) throw Error("stable scale must be positive");
    LevyMeasure nu;
    nu.kind_ = Kind::StableClosedForm;
    nu.dim_ = d;
    nu.symmetric_ = true;
    nu.alpha_ = alpha;
    nu.scale_ = c;
    return nu;
}

const std::vector<Atom>& LevyMeasure::atoms() const {
    if (kind_ != Kind::DiscreteAtoms) throw NonAtomicBase("atom list requested from a density measure");
    return atoms_;
}

double LevyMeasure::atom_mass_near(const Vec& p, double tol) const {
    if (kind_ != Kind::DiscreteAtoms) throw NonAtomicBase("atom lookup on a density measure");
    double total = 0.0;
    for (const auto& a : atoms_)
        if ((a.location - p).lpNorm<Eigen::Infinity>() <= tol) total += a.mass;
    return total;
}

double LevyMeasure::radial_density(double r) const {
    switch (kind_) {
        case Kind::RadialDensity:
            if (r > range_bound_) return 0.0;
            return profile_(r);
        case Kind::StableClosedForm:
            return scale_ * std::pow(r, -static_cast<double>(dim_) - alpha_);
        case Kind::DiscreteAtoms:
            break;
    }
    throw NonAtomicBase("radial density requested from an atomic measure");
}

double LevyMeasure::density(const Vec& z) const { return radial_density(z.norm()); }

double tail_mass(const LevyMeasure& nu, double r, const TruncationConfig& cfg) {
    switch (nu.kind()) {
        case Kind::DiscreteAtoms: {
            double total = 0.0;
            for (const auto& a : nu.atoms())
                if (a.location.norm() >= r) total += a.mass;
            return total;
        }
        case Kind::StableClosedForm:
            if (!(r > 0.0)) throw Error("tail mass of a density measure needs r > 0");
            return surface_area(nu.dim()) * nu.stable_scale() * std::pow(r, -nu.stable_alpha()) /
                   nu.stable_alpha();
        case Kind::RadialDensity: {
            if (!(r > 0.0)) throw Error("tail mass of a density measure needs r > 0");
            if (r >= nu.range_bound()) return 0.0;
            auto one = [](double) { return 1.0; };
            return surface_area(nu.dim()) *
                   radial_outer(nu, one, r, nu.range_bound(), quad_opts(cfg));
        }
    }
    throw Error("unreachable");
}

double jump_second_moment(const LevyMeasure& nu, double r, const TruncationConfig& cfg) {
    if (r < 0.0) throw Error("radius must be nonnegative");
    switch (nu.kind()) {
        case Kind::DiscreteAtoms: {
            double total = 0.0;
            for (const auto& a : nu.atoms()) {
                double n = a.location.norm();
                if (n <= r) total += a.mass * n * n;
            }
            return total;
        }
        case Kind::StableClosedForm:
            return surface_area(nu.dim()) * nu.stable_scale() *
                   std::pow(r, 2.0 - nu.stable_alpha()) / (2.0 - nu.stable_alpha());
        case Kind::RadialDensity: {
            double hi = std::min(r, nu.range_bound());
            auto sq = [](double s) { return s * s; };
            return surface_area(nu.dim()) * radial_inner(nu, sq, hi, quad_opts(cfg));
        }
    }
    throw Error("unreachable");
}

namespace {

// Overlap integrand for density measures: pointwise minimum of the density
// and its translate by x.
double overlap_density(const LevyMeasure& nu, const Vec& x, const Vec& z) {
    return std::min(nu.density(z), nu.density(z - x));
}

MonteCarloEstimate overlap_1d(const LevyMeasure& nu, double shift, double eps,
                              const TruncationConfig& cfg) {
    // One-dimensional deterministic route. The shift sign is irrelevant:
    // substituting z -> -z maps one case onto the other.
    const double s = std::abs(shift);
    const double R = nu.range_bound();
    Vec xv(1);
    xv[0] = s;
    auto f = [&](double z) {
        Vec zv(1);
        zv[0] = z;
        return overlap_density(nu, xv, zv);
    };
    auto opts = quad_opts(cfg);
    std::vector<double> breaks = {-eps, eps, 0.0, 0.5 * s, s, s - eps, s + eps};
    double lo, hi;
    if (std::isfinite(R)) {
        lo = s - R;
        hi = R;
        if (lo >= hi) return {0.0, 0.0};
        breaks.push_back(-R);
        breaks.push_back(s + R);
    } else {
        // min(q(|z|), q(|z-s|)) <= q(|z|), so half the radial tail bounds
        // either side beyond b.
        lo = -1.0;
        hi = std::max(1.0, s + 1.0);
    }
    double value = 0.0, error = 0.0;
    auto run = [&](double a, double b) {
        if (b <= a) return;
        auto r = quad::integrate(f, quad::make_edges(a, b, breaks), opts);
        value += r.value;
        error += r.error;
    };
    auto cut = [&](double a, double b, double e) { // remove (-e, e) from [a, b]
        if (e <= 0.0) {
            run(a, b);
            return;
        }
        run(a, std::min(b, -e));
        run(std::max(a, e), b);
    };
    if (std::isfinite(R)) {
        cut(lo, hi, eps);
    } else {
        cut(lo, hi, eps);
        auto tail_one_sided = [&](double b) { return 0.5 * tail_mass(nu, b, cfg); };
        auto left = quad::integrate_to_infinity([&](double t) { return f(-t); }, -lo,
                                                tail_one_sided, opts);
        auto right = quad::integrate_to_infinity(f, hi, tail_one_sided, opts);
        value += left.value + right.value;
        error += left.error + right.error;
    }
    return {value, error};
}

MonteCarloEstimate overlap_mc(const LevyMeasure& nu, const Vec& x, double eps,
                              const TruncationConfig& cfg) {
    // Importance-sampled Monte Carlo for d >= 2. Proposal is a disjoint
    // mixture: uniform on the annulus {eps < |z| <= rho} (where the overlap
    // density is bounded by q(|x| - rho)) and the normalized restriction of
    // nu outside rho.
    const int d = nu.dim();
    const double xn = x.norm();
    double rho = std::max(eps, 0.5 * xn);
    double t_out = tail_mass(nu, rho, cfg);
    double ball_lo = eps, ball_hi = rho;
    bool use_ball = ball_hi > ball_lo * (1.0 + 1e-12) && ball_hi > 0.0;
    double ball_vol = 0.0;
    if (use_ball) {
        double unit_ball = surface_area(d) / d;
        ball_vol = unit_ball * (std::pow(ball_hi, d) - std::pow(std::max(ball_lo, 0.0), d));
    }
    double w_ball = use_ball ? 0.2 : 0.0;
    JumpSampler outer(nu, rho, cfg);
    RngStream rng(cfg.mc_seed);
    const int n = std::max(1000, cfg.mc_points);
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        Vec z;
        double pdf;
        if (rng.uniform() < w_ball) {
            double u = rng.uniform();
            double lo_d = std::pow(std::max(ball_lo, 0.0), d);
            double r = std::pow(lo_d + u * (std::pow(ball_hi, d) - lo_d), 1.0 / d);
            z = r * rng.unit_sphere(d);
            pdf = w_ball / ball_vol;
        } else {
            z = outer.sample(rng);
            pdf = (1.0 - w_ball) * nu.density(z) / t_out;
        }
        double v = overlap_density(nu, x, z) / pdf;
        sum += v;
        sum2 += v * v;
    }
    double mean = sum / n;
    double var = std::max(0.0, sum2 / n - mean * mean);
    return {mean, std::sqrt(var / n)};
}

} // namespace

MonteCarloEstimate overlap_mass_detail(const LevyMeasure& nu, const Vec& x, double eps,
                                       const TruncationConfig& cfg) {
    if (x.size() != nu.dim()) throw Error("shift dimension mismatch");
    if (eps < 0.0) throw Error("truncation radius must be nonnegative");
    const double xn = x.norm();
    if (xn == 0.0) {
        // Overlap with the unshifted measure is the measure itself.
        if (nu.kind() == Kind::DiscreteAtoms) return {tail_mass(nu, std::nextafter(eps, kInf)), 0.0};
        if (eps > 0.0) return {tail_mass(nu, eps, cfg), 0.0};
        if (nu.kind() == Kind::StableClosedForm)
            throw ZeroShift("zero shift with an infinite measure");
        try {
            auto one = [](double) { return 1.0; };
            double inner = radial_inner(nu, one, std::min(1.0, nu.range_bound()), quad_opts(cfg));
            double outer = nu.range_bound() > 1.0 ? tail_mass(nu, 1.0, cfg) : 0.0;
            return {surface_area(nu.dim()) * inner + outer, 0.0};
        } catch (const QuadratureFailure&) {
            throw ZeroShift("zero shift with an infinite measure");
        }
    }
    switch (nu.kind()) {
        case Kind::DiscreteAtoms: {
            double total = 0.0;
            for (const auto& a : nu.atoms())
                if (a.location.norm() > eps)
                    total += std::min(a.mass, nu.atom_mass_near(a.location - x));
            return {total, 0.0};
        }
        case Kind::StableClosedForm:
            if (nu.dim() == 1 && eps == 0.0) {
                // min(q(z), q(z - s)) switches branches at s/2; each side
                // integrates to c * (2/s)^alpha / alpha.
                const double a = nu.stable_alpha();
                return {nu.stable_scale() * (2.0 / a) * std::pow(2.0 / xn, a), 0.0};
            }
            [[fallthrough]];
        case Kind::RadialDensity:
            if (nu.dim() == 1) return overlap_1d(nu, x[0], eps, cfg);
            return overlap_mc(nu, x, eps, cfg);
    }
    throw Error("unreachable");
}

double overlap_mass(const LevyMeasure& nu, const Vec& x, double eps, const TruncationConfig& cfg) {
    return overlap_mass_detail(nu, x, eps, cfg).value;
}

double overlap_fraction(const LevyMeasure& nu, const Vec& x, const Vec& z) {
    if (x.size() != nu.dim() || z.size() != nu.dim()) throw Error("dimension mismatch");
    if (nu.kind() == Kind::DiscreteAtoms) {
        double here = nu.atom_mass_near(z);
        if (here <= 0.0) throw UnsupportedPoint("z is not an atom of the measure");
        double shifted = nu.atom_mass_near(z - x);
        return std::min(1.0, shifted / here);
    }
    double here = nu.density(z);
    if (!(here > 0.0) || !std::isfinite(here))
        throw UnsupportedPoint("z lies outside the support of the measure");
    return std::min(1.0, nu.density(z - x) / here);
}

double min_overlap_rate(const LevyMeasure& nu, double r, const TruncationConfig& cfg,
                        int grid_size, int directions) {
    if (!(r > 0.0)) throw Error("radius must be positive");
    if (grid_size < 2) throw Error("grid too small");
    const int d = nu.dim();
    std::vector<Vec> dirs;
    if (d == 1 || nu.is_symmetric()) {
        dirs.push_back(unit_vec(d));
    } else {
        RngStream rng(cfg.mc_seed ^ 0xd1f5ULL);
        for (int k = 0; k < directions; ++k) dirs.push_back(rng.unit_sphere(d));
    }
    if (nu.kind() == Kind::StableClosedForm) {
        // Overlap mass scales like |x|^(-alpha), so the infimum over
        // magnitudes in (r/100, r] sits at the largest one.
        return r * r * overlap_mass(nu, r * dirs.front(), 0.0, cfg);
    }
    double best = kInf;
    for (int j = 0; j < grid_size; ++j) {
        // geometric magnitudes spanning (r/100, r]
        double m = r * std::pow(100.0, static_cast<double>(j) / (grid_size - 1) - 1.0);
        for (const auto& e : dirs) best = std::min(best, overlap_mass(nu, m * e, 0.0, cfg));
    }
    return r * r * best;
}

// --- distance profile -------------------------------------------------------

DistanceProfile::DistanceProfile(const LevyMeasure& nu, ProfileVariant variant,
                                 const TruncationConfig& cfg)
    : nu_(std::make_shared<LevyMeasure>(nu)), variant_(variant), cfg_(cfg) {
    auto opts = quad_opts(cfg_);
    opts.rel_tol = 1e-11;
    double hi = 1.0;
    double acc_sg = 0.0;
    std::vector<Panel> rev;
    bool settled = false;
    try {
        for (int k = 0; k < 64; ++k) {
            double lo = 0.5 * hi;
            auto g = [&](double s) { return 1.0 / rate(s); };
            auto sg = [&](double s) { return s / rate(s); };
            Panel p;
            p.lo = lo;
            p.hi = hi;
            p.int_g = quad::integrate(g, quad::make_edges(lo, hi), opts).value;
            p.int_sg = quad::integrate(sg, quad::make_edges(lo, hi), opts).value;
            rev.push_back(p);
            acc_sg += p.int_sg;
            if (k >= 26 && std::abs(p.int_sg) <= 1e-13 * acc_sg) {
                settled = true;
                break;
            }
            hi = lo;
        }
    } catch (const QuadratureFailure& e) {
        throw IntegrabilityViolation(std::string("profile integrand is not integrable: ") + e.what());
    }
    if (!settled)
        throw IntegrabilityViolation("profile integral does not converge near 0");
    panels_.assign(rev.rbegin(), rev.rend());
    full_sg_ = acc_sg;
}

double DistanceProfile::rate(double s) const {
    const std::uint64_t key = std::bit_cast<std::uint64_t>(s);
    if (auto it = rate_memo_.find(key); it != rate_memo_.end()) return it->second;
    double v = 0.0;
    switch (variant_) {
        case ProfileVariant::SymmetricReflection:
            v = jump_second_moment(*nu_, 0.25 * s, cfg_);
            break;
        case ProfileVariant::GeneralOverlap:
            v = min_overlap_rate(*nu_, 0.5 * s, cfg_);
            break;
    }
    rate_memo_.emplace(key, v);
    return v;
}

double DistanceProfile::partial_g(double a, double b) const {
    if (b <= a) return 0.0;
    auto opts = quad_opts(cfg_);
    return quad::integrate([&](double s) { return 1.0 / rate(s); }, quad::make_edges(a, b), opts).value;
}

double DistanceProfile::partial_sg(double a, double b) const {
    if (b <= a) return 0.0;
    auto opts = quad_opts(cfg_);
    return quad::integrate([&](double s) { return s / rate(s); }, quad::make_edges(a, b), opts).value;
}

double DistanceProfile::value(double r) const {
    if (!(r >= 0.0)) throw Error("profile argument must be nonnegative");
    if (r == 0.0) return 0.0;
    if (r >= 1.0) return full_sg_;
    double sg_below = 0.0, g_above = 0.0;
    for (const auto& p : panels_) {
        if (p.hi <= r) {
            sg_below += p.int_sg;
        } else if (p.lo >= r) {
            g_above += p.int_g;
        } else {
            sg_below += partial_sg(p.lo, r);
            g_above += partial_g(r, p.hi);
        }
    }
    return sg_below + r * g_above;
}

double DistanceProfile::deriv(double r) const {
    if (!(r > 0.0)) throw Error("profile derivative needs r > 0");
    if (r >= 1.0) return 0.0;
    double g_above = 0.0;
    for (const auto& p : panels_) {
        if (p.lo >= r)
            g_above += p.int_g;
        else if (p.hi > r)
            g_above += partial_g(r, p.hi);
    }
    return g_above;
}

double DistanceProfile::second_deriv(double r) const {
    if (!(r > 0.0)) throw Error("profile second derivative needs r > 0");
    if (r >= 1.0) return 0.0;
    return -1.0 / rate(r);
}

double distance_profile(const LevyMeasure& nu, double r, ProfileVariant variant,
                        const TruncationConfig& cfg) {
    return DistanceProfile(nu, variant, cfg).value(r);
}

// --- sampling ---------------------------------------------------------------

JumpSampler::JumpSampler(const LevyMeasure& nu, double eps, const TruncationConfig& cfg)
    : nu_(&nu), eps_(eps), dim_(nu.dim()), kind_(nu.kind()) {
    if (!(eps > 0.0) && nu.has_density()) throw Error("density sampling needs eps > 0");
    switch (kind_) {
        case Kind::DiscreteAtoms: {
            double acc = 0.0;
            for (const auto& a : nu.atoms()) {
                if (a.location.norm() >= eps) {
                    acc += a.mass;
                    kept_.push_back(&a);
                    cum_.push_back(acc);
                }
            }
            if (kept_.empty()) throw EmptyTail("no atoms at or beyond the truncation radius");
            rate_ = acc;
            return;
        }
        case Kind::StableClosedForm:
            alpha_ = nu.stable_alpha();
            rate_ = tail_mass(nu, eps, cfg);
            return;
        case Kind::RadialDensity: {
            double R = nu.range_bound();
            if (eps >= R) throw EmptyTail("truncation radius at or beyond the measure's range");
            double r_eff = R;
            auto opts = quad_opts(cfg);
            auto mass = [&](double a, double b) {
                auto f = [&](double s) { return nu.radial_density(s) * std::pow(s, dim_ - 1); };
                return quad::integrate(f, quad::make_edges(a, b), opts).value;
            };
            if (!std::isfinite(R)) {
                // grow the table range until the remaining tail is negligible
                double a = std::max(eps, 1.0), acc = mass(eps, a);
                double width = a;
                int quiet = 0;
                for (int k = 0; k < 200 && quiet < 3; ++k) {
                    double v = mass(a, a + width);
                    acc += v;
                    quiet = (v <= 1e-12 * acc) ? quiet + 1 : 0;
                    a += width;
                    width *= 2.0;
                }
                if (quiet < 3) throw QuadratureFailure("radial sampling table did not converge");
                r_eff = a;
            }
            const int n = 1024;
            radii_.resize(n + 1);
            cdf_.resize(n + 1);
            double lr = std::log(eps), ur = std::log(r_eff);
            for (int i = 0; i <= n; ++i) radii_[i] = std::exp(lr + (ur - lr) * i / n);
            cdf_[0] = 0.0;
            for (int i = 1; i <= n; ++i) cdf_[i] = cdf_[i - 1] + mass(radii_[i - 1], radii_[i]);
            if (!(cdf_.back() > 0.0)) throw EmptyTail("no mass beyond the truncation radius");
            rate_ = surface_area(dim_) * cdf_.back();
            return;
        }
    }
    throw Error("unreachable");
}

Vec JumpSampler::sample(RngStream& rng) const {
    switch (kind_) {
        case Kind::DiscreteAtoms: {
            double u = rng.uniform() * rate_;
            auto it = std::upper_bound(cum_.begin(), cum_.end(), u);
            std::size_t i = std::min<std::size_t>(it - cum_.begin(), kept_.size() - 1);
            return kept_[i]->location;
        }
        case Kind::StableClosedForm: {
            double radius = eps_ * std::pow(rng.uniform_pos(), -1.0 / alpha_);
            return radius * rng.unit_sphere(dim_);
        }
        case Kind::RadialDensity: {
            double u = rng.uniform() * cdf_.back();
            auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
            std::size_t i = std::min<std::size_t>(std::max<std::ptrdiff_t>(it - cdf_.begin(), 1),
                                                  cdf_.size() - 1);
            double c0 = cdf_[i - 1], c1 = cdf_[i];
            double t = c1 > c0 ? (u - c0) / (c1 - c0) : 0.5;
            double radius = radii_[i - 1] + t * (radii_[i] - radii_[i - 1]);
            return radius * rng.unit_sphere(dim_);
        }
    }
    throw Error("unreachable");
}

Vec sample_jump(const LevyMeasure& nu, double eps, RngStream& rng, const TruncationConfig& cfg) {
    return JumpSampler(nu, eps, cfg).sample(rng);
}

Vec compensator_drift(const LevyMeasure& nu, double eps) {
    if (nu.is_symmetric()) return Vec::Zero(nu.dim());
    // Only atom lists can be asymmetric in this representation.
    Vec c = Vec::Zero(nu.dim());
    for (const auto& a : nu.atoms()) {
        double n = a.location.norm();
        if (n >= eps && n < 1.0) c -= a.mass * a.location;
    }
    return c;
}

} // namespace levycouple::measures
