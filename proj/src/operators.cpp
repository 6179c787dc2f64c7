#include "levycouple/operators.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/SVD>

#include "levycouple/quadrature.hpp"
#include "levycouple/rng.hpp"

namespace levycouple::operators {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kAtomTol = 1e-9;
constexpr double kDefectTol = 1e-12;

using measures::Kind;

quad::Options gen_opts() {
    quad::Options o;
    o.abs_tol = 1e-11;
    o.rel_tol = 1e-9;
    o.max_panels = 4000;
    return o;
}

double measure_mass_at(const LevyMeasure& nu, const Vec& z) {
    if (nu.kind() == Kind::DiscreteAtoms) return nu.atom_mass_near(z);
    return nu.density(z);
}

Mat inverse_checked(const Mat& m) {
    Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    double smax = sv.maxCoeff();
    if (!(smax > 0.0) || sv.minCoeff() < 1e-10 * smax)
        throw SingularSigma("noise coefficient matrix is numerically singular");
    return svd.solve(Mat::Identity(m.rows(), m.cols()));
}

Vec jump_disp(const SigmaFn& sigma, const Vec& state, const Vec& z) {
    if (!sigma) return z;
    return sigma(state) * z;
}

// Accumulates signed masses on points, merging locations within an L-inf
// tolerance.
class AtomAccumulator {
  public:
    void add(const Vec& p, double mass) {
        for (std::size_t i = 0; i < locs_.size(); ++i) {
            if ((locs_[i] - p).lpNorm<Eigen::Infinity>() <= kAtomTol) {
                masses_[i] += mass;
                return;
            }
        }
        locs_.push_back(p);
        masses_.push_back(mass);
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : masses_) m = std::max(m, std::abs(v));
        return m;
    }

    std::size_t size() const { return locs_.size(); }
    const Vec& location(std::size_t i) const { return locs_[i]; }
    double mass(std::size_t i) const { return masses_[i]; }

  private:
    std::vector<Vec> locs_;
    std::vector<double> masses_;
};

// Integral of h over (lo, hi]; hi may be infinite, in which case tail_bound(b)
// must dominate the remainder beyond b. Panels refine geometrically toward lo,
// where the density factor concentrates.
double halfline_integral(const std::function<double(double)>& h, double lo, double hi,
                         std::vector<double> breaks,
                         const std::function<double(double)>& tail_bound,
                         const quad::Options& opts) {
    if (!(hi > lo)) return 0.0;
    std::vector<double> brk;
    for (double b : breaks)
        if (b > lo && b < hi && std::isfinite(b)) brk.push_back(b);
    std::sort(brk.begin(), brk.end());
    brk.erase(std::unique(brk.begin(), brk.end()), brk.end());

    if (std::isfinite(hi))
        return quad::integrate(h, quad::make_edges(lo, hi, brk, 24), opts).value;
    double mid = std::max({2.0, 2.0 * lo, brk.empty() ? 0.0 : 2.0 * brk.back()});
    double total = quad::integrate(h, quad::make_edges(lo, mid, brk, 24), opts).value;
    total += quad::integrate_to_infinity(h, mid, tail_bound, opts).value;
    return total;
}

double drift_term(const DriftFn& b, const TestFunction& f, const Vec& x, const Vec& y, double r) {
    if (!b) return 0.0;
    return f.deriv(r) * (b(x) - b(y)).dot(x - y) / r;
}

// Symmetrized reflection integral over one radial half-line:
//   int_0^upper [f(r + 2z) + f(|r - 2z|) - 2 f(r)] q(z) dz
// (compensators cancel pairwise under the symmetrization). Below z* the
// bracket is second-difference-dominated, f''(r) (2z)^2 + O(z^4); evaluated
// directly it drowns in rounding noise that the density weight then amplifies,
// so that part enters analytically through the restricted second moment.
double reflection_integral_1d(const LevyMeasure& nu, const TestFunction& f, double r,
                              double upper, const TruncationConfig& cfg) {
    double hi = std::min(upper, nu.range_bound());
    if (!(hi > 0.0)) return 0.0;
    double zs = std::min(0.25 * r, std::max(2.5e-4, 1e-3 * r));
    double total = 2.0 * f.second_deriv(r) *
                   measures::jump_second_moment(nu, std::min(zs, hi), cfg);
    if (hi <= zs) return total;
    auto h = [&](double z) {
        double g = f(r + 2.0 * z) + f(std::abs(r - 2.0 * z)) - 2.0 * f(r);
        return g * nu.density(Vec::Constant(1, z));
    };
    std::function<double(double)> tail;
    if (!std::isfinite(hi)) {
        if (!f.bounded())
            throw CompensationDivergence("unbounded test function with an untruncated reflection row");
        double cap = 2.0 * std::max(f.sup() - f(r), f(r));
        tail = [&nu, &cfg, cap](double b) { return cap * 0.5 * measures::tail_mass(nu, b, cfg); };
    }
    return total + halfline_integral(h, zs, hi, {0.5 * r, r}, tail, gen_opts());
}

// int_R f(|r + 2<e,z>|) [q0(|z|) ^ q0(|z + r e|)] dz for d = 1 with the radial
// truncation q0 = q 1_{|.| <= cut}; the coalescing-row contribution in the
// combined coupling.
double coalesce_integral_1d(const LevyMeasure& nu, const TestFunction& f, double r, double cut,
                            const TruncationConfig& cfg) {
    double m = std::min(cut, nu.range_bound());
    if (!(m > 0.0)) return 0.0;
    auto q0 = [&](double s) {
        return (s > 0.0 && s <= m) ? nu.density(Vec::Constant(1, s)) : 0.0;
    };
    std::function<double(double)> tail;
    if (!std::isfinite(m)) {
        if (!f.bounded())
            throw CompensationDivergence("unbounded test function with an infinite overlap row");
        double cap = f.sup();
        tail = [&nu, &cfg, cap](double b) { return cap * 0.5 * measures::tail_mass(nu, b, cfg); };
    }
    auto right = [&](double z) { return f(r + 2.0 * z) * std::min(q0(z), q0(z + r)); };
    auto left = [&](double t) { return f(std::abs(r - 2.0 * t)) * std::min(q0(t), q0(std::abs(r - t))); };
    double hi_right = std::isfinite(m) ? std::max(0.0, m - r) : kInf;
    double total = halfline_integral(right, 0.0, hi_right, {r}, tail, gen_opts());
    total += halfline_integral(left, 0.0, m, {0.5 * r, r, r - m}, tail, gen_opts());
    return total;
}

// Mass of (q0 dz) ^ (delta_w * q0 dz) for the radially truncated density
// q0 = q 1_{|.| <= cut}, d = 1.
double overlap_mass_cut_1d(const LevyMeasure& nu, double s, double cut,
                           const TruncationConfig& cfg) {
    double m = std::min(cut, nu.range_bound());
    if (!(m > 0.0) || s > 2.0 * m) return 0.0;
    if (!std::isfinite(m)) return measures::overlap_mass(nu, Vec::Constant(1, s), 0.0, cfg);
    auto q0 = [&](double a) {
        return (a > 0.0 && a <= m) ? nu.density(Vec::Constant(1, a)) : 0.0;
    };
    auto h = [&](double z) { return std::min(q0(std::abs(z)), q0(std::abs(z - s))); };
    auto res = quad::integrate(h, quad::make_edges(s - m, m, {0.0, 0.5 * s, s}), gen_opts());
    return res.value;
}

GeneratorValue eval_kernel_sum(const JumpSystem& js, const TestFunction& f, const DriftFn& b,
                               const Vec& x, const Vec& y) {
    const Vec w = x - y;
    const double r = w.norm();
    const Vec e = w / r;
    const double fp = f.deriv(r);
    auto kernel = build_kernel(js, x, y);
    double total = drift_term(b, f, x, y, r);
    for (const auto& row : kernel.rows) {
        double rd = (row.u - row.v).norm();
        Vec du = row.u - x;
        Vec dv = row.v - y;
        double comp = 0.0;
        if (du.norm() < 1.0) comp -= fp * e.dot(du);
        if (dv.norm() < 1.0) comp += fp * e.dot(dv);
        total += row.mass * (f(rd) - f(r) + comp);
    }
    return {total, 0.0, false};
}

GeneratorValue eval_monte_carlo(const JumpSystem& js, const TestFunction& f, const DriftFn& b,
                                const Vec& x, const Vec& y, const TruncationConfig& cfg) {
    const LevyMeasure& nu = js.base;
    const int d = nu.dim();
    const Vec w = x - y;
    const double r = w.norm();
    const Vec e = w / r;
    const double reach = js.kind == SchemeKind::Reflection ? js.eta * r : js.q0.cut_at(r);
    if (!std::isfinite(reach) && !f.bounded())
        throw CompensationDivergence("unbounded test function with an untruncated reflection row");

    measures::JumpSampler sampler(nu, cfg.epsilon, cfg);
    const double lam = sampler.rate();
    RngStream rng(cfg.mc_seed ^ 0x6a09e667f3bcc908ULL);
    const int n = std::max(1000, cfg.mc_points);
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        Vec z = sampler.sample(rng);
        double zn = z.norm();
        double t = e.dot(z);
        double val = 0.0;
        if (zn <= reach)
            val = 0.5 * (f(std::abs(r + 2.0 * t)) + f(std::abs(r - 2.0 * t)) - 2.0 * f(r));
        if (js.kind == SchemeKind::ReflectionBasic) {
            double m = std::min(reach, nu.range_bound());
            auto q0 = [&](double s) { return (s > 0.0 && s <= m) ? nu.density(s * e) : 0.0; };
            double ov = std::min(q0(zn), q0((z + r * e).norm()));
            if (ov > 0.0) val -= f(std::abs(r + 2.0 * t)) * ov / nu.density(z);
        }
        sum += val;
        sum2 += val * val;
    }
    double mean = sum / n;
    double var = std::max(0.0, sum2 / n - mean * mean);

    double small = std::min(cfg.epsilon, reach);
    double total = drift_term(b, f, x, y, r) + lam * mean +
                   (2.0 / d) * f.second_deriv(r) * measures::jump_second_moment(nu, small, cfg);
    if (js.kind == SchemeKind::ReflectionBasic) {
        double m = std::min(reach, nu.range_bound());
        if (r <= m) {
            double ball = measures::sphere_surface_area(d) / d * std::pow(cfg.epsilon, d);
            total -= f(r) * nu.density(r * e) * ball;
        }
    }
    return {total, lam * std::sqrt(var / n), true};
}

void validate_pair(const JumpSystem& js, const Vec& x, const Vec& y) {
    if (x.size() != js.base.dim() || y.size() != js.base.dim())
        throw Error("pair dimension does not match the measure");
}

double hypothesis_grid_check(const TestFunction& f, double hi) {
    if (!f.twice_differentiable())
        throw HypothesisViolation("test function is not twice differentiable");
    if (std::abs(f(0.0)) > 1e-12) throw HypothesisViolation("test function must vanish at 0");
    double prev = -kInf;
    for (int k = 0; k < 40; ++k) {
        double r = hi * std::pow(10.0, -3.0 * (39 - k) / 39.0);
        if (f.deriv(r) < -1e-12) throw HypothesisViolation("test function must be non-decreasing");
        double s = f.second_deriv(r);
        if (s > 1e-12) throw HypothesisViolation("test function must be concave");
        if (s < prev - 1e-10) throw HypothesisViolation("second derivative must be increasing");
        prev = s;
    }
    return hi;
}

} // namespace

double component_rate(const JumpComponent& c, const Vec& x, const Vec& y, const Vec& z) {
    double m = c.sub_mass_at(x, y, z);
    if (c.rate_form == RateForm::Direct || m == 0.0) return m;
    return std::min(m, c.sub_mass_at(x, y, c.psi(x, y, z)));
}

JumpSystem make_synchronous_system(const LevyMeasure& nu) {
    JumpSystem js{nu, SchemeKind::Synchronous, {}, {}};
    return js;
}

JumpSystem make_reflection_system(const LevyMeasure& nu, double eta) {
    if (!(eta > 0.0)) throw Error("reflection threshold must be positive");
    JumpSystem js{nu, SchemeKind::Reflection, {}, {}};
    js.eta = eta;
    auto base = std::make_shared<const LevyMeasure>(nu);
    JumpComponent c;
    c.name = "reflect";
    c.rate_form = RateForm::Direct;
    c.sub_mass_at = [base, eta](const Vec& x, const Vec& y, const Vec& z) {
        return z.norm() <= eta * (x - y).norm() ? measure_mass_at(*base, z) : 0.0;
    };
    c.psi = [](const Vec& x, const Vec& y, const Vec& z) { return geometry::reflect(x, y, z); };
    c.psi_inv = c.psi;
    js.components.push_back(std::move(c));
    return js;
}

JumpSystem make_refined_basic_system(const LevyMeasure& nu, double kappa, const Q0Spec& sub) {
    if (!(kappa > 0.0)) throw Error("contraction threshold must be positive");
    JumpSystem js{nu, SchemeKind::RefinedBasic, {}, {}};
    js.kappa = kappa;
    js.sub = sub;
    auto base = std::make_shared<const LevyMeasure>(nu);
    auto half_mass = [base, sub](const Vec& x, const Vec& y, const Vec& z) {
        return z.norm() <= sub.cut_at((x - y).norm()) ? 0.5 * measure_mass_at(*base, z) : 0.0;
    };
    JumpComponent contract;
    contract.name = "contract";
    contract.sub_mass_at = half_mass;
    contract.psi = [kappa](const Vec& x, const Vec& y, const Vec& z) {
        return Vec(z + geometry::clamp_norm(x - y, kappa));
    };
    contract.psi_inv = [kappa](const Vec& x, const Vec& y, const Vec& z) {
        return Vec(z - geometry::clamp_norm(x - y, kappa));
    };
    JumpComponent expand;
    expand.name = "expand";
    expand.sub_mass_at = half_mass;
    expand.psi = contract.psi_inv;
    expand.psi_inv = contract.psi;
    js.components.push_back(std::move(contract));
    js.components.push_back(std::move(expand));
    return js;
}

JumpSystem make_reflection_basic_system(const LevyMeasure& nu, const Q0Spec& q0) {
    if (!nu.is_symmetric()) throw NonSymmetricMeasure("combined coupling needs a symmetric measure");
    if (!(q0.cut > 0.0)) throw Error("density truncation radius must be positive");
    JumpSystem js{nu, SchemeKind::ReflectionBasic, {}, {}};
    js.q0 = q0;
    auto base = std::make_shared<const LevyMeasure>(nu);
    auto q0_mass = [base, q0](double r, const Vec& z) {
        return z.norm() <= q0.cut_at(r) ? measure_mass_at(*base, z) : 0.0;
    };
    auto coalesce_rate = [q0_mass](const Vec& x, const Vec& y, const Vec& z) {
        double r = (x - y).norm();
        return std::min(q0_mass(r, z), q0_mass(r, Vec(z + (x - y))));
    };
    JumpComponent coalesce;
    coalesce.name = "coalesce";
    coalesce.rate_form = RateForm::Direct;
    coalesce.sub_mass_at = coalesce_rate;
    coalesce.psi = [](const Vec& x, const Vec& y, const Vec& z) { return Vec(z + (x - y)); };
    coalesce.psi_inv = [](const Vec& x, const Vec& y, const Vec& z) { return Vec(z - (x - y)); };
    JumpComponent reflectc;
    reflectc.name = "reflect";
    reflectc.rate_form = RateForm::Direct;
    reflectc.sub_mass_at = [q0_mass, coalesce_rate](const Vec& x, const Vec& y, const Vec& z) {
        return q0_mass((x - y).norm(), z) - coalesce_rate(x, y, z);
    };
    reflectc.psi = [](const Vec& x, const Vec& y, const Vec& z) { return geometry::reflect(x, y, z); };
    reflectc.psi_inv = reflectc.psi;
    js.components.push_back(std::move(coalesce));
    js.components.push_back(std::move(reflectc));
    return js;
}

JumpSystem build_multiplicative_system(const JumpSystem& js, SigmaFn sigma) {
    if (!sigma) throw Error("noise coefficient function is required");
    JumpSystem out = js;
    out.sigma = sigma;
    if (js.kind == SchemeKind::Reflection) {
        double eta = js.eta;
        auto base = std::make_shared<const LevyMeasure>(js.base);
        auto half_mass = [base, eta](const Vec& x, const Vec& y, const Vec& z) {
            return z.norm() <= eta * (x - y).norm() ? 0.5 * measure_mass_at(*base, z) : 0.0;
        };
        auto fwd = [sigma](const Vec& x, const Vec& y, const Vec& z) {
            return Vec(inverse_checked(sigma(y)) * (sigma(x) * geometry::reflect(x, y, z)));
        };
        auto bwd = [sigma](const Vec& x, const Vec& y, const Vec& z) {
            return geometry::reflect(x, y, Vec(inverse_checked(sigma(x)) * (sigma(y) * z)));
        };
        JumpComponent c1{"reflect", RateForm::MuMin, half_mass, fwd, bwd};
        JumpComponent c2{"reflect-back", RateForm::MuMin, half_mass, bwd, fwd};
        out.components = {std::move(c1), std::move(c2)};
    } else if (js.kind == SchemeKind::RefinedBasic) {
        double kappa = js.kappa;
        Q0Spec sub = js.sub;
        auto base = std::make_shared<const LevyMeasure>(js.base);
        auto half_mass = [base, sub](const Vec& x, const Vec& y, const Vec& z) {
            return z.norm() <= sub.cut_at((x - y).norm()) ? 0.5 * measure_mass_at(*base, z) : 0.0;
        };
        auto fwd = [sigma, kappa](const Vec& x, const Vec& y, const Vec& z) {
            return Vec(inverse_checked(sigma(y)) * (sigma(x) * z + geometry::clamp_norm(x - y, kappa)));
        };
        auto bwd = [sigma, kappa](const Vec& x, const Vec& y, const Vec& z) {
            return Vec(inverse_checked(sigma(x)) * (sigma(y) * z - geometry::clamp_norm(x - y, kappa)));
        };
        JumpComponent c1{"contract", RateForm::MuMin, half_mass, fwd, bwd};
        JumpComponent c2{"expand", RateForm::MuMin, half_mass, bwd, fwd};
        out.components = {std::move(c1), std::move(c2)};
    }
    return out;
}

CouplingKernel build_kernel(const JumpSystem& js, const Vec& x, const Vec& y) {
    validate_pair(js, x, y);
    if (js.base.kind() != Kind::DiscreteAtoms)
        throw NonAtomicBase("kernel enumeration needs a discrete base measure");

    struct RawRow {
        Vec uv;
        double mass;
        std::set<std::string> labels;
    };
    std::vector<RawRow> raw;
    const int d = js.base.dim();
    auto add_row = [&](const Vec& u, const Vec& v, double mass, const std::string& label) {
        if (mass <= 0.0) return;
        Vec uv(2 * d);
        uv << u, v;
        for (auto& row : raw) {
            if ((row.uv - uv).lpNorm<Eigen::Infinity>() <= kAtomTol) {
                row.mass += mass;
                row.labels.insert(label);
                return;
            }
        }
        raw.push_back({uv, mass, {label}});
    };

    for (const auto& a : js.base.atoms()) {
        const Vec& z = a.location;
        double sub_sum = 0.0, rate_sum = 0.0;
        Vec u = x + jump_disp(js.sigma, x, z);
        for (const auto& c : js.components) {
            sub_sum += c.sub_mass_at(x, y, z);
            double rate = component_rate(c, x, y, z);
            rate_sum += rate;
            if (rate > 0.0) add_row(u, Vec(y + jump_disp(js.sigma, y, c.psi(x, y, z))), rate, c.name);
        }
        if (sub_sum > a.mass + kDefectTol)
            throw SubMeasureViolation("component sub-measures exceed the base measure");
        double rem = a.mass - rate_sum;
        if (rem < -kDefectTol)
            throw SubMeasureViolation("component rates exceed the base mass");
        add_row(u, Vec(y + jump_disp(js.sigma, y, z)), std::max(rem, 0.0), "synchronous");
    }

    CouplingKernel kernel;
    kernel.x = x;
    kernel.y = y;
    kernel.sigma = js.sigma;
    for (const auto& row : raw) {
        std::string label;
        for (const auto& l : row.labels) label += (label.empty() ? "" : "+") + l;
        kernel.rows.push_back({row.uv.head(d), row.uv.tail(d), row.mass, label});
    }
    return kernel;
}

MarginalityReport verify_marginality(const CouplingKernel& kernel, const LevyMeasure& nu) {
    AtomAccumulator first, second;
    for (const auto& a : nu.atoms()) {
        first.add(Vec(kernel.x + jump_disp(kernel.sigma, kernel.x, a.location)), a.mass);
        second.add(Vec(kernel.y + jump_disp(kernel.sigma, kernel.y, a.location)), a.mass);
    }
    for (const auto& row : kernel.rows) {
        first.add(row.u, -row.mass);
        second.add(row.v, -row.mass);
    }
    double defect = std::max(first.max_abs(), second.max_abs());
    return {defect <= kDefectTol, defect};
}

SymmetryReport verify_symmetry_condition(const JumpSystem& js, const Vec& x, const Vec& y) {
    validate_pair(js, x, y);
    if (js.base.kind() != Kind::DiscreteAtoms)
        throw NonAtomicBase("rate balance is checked exactly on discrete measures");
    AtomAccumulator acc;
    for (const auto& a : js.base.atoms()) {
        for (const auto& c : js.components) {
            double rate = component_rate(c, x, y, a.location);
            if (rate == 0.0) continue;
            acc.add(a.location, rate);
            acc.add(c.psi(x, y, a.location), -rate);
        }
    }
    double defect = acc.max_abs();
    return {defect <= kDefectTol, defect};
}

TestFunction TestFunction::identity() { return TestFunction(Kind::Identity, 0.0); }

TestFunction TestFunction::capped(double cap) {
    if (!(cap > 0.0)) throw Error("cap must be positive");
    return TestFunction(Kind::Capped, cap);
}

TestFunction TestFunction::exponential(double a) {
    if (!(a > 0.0)) throw Error("decay rate must be positive");
    return TestFunction(Kind::Exponential, a);
}

TestFunction TestFunction::phi_profile(measures::DistanceProfile profile) {
    TestFunction f(Kind::PhiProfile, 0.0);
    f.profile_ = std::make_shared<const measures::DistanceProfile>(std::move(profile));
    return f;
}

double TestFunction::operator()(double r) const {
    switch (kind_) {
        case Kind::Identity: return r;
        case Kind::Capped: return std::min(r, param_);
        case Kind::Exponential: return 1.0 - std::exp(-param_ * r);
        case Kind::PhiProfile: return profile_->value(r);
    }
    throw Error("unreachable");
}

double TestFunction::deriv(double r) const {
    switch (kind_) {
        case Kind::Identity: return 1.0;
        case Kind::Capped: return r < param_ ? 1.0 : 0.0;
        case Kind::Exponential: return param_ * std::exp(-param_ * r);
        case Kind::PhiProfile: return r >= 1.0 ? 0.0 : profile_->deriv(r);
    }
    throw Error("unreachable");
}

double TestFunction::second_deriv(double r) const {
    switch (kind_) {
        case Kind::Identity: return 0.0;
        case Kind::Capped: return 0.0;
        case Kind::Exponential: return -param_ * param_ * std::exp(-param_ * r);
        case Kind::PhiProfile: return profile_->second_deriv(r);
    }
    throw Error("unreachable");
}

bool TestFunction::bounded() const { return kind_ != Kind::Identity; }

double TestFunction::sup() const {
    switch (kind_) {
        case Kind::Identity: return kInf;
        case Kind::Capped: return param_;
        case Kind::Exponential: return 1.0;
        case Kind::PhiProfile: return profile_->value(1.0);
    }
    throw Error("unreachable");
}

GeneratorValue eval_generator(const JumpSystem& js, const TestFunction& f, const DriftFn& b,
                              const Vec& x, const Vec& y, const TruncationConfig& cfg) {
    validate_pair(js, x, y);
    const Vec w = x - y;
    const double r = w.norm();
    if (r < geometry::kDegeneratePairTol) return {0.0, 0.0, false};

    if (js.base.kind() == Kind::DiscreteAtoms) return eval_kernel_sum(js, f, b, x, y);
    if (js.sigma) throw Error("generator quadrature supports additive systems only");

    switch (js.kind) {
        case SchemeKind::Synchronous:
            return {drift_term(b, f, x, y, r), 0.0, false};
        case SchemeKind::RefinedBasic: {
            Vec wk = geometry::clamp_norm(w, js.kappa);
            double cut = js.sub.cut_at(r);
            measures::MonteCarloEstimate ov;
            if (std::isfinite(cut)) {
                if (js.base.dim() > 1)
                    throw Error("truncated overlap quadrature supports one dimension only");
                ov.value = overlap_mass_cut_1d(js.base, wk.norm(), cut, cfg);
            } else {
                ov = measures::overlap_mass_detail(js.base, wk, 0.0, cfg);
            }
            double dk = std::min(r, js.kappa);
            double bracket = f(r - dk) + f(r + dk) - 2.0 * f(r);
            return {drift_term(b, f, x, y, r) + 0.5 * ov.value * bracket,
                    0.5 * std::abs(bracket) * ov.std_error, ov.std_error > 0.0};
        }
        case SchemeKind::Reflection: {
            if (!js.base.is_symmetric())
                throw NonSymmetricMeasure("reflection coupling needs a symmetric measure");
            if (js.base.dim() > 1) return eval_monte_carlo(js, f, b, x, y, cfg);
            double jump = reflection_integral_1d(js.base, f, r, js.eta * r, cfg);
            return {drift_term(b, f, x, y, r) + jump, 0.0, false};
        }
        case SchemeKind::ReflectionBasic: {
            if (js.base.dim() > 1) return eval_monte_carlo(js, f, b, x, y, cfg);
            double cut = js.q0.cut_at(r);
            double jump = reflection_integral_1d(js.base, f, r, cut, cfg) -
                          coalesce_integral_1d(js.base, f, r, cut, cfg);
            return {drift_term(b, f, x, y, r) + jump, 0.0, false};
        }
        case SchemeKind::Custom:
            break;
    }
    throw Error("no quadrature rule for this jump system");
}

double marginal_generator(const LevyMeasure& nu, const VectorTestFunction& f, const DriftFn& b,
                          const Vec& x) {
    if (nu.kind() != Kind::DiscreteAtoms)
        throw NonAtomicBase("marginal generator is assembled exactly on discrete measures");
    double total = b ? f.grad(x).dot(b(x)) : 0.0;
    Vec g = f.grad(x);
    for (const auto& a : nu.atoms()) {
        double comp = a.location.norm() < 1.0 ? g.dot(a.location) : 0.0;
        total += a.mass * (f.value(x + a.location) - f.value(x) - comp);
    }
    return total;
}

double eval_generator_tensor(const JumpSystem& js, const VectorTestFunction& f, const DriftFn& b,
                             const Vec& x, const Vec& y, bool first_coordinate) {
    auto kernel = build_kernel(js, x, y);
    const Vec& base_pt = first_coordinate ? x : y;
    double total = b ? f.grad(base_pt).dot(b(base_pt)) : 0.0;
    Vec g = f.grad(base_pt);
    for (const auto& row : kernel.rows) {
        const Vec& target = first_coordinate ? row.u : row.v;
        Vec dd = target - base_pt;
        double comp = dd.norm() < 1.0 ? g.dot(dd) : 0.0;
        total += row.mass * (f.value(target) - f.value(base_pt) - comp);
    }
    return total;
}

LemmaBoundReport check_lemma_bound(LemmaBound which, const LevyMeasure& nu, const DriftFn& b,
                                   const TestFunction& f, const Vec& x, const Vec& y,
                                   const TruncationConfig& cfg, double tol) {
    const Vec w = x - y;
    const double r = w.norm();
    if (!(r > 0.0)) throw HypothesisViolation("pair must be distinct");
    double dr = b ? f.deriv(r) * (b(x) - b(y)).dot(w) / r : 0.0;

    LemmaBoundReport rep;
    if (which == LemmaBound::L1Reflection) {
        if (!nu.is_symmetric())
            throw HypothesisViolation("reflection bound needs a symmetric measure");
        if (r > 1.0) throw HypothesisViolation("pair distance must lie in (0, 1]");
        if (nu.kind() == Kind::DiscreteAtoms && nu.dim() > 1) {
            // The 2/d constant needs the restricted second-moment matrix to be
            // a multiple of the identity (rotational symmetry at this scale).
            const int d = nu.dim();
            Mat sm = Mat::Zero(d, d);
            for (const auto& a : nu.atoms())
                if (a.location.norm() <= 0.5 * r) sm += a.mass * a.location * a.location.transpose();
            Mat dev = sm - (sm.trace() / d) * Mat::Identity(d, d);
            if (dev.lpNorm<Eigen::Infinity>() > 1e-9 * std::max(1.0, sm.trace()))
                throw HypothesisViolation("measure is not isotropic at the tested scale");
        }
        hypothesis_grid_check(f, 2.0);
        rep.lhs = eval_generator(make_reflection_system(nu, 0.5), f, b, x, y, cfg).value;
        rep.rhs = dr + (2.0 / nu.dim()) * f.second_deriv(2.0 * r) *
                           measures::jump_second_moment(nu, 0.5 * r, cfg);
    } else {
        hypothesis_grid_check(f, 2.0 * r);
        rep.lhs = eval_generator(make_refined_basic_system(nu, r), f, b, x, y, cfg).value;
        rep.rhs = dr + 0.5 * measures::overlap_mass(nu, w, 0.0, cfg) * r * r *
                           f.second_deriv(2.0 * r);
    }
    rep.ok = rep.lhs <= rep.rhs + tol;
    return rep;
}

std::vector<ComparisonRow> compare_operators(ComparisonCase cs, const LevyMeasure& nu,
                                             const TestFunction& f,
                                             const std::vector<std::pair<Vec, Vec>>& pairs,
                                             double kappa, const TruncationConfig& cfg) {
    if (!nu.has_density())
        throw HypothesisViolation("operator comparison needs a radial density");
    const bool infinite = cs == ComparisonCase::InfiniteRange;
    if (!infinite && !std::isfinite(nu.range_bound()))
        throw HypothesisViolation("finite-range comparison needs a finite-range measure");
    Q0Spec half;
    half.half_distance = true;
    JumpSystem refl = make_reflection_system(nu, infinite ? kInf : 0.5);
    JumpSystem comb = make_reflection_basic_system(nu, infinite ? Q0Spec{} : half);
    JumpSystem basic = infinite ? make_refined_basic_system(nu, kappa)
                                : make_refined_basic_system(nu, kappa, half);
    std::vector<ComparisonRow> table;
    table.reserve(pairs.size());
    for (const auto& [x, y] : pairs) {
        ComparisonRow row;
        row.x = x;
        row.y = y;
        row.reflection = eval_generator(refl, f, {}, x, y, cfg).value;
        row.combined = eval_generator(comb, f, {}, x, y, cfg).value;
        row.basic = eval_generator(basic, f, {}, x, y, cfg).value;
        table.push_back(std::move(row));
    }
    return table;
}

} // namespace levycouple::operators
