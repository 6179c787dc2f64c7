#include "levycouple/estimators.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <string>

#include "levycouple/parallel.hpp"

namespace levycouple::estimators {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vec v1d(double a) {
    Vec v(1);
    v[0] = a;
    return v;
}

// Canonical text form of the inputs, hashed into config_hash.
struct HashText {
    std::string text;

    void add(std::string_view s) {
        text.append(s);
        text.push_back('|');
    }
    void add(double v) {
        char buf[40];
        auto res = std::to_chars(buf, buf + sizeof(buf), v);
        text.append(buf, res.ptr);
        text.push_back('|');
    }
    void add(std::int64_t v) {
        char buf[24];
        auto res = std::to_chars(buf, buf + sizeof(buf), v);
        text.append(buf, res.ptr);
        text.push_back('|');
    }
    void add(const Vec& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) add(v[i]);
    }
    void add(const std::vector<double>& v) {
        for (double x : v) add(x);
    }

    std::uint64_t hash() const { return fnv64(text); }
};

void describe(HashText& h, const SdeSpec& spec, const CouplingSpec& coupling) {
    h.add(static_cast<std::int64_t>(spec.noise.kind()));
    h.add(static_cast<std::int64_t>(spec.dimension));
    h.add(spec.noise.range_bound());
    h.add(static_cast<std::int64_t>(spec.noise.is_symmetric()));
    h.add(spec.truncation.epsilon);
    h.add(spec.max_step);
    h.add(static_cast<std::int64_t>(coupling.scheme));
    h.add(coupling.eta);
    h.add(coupling.kappa);
    h.add(coupling.q0.cut);
    h.add(static_cast<std::int64_t>(coupling.q0.half_distance));
    h.add(coupling.meet_threshold);
}

double binomial_se(double p, int n) { return std::sqrt(p * (1.0 - p) / n); }

template <typename Fn>
void run_paths(const SdeSpec& spec, const CouplingSpec& coupling, const Vec& x0, const Vec& y0,
               int n_paths, std::uint64_t seed, std::uint64_t base_index, Fn&& per_path) {
    parallel::parallel_for(static_cast<std::size_t>(n_paths), [&](std::size_t k) {
        auto rng = RngStream::for_path(seed, base_index + k);
        simulate::PathPair p = simulate::simulate_pair(spec, coupling, x0, y0, rng);
        per_path(k, p);
    });
}

// Histogram L1 distance between two samples on shared Freedman-Diaconis bins.
double histogram_l1(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> pooled = a;
    pooled.insert(pooled.end(), b.begin(), b.end());
    std::sort(pooled.begin(), pooled.end());
    double lo = pooled.front(), hi = pooled.back();
    if (!(hi > lo)) return 0.0;
    double iqr = pooled[3 * pooled.size() / 4] - pooled[pooled.size() / 4];
    double width = 2.0 * iqr * std::pow(static_cast<double>(pooled.size()), -1.0 / 3.0);
    int bins = width > 0.0 ? static_cast<int>(std::ceil((hi - lo) / width)) : 64;
    bins = std::clamp(bins, 8, 256);

    std::vector<double> ca(bins, 0.0), cb(bins, 0.0);
    auto slot = [&](double v) {
        int i = static_cast<int>((v - lo) / (hi - lo) * bins);
        return std::clamp(i, 0, bins - 1);
    };
    for (double v : a) ca[slot(v)] += 1.0 / a.size();
    for (double v : b) cb[slot(v)] += 1.0 / b.size();
    double d = 0.0;
    for (int i = 0; i < bins; ++i) d += std::abs(ca[i] - cb[i]);
    return d;
}

} // namespace

std::uint64_t fnv64(std::string_view text) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

double drift_modulus_B(const DriftFn& b, int d, double r, int n_samples) {
    if (!(r > 0.0)) throw ConfigInvalid("r must be positive");
    if (d < 1) throw ConfigInvalid("dimension must be positive");
    if (!b) return 0.0;
    int n = std::max(n_samples, 64);

    if (d == 1) {
        double best = -kInf;
        for (int i = 0; i < n; ++i) {
            double x = -10.0 + 20.0 * i / (n - 1);
            best = std::max(best, b(v1d(x + 0.5 * r))[0] - b(v1d(x - 0.5 * r))[0]);
        }
        return best;
    }

    RngStream rng(0xB0D1F5EDULL);
    auto value_at = [&](const Vec& x, const Vec& u) {
        return (b(x) - b(Vec(x - r * u))).dot(u);
    };
    double best = -kInf;
    Vec bx = Vec::Zero(d), bu = Vec::Unit(d, 0);
    for (int i = 0; i < n; ++i) {
        Vec x(d);
        for (int j = 0; j < d; ++j) x[j] = rng.uniform(-10.0, 10.0);
        Vec u = rng.unit_sphere(d);
        double v = value_at(x, u);
        if (v > best) {
            best = v;
            bx = x;
            bu = u;
        }
    }
    double scale = 2.0;
    for (int round = 0; round < 80; ++round) {
        Vec x = bx, u = bu;
        for (int j = 0; j < d; ++j) x[j] += scale * rng.normal();
        for (int j = 0; j < d; ++j) u[j] += scale * rng.normal();
        double un = u.norm();
        if (un > 1e-12) {
            u /= un;
            double v = value_at(x, u);
            if (v > best) {
                best = v;
                bx = x;
                bu = u;
            }
        }
        scale *= 0.91;
    }
    return best;
}

std::vector<TailPoint> coupling_time_tail(const SdeSpec& spec, const CouplingSpec& coupling,
                                          const Vec& x0, const Vec& y0,
                                          const std::vector<double>& t_grid, int n_paths,
                                          std::uint64_t seed) {
    if (t_grid.empty()) throw ConfigInvalid("t_grid must not be empty");
    if (n_paths <= 0) throw ConfigInvalid("n_paths must be positive");
    SdeSpec run = spec;
    run.record_drift = false;
    run.horizon = *std::max_element(t_grid.begin(), t_grid.end());

    HashText h;
    h.add("tail");
    describe(h, run, coupling);
    h.add(x0);
    h.add(y0);
    h.add(t_grid);
    h.add(static_cast<std::int64_t>(n_paths));
    std::uint64_t hash = h.hash();

    std::vector<double> taus(n_paths);
    run_paths(run, coupling, x0, y0, n_paths, seed, 0,
              [&](std::size_t k, const simulate::PathPair& p) { taus[k] = p.tau; });

    std::vector<TailPoint> out;
    for (double t : t_grid) {
        double p = static_cast<double>(std::count_if(taus.begin(), taus.end(),
                                                     [t](double tau) { return tau > t; })) /
                   n_paths;
        out.push_back({t, {p, binomial_se(p, n_paths), n_paths, seed, hash}});
    }
    return out;
}

TvBoundResult tv_bound(const SdeSpec& spec, const CouplingSpec& coupling, const Vec& x0,
                       const Vec& y0, double t, int n_paths, std::uint64_t seed) {
    if (n_paths <= 1) throw ConfigInvalid("n_paths must exceed one");
    SdeSpec run = spec;
    run.record_drift = false;
    run.horizon = t;

    HashText h;
    h.add("tv");
    describe(h, run, coupling);
    h.add(x0);
    h.add(y0);
    h.add(t);
    h.add(static_cast<std::int64_t>(n_paths));
    std::uint64_t hash = h.hash();

    std::vector<double> taus(n_paths), xe(n_paths), ye(n_paths);
    run_paths(run, coupling, x0, y0, n_paths, seed, 0,
              [&](std::size_t k, const simulate::PathPair& p) {
                  taus[k] = p.tau;
                  xe[k] = p.xs.back()[0];
                  ye[k] = p.ys.back()[0];
              });

    double p = static_cast<double>(std::count_if(taus.begin(), taus.end(),
                                                 [t](double tau) { return tau > t; })) /
               n_paths;
    TvBoundResult out;
    out.upper = {2.0 * p, 2.0 * binomial_se(p, n_paths), n_paths, seed, hash};

    // Null statistic: the same L1 distance between two halves of the X sample
    // estimates the pure-noise level, making the subtraction conservative.
    std::vector<double> ha, hb;
    for (int k = 0; k + 1 < n_paths; k += 2) {
        ha.push_back(xe[k]);
        hb.push_back(xe[k + 1]);
    }
    double d = histogram_l1(xe, ye);
    double null = histogram_l1(ha, hb);
    out.lower = {std::max(0.0, d - null), null, n_paths, seed, hash};
    return out;
}

RegularityReport regularity_ratio(const SdeSpec& spec, const CouplingSpec& coupling,
                                  const BoundedObservable& f, const Vec& x,
                                  const std::vector<double>& delta_grid,
                                  const std::vector<double>& t_grid, int n_paths,
                                  std::uint64_t seed) {
    if (!f.f) throw ConfigInvalid("observable must be set");
    if (!(f.sup_norm > 0.0)) throw ConfigInvalid("sup norm must be positive");
    if (delta_grid.empty() || t_grid.empty()) throw ConfigInvalid("grids must not be empty");
    if (n_paths <= 1) throw ConfigInvalid("n_paths must exceed one");

    auto variant = coupling.scheme == Scheme::RefinedBasic
                       ? measures::ProfileVariant::GeneralOverlap
                       : measures::ProfileVariant::SymmetricReflection;
    measures::DistanceProfile profile(spec.noise, variant, spec.truncation);

    HashText h;
    h.add("regularity");
    describe(h, spec, coupling);
    h.add(x);
    h.add(delta_grid);
    h.add(t_grid);
    h.add(f.sup_norm);
    h.add(static_cast<std::int64_t>(n_paths));

    RegularityReport rep;
    rep.seed = seed;
    rep.config_hash = h.hash();

    for (std::size_t ti = 0; ti < t_grid.size(); ++ti) {
        double t = t_grid[ti];
        SdeSpec run = spec;
        run.record_drift = false;
        run.horizon = t;
        for (std::size_t di = 0; di < delta_grid.size(); ++di) {
            double delta = delta_grid[di];
            if (!(delta > 0.0)) throw ConfigInvalid("deltas must be positive");
            Vec y = x;
            y[0] += delta;

            std::vector<double> diff(n_paths);
            std::vector<char> apart(n_paths);
            std::uint64_t base = (ti * delta_grid.size() + di) * static_cast<std::uint64_t>(n_paths);
            run_paths(run, coupling, x, y, n_paths, seed, base,
                      [&](std::size_t k, const simulate::PathPair& p) {
                          diff[k] = f.f(p.xs.back()) - f.f(p.ys.back());
                          apart[k] = p.tau > t ? 1 : 0;
                      });

            double mean = 0.0;
            for (double v : diff) mean += v;
            mean /= n_paths;
            double var = 0.0;
            for (double v : diff) var += (v - mean) * (v - mean);
            var /= (n_paths - 1);

            double phi = profile.value(delta);
            double pt = 0.0;
            for (char a : apart) pt += a;
            pt /= n_paths;

            RegularityCell cell;
            cell.delta = delta;
            cell.t = t;
            cell.ratio = std::abs(mean) / phi;
            cell.std_error = std::sqrt(var / n_paths) / phi;
            cell.tail_ceiling = 2.0 * f.sup_norm * pt / phi;
            cell.tail_ceiling_se = 2.0 * f.sup_norm * binomial_se(pt, n_paths) / phi;
            rep.cells.push_back(cell);
            rep.c_hat = std::max(rep.c_hat, cell.ratio / std::min(1.0, 1.0 / t));
        }
    }
    return rep;
}

DriftCheckReport drift_inequality_check(Scheme scheme, const LevyMeasure& nu, const DriftFn& b,
                                        const std::vector<double>& delta_grid,
                                        const TruncationConfig& cfg) {
    if (scheme == Scheme::ReflectionBasic)
        throw ConfigInvalid("the drift check supports the reflection and refined basic schemes");
    bool reflection = scheme == Scheme::Reflection;
    if (reflection && !nu.is_symmetric())
        throw HypothesisViolation("the reflection form needs a symmetric measure");
    if (delta_grid.empty()) throw ConfigInvalid("delta grid must not be empty");

    auto variant = reflection ? measures::ProfileVariant::SymmetricReflection
                              : measures::ProfileVariant::GeneralOverlap;
    measures::DistanceProfile profile(nu, variant, cfg);

    DriftCheckReport rep;
    rep.hypothesis_bound = (reflection ? 2.0 / nu.dim() : 0.5) - 0.05;
    for (int k = 4; k <= 12; ++k) {
        double r = std::ldexp(1.0, -k);
        double g = b ? drift_modulus_B(b, nu.dim(), r) * profile.deriv(r) : 0.0;
        rep.hypothesis_r.push_back(r);
        rep.hypothesis_value.push_back(g);
    }
    std::size_t m = rep.hypothesis_value.size();
    double worst = std::max({rep.hypothesis_value[m - 1], rep.hypothesis_value[m - 2],
                             rep.hypothesis_value[m - 3]});
    if (worst >= rep.hypothesis_bound)
        throw HypothesisViolation("drift modulus grows too fast for the limsup condition");

    operators::TestFunction phi = operators::TestFunction::phi_profile(profile);
    std::vector<double> deltas = delta_grid;
    std::sort(deltas.begin(), deltas.end());
    deltas.erase(std::unique(deltas.begin(), deltas.end()), deltas.end());

    const int d = nu.dim();
    Vec origin = Vec::Zero(d);
    for (double delta : deltas) {
        if (!(delta > 0.0)) throw ConfigInvalid("deltas must be positive");
        Vec x0 = Vec::Zero(d);
        x0[0] = delta;
        auto js = reflection ? operators::make_reflection_system(nu, 0.5)
                             : operators::make_refined_basic_system(nu, delta);
        double jump = operators::eval_generator(js, phi, DriftFn{}, x0, origin, cfg).value;
        double drift_term =
            b ? delta * profile.deriv(delta) * drift_modulus_B(b, d, delta) : 0.0;
        double v = jump + drift_term;
        rep.table.push_back({delta, v, v < 0.0});
    }

    for (const DriftCheckRow& row : rep.table) {
        if (!row.contracting) break;
        rep.epsilon0_hat = row.delta;
        rep.c0_hat = rep.c0_hat == 0.0 ? -row.value : std::min(rep.c0_hat, -row.value);
    }
    return rep;
}

} // namespace levycouple::estimators
