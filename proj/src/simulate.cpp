#include "levycouple/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>

#include "levycouple/geometry.hpp"

namespace levycouple::simulate {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_state(const Vec& p, double bound) {
    if (!p.allFinite() || p.norm() > bound)
        throw ExplosionDetected("state norm exceeded the explosion bound");
}

Vec drift_rate(const SdeSpec& spec, const Vec& comp, const Vec& p) {
    if (!spec.drift) return comp;
    return Vec(comp + spec.drift(p));
}

// Truncated jump stream: rate and sampler for jumps of size at least epsilon,
// plus the drift restored for the dropped compensated band.
struct EventStream {
    double rate = 0.0;
    std::optional<measures::JumpSampler> sampler;
    Vec comp;

    EventStream(const LevyMeasure& nu, const TruncationConfig& cfg)
        : comp(measures::compensator_drift(nu, cfg.epsilon)) {
        if (measures::tail_mass(nu, cfg.epsilon, cfg) > 0.0) {
            sampler.emplace(nu, cfg.epsilon, cfg);
            rate = sampler->rate();
        }
    }
};

struct JumpOutcome {
    Vec dy;                  // Y displacement while the pair is apart
    EventType label = EventType::Sync;
    bool exact_meet = false; // coalescing rows land Y exactly on X
};

// Shared event loop for all pair schemes. on_jump sees the left-limit states
// and the sampled jump and decides the Y side; coalescence is detected after
// every move against the meet threshold, after which the pair is identified
// and driven synchronously.
template <typename Handler>
PathPair run_pair(const SdeSpec& spec, const Vec& x0, const Vec& y0, RngStream& rng,
                  double meet_threshold, double default_meet_scale, Handler&& on_jump) {
    spec.validate();
    if (x0.size() != spec.dimension || y0.size() != spec.dimension)
        throw ConfigInvalid("initial state dimension mismatch");
    double meet = meet_threshold >= 0.0 ? meet_threshold
                                        : default_meet_scale * (x0 - y0).norm();
    EventStream ev(spec.noise, spec.truncation);

    PathPair out;
    out.seed = rng.seed();
    Vec x = x0, y = y0;
    double t = 0.0;

    auto record = [&](EventType e) {
        out.times.push_back(t);
        out.xs.push_back(x);
        out.ys.push_back(y);
        out.events.push_back(e);
    };
    auto settle = [&](EventType label) {
        if (!out.coalesced && (x - y).norm() <= meet) {
            out.coalesced = true;
            out.tau = t;
            y = x;
            return EventType::Coalesce;
        }
        return label;
    };

    record(settle(EventType::Drift));

    auto drift_to = [&](double target) {
        if (!(target > t)) return;
        int n = std::max(1, static_cast<int>(std::ceil((target - t) / spec.max_step - 1e-12)));
        double dt = (target - t) / n;
        for (int i = 0; i < n; ++i) {
            x += dt * drift_rate(spec, ev.comp, x);
            if (out.coalesced)
                y = x;
            else
                y += dt * drift_rate(spec, ev.comp, y);
            t = (i + 1 == n) ? target : t + dt;
            check_state(x, spec.explosion_bound);
            check_state(y, spec.explosion_bound);
            EventType label = settle(EventType::Drift);
            if (spec.record_drift || label == EventType::Coalesce) record(label);
        }
    };

    double t_next = ev.rate > 0.0 ? rng.exponential(ev.rate) : kInf;
    while (t_next <= spec.horizon) {
        drift_to(t_next);
        Vec z = ev.sampler->sample(rng);
        EventType label;
        if (out.coalesced) {
            x += z;
            y = x;
            label = EventType::Sync;
        } else {
            JumpOutcome o = on_jump(x, y, z, rng);
            x += z;
            if (o.exact_meet)
                y = x;
            else
                y += o.dy;
            label = o.label;
        }
        check_state(x, spec.explosion_bound);
        check_state(y, spec.explosion_bound);
        record(settle(label));
        t_next = t + rng.exponential(ev.rate);
    }
    drift_to(spec.horizon);
    if (out.times.empty() || out.times.back() != t) record(EventType::Drift);
    return out;
}

} // namespace

const char* event_name(EventType e) {
    switch (e) {
        case EventType::Drift: return "drift";
        case EventType::Sync: return "sync";
        case EventType::Reflect: return "reflect";
        case EventType::Contract: return "contract";
        case EventType::Expand: return "expand";
        case EventType::Coalesce: return "coalesce";
    }
    return "unknown";
}

Path simulate_single(const SdeSpec& spec, const Vec& x0, RngStream& rng) {
    spec.validate();
    if (x0.size() != spec.dimension) throw ConfigInvalid("initial state dimension mismatch");
    EventStream ev(spec.noise, spec.truncation);

    Path out;
    out.seed = rng.seed();
    Vec x = x0;
    double t = 0.0;
    auto record = [&]() {
        out.times.push_back(t);
        out.states.push_back(x);
    };
    record();

    auto drift_to = [&](double target) {
        if (!(target > t)) return;
        int n = std::max(1, static_cast<int>(std::ceil((target - t) / spec.max_step - 1e-12)));
        double dt = (target - t) / n;
        for (int i = 0; i < n; ++i) {
            x += dt * drift_rate(spec, ev.comp, x);
            t = (i + 1 == n) ? target : t + dt;
            check_state(x, spec.explosion_bound);
            if (spec.record_drift) record();
        }
    };

    double t_next = ev.rate > 0.0 ? rng.exponential(ev.rate) : kInf;
    while (t_next <= spec.horizon) {
        drift_to(t_next);
        x += ev.sampler->sample(rng);
        check_state(x, spec.explosion_bound);
        record();
        t_next = t + rng.exponential(ev.rate);
    }
    drift_to(spec.horizon);
    if (out.times.back() != t) record();
    return out;
}

PathPair simulate_reflection_pair(const SdeSpec& spec, double eta, const Vec& x0, const Vec& y0,
                                  RngStream& rng, double meet_threshold) {
    if (!(eta > 0.0)) throw ConfigInvalid("eta must be positive");
    if (!spec.noise.is_symmetric())
        throw NonSymmetricMeasure("reflection coupling requires a symmetric jump measure");
    return run_pair(spec, x0, y0, rng, meet_threshold, 1e-4,
                    [eta](const Vec& x, const Vec& y, const Vec& z, RngStream&) {
                        double r = (x - y).norm();
                        if (z.norm() < eta * r)
                            return JumpOutcome{geometry::reflect(x, y, z), EventType::Reflect,
                                               false};
                        return JumpOutcome{z, EventType::Sync, false};
                    });
}

PathPair simulate_refined_basic_pair(const SdeSpec& spec, double kappa, const Vec& x0,
                                     const Vec& y0, RngStream& rng, double meet_threshold) {
    if (!(kappa > 0.0)) throw ConfigInvalid("kappa must be positive");
    const LevyMeasure& nu = spec.noise;
    // Mark bands of the random threshold: with w = (x - y) clamped to kappa,
    // the contracting row carries half of the overlap fraction of nu under the
    // shift -w, the expanding row half of the fraction under +w, and the rest
    // of the jump is applied synchronously.
    return run_pair(
        spec, x0, y0, rng, meet_threshold, 0.0,
        [kappa, &nu](const Vec& x, const Vec& y, const Vec& z, RngStream& rng) {
            Vec u = x - y;
            Vec wk = geometry::clamp_norm(u, kappa);
            double rho_contract = measures::overlap_fraction(nu, Vec(-wk), z);
            double rho_expand = measures::overlap_fraction(nu, wk, z);
            double mark = rng.uniform();
            if (mark < 0.5 * rho_contract)
                return JumpOutcome{Vec(z + wk), EventType::Contract, u.norm() <= kappa};
            if (mark < 0.5 * (rho_contract + rho_expand))
                return JumpOutcome{Vec(z - wk), EventType::Expand, false};
            return JumpOutcome{z, EventType::Sync, false};
        });
}

PathPair simulate_reflection_basic_pair(const SdeSpec& spec, const Q0Spec& q0, const Vec& x0,
                                        const Vec& y0, RngStream& rng, double meet_threshold) {
    const LevyMeasure& nu = spec.noise;
    if (!nu.has_density() || !nu.is_symmetric())
        throw NonSymmetricMeasure(
            "the combined coupling requires a rotationally symmetric radial density");
    // Thinning: membership in the q0 sub-density (a radial cut of q, so the
    // ratio is an indicator), then accept the coalescing row with probability
    // q0(|x - y + z|) ^ q0(|z|) over q0(|z|), otherwise reflect.
    return run_pair(
        spec, x0, y0, rng, meet_threshold, 1e-4,
        [&nu, q0](const Vec& x, const Vec& y, const Vec& z, RngStream& rng) {
            double cut = q0.cut_at((x - y).norm());
            double qz = nu.density(z);
            bool member = z.norm() <= cut && qz > 0.0;
            if (rng.uniform() >= (member ? 1.0 : 0.0))
                return JumpOutcome{z, EventType::Sync, false};
            Vec shifted = x - y + z;
            double accept = 0.0;
            if (shifted.norm() <= cut) accept = std::min(1.0, nu.density(shifted) / qz);
            if (rng.uniform() < accept) return JumpOutcome{Vec(), EventType::Coalesce, true};
            return JumpOutcome{geometry::reflect(x, y, z), EventType::Reflect, false};
        });
}

PathPair simulate_pair(const SdeSpec& spec, const CouplingSpec& coupling, const Vec& x0,
                       const Vec& y0, RngStream& rng) {
    coupling.validate();
    switch (coupling.scheme) {
        case Scheme::Reflection:
            return simulate_reflection_pair(spec, coupling.eta, x0, y0, rng,
                                            coupling.meet_threshold);
        case Scheme::RefinedBasic:
            return simulate_refined_basic_pair(spec, coupling.kappa, x0, y0, rng,
                                               coupling.meet_threshold);
        case Scheme::ReflectionBasic:
            return simulate_reflection_basic_pair(spec, coupling.q0, x0, y0, rng,
                                                  coupling.meet_threshold);
    }
    throw Error("unreachable");
}

} // namespace levycouple::simulate
