#pragma once

// Pathwise simulation of the jump SDE and its three coupled variants via an
// epsilon-truncated compound-Poisson event stream shared by both marginals.
// Jumps below epsilon are dropped (their compensated drift is restored through
// compensator_drift); between events the drift is integrated by explicit Euler
// substeps. Coupling decisions use left-limit states, matching the predictable
// integrands of the driving equations.

#include <cstdint>
#include <limits>
#include <vector>

#include "levycouple/errors.hpp"
#include "levycouple/measures.hpp"
#include "levycouple/operators.hpp"
#include "levycouple/rng.hpp"
#include "levycouple/vec.hpp"

namespace levycouple::simulate {

using measures::LevyMeasure;
using measures::TruncationConfig;
using operators::DriftFn;
using operators::Q0Spec;

struct SdeSpec {
    SdeSpec(int d, LevyMeasure nu) : dimension(d), noise(std::move(nu)) {
        if (dimension != noise.dim()) throw ConfigInvalid("dimension does not match the noise measure");
    }

    int dimension;
    LevyMeasure noise;
    DriftFn drift;                 // empty means zero drift
    double lipschitz = 0.0;        // declared constant, used only for the step warning
    TruncationConfig truncation;
    double max_step = 1e-3;
    double horizon = 1.0;
    double explosion_bound = 1e8;
    bool record_drift = true;      // false keeps only jump events and the endpoints

    // Euler with a step this coarse against the declared Lipschitz constant is
    // not trustworthy; callers may surface this to the user.
    bool step_warning() const { return lipschitz * max_step > 1.0; }

    void validate() const {
        if (!(max_step > 0.0)) throw ConfigInvalid("max_step must be positive");
        if (!(horizon > 0.0)) throw ConfigInvalid("horizon must be positive");
        if (max_step > horizon) throw ConfigInvalid("max_step exceeds the horizon");
        if (!(explosion_bound > 0.0)) throw ConfigInvalid("explosion bound must be positive");
    }
};

enum class Scheme { Reflection, RefinedBasic, ReflectionBasic };

// meet_threshold < 0 selects the scheme default: 1e-4 times the initial
// distance for the reflection-type schemes (pure-jump reflection does not hit
// zero exactly), exactly 0 for the refined basic scheme (its contracting row
// meets exactly).
struct CouplingSpec {
    static CouplingSpec reflection(double eta) {
        CouplingSpec c;
        c.scheme = Scheme::Reflection;
        c.eta = eta;
        return c;
    }
    static CouplingSpec refined_basic(double kappa) {
        CouplingSpec c;
        c.scheme = Scheme::RefinedBasic;
        c.kappa = kappa;
        c.meet_threshold = 0.0;
        return c;
    }
    static CouplingSpec reflection_basic(Q0Spec q0) {
        CouplingSpec c;
        c.scheme = Scheme::ReflectionBasic;
        c.q0 = q0;
        return c;
    }

    Scheme scheme = Scheme::Reflection;
    double eta = std::numeric_limits<double>::infinity();
    double kappa = 1.0;
    Q0Spec q0;
    double meet_threshold = -1.0;

    void validate() const {
        if (scheme == Scheme::Reflection && !(eta > 0.0))
            throw ConfigInvalid("eta must be positive");
        if (scheme == Scheme::RefinedBasic && !(kappa > 0.0))
            throw ConfigInvalid("kappa must be positive");
    }
};

enum class EventType { Drift, Sync, Reflect, Contract, Expand, Coalesce };

const char* event_name(EventType e);

struct Path {
    std::vector<double> times;
    std::vector<Vec> states;
    std::uint64_t seed = 0;

    const Vec& terminal() const { return states.back(); }
};

struct PathPair {
    std::vector<double> times;
    std::vector<Vec> xs, ys;
    std::vector<EventType> events;
    double tau = std::numeric_limits<double>::infinity();
    bool coalesced = false;
    std::uint64_t seed = 0;

    double terminal_distance() const { return (xs.back() - ys.back()).norm(); }
};

Path simulate_single(const SdeSpec& spec, const Vec& x0, RngStream& rng);

PathPair simulate_reflection_pair(const SdeSpec& spec, double eta, const Vec& x0, const Vec& y0,
                                  RngStream& rng, double meet_threshold = -1.0);

PathPair simulate_refined_basic_pair(const SdeSpec& spec, double kappa, const Vec& x0,
                                     const Vec& y0, RngStream& rng, double meet_threshold = 0.0);

PathPair simulate_reflection_basic_pair(const SdeSpec& spec, const Q0Spec& q0, const Vec& x0,
                                        const Vec& y0, RngStream& rng,
                                        double meet_threshold = -1.0);

PathPair simulate_pair(const SdeSpec& spec, const CouplingSpec& coupling, const Vec& x0,
                       const Vec& y0, RngStream& rng);

} // namespace levycouple::simulate
