#pragma once

// Jump measures for pure-jump additive noise, in three representations:
// finite atom lists, rotationally symmetric radial densities, and the
// closed-form stable family. All operations treat the measure as immutable;
// const methods are safe for concurrent use.

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <unordered_map>
#include <vector>

#include "levycouple/errors.hpp"
#include "levycouple/rng.hpp"
#include "levycouple/vec.hpp"

namespace levycouple::measures {

struct Atom {
    Vec location;
    double mass = 0.0;
};

enum class Kind { DiscreteAtoms, RadialDensity, StableClosedForm };

// Shared numeric knobs for quadrature- and sampling-backed operations.
struct TruncationConfig {
    double epsilon = 1e-3;            // small-jump cutoff for event-driven simulation
    int quad_points = 256;            // scales the panel budget of deterministic quadrature
    int mc_points = 20000;            // sample count for Monte Carlo quadrature (d >= 2)
    std::uint64_t mc_seed = 0x51ab5eedULL; // fixed seed keeps MC-backed values reproducible
};

struct MonteCarloEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

class LevyMeasure {
  public:
    static LevyMeasure discrete(int d, std::vector<Atom> atoms);
    // q is the density profile: measure density at z is q(|z|). range_bound
    // may be +inf; q must vanish beyond it otherwise.
    static LevyMeasure radial(int d, std::function<double(double)> q,
                              double range_bound = std::numeric_limits<double>::infinity());
    // density c * |z|^(-d-alpha), alpha in (0,2), c > 0
    static LevyMeasure stable(int d, double alpha, double c);

    Kind kind() const { return kind_; }
    int dim() const { return dim_; }
    bool is_symmetric() const { return symmetric_; }
    double range_bound() const { return range_bound_; }
    bool has_density() const { return kind_ != Kind::DiscreteAtoms; }

    double stable_alpha() const { return alpha_; }
    double stable_scale() const { return scale_; }

    const std::vector<Atom>& atoms() const;
    double atom_mass_near(const Vec& p, double tol = 1e-9) const;

    double radial_density(double r) const; // q(r)
    double density(const Vec& z) const;    // q(|z|)

  private:
    LevyMeasure() = default;

    Kind kind_ = Kind::DiscreteAtoms;
    int dim_ = 1;
    bool symmetric_ = false;
    double range_bound_ = std::numeric_limits<double>::infinity();
    double alpha_ = 0.0, scale_ = 0.0;
    std::function<double(double)> profile_;
    std::vector<Atom> atoms_;
};

// |S^{d-1}| = 2 pi^{d/2} / Gamma(d/2)
double sphere_surface_area(int d);

// nu({ |z| >= r })
double tail_mass(const LevyMeasure& nu, double r, const TruncationConfig& cfg = {});

// Second moment of jumps within radius r: integral of |z|^2 over {|z| <= r}.
double jump_second_moment(const LevyMeasure& nu, double r, const TruncationConfig& cfg = {});

// Mass of the common part of nu and its shift by x, restricted to {|z| > eps}.
double overlap_mass(const LevyMeasure& nu, const Vec& x, double eps,
                    const TruncationConfig& cfg = {});
MonteCarloEstimate overlap_mass_detail(const LevyMeasure& nu, const Vec& x, double eps,
                                       const TruncationConfig& cfg = {});

// Density of (nu and-shift overlap) against nu at point z, in [0, 1].
double overlap_fraction(const LevyMeasure& nu, const Vec& x, const Vec& z);

// r^2 times the smallest shift-overlap mass over a deterministic grid of
// shifts with magnitudes in (r/100, r]. grid_size and (for d > 1, asymmetric
// measures) the direction count control the grid resolution.
double min_overlap_rate(const LevyMeasure& nu, double r, const TruncationConfig& cfg = {},
                        int grid_size = 32, int directions = 16);

enum class ProfileVariant {
    SymmetricReflection, // rate s -> jump_second_moment(s/4)
    GeneralOverlap,      // rate s -> min_overlap_rate(s/2)
};

// Concave distance profile r -> integral over s in (0,1] of (s ^ r) / rate(s).
// Increasing and strictly concave below 1, saturated at its r = 1 value
// beyond. Construction verifies the defining integral converges.
class DistanceProfile {
  public:
    DistanceProfile(const LevyMeasure& nu, ProfileVariant variant,
                    const TruncationConfig& cfg = {});

    double value(double r) const;
    double deriv(double r) const;        // integral of 1/rate over [r, 1]
    double second_deriv(double r) const; // -1/rate(r) below 1, 0 beyond

    ProfileVariant variant() const { return variant_; }

  private:
    struct Panel {
        double lo, hi;
        double int_g;   // integral of 1/rate
        double int_sg;  // integral of s/rate
    };
    double rate(double s) const;
    double partial_g(double a, double b) const;
    double partial_sg(double a, double b) const;

    std::shared_ptr<const LevyMeasure> nu_;
    ProfileVariant variant_;
    TruncationConfig cfg_;
    std::vector<Panel> panels_; // ascending, covering (s_min, 1]
    double full_sg_ = 0.0;      // integral of s/rate over (0, 1]
    mutable std::unordered_map<std::uint64_t, double> rate_memo_;
};

double distance_profile(const LevyMeasure& nu, double r, ProfileVariant variant,
                        const TruncationConfig& cfg = {});

// Draws jumps of size at least eps from nu, normalized to probability; the
// event rate is tail_mass(nu, eps). Build once, sample many times.
class JumpSampler {
  public:
    JumpSampler(const LevyMeasure& nu, double eps, const TruncationConfig& cfg = {});

    double rate() const { return rate_; }
    Vec sample(RngStream& rng) const;

  private:
    const LevyMeasure* nu_;
    double eps_;
    double rate_ = 0.0;
    int dim_ = 1;
    Kind kind_;
    double alpha_ = 0.0;
    // atoms: cumulative masses over the retained atoms
    std::vector<double> cum_;
    std::vector<const Atom*> kept_;
    // radial density: piecewise-linear inverse of the radial mass function
    std::vector<double> radii_;
    std::vector<double> cdf_;
};

Vec sample_jump(const LevyMeasure& nu, double eps, RngStream& rng,
                const TruncationConfig& cfg = {});

// Drift correction for dropping compensated jumps below 1: the negative of
// the integral of z over {eps <= |z| < 1}. Zero for symmetric measures.
Vec compensator_drift(const LevyMeasure& nu, double eps);

} // namespace levycouple::measures
