#pragma once

// Experiment configuration: one JSON document that pins down the noise
// measure, drift, coupling scheme, truncation, grids, and output so a run is
// fully reproducible from the file plus a seed. Parsing rejects unknown keys
// by their full path, and the round-trip through to_json is canonical, so the
// FNV hash of the serialized form identifies the experiment.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "levycouple/estimators.hpp"
#include "levycouple/measures.hpp"
#include "levycouple/operators.hpp"
#include "levycouple/simulate.hpp"

namespace levycouple::config {

struct MeasureSpec {
    std::string kind = "stable"; // stable | discrete | radial
    double alpha = 1.0;
    double c = 0.1;
    // discrete: one entry per atom, location length = dimension
    std::vector<std::pair<std::vector<double>, double>> atoms;
    // radial: sorted (r, q(r)) knots, interpolated linearly, zero beyond
    std::vector<std::pair<double, double>> profile;
};

struct DriftSpec {
    std::string kind = "linear"; // zero | linear | table
    double k = -1.0;
    // table: sorted (x, b(x)) knots for d = 1, clamped outside the range
    std::vector<std::pair<double, double>> points;
};

struct SchemeSpec {
    std::string kind = "basic"; // reflection | basic | refbasic
    double eta = 0.5;
    double kappa = 1.0;
    double cut = 1.0;
    bool half_distance = true;
    double meet_threshold = -2.0; // -2 keeps each scheme's own default
};

struct ObservableSpec {
    std::string kind = "tanh"; // tanh | first_coordinate_capped
    double scale = 1.0;
};

struct CompareSpec {
    std::string comparison_case = "infinite"; // infinite | finite
    std::string test_function = "exponential"; // identity | capped | exponential
    double parameter = 1.0;
    // pairs of start points; empty falls back to the single (x0, y0) pair
    std::vector<std::pair<std::vector<double>, std::vector<double>>> pairs;
};

struct OutputSpec {
    std::string path; // empty writes the primary artifact to stdout
    std::string format = "csv"; // csv | json
};

struct ExperimentConfig {
    int dimension = 1;
    MeasureSpec measure;
    DriftSpec drift;
    SchemeSpec scheme;
    measures::TruncationConfig truncation;
    double max_step = 1e-3;
    double horizon = 1.0;
    double explosion_bound = 1e8;
    bool record_drift = true;
    double lipschitz = 1.0;
    std::vector<double> t_grid{0.5, 1.0, 2.0, 4.0};
    std::vector<double> delta_grid{0.01, 0.05, 0.1};
    long n_paths = 1000;
    std::uint64_t seed = 42;
    std::vector<double> x0{0.1};
    std::vector<double> y0{0.0};
    ObservableSpec observable;
    CompareSpec compare;
    OutputSpec output;
    int workers = 0; // 0 defers to LEVY_COUPLE_THREADS or the hardware
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

// Canonical serialization (sorted keys, two-space indent, trailing newline).
std::string serialize_config(const ExperimentConfig& cfg);
std::uint64_t config_hash(const ExperimentConfig& cfg);

measures::LevyMeasure build_measure(const ExperimentConfig& cfg);
operators::DriftFn build_drift(const ExperimentConfig& cfg);
simulate::SdeSpec build_sde(const ExperimentConfig& cfg);
simulate::CouplingSpec build_coupling(const ExperimentConfig& cfg);
simulate::Scheme scheme_kind(const ExperimentConfig& cfg);
estimators::BoundedObservable build_observable(const ExperimentConfig& cfg);
operators::TestFunction build_test_function(const ExperimentConfig& cfg);

Vec to_vec(const std::vector<double>& values, int dimension, const std::string& name);

} // namespace levycouple::config
