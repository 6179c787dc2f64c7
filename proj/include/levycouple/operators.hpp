#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "levycouple/errors.hpp"
#include "levycouple/geometry.hpp"
#include "levycouple/measures.hpp"
#include "levycouple/vec.hpp"

namespace levycouple::operators {

using measures::LevyMeasure;
using measures::TruncationConfig;

using DriftFn = std::function<Vec(const Vec&)>;
using SigmaFn = std::function<Mat(const Vec&)>;

// How a component's jump rate is derived from its sub-measure: MuMin takes the
// minimum of the sub-measure and its image under psi, Direct uses the
// sub-measure itself as the rate.
enum class RateForm { MuMin, Direct };

struct JumpComponent {
    std::string name;
    RateForm rate_form = RateForm::MuMin;
    // sub-measure mass/density of this component at an arbitrary point, for
    // the pair (x, y)
    std::function<double(const Vec&, const Vec&, const Vec&)> sub_mass_at;
    std::function<Vec(const Vec&, const Vec&, const Vec&)> psi;
    std::function<Vec(const Vec&, const Vec&, const Vec&)> psi_inv;
};

double component_rate(const JumpComponent& c, const Vec& x, const Vec& y, const Vec& z);

enum class SchemeKind { Synchronous, Reflection, RefinedBasic, ReflectionBasic, Custom };

// Radial truncation of the base density: q0(|z|) = q(|z|) on {|z| <= cut},
// where the cut may track the current pair distance (cut = |x-y|/2).
struct Q0Spec {
    double cut = std::numeric_limits<double>::infinity();
    bool half_distance = false;

    double cut_at(double r) const { return half_distance ? 0.5 * r : cut; }
};

struct JumpSystem {
    LevyMeasure base;
    SchemeKind kind = SchemeKind::Custom;
    std::vector<JumpComponent> components;
    // multiplicative noise coefficient; empty means additive (identity)
    SigmaFn sigma;

    double eta = std::numeric_limits<double>::infinity(); // Reflection
    double kappa = 1.0;                                   // RefinedBasic
    Q0Spec sub;                                           // RefinedBasic sub-measure cut
    Q0Spec q0;                                            // ReflectionBasic
};

JumpSystem make_synchronous_system(const LevyMeasure& nu);
JumpSystem make_reflection_system(const LevyMeasure& nu, double eta);
JumpSystem make_refined_basic_system(const LevyMeasure& nu, double kappa,
                                     const Q0Spec& sub = {});
JumpSystem make_reflection_basic_system(const LevyMeasure& nu, const Q0Spec& q0);
JumpSystem build_multiplicative_system(const JumpSystem& js, SigmaFn sigma);

struct KernelRow {
    Vec u, v;
    double mass = 0.0;
    std::string label;
};

struct CouplingKernel {
    Vec x, y;
    std::vector<KernelRow> rows;
    // carried over from the jump system so the expected marginals can be
    // reconstructed; empty means additive
    SigmaFn sigma;
};

CouplingKernel build_kernel(const JumpSystem& js, const Vec& x, const Vec& y);

struct MarginalityReport {
    bool ok = false;
    double max_defect = 0.0;
};

MarginalityReport verify_marginality(const CouplingKernel& kernel, const LevyMeasure& nu);

struct SymmetryReport {
    bool ok = false;
    double max_defect = 0.0;
};

SymmetryReport verify_symmetry_condition(const JumpSystem& js, const Vec& x, const Vec& y);

// Non-decreasing concave test functions of the pair distance, with closed-form
// derivatives.
class TestFunction {
  public:
    enum class Kind { Identity, Capped, Exponential, PhiProfile };

    static TestFunction identity();
    static TestFunction capped(double cap);
    static TestFunction exponential(double a);
    static TestFunction phi_profile(measures::DistanceProfile profile);

    double operator()(double r) const;
    double deriv(double r) const;
    double second_deriv(double r) const;

    Kind kind() const { return kind_; }
    bool bounded() const;
    double sup() const; // least upper bound of f; only valid when bounded()
    bool twice_differentiable() const { return kind_ != Kind::Capped; }

  private:
    TestFunction(Kind kind, double param) : kind_(kind), param_(param) {}
    Kind kind_;
    double param_ = 0.0;
    std::shared_ptr<const measures::DistanceProfile> profile_;
};

struct GeneratorValue {
    double value = 0.0;
    double std_error = 0.0;
    bool monte_carlo = false;
};

GeneratorValue eval_generator(const JumpSystem& js, const TestFunction& f, const DriftFn& b,
                              const Vec& x, const Vec& y, const TruncationConfig& cfg = {});

// Smooth function on R^d with its gradient, for the marginal-recovery checks.
struct VectorTestFunction {
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> grad;
};

// L f(x) assembled directly from the jump measure.
double marginal_generator(const LevyMeasure& nu, const VectorTestFunction& f, const DriftFn& b,
                          const Vec& x);

// Action of the coupling operator on f x 1 (first coordinate) or 1 x f
// (second coordinate), assembled from the kernel rows.
double eval_generator_tensor(const JumpSystem& js, const VectorTestFunction& f, const DriftFn& b,
                             const Vec& x, const Vec& y, bool first_coordinate);

enum class LemmaBound { L1Reflection, L2Basic };

struct LemmaBoundReport {
    double lhs = 0.0;
    double rhs = 0.0;
    bool ok = false;
};

LemmaBoundReport check_lemma_bound(LemmaBound which, const LevyMeasure& nu, const DriftFn& b,
                                   const TestFunction& f, const Vec& x, const Vec& y,
                                   const TruncationConfig& cfg = {}, double tol = 1e-6);

enum class ComparisonCase { InfiniteRange, FiniteRange };

struct ComparisonRow {
    Vec x, y;
    double reflection = 0.0; // reflection coupling
    double combined = 0.0;   // combined reflection-and-basic coupling
    double basic = 0.0;      // refined basic coupling
};

std::vector<ComparisonRow> compare_operators(ComparisonCase cs, const LevyMeasure& nu,
                                             const TestFunction& f,
                                             const std::vector<std::pair<Vec, Vec>>& pairs,
                                             double kappa = 1.0,
                                             const TruncationConfig& cfg = {});

} // namespace levycouple::operators
