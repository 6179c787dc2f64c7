#pragma once

#include <stdexcept>
#include <string>

namespace levycouple {

// Base class for all library errors. Subclasses exist so callers can react to
// the failure kind without parsing messages.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct NonSymmetricMeasure : Error { using Error::Error; };
struct QuadratureFailure : Error { using Error::Error; };
struct IntegrabilityViolation : Error { using Error::Error; };
struct ZeroShift : Error { using Error::Error; };
struct UnsupportedPoint : Error { using Error::Error; };
struct EmptyTail : Error { using Error::Error; };
struct SubMeasureViolation : Error { using Error::Error; };
struct NonAtomicBase : Error { using Error::Error; };
struct CompensationDivergence : Error { using Error::Error; };
struct HypothesisViolation : Error { using Error::Error; };
struct SingularSigma : Error { using Error::Error; };
struct DensityDominationViolation : Error { using Error::Error; };
struct ExplosionDetected : Error { using Error::Error; };
struct ConfigInvalid : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct NumericFailure : Error { using Error::Error; };

} // namespace levycouple
