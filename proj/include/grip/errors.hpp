#pragma once

#include <stdexcept>
#include <string>

namespace grip {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Geometry/contract violations on inputs.
struct DegenerateInput : Error { using Error::Error; };
struct SequenceTooShort : Error { using Error::Error; };
struct InvalidCutoff : Error { using Error::Error; };
struct FlatSignal : Error { using Error::Error; };
struct LengthMismatch : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct LayoutMismatch : Error { using Error::Error; };
struct EmptySet : Error { using Error::Error; };
struct Underflow : Error { using Error::Error; };

// Calibration-specific failures.
struct StaticityViolation : Error { using Error::Error; };
struct MissingContext : Error { using Error::Error; };
struct MissingTpose : Error { using Error::Error; };
struct DegenerateTrajectory : Error { using Error::Error; };

// Simulation blow-up.
struct NumericalDivergence : Error { using Error::Error; };

// File and configuration problems. These map to CLI exit code 2
// (missing/invalid input), together with MissingContext and MissingTpose;
// every other error maps to exit code 1.
struct ParseError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

}  // namespace grip
