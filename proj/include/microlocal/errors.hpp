#pragma once

#include <stdexcept>
#include <string>

namespace microlocal {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NoConvergence : Error { using Error::Error; };
struct DegenerateJacobian : Error { using Error::Error; };
struct ZeroCovector : Error { using Error::Error; };
struct UnknownName : Error { using Error::Error; };
struct DegenerateCurve : Error { using Error::Error; };
struct CorankTooHigh : Error { using Error::Error; };
struct NotACusp : Error { using Error::Error; };
struct NotOnSet : Error { using Error::Error; };
struct DependentDefiners : Error { using Error::Error; };
struct NotCritical : Error { using Error::Error; };
struct SingularJacobian : Error { using Error::Error; };
struct DegenerateN : Error { using Error::Error; };
struct SourceTooCloseToBoundary : Error { using Error::Error; };
struct EmptyLocus : Error { using Error::Error; };
struct LeftDomain : Error { using Error::Error; };
struct StepFailure : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

}  // namespace microlocal
