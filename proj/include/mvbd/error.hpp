#pragma once

#include <stdexcept>
#include <string>

namespace mvbd {

/// Base class for every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI diagnostics.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define MVBD_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                     \
   public:                                                        \
    explicit Name(const std::string& what) : Error(#Name, what) {} \
  };

MVBD_DEFINE_ERROR(InvalidArgument)
MVBD_DEFINE_ERROR(NonFiniteRate)
MVBD_DEFINE_ERROR(DeclaredConstantViolation)
MVBD_DEFINE_ERROR(UnboundedGrowth)
MVBD_DEFINE_ERROR(SupportTooLarge)
MVBD_DEFINE_ERROR(SizeMismatch)
MVBD_DEFINE_ERROR(StepTooLarge)
MVBD_DEFINE_ERROR(CapOverflow)
MVBD_DEFINE_ERROR(NoConvergence)
MVBD_DEFINE_ERROR(ZeroDeathRate)
MVBD_DEFINE_ERROR(DominationFailure)
MVBD_DEFINE_ERROR(RateOverflow)
MVBD_DEFINE_ERROR(MissingConstants)
MVBD_DEFINE_ERROR(ConfigError)

#undef MVBD_DEFINE_ERROR

}  // namespace mvbd
