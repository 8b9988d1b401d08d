#pragma once

#include <stdexcept>
#include <string>

namespace qplab {

/// Base class for every error raised by the library. `name()` is the stable
/// identifier the CLI prints on standard error.
class error : public std::runtime_error {
 public:
  error(std::string name, const std::string& what)
      : std::runtime_error(name + ": " + what), name_(std::move(name)) {}

  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

#define QPLAB_DEFINE_ERROR(Type)                                   \
  class Type : public error {                                      \
   public:                                                         \
    explicit Type(const std::string& what) : error(#Type, what) {} \
  };

QPLAB_DEFINE_ERROR(StripExceeded)
QPLAB_DEFINE_ERROR(SingularEnergy)
QPLAB_DEFINE_ERROR(SigmaOutOfRange)
QPLAB_DEFINE_ERROR(PavingFailed)
QPLAB_DEFINE_ERROR(IterationDiverged)
QPLAB_DEFINE_ERROR(PotentialConstant)
QPLAB_DEFINE_ERROR(HypothesisUnmet)
QPLAB_DEFINE_ERROR(DescentExhausted)
QPLAB_DEFINE_ERROR(GateFailed)
QPLAB_DEFINE_ERROR(DropExceeded)
QPLAB_DEFINE_ERROR(ConfigInvalid)

#undef QPLAB_DEFINE_ERROR

}  // namespace qplab
