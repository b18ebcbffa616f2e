#pragma once

#include <stdexcept>
#include <string>

namespace padic_density {

// Base for every error raised by the library. name() is the stable identifier
// reported by the command-line front end.
class Error : public std::runtime_error {
 public:
  Error(std::string name, const std::string& what)
      : std::runtime_error(what), name_(std::move(name)) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

#define PADIC_DENSITY_DEFINE_ERROR(Type)                                  \
  class Type : public Error {                                             \
   public:                                                                \
    explicit Type(const std::string& what) : Error(#Type, what) {}       \
  };

PADIC_DENSITY_DEFINE_ERROR(NonUnit)
PADIC_DENSITY_DEFINE_ERROR(SpecMismatch)
PADIC_DENSITY_DEFINE_ERROR(PrecisionExhausted)
PADIC_DENSITY_DEFINE_ERROR(InternalInconsistency)
PADIC_DENSITY_DEFINE_ERROR(NonConvergent)
PADIC_DENSITY_DEFINE_ERROR(BudgetExceeded)
PADIC_DENSITY_DEFINE_ERROR(InvalidInput)
PADIC_DENSITY_DEFINE_ERROR(DegenerateForm)

#undef PADIC_DENSITY_DEFINE_ERROR

}  // namespace padic_density
