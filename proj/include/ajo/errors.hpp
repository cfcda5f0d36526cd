#pragma once

#include <stdexcept>
#include <string>

namespace ajo {

// Every failure surfaced by the library carries a stable kind name so the CLI
// can map it to a user-facing message without leaking internals.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define AJO_DEFINE_ERROR(Name)                                          \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& what) : Error(#Name, what) {}      \
  };

AJO_DEFINE_ERROR(PreconditionError)
AJO_DEFINE_ERROR(OverlapError)
AJO_DEFINE_ERROR(BandOrderError)
AJO_DEFINE_ERROR(RangeError)
AJO_DEFINE_ERROR(OutOfBandError)
AJO_DEFINE_ERROR(SchemaError)
AJO_DEFINE_ERROR(StabilityError)
AJO_DEFINE_ERROR(ZeroCouplingError)
AJO_DEFINE_ERROR(EmptyImageError)
AJO_DEFINE_ERROR(TooSmallError)
AJO_DEFINE_ERROR(ZeroIntensityError)
AJO_DEFINE_ERROR(NormalizationError)
AJO_DEFINE_ERROR(DuplicateArgumentError)
AJO_DEFINE_ERROR(NoSiteError)
AJO_DEFINE_ERROR(EmptyColumnError)
AJO_DEFINE_ERROR(SizeError)
AJO_DEFINE_ERROR(BudgetError)
AJO_DEFINE_ERROR(ConfigError)
AJO_DEFINE_ERROR(VersionError)
AJO_DEFINE_ERROR(IoError)

#undef AJO_DEFINE_ERROR

class ParseError : public Error {
 public:
  ParseError(int line, const std::string& what)
      : Error("ParseError", "line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace ajo
