#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace freedenoise {

// Exit-code category used by the CLI: Input maps to exit 2, Numeric to exit 3.
enum class ErrorCategory { Input, Numeric };

class Error : public std::runtime_error {
 public:
  Error(std::string type, ErrorCategory category, const std::string& message)
      : std::runtime_error(message), type_(std::move(type)), category_(category) {}

  const std::string& type() const noexcept { return type_; }
  ErrorCategory category() const noexcept { return category_; }

 private:
  std::string type_;
  ErrorCategory category_;
};

#define FREEDENOISE_DEFINE_ERROR(Name, Cat)                                  \
  class Name : public Error {                                                \
   public:                                                                   \
    explicit Name(const std::string& message)                                \
        : Error(#Name, ErrorCategory::Cat, message) {}                       \
  };

FREEDENOISE_DEFINE_ERROR(EmptyMeasure, Input)
FREEDENOISE_DEFINE_ERROR(DomainViolation, Input)
FREEDENOISE_DEFINE_ERROR(NormalizationError, Input)
FREEDENOISE_DEFINE_ERROR(UnknownBuiltin, Input)
FREEDENOISE_DEFINE_ERROR(DimensionMismatch, Input)
FREEDENOISE_DEFINE_ERROR(UnsupportedCase, Input)
FREEDENOISE_DEFINE_ERROR(ParseError, Input)
FREEDENOISE_DEFINE_ERROR(NonFiniteIntegrand, Numeric)
FREEDENOISE_DEFINE_ERROR(PoleOnSupport, Numeric)
FREEDENOISE_DEFINE_ERROR(MassDefect, Numeric)
FREEDENOISE_DEFINE_ERROR(NoConvergence, Numeric)
FREEDENOISE_DEFINE_ERROR(UnstableLimit, Numeric)
FREEDENOISE_DEFINE_ERROR(UndefinedAtPoint, Numeric)
FREEDENOISE_DEFINE_ERROR(DegenerateFirstMoment, Numeric)
FREEDENOISE_DEFINE_ERROR(InsufficientData, Numeric)

#undef FREEDENOISE_DEFINE_ERROR

}  // namespace freedenoise
