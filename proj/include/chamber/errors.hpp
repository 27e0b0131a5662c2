#pragma once

#include <stdexcept>
#include <string>

namespace chamber {

// Root of every error the library throws. type_name() is the stable,
// machine-parseable tag used by the CLI and the control API.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* type_name() const noexcept { return "Error"; }
};

#define CHAMBER_DEFINE_ERROR(Name, Base)                              \
  class Name : public Base {                                          \
   public:                                                            \
    using Base::Base;                                                 \
    const char* type_name() const noexcept override { return #Name; } \
  };

CHAMBER_DEFINE_ERROR(ParseError, Error)
CHAMBER_DEFINE_ERROR(IoError, Error)
CHAMBER_DEFINE_ERROR(TemplateError, Error)
CHAMBER_DEFINE_ERROR(ExtractionError, Error)
CHAMBER_DEFINE_ERROR(EmptyResponseError, Error)
CHAMBER_DEFINE_ERROR(PhaseError, Error)
CHAMBER_DEFINE_ERROR(FinishedError, Error)
CHAMBER_DEFINE_ERROR(UnknownAgentError, Error)
CHAMBER_DEFINE_ERROR(PairingError, Error)
CHAMBER_DEFINE_ERROR(RangeError, Error)
CHAMBER_DEFINE_ERROR(UnknownRaterError, Error)
CHAMBER_DEFINE_ERROR(LengthMismatchError, Error)
CHAMBER_DEFINE_ERROR(DegenerateInputError, Error)
CHAMBER_DEFINE_ERROR(DomainError, Error)
CHAMBER_DEFINE_ERROR(NoRunError, Error)

// An invariant violation. field() names the offending field.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& message)
      : Error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}
  const char* type_name() const noexcept override { return "ValidationError"; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class TimestepOrderError : public ValidationError {
 public:
  explicit TimestepOrderError(const std::string& message) : ValidationError("timestep", message) {}
  const char* type_name() const noexcept override { return "TimestepOrderError"; }
};

#undef CHAMBER_DEFINE_ERROR

}  // namespace chamber
