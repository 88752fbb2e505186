#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace btk {

enum class ErrorCode {
  SingularFactor,
  GroupoidViolation,
  ShapeMismatch,
  GridMismatch,
  NotConsistent,
  SingularFibreMap,
  DegenerateMetric,
  NotSymmetric,
  InvalidConjugatorPair,
  BadInvolution,
  SignatureVaries,
  InvalidArgument,
  SchemaError,
  DimensionMismatch,
  NonFiniteEntry,
  UnknownCheck,
  MissingEntity,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::SingularFactor: return "SingularFactor";
    case ErrorCode::GroupoidViolation: return "GroupoidViolation";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::NotConsistent: return "NotConsistent";
    case ErrorCode::SingularFibreMap: return "SingularFibreMap";
    case ErrorCode::DegenerateMetric: return "DegenerateMetric";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::InvalidConjugatorPair: return "InvalidConjugatorPair";
    case ErrorCode::BadInvolution: return "BadInvolution";
    case ErrorCode::SignatureVaries: return "SignatureVaries";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteEntry: return "NonFiniteEntry";
    case ErrorCode::UnknownCheck: return "UnknownCheck";
    case ErrorCode::MissingEntity: return "MissingEntity";
  }
  return "Unknown";
}

/// Single exception type for the library; `code()` identifies the failure class.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace btk
