#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace patopa {

/// Failure categories surfaced by the library. The CLI maps each one to a
/// distinct exit code.
enum class ErrorCategory {
  kInvalidArgument,
  kSingularSystem,
  kNongenericTls,
  kCannotNormalize,
  kIterationFailure,
  kInsufficientData,
  kParseError,
  kIoError,
};

constexpr std::string_view to_string(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kInvalidArgument: return "invalid-argument";
    case ErrorCategory::kSingularSystem: return "singular-system";
    case ErrorCategory::kNongenericTls: return "nongeneric-tls";
    case ErrorCategory::kCannotNormalize: return "cannot-normalize";
    case ErrorCategory::kIterationFailure: return "iteration-failure";
    case ErrorCategory::kInsufficientData: return "insufficient-data";
    case ErrorCategory::kParseError: return "parse-error";
    case ErrorCategory::kIoError: return "io-error";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error(ErrorCategory::kInvalidArgument, what) {}
};

class SingularSystem : public Error {
 public:
  SingularSystem(const std::string& what, long rank, long dimension)
      : Error(ErrorCategory::kSingularSystem, what), rank_(rank), dimension_(dimension) {}

  long rank() const noexcept { return rank_; }
  long dimension() const noexcept { return dimension_; }

 private:
  long rank_;
  long dimension_;
};

class NongenericTls : public Error {
 public:
  explicit NongenericTls(const std::string& what)
      : Error(ErrorCategory::kNongenericTls, what) {}
};

class CannotNormalize : public Error {
 public:
  explicit CannotNormalize(const std::string& what)
      : Error(ErrorCategory::kCannotNormalize, what) {}
};

class IterationFailure : public Error {
 public:
  IterationFailure(const std::string& what, int iteration)
      : Error(ErrorCategory::kIterationFailure, what), iteration_(iteration) {}

  /// Iteration (or search probe) index at which the failure happened.
  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

class InsufficientData : public Error {
 public:
  InsufficientData(const std::string& what, long required_samples)
      : Error(ErrorCategory::kInsufficientData, what), required_samples_(required_samples) {}

  long required_samples() const noexcept { return required_samples_; }

 private:
  long required_samples_;
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error(ErrorCategory::kParseError, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCategory::kIoError, what) {}
};

}  // namespace patopa
