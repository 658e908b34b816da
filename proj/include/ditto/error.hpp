#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace ditto {

enum class ErrorKind {
  InvalidArgument,
  InvalidDepth,
  DegenerateConfiguration,
  NoConsensus,
  DimensionMismatch,
  EmptyCloud,
  BehindCamera,
  EmptyMask,
  EmptyInput,
  EmptyCorrespondences,
  MissingGoalPose,
  NoGraspOnObject,
  LengthMismatch,
  ConfigInvalid,
  InsufficientBundles,
  StepFailed,
  Io,
  Malformed,
};

const char* to_string(ErrorKind kind);

/// Every failure in the library surfaces as this exception. `kind()` is the
/// stable classification; StepFailed additionally carries the failing step
/// and the kind of the underlying error.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  static Error step_failed(std::size_t step, const Error& cause);

  ErrorKind kind() const noexcept { return kind_; }
  std::optional<std::size_t> step() const noexcept { return step_; }
  std::optional<ErrorKind> cause() const noexcept { return cause_; }

 private:
  ErrorKind kind_;
  std::optional<std::size_t> step_;
  std::optional<ErrorKind> cause_;
};

}  // namespace ditto
