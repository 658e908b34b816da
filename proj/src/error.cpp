#include "ditto/error.hpp"

namespace ditto {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::InvalidDepth: return "InvalidDepth";
    case ErrorKind::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorKind::NoConsensus: return "NoConsensus";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::EmptyCloud: return "EmptyCloud";
    case ErrorKind::BehindCamera: return "BehindCamera";
    case ErrorKind::EmptyMask: return "EmptyMask";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::EmptyCorrespondences: return "EmptyCorrespondences";
    case ErrorKind::MissingGoalPose: return "MissingGoalPose";
    case ErrorKind::NoGraspOnObject: return "NoGraspOnObject";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::InsufficientBundles: return "InsufficientBundles";
    case ErrorKind::StepFailed: return "StepFailed";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Malformed: return "Malformed";
  }
  return "Unknown";
}

Error Error::step_failed(std::size_t step, const Error& cause) {
  Error e(ErrorKind::StepFailed, "step " + std::to_string(step) + " failed: " +
                                     to_string(cause.kind()) + ": " + cause.what());
  e.step_ = step;
  e.cause_ = cause.kind();
  return e;
}

}  // namespace ditto
