#pragma once

#include <stdexcept>
#include <string>

namespace mocap {

enum class ErrorKind {
  NonPositiveDepth,
  InsufficientViews,
  DegenerateGeometry,
  DegenerateConfiguration,
  ShapeMismatch,
  BadStepCount,
  ModeMismatch,
  DatasetModeMismatch,
  UnknownKind,
  NonFiniteState,
  NonFiniteCost,
  TooShort,
  InvalidArgument,
  Parse,
  Io,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorKind::InsufficientViews: return "InsufficientViews";
    case ErrorKind::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorKind::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::BadStepCount: return "BadStepCount";
    case ErrorKind::ModeMismatch: return "ModeMismatch";
    case ErrorKind::DatasetModeMismatch: return "DatasetModeMismatch";
    case ErrorKind::UnknownKind: return "UnknownKind";
    case ErrorKind::NonFiniteState: return "NonFiniteState";
    case ErrorKind::NonFiniteCost: return "NonFiniteCost";
    case ErrorKind::TooShort: return "TooShort";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Parse: return "Parse";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

// Every failure the library reports. `frame`/`joint` are -1 when not tied to
// a specific sample point.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what, int frame = -1, int joint = -1)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind), frame_(frame), joint_(joint) {}

  ErrorKind kind() const { return kind_; }
  int frame() const { return frame_; }
  int joint() const { return joint_; }

 private:
  ErrorKind kind_;
  int frame_;
  int joint_;
};

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

}  // namespace mocap
