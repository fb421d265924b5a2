#pragma once

#include <Eigen/Core>
#include <cmath>
#include <string>
#include <vector>

#include "mocap/error.hpp"

namespace mocap {

using Mat2X = Eigen::Matrix2Xd;
using Mat3X = Eigen::Matrix3Xd;

// T frames of J world-space joints in meters; frames[t].col(j) is joint j.
struct Motion3D {
  std::vector<Mat3X> frames;
  double fps = 30.0;

  Motion3D() = default;
  Motion3D(int t, int j, double fps_ = 30.0) : frames(t, Mat3X::Zero(3, j)), fps(fps_) {}

  int frame_count() const { return static_cast<int>(frames.size()); }
  int joint_count() const { return frames.empty() ? 0 : static_cast<int>(frames[0].cols()); }

  bool all_finite() const {
    for (const auto& f : frames)
      if (!f.allFinite()) return false;
    return true;
  }
};

// T frames of J image-space joints in pixels (one camera view).
struct Motion2D {
  std::vector<Mat2X> frames;
  int view_index = 0;

  Motion2D() = default;
  Motion2D(int t, int j, int view = 0) : frames(t, Mat2X::Zero(2, j)), view_index(view) {}

  int frame_count() const { return static_cast<int>(frames.size()); }
  int joint_count() const { return frames.empty() ? 0 : static_cast<int>(frames[0].cols()); }

  bool all_finite() const {
    for (const auto& f : frames)
      if (!f.allFinite()) return false;
    return true;
  }
};

template <class M>
void require_same_shape(const M& a, const M& b, const char* what) {
  if (a.frame_count() != b.frame_count() || a.joint_count() != b.joint_count())
    throw Error(ErrorKind::ShapeMismatch,
                std::string(what) + ": " + std::to_string(a.frame_count()) + "x" +
                    std::to_string(a.joint_count()) + " vs " + std::to_string(b.frame_count()) +
                    "x" + std::to_string(b.joint_count()));
}

// Largest per-joint distance between two motions (meters or pixels).
template <class M>
double max_joint_distance(const M& a, const M& b) {
  require_same_shape(a, b, "max_joint_distance");
  double worst = 0.0;
  for (int t = 0; t < a.frame_count(); ++t)
    worst = std::max(worst, (a.frames[t] - b.frames[t]).colwise().norm().maxCoeff());
  return worst;
}

}  // namespace mocap
