#pragma once

// Disentangled 2D motion: root-centred local pose scaled by the per-frame
// bounding-box half extent, plus the root trajectory and that scale.
//
//   joint_j = local_j * scale + trajectory   (non-root joints)
//   root    = trajectory

#include <Eigen/Core>
#include <algorithm>
#include <vector>

#include "mocap/error.hpp"
#include "mocap/motion.hpp"

namespace mocap {

inline constexpr double kScaleFloor = 1e-3;  // pixels

struct DisentangledMotion {
  std::vector<Mat2X> local;               // per frame, 2 x (J-1), root removed
  std::vector<Eigen::Vector2d> trajectory;  // root pixel position
  std::vector<Eigen::Vector2d> scale;       // bbox half extents, floored
  int root_joint = 0;
  int view_index = 0;

  int frame_count() const { return static_cast<int>(trajectory.size()); }
  int joint_count() const { return local.empty() ? 0 : static_cast<int>(local[0].cols()) + 1; }
};

struct BoundingBoxes {
  std::vector<Eigen::Vector2d> centers;
  std::vector<Eigen::Vector2d> half_extents;
};

inline BoundingBoxes bbox_per_frame(const Motion2D& motion) {
  BoundingBoxes out;
  out.centers.reserve(motion.frame_count());
  out.half_extents.reserve(motion.frame_count());
  for (const auto& f : motion.frames) {
    const Eigen::Vector2d lo = f.rowwise().minCoeff();
    const Eigen::Vector2d hi = f.rowwise().maxCoeff();
    out.centers.push_back(0.5 * (lo + hi));
    out.half_extents.push_back((0.5 * (hi - lo)).cwiseMax(kScaleFloor));
  }
  return out;
}

// Index of joint j within the root-removed ordering.
inline int local_index(int joint, int root) { return joint < root ? joint : joint - 1; }

inline DisentangledMotion encode(const Motion2D& motion, int root_joint = 0) {
  const int joints = motion.joint_count();
  require(joints >= 2, ErrorKind::InvalidArgument, "encode: need at least two joints");
  require(root_joint >= 0 && root_joint < joints, ErrorKind::InvalidArgument,
          "encode: root joint out of range");
  const BoundingBoxes boxes = bbox_per_frame(motion);
  DisentangledMotion d;
  d.root_joint = root_joint;
  d.view_index = motion.view_index;
  d.trajectory.reserve(motion.frame_count());
  for (int t = 0; t < motion.frame_count(); ++t) {
    const Eigen::Vector2d root = motion.frames[t].col(root_joint);
    const Eigen::Vector2d s = boxes.half_extents[t];
    Mat2X local(2, joints - 1);
    for (int j = 0; j < joints; ++j) {
      if (j == root_joint) continue;
      local.col(local_index(j, root_joint)) = (motion.frames[t].col(j) - root).cwiseQuotient(s);
    }
    d.local.push_back(std::move(local));
    d.trajectory.push_back(root);
    d.scale.push_back(s);
  }
  return d;
}

inline Motion2D decode(const DisentangledMotion& d) {
  const int joints = d.joint_count();
  Motion2D out(d.frame_count(), joints, d.view_index);
  for (int t = 0; t < d.frame_count(); ++t) {
    for (int j = 0; j < joints; ++j) {
      if (j == d.root_joint) {
        out.frames[t].col(j) = d.trajectory[t];
      } else {
        out.frames[t].col(j) =
            d.local[t].col(local_index(j, d.root_joint)).cwiseProduct(d.scale[t]) + d.trajectory[t];
      }
    }
  }
  return out;
}

}  // namespace mocap
