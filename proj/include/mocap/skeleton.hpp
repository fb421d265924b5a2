#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "mocap/error.hpp"
#include "mocap/motion.hpp"

namespace mocap {

// Joint tree with rest offsets expressed in the body frame (x forward,
// y left, z up). parent[root] == root.
struct Skeleton {
  std::string name;
  std::vector<int> parent;
  std::vector<Eigen::Vector3d> offsets;
  std::vector<std::string> joint_names;
  std::vector<int> feet;
  int root = 0;

  int joint_count() const { return static_cast<int>(parent.size()); }

  double rest_length(int j) const { return j == root ? 0.0 : offsets[j].norm(); }

  std::vector<double> rest_bone_lengths() const {
    std::vector<double> out(joint_count());
    for (int j = 0; j < joint_count(); ++j) out[j] = rest_length(j);
    return out;
  }

  // Joints ordered so that every parent precedes its children.
  std::vector<int> topological_order() const {
    std::vector<int> order{root};
    for (std::size_t i = 0; i < order.size(); ++i)
      for (int j = 0; j < joint_count(); ++j)
        if (j != root && parent[j] == order[i]) order.push_back(j);
    return order;
  }
};

inline void validate(const Skeleton& s) {
  const int n = s.joint_count();
  require(n >= 2, ErrorKind::InvalidArgument, "skeleton needs at least two joints");
  require(static_cast<int>(s.offsets.size()) == n && static_cast<int>(s.joint_names.size()) == n,
          ErrorKind::InvalidArgument, "skeleton arrays disagree in length");
  require(s.root >= 0 && s.root < n && s.parent[s.root] == s.root, ErrorKind::InvalidArgument,
          "skeleton root must be its own parent");
  for (int j = 0; j < n; ++j) {
    require(s.parent[j] >= 0 && s.parent[j] < n, ErrorKind::InvalidArgument,
            "parent index out of range");
    if (j != s.root) {
      require(s.parent[j] != j, ErrorKind::InvalidArgument, "skeleton has more than one root");
      require(s.rest_length(j) > 0, ErrorKind::InvalidArgument, "bone lengths must be positive");
    }
  }
  require(static_cast<int>(s.topological_order().size()) == n, ErrorKind::InvalidArgument,
          "skeleton parent array is cyclic or disconnected");
  for (int f : s.feet)
    require(f >= 0 && f < n, ErrorKind::InvalidArgument, "foot index out of range");
}

// Default 8-joint body: pelvis, chest, head, hips, feet and a single hands
// marker in front of the chest.
inline Skeleton toy8() {
  Skeleton s;
  s.name = "toy8";
  s.joint_names = {"pelvis", "chest", "head", "left_hip", "left_foot", "right_hip", "right_foot",
                   "hands"};
  s.parent = {0, 0, 1, 0, 3, 0, 5, 1};
  s.offsets = {{0, 0, 0},     {0, 0, 0.45},     {0, 0, 0.30},  {0, 0.12, -0.05},
               {0, 0, -0.85}, {0, -0.12, -0.05}, {0, 0, -0.85}, {0.25, 0, -0.25}};
  s.feet = {4, 6};
  return s;
}

inline Skeleton smpl22() {
  Skeleton s;
  s.name = "smpl22";
  s.joint_names = {"pelvis",         "left_hip",      "right_hip",   "spine1",      "left_knee",
                   "right_knee",     "spine2",        "left_ankle",  "right_ankle", "spine3",
                   "left_foot",      "right_foot",    "neck",        "left_collar", "right_collar",
                   "head",           "left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
                   "left_wrist",     "right_wrist"};
  s.parent = {0, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19};
  s.offsets = {{0, 0, 0},        {0, 0.09, -0.08},  {0, -0.09, -0.08}, {0, 0, 0.11},
               {0, 0.01, -0.38}, {0, -0.01, -0.38}, {0, 0, 0.13},      {0, 0, -0.40},
               {0, 0, -0.40},    {0, 0, 0.05},      {0.12, 0, -0.05},  {0.12, 0, -0.05},
               {0, 0, 0.21},     {0, 0.07, 0.12},   {0, -0.07, 0.12},  {0.03, 0, 0.09},
               {0, 0.12, 0.03},  {0, -0.12, 0.03},  {0, 0.26, 0},      {0, -0.26, 0},
               {0, 0.25, 0},     {0, -0.25, 0}};
  s.feet = {10, 11};
  return s;
}

// COCO keypoints rooted at the left hip.
inline Skeleton coco17() {
  Skeleton s;
  s.name = "coco17";
  s.root = 11;
  s.joint_names = {"nose",       "left_eye",    "right_eye",      "left_ear",     "right_ear",
                   "left_shoulder", "right_shoulder", "left_elbow", "right_elbow", "left_wrist",
                   "right_wrist", "left_hip",   "right_hip",      "left_knee",    "right_knee",
                   "left_ankle", "right_ankle"};
  s.parent = {5, 0, 0, 1, 2, 11, 12, 5, 6, 7, 8, 11, 11, 11, 12, 13, 14};
  s.offsets = {{0.10, -0.18, 0.20}, {-0.02, 0.035, 0.035}, {-0.02, -0.035, 0.035},
               {-0.07, 0.035, 0},   {-0.07, -0.035, 0},    {0, 0.04, 0.52},
               {0, -0.04, 0.52},    {0, 0.03, -0.28},      {0, -0.03, -0.28},
               {0, 0, -0.26},       {0, 0, -0.26},         {0, 0, 0},
               {0, -0.20, 0},       {0, 0, -0.42},         {0, 0, -0.42},
               {0, 0, -0.42},       {0, 0, -0.42}};
  s.feet = {15, 16};
  return s;
}

inline Skeleton skeleton_by_name(const std::string& name) {
  if (name == "toy8") return toy8();
  if (name == "smpl22") return smpl22();
  if (name == "coco17") return coco17();
  throw Error(ErrorKind::UnknownKind, "unknown skeleton '" + name + "'");
}

// Distance from each joint to its parent; zero for the root.
inline std::vector<double> bone_lengths(const Mat3X& frame, const Skeleton& s) {
  std::vector<double> out(s.joint_count(), 0.0);
  for (int j = 0; j < s.joint_count(); ++j)
    if (j != s.root) out[j] = (frame.col(j) - frame.col(s.parent[j])).norm();
  return out;
}

}  // namespace mocap
