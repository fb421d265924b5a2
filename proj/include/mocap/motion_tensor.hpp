#pragma once

// Network-facing layout of per-view 2D motion.
//
// Decoupled layout, per view and frame, J+1 rows:
//   rows 0..J-2  root-centred local pose (dimensionless)
//   row  J-1     trajectory / (image_w, image_h)
//   row  J       scale / (image_w, image_h)
// Direct layout (ablation): rows 0..J-1 hold global joints / (image_w,
// image_h) and row J is zero.

#include <vector>

#include "mocap/diffusion.hpp"
#include "mocap/geometry.hpp"
#include "mocap/motion.hpp"
#include "mocap/representation.hpp"

namespace mocap {

struct TensorLayout {
  int joints = 8;
  int root_joint = 0;
  bool decoupled = true;

  int rows() const { return joints + 1; }

  void write_view(MotionTensor& out, int v, const Motion2D& view, const Camera& cam) const {
    require(view.joint_count() == joints && view.frame_count() == out.frames,
            ErrorKind::ShapeMismatch, "motion tensor: view shape does not match layout");
    const Eigen::Vector2d dims(cam.image_w, cam.image_h);
    if (decoupled) {
      const DisentangledMotion d = encode(view, root_joint);
      write_view(out, v, d, cam);
      return;
    }
    for (int t = 0; t < out.frames; ++t) {
      for (int j = 0; j < joints; ++j)
        for (int c = 0; c < 2; ++c) out.at(v, t, j, c) = view.frames[t](c, j) / dims[c];
      out.at(v, t, joints, 0) = out.at(v, t, joints, 1) = 0.0;
    }
  }

  void write_view(MotionTensor& out, int v, const DisentangledMotion& d, const Camera& cam) const {
    require(decoupled, ErrorKind::InvalidArgument, "direct layout has no disentangled form");
    const Eigen::Vector2d dims(cam.image_w, cam.image_h);
    for (int t = 0; t < out.frames; ++t) {
      for (int k = 0; k < joints - 1; ++k)
        for (int c = 0; c < 2; ++c) out.at(v, t, k, c) = d.local[t](c, k);
      for (int c = 0; c < 2; ++c) {
        out.at(v, t, joints - 1, c) = d.trajectory[t][c] / dims[c];
        out.at(v, t, joints, c) = d.scale[t][c] / dims[c];
      }
    }
  }

  MotionTensor pack(const std::vector<Motion2D>& views, const CameraRig& rig) const {
    require(static_cast<int>(views.size()) == rig.view_count(), ErrorKind::ShapeMismatch,
            "pack: one view per camera required");
    MotionTensor out(rig.view_count(), views.at(0).frame_count(), rows());
    for (int v = 0; v < rig.view_count(); ++v) write_view(out, v, views[v], rig.cameras[v]);
    return out;
  }

  MotionTensor pack(const std::vector<DisentangledMotion>& views, const CameraRig& rig) const {
    require(static_cast<int>(views.size()) == rig.view_count(), ErrorKind::ShapeMismatch,
            "pack: one view per camera required");
    MotionTensor out(rig.view_count(), views.at(0).frame_count(), rows());
    for (int v = 0; v < rig.view_count(); ++v) write_view(out, v, views[v], rig.cameras[v]);
    return out;
  }

  // Single view packed as a one-view tensor.
  MotionTensor pack_single(const Motion2D& view, const Camera& cam) const {
    MotionTensor out(1, view.frame_count(), rows());
    write_view(out, 0, view, cam);
    return out;
  }

  DisentangledMotion read_disentangled(const MotionTensor& x, int v, const Camera& cam) const {
    require(decoupled, ErrorKind::InvalidArgument, "direct layout has no disentangled form");
    require(x.rows == rows(), ErrorKind::ShapeMismatch, "motion tensor row count");
    const Eigen::Vector2d dims(cam.image_w, cam.image_h);
    DisentangledMotion d;
    d.root_joint = root_joint;
    d.view_index = v;
    for (int t = 0; t < x.frames; ++t) {
      Mat2X local(2, joints - 1);
      for (int k = 0; k < joints - 1; ++k)
        for (int c = 0; c < 2; ++c) local(c, k) = x.at(v, t, k, c);
      d.local.push_back(std::move(local));
      d.trajectory.emplace_back(x.at(v, t, joints - 1, 0) * dims[0],
                                x.at(v, t, joints - 1, 1) * dims[1]);
      d.scale.emplace_back(x.at(v, t, joints, 0) * dims[0], x.at(v, t, joints, 1) * dims[1]);
    }
    return d;
  }

  Motion2D read_view(const MotionTensor& x, int v, const Camera& cam) const {
    if (decoupled) return decode(read_disentangled(x, v, cam));
    require(x.rows == rows(), ErrorKind::ShapeMismatch, "motion tensor row count");
    Motion2D out(x.frames, joints, v);
    for (int t = 0; t < x.frames; ++t)
      for (int j = 0; j < joints; ++j) {
        out.frames[t](0, j) = x.at(v, t, j, 0) * cam.image_w;
        out.frames[t](1, j) = x.at(v, t, j, 1) * cam.image_h;
      }
    return out;
  }

  std::vector<Motion2D> unpack(const MotionTensor& x, const CameraRig& rig) const {
    require(x.views == rig.view_count(), ErrorKind::ShapeMismatch, "unpack: view count");
    std::vector<Motion2D> out;
    for (int v = 0; v < x.views; ++v) out.push_back(read_view(x, v, rig.cameras[v]));
    return out;
  }
};

}  // namespace mocap
