#pragma once

// Monocular lifting by reverse diffusion over virtual views. Every clean
// estimate is made multi-view consistent (decode, triangulate, reproject,
// re-encode) before the posterior step.

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "mocap/denoiser.hpp"
#include "mocap/diffusion.hpp"
#include "mocap/geometry.hpp"
#include "mocap/motion_tensor.hpp"
#include "mocap/representation.hpp"

namespace mocap {

struct ConsistentViews {
  Motion3D motion;
  std::vector<Motion2D> views;  // project(rig, motion)
};

inline ConsistentViews consistency_project(const CameraRig& rig, const std::vector<Motion2D>& views) {
  require(rig.view_count() >= 2, ErrorKind::InsufficientViews,
          "consistency projection needs at least two views");
  ConsistentViews out;
  out.motion = triangulate(rig, views);
  out.views = project(rig, out.motion);
  return out;
}

inline std::pair<Motion3D, std::vector<DisentangledMotion>> consistency_project(
    const CameraRig& rig, const std::vector<DisentangledMotion>& per_view) {
  require(static_cast<int>(per_view.size()) == rig.view_count(), ErrorKind::ShapeMismatch,
          "consistency projection: one representation per camera required");
  std::vector<Motion2D> global;
  for (const auto& d : per_view) global.push_back(decode(d));
  ConsistentViews c = consistency_project(rig, global);
  std::vector<DisentangledMotion> enc;
  for (std::size_t v = 0; v < per_view.size(); ++v) {
    enc.push_back(encode(c.views[v], per_view[v].root_joint));
    enc.back().view_index = static_cast<int>(v);
  }
  return {std::move(c.motion), std::move(enc)};
}

// Same operation on a network tensor; returns the consistent tensor.
inline MotionTensor consistency_project(const CameraRig& rig, const MotionTensor& x,
                                        const TensorLayout& layout, Motion3D* motion = nullptr,
                                        double* residual_before = nullptr) {
  const std::vector<Motion2D> views = layout.unpack(x, rig);
  ConsistentViews c = consistency_project(rig, views);
  if (residual_before) *residual_before = reprojection_residual(rig, views, c.motion);
  MotionTensor out(x.views, x.frames, x.rows);
  for (int v = 0; v < x.views; ++v) layout.write_view(out, v, c.views[v], rig.cameras[v]);
  if (motion) *motion = std::move(c.motion);
  return out;
}

struct LiftResult {
  Motion3D motion3d;
  std::vector<Motion2D> per_view_2d;
  // Cross-view reprojection residual (px) after the consistency projection,
  // one entry per denoising step in execution order (n = N-1 .. 0).
  std::vector<double> per_step_residuals;
  // Same, measured on the raw denoiser estimate before projection.
  std::vector<double> pre_projection_residuals;
  std::uint64_t seed = 0;
};

inline bool all_finite(const MotionTensor& x) { return x.values.allFinite(); }

inline LiftResult lift(const Motion2D& m0, const CameraRig& rig, const Denoiser& model,
                       const DiffusionSchedule& schedule, std::uint64_t seed,
                       int pointmap_grid = kDefaultPointmapGrid) {
  validate(rig);
  require(rig.view_count() >= 2, ErrorKind::InsufficientViews, "lift needs at least two views");
  require(m0.frame_count() >= 1 && m0.all_finite(), ErrorKind::InvalidArgument,
          "lift: primary-view motion must be non-empty and finite");
  const TensorLayout layout = model.layout();
  require(m0.joint_count() == layout.joints, ErrorKind::ShapeMismatch,
          "lift: joint count does not match the model");

  Conditioning cond{m0, rig, pointmap_generate(rig, pointmap_grid)};
  std::mt19937_64 rng(seed);
  MotionTensor x = gaussian_like(MotionTensor(rig.view_count(), m0.frame_count(), layout.rows()), rng);

  LiftResult out;
  out.seed = seed;
  MotionTensor x0;
  for (int n = schedule.steps() - 1; n >= 0; --n) {
    const MotionTensor x0_hat = model.predict(x, n, cond);
    require(x0_hat.same_shape(x), ErrorKind::ShapeMismatch, "denoiser output shape");
    if (!all_finite(x0_hat))
      throw Error(ErrorKind::NonFiniteState, "denoiser produced non-finite values at step " +
                                                 std::to_string(n));
    double before = 0;
    x0 = consistency_project(rig, x0_hat, layout, &out.motion3d, &before);
    out.pre_projection_residuals.push_back(before);
    out.per_step_residuals.push_back(reprojection_residual(rig, layout.unpack(x0, rig), out.motion3d));
    if (n > 0) {
      x = posterior_step(x, x0, n, schedule, gaussian_like(x, rng));
      if (!all_finite(x))
        throw Error(ErrorKind::NonFiniteState, "non-finite sample at step " + std::to_string(n));
    }
  }
  out.per_view_2d = project(rig, out.motion3d);
  return out;
}

}  // namespace mocap
