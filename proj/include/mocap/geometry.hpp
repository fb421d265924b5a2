#pragma once

// Pinhole cameras, projection, DLT triangulation and ground-plane pointmaps.
// World frame is z-up with the ground plane at z = 0.

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "mocap/error.hpp"
#include "mocap/motion.hpp"

namespace mocap {

struct Camera {
  double fx = 1000.0, fy = 1000.0;
  double cx = 500.0, cy = 500.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // world -> camera
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();   // world -> camera
  int image_w = 1000, image_h = 1000;

  Eigen::Vector3d to_camera(const Eigen::Vector3d& xw) const { return rotation * xw + translation; }
  Eigen::Vector3d center() const { return -rotation.transpose() * translation; }

  Eigen::Matrix3d intrinsics() const {
    Eigen::Matrix3d k;
    k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
    return k;
  }

  // 3x4 matrix K [R | t].
  Eigen::Matrix<double, 3, 4> projection_matrix() const {
    Eigen::Matrix<double, 3, 4> rt;
    rt.leftCols<3>() = rotation;
    rt.col(3) = translation;
    return intrinsics() * rt;
  }

  // Unnormalized world-space direction of the ray through a pixel.
  Eigen::Vector3d ray_direction(const Eigen::Vector2d& px) const {
    Eigen::Vector3d dc((px.x() - cx) / fx, (px.y() - cy) / fy, 1.0);
    return rotation.transpose() * dc;
  }
};

// Rotation checks shared by validation and parsers.
inline bool is_rotation(const Eigen::Matrix3d& r, double tol = 1e-9) {
  return (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < tol &&
         std::abs(r.determinant() - 1.0) < tol;
}

inline void validate(const Camera& c) {
  require(c.fx > 0 && c.fy > 0, ErrorKind::InvalidArgument, "focal lengths must be positive");
  require(c.image_w > 0 && c.image_h > 0, ErrorKind::InvalidArgument,
          "image dimensions must be positive");
  require(is_rotation(c.rotation), ErrorKind::InvalidArgument,
          "camera rotation is not orthonormal with det +1");
  require(c.translation.allFinite(), ErrorKind::InvalidArgument, "non-finite translation");
}

// Camera at `eye` looking at `target`. Camera axes: x right, y down, z forward.
inline Camera look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, double fx = 1000.0,
                      double fy = 1000.0, int image_w = 1000, int image_h = 1000) {
  Eigen::Vector3d forward = (target - eye).normalized();
  Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
  if (forward.cross(up).norm() < 1e-6) up = Eigen::Vector3d::UnitY();
  Eigen::Vector3d right = forward.cross(up).normalized();
  Eigen::Vector3d down = forward.cross(right);
  Camera c;
  c.fx = fx;
  c.fy = fy;
  c.image_w = image_w;
  c.image_h = image_h;
  c.cx = image_w / 2.0;
  c.cy = image_h / 2.0;
  c.rotation.row(0) = right;
  c.rotation.row(1) = down;
  c.rotation.row(2) = forward;
  c.translation = -c.rotation * eye;
  return c;
}

struct CameraRig {
  std::vector<Camera> cameras;
  int primary_index = 0;

  int view_count() const { return static_cast<int>(cameras.size()); }
  const Camera& primary() const { return cameras.at(primary_index); }
};

inline void validate(const CameraRig& rig) {
  require(rig.view_count() >= 1, ErrorKind::InvalidArgument, "rig has no cameras");
  require(rig.primary_index >= 0 && rig.primary_index < rig.view_count(),
          ErrorKind::InvalidArgument, "primary_index out of range");
  for (const auto& c : rig.cameras) validate(c);
}

inline constexpr double kMinDepth = 1e-9;

inline Eigen::Vector2d project_point(const Camera& cam, const Eigen::Vector3d& xw, int frame = -1,
                                     int joint = -1) {
  const Eigen::Vector3d xc = cam.to_camera(xw);
  if (!(xc.z() > kMinDepth))
    throw Error(ErrorKind::NonPositiveDepth,
                "point at frame " + std::to_string(frame) + ", joint " + std::to_string(joint) +
                    " has depth " + std::to_string(xc.z()),
                frame, joint);
  return {cam.fx * xc.x() / xc.z() + cam.cx, cam.fy * xc.y() / xc.z() + cam.cy};
}

// Perspective projection of every joint of every frame. No clipping to the image.
inline Motion2D project(const Camera& cam, const Motion3D& motion, int view_index = 0) {
  Motion2D out(motion.frame_count(), motion.joint_count(), view_index);
  for (int t = 0; t < motion.frame_count(); ++t)
    for (int j = 0; j < motion.joint_count(); ++j)
      out.frames[t].col(j) = project_point(cam, motion.frames[t].col(j), t, j);
  return out;
}

inline std::vector<Motion2D> project(const CameraRig& rig, const Motion3D& motion) {
  std::vector<Motion2D> views;
  views.reserve(rig.cameras.size());
  for (int v = 0; v < rig.view_count(); ++v) views.push_back(project(rig.cameras[v], motion, v));
  return views;
}

// mask[v][t * J + j] != 0 marks an observation as usable.
using ObservationMask = std::vector<std::vector<char>>;

inline constexpr double kMaxConditionNumber = 1e10;

namespace detail {

struct PointSystem {
  Eigen::Matrix3d normal = Eigen::Matrix3d::Zero();
  Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
  int views = 0;

  // Adds the two DLT rows u(p3.X~) - p1.X~ = 0 and v(p3.X~) - p2.X~ = 0.
  void add(const Eigen::Matrix<double, 3, 4>& p, const Eigen::Vector2d& uv) {
    for (int r = 0; r < 2; ++r) {
      Eigen::RowVector3d a = uv[r] * p.block<1, 3>(2, 0) - p.block<1, 3>(r, 0);
      double b = p(r, 3) - uv[r] * p(2, 3);
      normal.noalias() += a.transpose() * a;
      rhs += a.transpose() * b;
    }
    ++views;
  }
};

inline Eigen::Vector3d solve_point(const PointSystem& sys, int frame, int joint) {
  if (sys.views < 2)
    throw Error(ErrorKind::InsufficientViews,
                "frame " + std::to_string(frame) + ", joint " + std::to_string(joint) + " has " +
                    std::to_string(sys.views) + " usable views",
                frame, joint);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(sys.normal);
  const double hi = eig.eigenvalues().maxCoeff();
  const double lo = eig.eigenvalues().minCoeff();
  if (!(lo > 0.0) || hi / lo > kMaxConditionNumber)
    throw Error(ErrorKind::DegenerateGeometry,
                "near-parallel rays at frame " + std::to_string(frame) + ", joint " +
                    std::to_string(joint),
                frame, joint);
  return sys.normal.ldlt().solve(sys.rhs);
}

}  // namespace detail

// Linear (inhomogeneous) least-squares DLT triangulation per frame and joint.
inline Motion3D triangulate(const CameraRig& rig, const std::vector<Motion2D>& observations,
                            const ObservationMask* mask = nullptr) {
  require(static_cast<int>(observations.size()) == rig.view_count(), ErrorKind::ShapeMismatch,
          "triangulate: one observation sequence per camera required");
  require(!observations.empty(), ErrorKind::InsufficientViews, "triangulate: no views");
  const int frames = observations[0].frame_count();
  const int joints = observations[0].joint_count();
  for (const auto& o : observations) require_same_shape(o, observations[0], "triangulate");
  if (mask) {
    require(static_cast<int>(mask->size()) == rig.view_count(), ErrorKind::ShapeMismatch,
            "triangulate: mask view count");
    for (const auto& m : *mask)
      require(static_cast<int>(m.size()) == frames * joints, ErrorKind::ShapeMismatch,
              "triangulate: mask size");
  }

  std::vector<Eigen::Matrix<double, 3, 4>> proj;
  for (const auto& c : rig.cameras) proj.push_back(c.projection_matrix());

  Motion3D out(frames, joints);
  for (int t = 0; t < frames; ++t) {
    for (int j = 0; j < joints; ++j) {
      detail::PointSystem sys;
      for (int v = 0; v < rig.view_count(); ++v) {
        if (mask && !(*mask)[v][t * joints + j]) continue;
        sys.add(proj[v], observations[v].frames[t].col(j));
      }
      out.frames[t].col(j) = detail::solve_point(sys, t, j);
    }
  }
  return out;
}

// Mean over views, frames and joints of the pixel distance between each
// observation and the reprojection of `motion`.
inline double reprojection_residual(const CameraRig& rig, const std::vector<Motion2D>& views,
                                    const Motion3D& motion) {
  double sum = 0.0;
  long count = 0;
  for (int v = 0; v < rig.view_count(); ++v) {
    const Motion2D reproj = project(rig.cameras[v], motion, v);
    for (int t = 0; t < motion.frame_count(); ++t) {
      sum += (reproj.frames[t] - views[v].frames[t]).colwise().norm().sum();
      count += motion.joint_count();
    }
  }
  return count ? sum / count : 0.0;
}

// Intersection of the pixel's ray with z = 0, if it lies in front of the camera.
inline std::optional<Eigen::Vector3d> ray_ground_intersect(const Camera& cam,
                                                           const Eigen::Vector2d& pixel) {
  const Eigen::Vector3d origin = cam.center();
  const Eigen::Vector3d dir = cam.ray_direction(pixel);
  if (std::abs(dir.z()) < 1e-12) return std::nullopt;
  const double lambda = -origin.z() / dir.z();
  if (!(lambda > 1e-12)) return std::nullopt;
  Eigen::Vector3d hit = origin + lambda * dir;
  hit.z() = 0.0;
  return hit;
}

struct Pointmap {
  int grid_w = 16, grid_h = 16;
  int view_index = 0;
  std::vector<Eigen::Vector3d> points;  // row-major, index = row * grid_w + col
  std::vector<char> valid;

  const Eigen::Vector3d& at(int row, int col) const { return points[row * grid_w + col]; }
  bool is_valid(int row, int col) const { return valid[row * grid_w + col] != 0; }

  int valid_count() const {
    int n = 0;
    for (char v : valid) n += v ? 1 : 0;
    return n;
  }
};

inline constexpr int kDefaultPointmapGrid = 16;

inline Eigen::Vector2d cell_center(const Camera& cam, int grid_w, int grid_h, int row, int col) {
  return {(col + 0.5) * cam.image_w / grid_w, (row + 0.5) * cam.image_h / grid_h};
}

inline Pointmap pointmap_generate(const Camera& cam, int grid_w = kDefaultPointmapGrid,
                                  int grid_h = kDefaultPointmapGrid, int view_index = 0) {
  require(grid_w >= 2 && grid_h >= 2, ErrorKind::InvalidArgument, "pointmap grid must be >= 2x2");
  Pointmap pm;
  pm.grid_w = grid_w;
  pm.grid_h = grid_h;
  pm.view_index = view_index;
  pm.points.assign(grid_w * grid_h, Eigen::Vector3d::Zero());
  pm.valid.assign(grid_w * grid_h, 0);
  for (int r = 0; r < grid_h; ++r) {
    for (int c = 0; c < grid_w; ++c) {
      if (auto hit = ray_ground_intersect(cam, cell_center(cam, grid_w, grid_h, r, c))) {
        pm.points[r * grid_w + c] = *hit;
        pm.valid[r * grid_w + c] = 1;
      }
    }
  }
  return pm;
}

inline std::vector<Pointmap> pointmap_generate(const CameraRig& rig,
                                               int grid = kDefaultPointmapGrid) {
  std::vector<Pointmap> out;
  for (int v = 0; v < rig.view_count(); ++v)
    out.push_back(pointmap_generate(rig.cameras[v], grid, grid, v));
  return out;
}

}  // namespace mocap
