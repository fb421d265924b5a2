#pragma once

// Synthetic ground truth: forward-kinematics motions, rigid 3D augmentation,
// camera rig perturbation and fully consistent multi-view samples.

#include <Eigen/Geometry>
#include <cmath>
#include <algorithm>
#include <array>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "mocap/error.hpp"
#include "mocap/geometry.hpp"
#include "mocap/motion.hpp"
#include "mocap/representation.hpp"
#include "mocap/skeleton.hpp"

namespace mocap {

enum class MotionKind { Walker, Circle, Squat, RandomSmooth };

inline MotionKind motion_kind_from_string(const std::string& s) {
  if (s == "walker") return MotionKind::Walker;
  if (s == "circle") return MotionKind::Circle;
  if (s == "squat") return MotionKind::Squat;
  if (s == "random_smooth") return MotionKind::RandomSmooth;
  throw Error(ErrorKind::UnknownKind, "unknown motion kind '" + s + "'");
}

inline std::string to_string(MotionKind k) {
  switch (k) {
    case MotionKind::Walker: return "walker";
    case MotionKind::Circle: return "circle";
    case MotionKind::Squat: return "squat";
    case MotionKind::RandomSmooth: return "random_smooth";
  }
  return "unknown";
}

struct AugmentParams {
  double yaw_range = 0.0;          // radians, symmetric
  double translation_range = 0.0;  // meters, per horizontal axis
  double cam_pitch_range = 0.0;
  double cam_yaw_range = 0.0;
  double cam_roll_range = 0.0;
  double cam_distance_range = 0.0;  // meters
  std::uint64_t seed = 0;
};

inline void validate(const AugmentParams& p) {
  require(p.yaw_range >= 0 && p.translation_range >= 0 && p.cam_pitch_range >= 0 &&
              p.cam_yaw_range >= 0 && p.cam_roll_range >= 0 && p.cam_distance_range >= 0,
          ErrorKind::InvalidArgument, "augmentation ranges must be non-negative");
}

// splitmix64 step; used to derive independent per-sample seeds.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace detail {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double symmetric(std::mt19937_64& rng, double range) {
  return range > 0 ? uniform(rng, -range, range) : 0.0;
}

inline Eigen::Matrix3d euler_zyx(double yaw, double pitch, double roll) {
  return (Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

// Sum of up to three harmonics; smooth and bounded by sum |amp|.
struct Fourier {
  double base_freq = 0.0;
  double amp[3] = {0, 0, 0};
  double phase[3] = {0, 0, 0};

  static Fourier random(std::mt19937_64& rng, double amplitude, double freq_lo, double freq_hi) {
    Fourier f;
    f.base_freq = uniform(rng, freq_lo, freq_hi);
    for (int k = 0; k < 3; ++k) {
      f.amp[k] = uniform(rng, -amplitude, amplitude) / (k + 1);
      f.phase[k] = uniform(rng, 0.0, 2 * std::numbers::pi);
    }
    return f;
  }

  double operator()(double t) const {
    double v = 0;
    for (int k = 0; k < 3; ++k)
      v += amp[k] * std::sin(2 * std::numbers::pi * base_freq * (k + 1) * t + phase[k]);
    return v;
  }
};

enum class JointRole { Root, UpperLeg, LowerLeg, Arm, Upper, Other };

struct BodyLayout {
  std::vector<JointRole> role;
  std::vector<double> side;  // +1 left, -1 right, 0 centre
};

inline BodyLayout classify(const Skeleton& s) {
  const int n = s.joint_count();
  std::vector<Eigen::Vector3d> rest(n, Eigen::Vector3d::Zero());
  for (int j : s.topological_order())
    if (j != s.root) rest[j] = rest[s.parent[j]] + s.offsets[j];
  double mid = 0;
  for (const auto& p : rest) mid += p.y();
  mid /= n;

  BodyLayout layout;
  layout.role.assign(n, JointRole::Other);
  layout.side.assign(n, 0.0);
  for (int j = 0; j < n; ++j) {
    const double dy = rest[j].y() - mid;
    layout.side[j] = dy > 0.03 ? 1.0 : (dy < -0.03 ? -1.0 : 0.0);
  }
  for (int j : s.topological_order()) {
    if (j == s.root) {
      layout.role[j] = JointRole::Root;
      continue;
    }
    const bool leg_bone = rest[j].z() < -0.15 && s.offsets[j].z() < -0.1;
    const JointRole parent_role = layout.role[s.parent[j]];
    if (leg_bone) {
      layout.role[j] = (parent_role == JointRole::UpperLeg || parent_role == JointRole::LowerLeg)
                           ? JointRole::LowerLeg
                           : JointRole::UpperLeg;
    } else if (rest[j].z() > 0.1 && std::abs(rest[j].y() - mid) > 0.15) {
      layout.role[j] = JointRole::Arm;
    } else if (rest[j].z() > 0.1) {
      layout.role[j] = JointRole::Upper;
    }
  }
  return layout;
}

// Positions for one frame: pos_j = pos_parent + G_j * offset_j, G_j = G_parent * R_j.
inline Mat3X forward_kinematics(const Skeleton& s, const Eigen::Vector3d& root_pos,
                                const Eigen::Matrix3d& root_rot,
                                const std::vector<Eigen::Matrix3d>& local) {
  const int n = s.joint_count();
  Mat3X pos(3, n);
  std::vector<Eigen::Matrix3d> global(n);
  for (int j : s.topological_order()) {
    if (j == s.root) {
      global[j] = root_rot;
      pos.col(j) = root_pos;
    } else {
      const int p = s.parent[j];
      global[j] = global[p] * local[j];
      pos.col(j) = pos.col(p) + global[j] * s.offsets[j];
    }
  }
  return pos;
}

}  // namespace detail

inline constexpr double kDefaultFps = 30.0;

inline Motion3D generate_motion(const Skeleton& s, MotionKind kind, int frames, std::uint64_t seed,
                                double fps = kDefaultFps) {
  validate(s);
  require(frames >= 2, ErrorKind::InvalidArgument, "generate_motion: need at least two frames");
  using detail::JointRole;
  std::mt19937_64 rng(seed);
  const detail::BodyLayout layout = detail::classify(s);
  const int n = s.joint_count();
  const double pi = std::numbers::pi;

  // Gait parameters shared by walker and circle.
  const double stride_freq = detail::uniform(rng, 0.8, 1.1);
  const double swing = detail::uniform(rng, 0.35, 0.5);
  const double knee = detail::uniform(rng, 0.3, 0.5);
  const double speed = detail::uniform(rng, 1.0, 1.4);
  const double phase0 = detail::uniform(rng, 0.0, 2 * pi);
  const double radius = detail::uniform(rng, 1.0, 1.6);
  const double turn = detail::uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
  const double squat_depth = detail::uniform(rng, 0.6, 1.0);
  const double squat_freq = detail::uniform(rng, 0.4, 0.7);

  std::vector<std::array<detail::Fourier, 3>> joint_curves(n);
  std::array<detail::Fourier, 3> root_curves;
  if (kind == MotionKind::RandomSmooth) {
    for (int j = 0; j < n; ++j)
      for (auto& c : joint_curves[j]) c = detail::Fourier::random(rng, 0.3, 0.3, 1.0);
    root_curves[0] = detail::Fourier::random(rng, 0.4, 0.1, 0.5);
    root_curves[1] = detail::Fourier::random(rng, 0.4, 0.1, 0.5);
    root_curves[2] = detail::Fourier::random(rng, 0.8, 0.1, 0.4);
  }

  Motion3D m(frames, n, fps);
  std::vector<Eigen::Matrix3d> local(n, Eigen::Matrix3d::Identity());
  for (int f = 0; f < frames; ++f) {
    const double t = f / fps;
    const double w = 2 * pi * stride_freq * t + phase0;
    const double squat_phase = 0.5 * (1 - std::cos(2 * pi * squat_freq * t + phase0));
    Eigen::Vector3d root_pos = Eigen::Vector3d::Zero();
    double heading = 0.0;

    for (int j = 0; j < n; ++j) {
      double yaw = 0, pitch = 0, roll = 0;
      const double side_phase = layout.side[j] >= 0 ? 0.0 : pi;
      switch (kind) {
        case MotionKind::Walker:
        case MotionKind::Circle:
          switch (layout.role[j]) {
            case JointRole::UpperLeg: pitch = swing * std::sin(w + side_phase); break;
            case JointRole::LowerLeg:
              pitch = knee * std::max(0.0, std::sin(w + side_phase + 0.5 * pi));
              break;
            case JointRole::Arm: pitch = -0.6 * swing * std::sin(w + side_phase); break;
            case JointRole::Upper: pitch = 0.05 * std::sin(2 * w); break;
            default: break;
          }
          break;
        case MotionKind::Squat:
          switch (layout.role[j]) {
            case JointRole::UpperLeg: pitch = -squat_depth * squat_phase; break;
            case JointRole::LowerLeg: pitch = 2 * squat_depth * squat_phase; break;
            case JointRole::Arm: pitch = -1.0 * squat_phase; break;
            case JointRole::Upper: pitch = 0.4 * squat_phase; break;
            default: break;
          }
          break;
        case MotionKind::RandomSmooth:
          if (j != s.root) {
            yaw = joint_curves[j][0](t);
            pitch = joint_curves[j][1](t);
            roll = joint_curves[j][2](t);
          }
          break;
      }
      local[j] = detail::euler_zyx(yaw, pitch, roll);
    }

    switch (kind) {
      case MotionKind::Walker:
        root_pos = {speed * t, 0.02 * std::sin(w), 0};
        break;
      case MotionKind::Circle: {
        const double a = turn * speed * t / radius;
        root_pos = {radius * std::sin(std::abs(a)), turn * radius * (1 - std::cos(a)), 0};
        heading = a;
        break;
      }
      case MotionKind::Squat:
        root_pos = {0.02 * std::sin(0.5 * w), 0, 0};
        break;
      case MotionKind::RandomSmooth:
        root_pos = {root_curves[0](t), root_curves[1](t), 0};
        heading = root_curves[2](t);
        break;
    }
    const Eigen::Matrix3d root_rot = detail::euler_zyx(heading, 0, 0);
    m.frames[f] = detail::forward_kinematics(s, root_pos, root_rot, local);
  }

  // Centre the root trajectory horizontally and put the lowest joint of every
  // frame on the ground.
  Eigen::Vector2d mean_root = Eigen::Vector2d::Zero();
  for (const auto& fr : m.frames) mean_root += fr.col(s.root).head<2>();
  mean_root /= frames;
  for (auto& fr : m.frames) {
    const double lift = -fr.row(2).minCoeff();
    fr.row(0).array() -= mean_root.x();
    fr.row(1).array() -= mean_root.y();
    fr.row(2).array() += lift;
  }
  return m;
}

// Rigid yaw about the world z axis followed by a horizontal translation.
inline Motion3D apply_yaw_translation(const Motion3D& m, double yaw, const Eigen::Vector3d& shift) {
  const Eigen::Matrix3d r = detail::euler_zyx(yaw, 0, 0);
  Motion3D out = m;
  for (auto& f : out.frames) f = (r * f).colwise() + shift;
  return out;
}

inline Motion3D augment_motion(const Motion3D& m, const AugmentParams& p) {
  validate(p);
  std::mt19937_64 rng(p.seed);
  const double yaw = detail::symmetric(rng, p.yaw_range);
  const double tx = detail::symmetric(rng, p.translation_range);
  const double ty = detail::symmetric(rng, p.translation_range);
  if (yaw == 0.0 && tx == 0.0 && ty == 0.0) return m;
  return apply_yaw_translation(m, yaw, {tx, ty, 0.0});
}

// Moves a camera on its sphere around the origin (azimuth += yaw,
// elevation += pitch, radius += distance), re-aims it at the origin and rolls
// it about its optical axis. Intrinsics are kept.
inline Camera perturb_camera(const Camera& cam, double pitch, double yaw, double roll,
                             double distance) {
  if (pitch == 0.0 && yaw == 0.0 && roll == 0.0 && distance == 0.0) return cam;
  const Eigen::Vector3d c = cam.center();
  const double radius = c.norm();
  const double azimuth = std::atan2(c.y(), c.x()) + yaw;
  const double elevation =
      std::clamp(std::asin(c.z() / radius) + pitch, -0.45 * std::numbers::pi, 0.45 * std::numbers::pi);
  const double r = std::max(0.5, radius + distance);
  const Eigen::Vector3d eye(r * std::cos(elevation) * std::cos(azimuth),
                            r * std::cos(elevation) * std::sin(azimuth), r * std::sin(elevation));
  Camera out = look_at(eye, Eigen::Vector3d::Zero(), cam.fx, cam.fy, cam.image_w, cam.image_h);
  out.cx = cam.cx;
  out.cy = cam.cy;
  const Eigen::Matrix3d roll_m = Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  out.rotation = roll_m * out.rotation;
  out.translation = -out.rotation * eye;
  return out;
}

inline CameraRig sample_camera_rig(const CameraRig& base, const AugmentParams& p,
                                   std::uint64_t seed) {
  validate(p);
  std::mt19937_64 rng(seed);
  CameraRig rig = base;
  for (int v = 0; v < base.view_count(); ++v) {
    if (v == base.primary_index) continue;
    const double pitch = detail::symmetric(rng, p.cam_pitch_range);
    const double yaw = detail::symmetric(rng, p.cam_yaw_range);
    const double roll = detail::symmetric(rng, p.cam_roll_range);
    const double dist = detail::symmetric(rng, p.cam_distance_range);
    rig.cameras[v] = perturb_camera(base.cameras[v], pitch, yaw, roll, dist);
  }
  return rig;
}

// V cameras evenly spaced on a circle of `radius` at `height`, all aimed at
// the origin; camera 0 is primary.
inline CameraRig default_rig(int views = 4, double radius = 3.0, double height = 1.6,
                             double focal = 1000.0, int image_size = 1000) {
  require(views >= 1, ErrorKind::InvalidArgument, "default_rig: need at least one view");
  CameraRig rig;
  for (int v = 0; v < views; ++v) {
    const double a = 2 * std::numbers::pi * v / views;
    rig.cameras.push_back(look_at({radius * std::cos(a), radius * std::sin(a), height},
                                  Eigen::Vector3d::Zero(), focal, focal, image_size, image_size));
  }
  rig.primary_index = 0;
  return rig;
}

// One fully consistent training/evaluation sample.
struct Sample {
  std::uint64_t seed = 0;
  std::string kind;
  Motion3D motion;
  CameraRig rig;
  std::vector<Motion2D> views;
  std::vector<DisentangledMotion> encoded;
  std::vector<Pointmap> pointmaps;
};

inline Sample generate_sample(const Skeleton& s, MotionKind kind, int frames,
                              const CameraRig& base_rig, const AugmentParams& params,
                              std::uint64_t seed, int pointmap_grid = kDefaultPointmapGrid) {
  Sample out;
  out.seed = seed;
  out.kind = to_string(kind);
  AugmentParams p = params;
  p.seed = mix_seed(seed, 1);
  out.motion = augment_motion(generate_motion(s, kind, frames, mix_seed(seed, 0)), p);
  out.rig = sample_camera_rig(base_rig, params, mix_seed(seed, 2));
  out.views = project(out.rig, out.motion);
  for (const auto& v : out.views) out.encoded.push_back(encode(v, s.root));
  out.pointmaps = pointmap_generate(out.rig, pointmap_grid);
  return out;
}

// Sample `index` of a dataset seeded by `seed`; kinds are cycled by index.
inline Sample generate_indexed_sample(const Skeleton& s, const std::vector<MotionKind>& kinds,
                                      int frames, const CameraRig& base_rig,
                                      const AugmentParams& params, std::uint64_t seed, int index,
                                      int pointmap_grid = kDefaultPointmapGrid) {
  require(!kinds.empty(), ErrorKind::InvalidArgument, "no motion kinds given");
  return generate_sample(s, kinds[index % kinds.size()], frames, base_rig, params,
                         mix_seed(seed, static_cast<std::uint64_t>(index)), pointmap_grid);
}

// Augmentation ranges used by the toolkit unless configured otherwise.
inline AugmentParams default_augment() {
  AugmentParams p;
  p.yaw_range = std::numbers::pi;
  p.translation_range = 0.5;
  p.cam_pitch_range = 0.08;
  p.cam_yaw_range = 0.25;
  p.cam_roll_range = 0.05;
  p.cam_distance_range = 0.4;
  return p;
}

}  // namespace mocap
