#pragma once

// Evaluation metrics. Inputs in meters; position errors reported in mm,
// Accel in mm/frame^2, Jitter in mm/frame^3, FS in mm per contact step.

#include <Eigen/Dense>
#include <cmath>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mocap/error.hpp"
#include "mocap/geometry.hpp"
#include "mocap/motion.hpp"

namespace mocap {

inline constexpr double kMetersToMm = 1000.0;
inline constexpr double kDefaultContactHeight = 0.05;

struct Similarity {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double scale = 1.0;

  Mat3X apply(const Mat3X& x) const {
    return ((scale * rotation) * x).colwise() + translation;
  }
};

// Least-squares similarity mapping the columns of x onto those of y
// (y ~ s R x + t), R proper.
inline Similarity procrustes(const Mat3X& x, const Mat3X& y, bool with_scale = true) {
  require(x.cols() == y.cols(), ErrorKind::ShapeMismatch, "procrustes: point counts differ");
  require(x.cols() >= 3, ErrorKind::DegenerateConfiguration, "procrustes needs at least 3 points");
  const Eigen::Vector3d mx = x.rowwise().mean(), my = y.rowwise().mean();
  const Mat3X xc = x.colwise() - mx, yc = y.colwise() - my;
  const Eigen::JacobiSVD<Eigen::Matrix3d> sx(xc * xc.transpose());
  const Eigen::Vector3d ev = sx.singularValues();
  if (!(ev[0] > 0) || ev[1] <= 1e-12 * ev[0])
    throw Error(ErrorKind::DegenerateConfiguration, "procrustes: points are collinear or coincident");
  const Eigen::Matrix3d cov = yc * xc.transpose();
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d d(1, 1, 1);
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) d[2] = -1;
  Similarity s;
  s.rotation = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
  s.scale = with_scale ? svd.singularValues().dot(d) / xc.squaredNorm() : 1.0;
  s.translation = my - s.scale * s.rotation * mx;
  return s;
}

// Rotation about +z (gravity axis) plus 3D translation minimising the squared
// distance of x to y over all columns.
inline Similarity yaw_align(const Mat3X& x, const Mat3X& y) {
  require(x.cols() == y.cols() && x.cols() >= 1, ErrorKind::ShapeMismatch, "yaw_align: shapes");
  const Eigen::Vector3d mx = x.rowwise().mean(), my = y.rowwise().mean();
  double sc = 0, ss = 0;
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    const Eigen::Vector2d a = x.col(i).head<2>() - mx.head<2>();
    const Eigen::Vector2d b = y.col(i).head<2>() - my.head<2>();
    sc += a.dot(b);
    ss += a.x() * b.y() - a.y() * b.x();
  }
  const double th = (sc == 0 && ss == 0) ? 0.0 : std::atan2(ss, sc);
  Similarity s;
  s.rotation = Eigen::AngleAxisd(th, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  s.translation = my - s.rotation * mx;
  return s;
}

enum class MpjpeMode { RootAligned, None };

inline double mpjpe(const Motion3D& pred, const Motion3D& gt, MpjpeMode mode = MpjpeMode::RootAligned,
                    int root = 0) {
  require_same_shape(pred, gt, "mpjpe");
  double sum = 0;
  long n = 0;
  for (int t = 0; t < gt.frame_count(); ++t) {
    Mat3X d = pred.frames[t] - gt.frames[t];
    if (mode == MpjpeMode::RootAligned) {
      const Eigen::Vector3d r = d.col(root);
      d.colwise() -= r;
    }
    sum += d.colwise().norm().sum();
    n += d.cols();
  }
  return n ? kMetersToMm * sum / n : 0.0;
}

inline double abs_mpjpe(const Motion3D& pred, const Motion3D& gt) {
  return mpjpe(pred, gt, MpjpeMode::None);
}

inline double pa_mpjpe(const Motion3D& pred, const Motion3D& gt) {
  require_same_shape(pred, gt, "pa_mpjpe");
  double sum = 0;
  for (int t = 0; t < gt.frame_count(); ++t) {
    const Mat3X aligned = procrustes(pred.frames[t], gt.frames[t], true).apply(pred.frames[t]);
    sum += (aligned - gt.frames[t]).colwise().norm().mean();
  }
  return gt.frame_count() ? kMetersToMm * sum / gt.frame_count() : 0.0;
}

namespace detail {

inline Mat3X stack_frames(const Motion3D& m, int first, int count) {
  const int J = m.joint_count();
  Mat3X out(3, J * count);
  for (int t = 0; t < count; ++t) out.middleCols(t * J, J) = m.frames[first + t];
  return out;
}

inline Motion3D apply(const Similarity& s, const Motion3D& m) {
  Motion3D out = m;
  for (auto& f : out.frames) f = s.apply(f);
  return out;
}

}  // namespace detail

// Yaw + translation fitted on frames 0 and 1, applied to the whole sequence.
inline double w_mpjpe(const Motion3D& pred, const Motion3D& gt) {
  require_same_shape(pred, gt, "w_mpjpe");
  if (gt.frame_count() < 2) throw Error(ErrorKind::TooShort, "w_mpjpe needs at least 2 frames");
  const Similarity s = yaw_align(detail::stack_frames(pred, 0, 2), detail::stack_frames(gt, 0, 2));
  return abs_mpjpe(detail::apply(s, pred), gt);
}

// Same alignment class fitted over all frames.
inline double wa_mpjpe(const Motion3D& pred, const Motion3D& gt) {
  require_same_shape(pred, gt, "wa_mpjpe");
  if (gt.frame_count() < 2) throw Error(ErrorKind::TooShort, "wa_mpjpe needs at least 2 frames");
  const int T = gt.frame_count();
  const Similarity s = yaw_align(detail::stack_frames(pred, 0, T), detail::stack_frames(gt, 0, T));
  return abs_mpjpe(detail::apply(s, pred), gt);
}

inline double t_root(const Motion3D& pred, const Motion3D& gt, int root = 0) {
  require_same_shape(pred, gt, "t_root");
  double sum = 0;
  for (int t = 0; t < gt.frame_count(); ++t) sum += (pred.frames[t].col(root) - gt.frames[t].col(root)).norm();
  return gt.frame_count() ? kMetersToMm * sum / gt.frame_count() : 0.0;
}

// Second central difference X[t+1] - 2X[t] + X[t-1], t = 1..T-2.
inline double accel_error(const Motion3D& pred, const Motion3D& gt) {
  require_same_shape(pred, gt, "accel_error");
  const int T = gt.frame_count();
  if (T < 3) throw Error(ErrorKind::TooShort, "accel_error needs at least 3 frames");
  double sum = 0;
  long n = 0;
  for (int t = 1; t + 1 < T; ++t) {
    const Mat3X ap = pred.frames[t + 1] - 2 * pred.frames[t] + pred.frames[t - 1];
    const Mat3X ag = gt.frames[t + 1] - 2 * gt.frames[t] + gt.frames[t - 1];
    sum += (ap - ag).colwise().norm().sum();
    n += ap.cols();
  }
  return kMetersToMm * sum / n;
}

// Third difference X[t+3] - 3X[t+2] + 3X[t+1] - X[t], t = 0..T-4.
inline double jitter(const Motion3D& m) {
  const int T = m.frame_count();
  if (T < 4) throw Error(ErrorKind::TooShort, "jitter needs at least 4 frames");
  double sum = 0;
  long n = 0;
  for (int t = 0; t + 3 < T; ++t) {
    const Mat3X j = m.frames[t + 3] - 3 * m.frames[t + 2] + 3 * m.frames[t + 1] - m.frames[t];
    sum += j.colwise().norm().sum();
    n += j.cols();
  }
  return kMetersToMm * sum / n;
}

// Mean horizontal displacement of a foot between consecutive frames in which
// it is below `contact_height` in both; 0 when there is no contact.
inline double foot_sliding(const Motion3D& m, const std::vector<int>& feet,
                           double contact_height = kDefaultContactHeight) {
  require(!feet.empty(), ErrorKind::InvalidArgument, "foot_sliding: no foot joints");
  if (m.frame_count() < 2) throw Error(ErrorKind::TooShort, "foot_sliding needs at least 2 frames");
  double sum = 0;
  long n = 0;
  for (int f : feet)
    for (int t = 0; t + 1 < m.frame_count(); ++t) {
      if (m.frames[t](2, f) < contact_height && m.frames[t + 1](2, f) < contact_height) {
        sum += (m.frames[t + 1].col(f).head<2>() - m.frames[t].col(f).head<2>()).norm();
        ++n;
      }
    }
  return n ? kMetersToMm * sum / n : 0.0;
}

inline double mm_per_frame2_to_m_per_s2(double v, double fps) { return v * 1e-3 * fps * fps; }
inline double mm_per_frame3_to_m_per_s3(double v, double fps) { return v * 1e-3 * fps * fps * fps; }

struct MetricsReport {
  std::string name;
  double pa_mpjpe = 0, mpjpe = 0, w_mpjpe = 0, wa_mpjpe = 0, abs_mpjpe = 0, t_root = 0;
  double accel = 0, jitter = 0, fs = 0;
  int frame_count = 0, joint_count = 0;
  bool camera_frame = false;  // mpjpe/pa_mpjpe measured in the primary camera frame

  static std::string csv_header() {
    return "name,pa_mpjpe,mpjpe,w_mpjpe,wa_mpjpe,abs_mpjpe,t_root,accel,jitter,fs,frame_count,"
           "joint_count,camera_frame";
  }

  std::string csv_row() const {
    std::ostringstream o;
    o << std::setprecision(17) << name << ',' << pa_mpjpe << ',' << mpjpe << ',' << w_mpjpe << ','
      << wa_mpjpe << ',' << abs_mpjpe << ',' << t_root << ',' << accel << ',' << jitter << ','
      << fs << ',' << frame_count << ',' << joint_count << ',' << (camera_frame ? 1 : 0);
    return o.str();
  }

  std::string summary() const {
    std::ostringstream o;
    o << std::fixed << std::setprecision(2);
    o << "PA-MPJPE " << pa_mpjpe << " mm  MPJPE " << mpjpe << " mm  W-MPJPE " << w_mpjpe
      << " mm  WA-MPJPE " << wa_mpjpe << " mm  Abs-MPJPE " << abs_mpjpe << " mm\n"
      << "T_root " << t_root << " mm  Accel " << accel << " mm/f^2  Jitter " << jitter
      << " mm/f^3  FS " << fs << " mm  (" << frame_count << " frames, " << joint_count
      << " joints, " << (camera_frame ? "camera" : "world") << " frame)";
    return o.str();
  }
};

// Arithmetic mean of every numeric field; frame/joint counts are summed and
// copied respectively.
inline MetricsReport mean_report(const std::vector<MetricsReport>& rows, const std::string& name = "mean") {
  MetricsReport m;
  m.name = name;
  if (rows.empty()) return m;
  for (const auto& r : rows) {
    m.pa_mpjpe += r.pa_mpjpe;
    m.mpjpe += r.mpjpe;
    m.w_mpjpe += r.w_mpjpe;
    m.wa_mpjpe += r.wa_mpjpe;
    m.abs_mpjpe += r.abs_mpjpe;
    m.t_root += r.t_root;
    m.accel += r.accel;
    m.jitter += r.jitter;
    m.fs += r.fs;
    m.frame_count += r.frame_count;
  }
  const double n = static_cast<double>(rows.size());
  for (double* f : {&m.pa_mpjpe, &m.mpjpe, &m.w_mpjpe, &m.wa_mpjpe, &m.abs_mpjpe, &m.t_root,
                    &m.accel, &m.jitter, &m.fs})
    *f /= n;
  m.joint_count = rows.front().joint_count;
  m.camera_frame = rows.front().camera_frame;
  return m;
}

inline Motion3D to_camera_frame(const Motion3D& m, const Camera& cam) {
  Motion3D out = m;
  for (auto& f : out.frames) f = (cam.rotation * f).colwise() + cam.translation;
  return out;
}

struct EvalOptions {
  int root = 0;
  std::vector<int> feet;
  double contact_height = kDefaultContactHeight;
};

inline MetricsReport evaluate_all(const Motion3D& pred, const Motion3D& gt, const EvalOptions& opt,
                                  const CameraRig* rig = nullptr) {
  require_same_shape(pred, gt, "evaluate_all");
  MetricsReport r;
  r.frame_count = gt.frame_count();
  r.joint_count = gt.joint_count();
  if (rig) {
    const Camera& cam = rig->primary();
    const Motion3D pc = to_camera_frame(pred, cam), gc = to_camera_frame(gt, cam);
    r.mpjpe = mpjpe(pc, gc, MpjpeMode::RootAligned, opt.root);
    r.pa_mpjpe = pa_mpjpe(pc, gc);
    r.camera_frame = true;
  } else {
    r.mpjpe = mpjpe(pred, gt, MpjpeMode::RootAligned, opt.root);
    r.pa_mpjpe = pa_mpjpe(pred, gt);
  }
  r.abs_mpjpe = abs_mpjpe(pred, gt);
  r.t_root = t_root(pred, gt, opt.root);
  if (gt.frame_count() >= 2) {
    r.w_mpjpe = w_mpjpe(pred, gt);
    r.wa_mpjpe = wa_mpjpe(pred, gt);
  }
  if (gt.frame_count() >= 3) r.accel = accel_error(pred, gt);
  if (gt.frame_count() >= 4) r.jitter = jitter(pred);
  if (!opt.feet.empty() && gt.frame_count() >= 2) r.fs = foot_sliding(pred, opt.feet, opt.contact_height);
  return r;
}

}  // namespace mocap
