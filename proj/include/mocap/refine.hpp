#pragma once

// Joint-position fit with soft bone-length constraints:
//   sum |X - w|^2 + bone_weight sum (|X_j - X_parent| - L_j)^2
//                 + smooth_weight sum |X_{t+1} - X_t|^2
// minimised with Levenberg-Marquardt (damping lambda * I).

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <cmath>
#include <vector>

#include "mocap/error.hpp"
#include "mocap/motion.hpp"
#include "mocap/skeleton.hpp"

namespace mocap {

struct FitConfig {
  double bone_weight = 100.0;
  double smooth_weight = 1.0;
  int max_iters = 50;
  double tol = 1e-8;
  double damping = 1e-3;
};

inline void validate(const FitConfig& c) {
  require(c.bone_weight >= 0 && c.smooth_weight >= 0, ErrorKind::InvalidArgument,
          "fit weights must be non-negative");
  require(c.max_iters >= 1, ErrorKind::InvalidArgument, "max_iters must be at least 1");
  require(c.tol > 0 && c.damping > 0, ErrorKind::InvalidArgument, "tol and damping must be positive");
}

struct FitResult {
  Motion3D motion;
  std::vector<double> cost_history;  // initial cost, then one per accepted step
  int iterations = 0;
};

// Stacked residuals in a fixed order: data (3 per joint per frame), bones
// (one per non-root joint per frame), smoothness (3 per joint per frame pair).
// Variables are x[(t*J + j)*3 + c].
struct FitProblem {
  const Motion3D& target;
  const Skeleton& skeleton;
  FitConfig cfg;

  int frames() const { return target.frame_count(); }
  int joints() const { return target.joint_count(); }
  int variables() const { return 3 * frames() * joints(); }
  int bone_count() const { return joints() - 1; }
  int residuals() const {
    return variables() + frames() * bone_count() + (frames() - 1) * 3 * joints();
  }

  Eigen::VectorXd residual(const Eigen::VectorXd& x) const {
    const int J = joints(), T = frames();
    Eigen::VectorXd r(residuals());
    int k = 0;
    for (int t = 0; t < T; ++t)
      for (int j = 0; j < J; ++j)
        for (int c = 0; c < 3; ++c) r[k++] = x[(t * J + j) * 3 + c] - target.frames[t](c, j);
    const double sb = std::sqrt(cfg.bone_weight), ss = std::sqrt(cfg.smooth_weight);
    for (int t = 0; t < T; ++t)
      for (int j = 0; j < J; ++j) {
        if (j == skeleton.root) continue;
        const int p = skeleton.parent[j];
        const Eigen::Vector3d d =
            x.segment<3>((t * J + j) * 3) - x.segment<3>((t * J + p) * 3);
        r[k++] = sb * (d.norm() - skeleton.rest_length(j));
      }
    for (int t = 0; t + 1 < T; ++t)
      for (int i = 0; i < 3 * J; ++i) r[k++] = ss * (x[(t + 1) * 3 * J + i] - x[t * 3 * J + i]);
    return r;
  }

  Eigen::SparseMatrix<double> jacobian(const Eigen::VectorXd& x) const {
    const int J = joints(), T = frames();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(variables() + 6 * T * bone_count() + 2 * 3 * J * T);
    int k = 0;
    for (int i = 0; i < variables(); ++i) trip.emplace_back(k++, i, 1.0);
    const double sb = std::sqrt(cfg.bone_weight), ss = std::sqrt(cfg.smooth_weight);
    for (int t = 0; t < T; ++t)
      for (int j = 0; j < J; ++j) {
        if (j == skeleton.root) continue;
        const int p = skeleton.parent[j];
        const Eigen::Vector3d d =
            x.segment<3>((t * J + j) * 3) - x.segment<3>((t * J + p) * 3);
        const double len = d.norm();
        const Eigen::Vector3d g = len > 0 ? Eigen::Vector3d(sb * d / len) : Eigen::Vector3d::Zero();
        for (int c = 0; c < 3; ++c) {
          trip.emplace_back(k, (t * J + j) * 3 + c, g[c]);
          trip.emplace_back(k, (t * J + p) * 3 + c, -g[c]);
        }
        ++k;
      }
    for (int t = 0; t + 1 < T; ++t)
      for (int i = 0; i < 3 * J; ++i) {
        trip.emplace_back(k, (t + 1) * 3 * J + i, ss);
        trip.emplace_back(k, t * 3 * J + i, -ss);
        ++k;
      }
    Eigen::SparseMatrix<double> jac(residuals(), variables());
    jac.setFromTriplets(trip.begin(), trip.end());
    return jac;
  }
};

inline Eigen::VectorXd flatten(const Motion3D& m) {
  const int J = m.joint_count();
  Eigen::VectorXd x(3 * J * m.frame_count());
  for (int t = 0; t < m.frame_count(); ++t)
    for (int j = 0; j < J; ++j) x.segment<3>((t * J + j) * 3) = m.frames[t].col(j);
  return x;
}

inline Motion3D unflatten(const Eigen::VectorXd& x, int frames, int joints, double fps) {
  Motion3D m(frames, joints);
  m.fps = fps;
  for (int t = 0; t < frames; ++t)
    for (int j = 0; j < joints; ++j) m.frames[t].col(j) = x.segment<3>((t * joints + j) * 3);
  return m;
}

namespace detail {

inline FitResult fit_joint(const Motion3D& w, const Skeleton& s, const FitConfig& cfg) {
  const FitProblem prob{w, s, cfg};
  Eigen::VectorXd x = flatten(w);
  Eigen::VectorXd r = prob.residual(x);
  double cost = r.squaredNorm();
  if (!std::isfinite(cost)) throw Error(ErrorKind::NonFiniteCost, "fit: initial cost is not finite");
  FitResult out;
  out.cost_history.push_back(cost);
  double lambda = cfg.damping;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  Eigen::SparseMatrix<double> eye(prob.variables(), prob.variables());
  eye.setIdentity();
  bool analysed = false;
  for (int it = 0; it < cfg.max_iters; ++it) {
    out.iterations = it + 1;
    const Eigen::SparseMatrix<double> jac = prob.jacobian(x);
    const Eigen::SparseMatrix<double> jtj = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * r;
    bool accepted = false;
    for (int attempt = 0; attempt < 20 && !accepted; ++attempt) {
      const Eigen::SparseMatrix<double> a = jtj + lambda * eye;
      if (!analysed) {
        solver.analyzePattern(a);
        analysed = true;
      }
      solver.factorize(a);
      if (solver.info() != Eigen::Success) {
        lambda *= 10;
        continue;
      }
      const Eigen::VectorXd dx = solver.solve(-g);
      const Eigen::VectorXd xn = x + dx;
      const Eigen::VectorXd rn = prob.residual(xn);
      const double cn = rn.squaredNorm();
      if (!std::isfinite(cn)) throw Error(ErrorKind::NonFiniteCost, "fit: cost became non-finite");
      if (cn <= cost) {
        accepted = true;
        const double rel = (cost - cn) / std::max(cost, 1e-300);
        x = xn;
        r = rn;
        cost = cn;
        out.cost_history.push_back(cost);
        lambda = std::max(lambda / 10, 1e-12);
        if (rel < cfg.tol) {
          out.motion = unflatten(x, w.frame_count(), w.joint_count(), w.fps);
          return out;
        }
      } else {
        lambda *= 10;
      }
    }
    if (!accepted) break;
  }
  out.motion = unflatten(x, w.frame_count(), w.joint_count(), w.fps);
  return out;
}

}  // namespace detail

// With smooth_weight = 0 frames decouple and each is solved on its own; the
// reported cost history is then the per-iteration sum over frames.
inline FitResult fit_skeleton_detailed(const Motion3D& w, const Skeleton& s,
                                       const FitConfig& cfg = {}) {
  validate(cfg);
  validate(s);
  require(w.joint_count() == static_cast<int>(s.parent.size()), ErrorKind::ShapeMismatch,
          "fit: joint count does not match skeleton");
  if (!w.all_finite()) throw Error(ErrorKind::NonFiniteCost, "fit: input motion is not finite");
  if (w.frame_count() == 0) return {w, {0.0}, 0};
  if (cfg.smooth_weight > 0) return detail::fit_joint(w, s, cfg);

  FitResult out;
  out.motion = w;
  std::vector<std::vector<double>> histories;
  for (int t = 0; t < w.frame_count(); ++t) {
    Motion3D one(1, w.joint_count());
    one.frames[0] = w.frames[t];
    FitResult r = detail::fit_joint(one, s, cfg);
    out.motion.frames[t] = r.motion.frames[0];
    out.iterations = std::max(out.iterations, r.iterations);
    histories.push_back(std::move(r.cost_history));
  }
  std::size_t longest = 0;
  for (const auto& h : histories) longest = std::max(longest, h.size());
  for (std::size_t i = 0; i < longest; ++i) {
    double sum = 0;
    for (const auto& h : histories) sum += h[std::min(i, h.size() - 1)];
    out.cost_history.push_back(sum);
  }
  return out;
}

inline Motion3D fit_skeleton(const Motion3D& w, const Skeleton& s, const FitConfig& cfg = {}) {
  return fit_skeleton_detailed(w, s, cfg).motion;
}

// Largest relative deviation of any bone from its rest length.
inline double max_bone_deviation(const Motion3D& m, const Skeleton& s) {
  double worst = 0;
  for (const auto& f : m.frames) {
    const std::vector<double> len = bone_lengths(f, s);
    for (int j = 0; j < static_cast<int>(len.size()); ++j)
      if (j != s.root && s.rest_length(j) > 0)
        worst = std::max(worst, std::abs(len[j] - s.rest_length(j)) / s.rest_length(j));
  }
  return worst;
}

}  // namespace mocap
