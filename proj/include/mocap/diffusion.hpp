#pragma once

// DDPM machinery: noise schedules, forward noising and the closed-form
// posterior step, all on MotionTensor values.

#include <Eigen/Core>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "mocap/error.hpp"

namespace mocap {

// Per view and frame, `rows` two-component rows; stored as a (views*frames) x
// (2*rows) row-major matrix, token (v, t) at row v*frames + t.
struct MotionTensor {
  int views = 0, frames = 0, rows = 0;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> values;

  MotionTensor() = default;
  MotionTensor(int v, int t, int r)
      : views(v), frames(t), rows(r), values(Eigen::MatrixXd::Zero(v * t, 2 * r)) {}

  double& at(int v, int t, int r, int c) { return values(v * frames + t, 2 * r + c); }
  double at(int v, int t, int r, int c) const { return values(v * frames + t, 2 * r + c); }

  bool same_shape(const MotionTensor& o) const {
    return views == o.views && frames == o.frames && rows == o.rows;
  }
};

inline void require_same_shape(const MotionTensor& a, const MotionTensor& b, const char* what) {
  if (!a.same_shape(b))
    throw Error(ErrorKind::ShapeMismatch, std::string(what) + ": motion tensor shapes differ");
}

inline MotionTensor gaussian_like(const MotionTensor& shape, std::mt19937_64& rng) {
  MotionTensor out(shape.views, shape.frames, shape.rows);
  std::normal_distribution<double> n;
  for (Eigen::Index i = 0; i < out.values.size(); ++i) out.values.data()[i] = n(rng);
  return out;
}

enum class ScheduleKind { Linear, Cosine };

inline ScheduleKind schedule_kind_from_string(const std::string& s) {
  if (s == "linear") return ScheduleKind::Linear;
  if (s == "cosine") return ScheduleKind::Cosine;
  throw Error(ErrorKind::UnknownKind, "unknown schedule '" + s + "'");
}

inline std::string to_string(ScheduleKind k) { return k == ScheduleKind::Linear ? "linear" : "cosine"; }

struct DiffusionSchedule {
  ScheduleKind kind = ScheduleKind::Cosine;
  std::vector<double> betas, alphas, alpha_bars;

  int steps() const { return static_cast<int>(betas.size()); }
};

inline constexpr int kDefaultSteps = 100;

// Step index n runs 0..N-1; alpha_bar[n] = prod_{i<=n} (1 - beta_i).
//   linear: betas evenly spaced, endpoints 1e-4 and 0.02 rescaled by 1000/N
//           (start capped at 5e-3, end at 0.999).
//   cosine: alpha_bar(t) = f(t)/f(0), f(t) = cos^2(((t/N + s)/(1 + s)) pi/2),
//           s = 0.008, betas clipped to 0.999.
inline DiffusionSchedule make_schedule(int steps = kDefaultSteps,
                                       ScheduleKind kind = ScheduleKind::Cosine) {
  if (steps < 2) throw Error(ErrorKind::BadStepCount, "schedule needs at least 2 steps");
  DiffusionSchedule s;
  s.kind = kind;
  s.betas.resize(steps);
  if (kind == ScheduleKind::Linear) {
    const double scale = 1000.0 / steps;
    const double b0 = std::min(1e-4 * scale, 5e-3);
    const double b1 = std::min(0.02 * scale, 0.999);
    for (int n = 0; n < steps; ++n) s.betas[n] = b0 + (b1 - b0) * n / (steps - 1);
  } else {
    const double off = 0.008;
    auto f = [&](double t) {
      const double a = (t / steps + off) / (1.0 + off) * std::numbers::pi / 2;
      return std::cos(a) * std::cos(a);
    };
    for (int n = 0; n < steps; ++n) s.betas[n] = std::min(1.0 - f(n + 1) / f(n), 0.999);
  }
  s.alphas.resize(steps);
  s.alpha_bars.resize(steps);
  double prod = 1.0;
  for (int n = 0; n < steps; ++n) {
    s.alphas[n] = 1.0 - s.betas[n];
    prod *= s.alphas[n];
    s.alpha_bars[n] = prod;
  }
  return s;
}

// sqrt(alpha_bar_n) x0 + sqrt(1 - alpha_bar_n) noise
inline MotionTensor q_sample(const MotionTensor& x0, int n, const MotionTensor& noise,
                             const DiffusionSchedule& s) {
  require_same_shape(x0, noise, "q_sample");
  require(n >= 0 && n < s.steps(), ErrorKind::InvalidArgument, "q_sample: step out of range");
  MotionTensor out = x0;
  const double ab = s.alpha_bars[n];
  out.values = std::sqrt(ab) * x0.values + std::sqrt(1.0 - ab) * noise.values;
  return out;
}

struct PosteriorCoefficients {
  double x0_coef = 0, xn_coef = 0, sigma = 0;
};

// q(x_{n-1} | x_n, x0) with the fixed small variance
// beta_n (1 - alpha_bar_{n-1}) / (1 - alpha_bar_n).
inline PosteriorCoefficients posterior_coefficients(const DiffusionSchedule& s, int n) {
  require(n >= 1 && n < s.steps(), ErrorKind::InvalidArgument,
          "posterior step must satisfy 1 <= n < N");
  const double ab = s.alpha_bars[n], ab_prev = s.alpha_bars[n - 1];
  PosteriorCoefficients c;
  c.x0_coef = std::sqrt(ab_prev) * s.betas[n] / (1.0 - ab);
  c.xn_coef = std::sqrt(s.alphas[n]) * (1.0 - ab_prev) / (1.0 - ab);
  c.sigma = std::sqrt(s.betas[n] * (1.0 - ab_prev) / (1.0 - ab));
  return c;
}

// Sample x_{n-1} from the posterior given the current x_n and a clean estimate.
inline MotionTensor posterior_step(const MotionTensor& x_n, const MotionTensor& x0_hat, int n,
                                   const DiffusionSchedule& s, const MotionTensor& noise) {
  require_same_shape(x_n, x0_hat, "posterior_step");
  require_same_shape(x_n, noise, "posterior_step");
  const PosteriorCoefficients c = posterior_coefficients(s, n);
  MotionTensor out = x_n;
  out.values = c.x0_coef * x0_hat.values + c.xn_coef * x_n.values + c.sigma * noise.values;
  return out;
}

}  // namespace mocap
