// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance            run all criteria
//   acceptance --only 6   run one
// Exit status is non-zero if any hard criterion fails. Criterion 8 is soft:
// its line is always printed but it does not affect the exit status.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <complex>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "mocap/lifting.hpp"
#include "mocap/metrics.hpp"
#include "mocap/refine.hpp"
#include "mocap/synthdata.hpp"
#include "mocap/training.hpp"

using namespace mocap;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... a) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return kInf;
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Motion3D random_motion(std::mt19937_64& rng, int frames, int joints, double spread = 0.5) {
  std::normal_distribution<double> n(0.0, spread);
  Motion3D m(frames, joints);
  for (auto& f : m.frames) f = Mat3X::NullaryExpr(3, joints, [&] { return n(rng); });
  return m;
}

Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  return Eigen::Quaterniond(n(rng), n(rng), n(rng), n(rng)).normalized().toRotationMatrix();
}

Sample toy_sample(std::uint64_t seed, int frames, MotionKind kind) {
  return generate_sample(toy8(), kind, frames, default_rig(), default_augment(), seed);
}

const std::vector<MotionKind> kAllKinds{MotionKind::Walker, MotionKind::Circle, MotionKind::Squat,
                                        MotionKind::RandomSmooth};

std::vector<Sample> make_samples(std::uint64_t seed, int count, int frames, int grid = kDefaultPointmapGrid) {
  std::vector<Sample> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i)
    out.push_back(generate_indexed_sample(toy8(), kAllKinds, frames, default_rig(), default_augment(), seed, i, grid));
  return out;
}

// ---------------------------------------------------------------- criterion 1

Outcome geometric_exactness() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0;
  for (int i = 0; i < 50; ++i) {
    const Motion3D m = generate_motion(toy8(), kAllKinds[i % 4], 32, mix_seed(101, i));
    const CameraRig rig = default_rig();
    const Motion3D back = triangulate(rig, project(rig, m));
    worst = std::max(worst, abs_mpjpe(back, m) / kMetersToMm);
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-6 && secs < 5.0,
          fmt("50 motions, worst Abs-MPJPE %.3g m (< 1e-6), %.2f s (< 5)", worst, secs)};
}

// ---------------------------------------------------------------- criterion 2

Outcome representation_exactness() {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> px(-200.0, 1200.0);
  const int J = 8;
  double worst = 0;
  bool root_exact = true;
  int degenerate = 0;
  for (int i = 0; i < 1000; ++i) {
    Motion2D m(1, J);
    if (i % 10 == 0) {
      m.frames[0].colwise() = Eigen::Vector2d(px(rng), px(rng));
      ++degenerate;
    } else {
      m.frames[0] = Mat2X::NullaryExpr(2, J, [&] { return px(rng); });
    }
    const int root = i % J;
    const Motion2D back = decode(encode(m, root));
    worst = std::max(worst, (back.frames[0] - m.frames[0]).cwiseAbs().maxCoeff());
    if (back.frames[0].col(root) != m.frames[0].col(root)) root_exact = false;
  }
  return {worst < 1e-9 && root_exact,
          fmt("1000 frames (%d all-coincident), worst %.3g px (< 1e-9), root exact: %s", degenerate, worst,
              root_exact ? "yes" : "no")};
}

// ---------------------------------------------------------------- criterion 3

Outcome oracle_end_to_end() {
  double worst_abs = 0, worst_res = 0, slowest = 0;
  const auto sched = make_schedule(100, ScheduleKind::Cosine);
  for (int i = 0; i < 4; ++i) {
    const Sample s = toy_sample(mix_seed(303, i), 32, kAllKinds[i]);
    const TensorLayout layout{8, 0, true};
    const OracleDenoiser oracle(layout.pack(s.views, s.rig), layout);
    const auto t0 = std::chrono::steady_clock::now();
    const LiftResult r = lift(s.views[s.rig.primary_index], s.rig, oracle, sched, 7 + i);
    slowest = std::max(slowest, seconds_since(t0));
    worst_abs = std::max(worst_abs, abs_mpjpe(r.motion3d, s.motion) / kMetersToMm);
    for (double v : r.per_step_residuals) worst_res = std::max(worst_res, v);
    if (r.per_step_residuals.size() != 100u) worst_res = kInf;
  }
  return {worst_abs < 1e-6 && worst_res < 1e-9 && slowest < 30.0,
          fmt("4 sequences, N=100: worst Abs-MPJPE %.3g m (< 1e-6), worst per-step residual %.3g px (< 1e-9), "
              "slowest %.2f s (< 30)",
              worst_abs, worst_res, slowest)};
}

// ---------------------------------------------------------------- criterion 4

Outcome consistency_idempotence() {
  std::mt19937_64 rng(404);
  std::normal_distribution<double> noise(0.0, 6.0);
  const TensorLayout layout{8, 0, true};
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Sample s = toy_sample(mix_seed(404, trial), 8, kAllKinds[trial % 4]);
    std::vector<Motion2D> views = s.views;
    for (auto& v : views)
      for (auto& f : v.frames) f += Mat2X::NullaryExpr(2, f.cols(), [&] { return noise(rng); });
    const MotionTensor x = layout.pack(views, s.rig);
    const MotionTensor once = consistency_project(s.rig, x, layout);
    const MotionTensor twice = consistency_project(s.rig, once, layout);
    worst = std::max(worst, (once.values - twice.values).cwiseAbs().maxCoeff());
  }
  return {worst < 1e-9, fmt("100 perturbed trials, worst |once - twice| %.3g (< 1e-9)", worst)};
}

// ---------------------------------------------------------------- criterion 5
// Oracles below are written without the library's helpers: explicit loops,
// Horn's quaternion method for the similarity and complex arithmetic for the
// yaw-only alignment.

double loop_dist(const Mat3X& a, int ja, const Mat3X& b, int jb) {
  double s = 0;
  for (int c = 0; c < 3; ++c) s += (a(c, ja) - b(c, jb)) * (a(c, ja) - b(c, jb));
  return std::sqrt(s);
}

double loop_mpjpe(const Motion3D& p, const Motion3D& g, bool root_aligned) {
  double sum = 0;
  int n = 0;
  for (int t = 0; t < g.frame_count(); ++t)
    for (int j = 0; j < g.joint_count(); ++j) {
      double s = 0;
      for (int c = 0; c < 3; ++c) {
        double d = p.frames[t](c, j) - g.frames[t](c, j);
        if (root_aligned) d -= p.frames[t](c, 0) - g.frames[t](c, 0);
        s += d * d;
      }
      sum += std::sqrt(s);
      ++n;
    }
  return 1000 * sum / n;
}

// Horn: rotation from the top eigenvector of the 4x4 quaternion matrix.
Mat3X horn_align(const Mat3X& x, const Mat3X& y) {
  const int n = static_cast<int>(x.cols());
  double mx[3] = {0, 0, 0}, my[3] = {0, 0, 0};
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) {
      mx[c] += x(c, i) / n;
      my[c] += y(c, i) / n;
    }
  double S[3][3] = {};
  double xx = 0;
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < 3; ++a) {
      xx += (x(a, i) - mx[a]) * (x(a, i) - mx[a]);
      for (int b = 0; b < 3; ++b) S[a][b] += (x(a, i) - mx[a]) * (y(b, i) - my[b]);
    }
  Eigen::Matrix4d N;
  N << S[0][0] + S[1][1] + S[2][2], S[1][2] - S[2][1], S[2][0] - S[0][2], S[0][1] - S[1][0],
      S[1][2] - S[2][1], S[0][0] - S[1][1] - S[2][2], S[0][1] + S[1][0], S[2][0] + S[0][2],
      S[2][0] - S[0][2], S[0][1] + S[1][0], -S[0][0] + S[1][1] - S[2][2], S[1][2] + S[2][1],
      S[0][1] - S[1][0], S[2][0] + S[0][2], S[1][2] + S[2][1], -S[0][0] - S[1][1] + S[2][2];
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(N);
  const Eigen::Vector4d q = es.eigenvectors().col(3);
  const Eigen::Matrix3d R = Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
  double num = 0;
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) num += (y(a, i) - my[a]) * R(a, b) * (x(b, i) - mx[b]);
  const double s = num / xx;
  Mat3X out(3, n);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < 3; ++a) {
      double v = my[a];
      for (int b = 0; b < 3; ++b) v += s * R(a, b) * (x(b, i) - mx[b]);
      out(a, i) = v;
    }
  return out;
}

double loop_pa(const Motion3D& p, const Motion3D& g) {
  double sum = 0;
  for (int t = 0; t < g.frame_count(); ++t) {
    const Mat3X a = horn_align(p.frames[t], g.frames[t]);
    double f = 0;
    for (int j = 0; j < g.joint_count(); ++j) f += loop_dist(a, j, g.frames[t], j);
    sum += f / g.joint_count();
  }
  return 1000 * sum / g.frame_count();
}

// Best yaw about +z plus translation fitted on frames [0, fit_frames), applied to all.
struct YawFit {
  double theta;
  double tx, ty, tz;
};

YawFit loop_yaw_fit(const Motion3D& p, const Motion3D& g, int fit_frames) {
  const int J = g.joint_count();
  const int n = fit_frames * J;
  std::complex<double> cp = 0, cg = 0;
  double zp = 0, zg = 0;
  for (int t = 0; t < fit_frames; ++t)
    for (int j = 0; j < J; ++j) {
      cp += std::complex<double>(p.frames[t](0, j), p.frames[t](1, j)) / double(n);
      cg += std::complex<double>(g.frames[t](0, j), g.frames[t](1, j)) / double(n);
      zp += p.frames[t](2, j) / n;
      zg += g.frames[t](2, j) / n;
    }
  std::complex<double> acc = 0;
  for (int t = 0; t < fit_frames; ++t)
    for (int j = 0; j < J; ++j) {
      const std::complex<double> a(p.frames[t](0, j), p.frames[t](1, j));
      const std::complex<double> b(g.frames[t](0, j), g.frames[t](1, j));
      acc += std::conj(a - cp) * (b - cg);
    }
  const double th = std::arg(acc);
  const std::complex<double> shift = cg - std::polar(1.0, th) * cp;
  return {th, shift.real(), shift.imag(), zg - zp};
}

double yaw_sse(const Motion3D& p, const Motion3D& g, int fit_frames, double th) {
  // translation is optimal in closed form for any fixed yaw
  const int J = g.joint_count();
  std::complex<double> cp = 0, cg = 0;
  double zp = 0, zg = 0;
  const double n = fit_frames * J;
  for (int t = 0; t < fit_frames; ++t)
    for (int j = 0; j < J; ++j) {
      cp += std::complex<double>(p.frames[t](0, j), p.frames[t](1, j)) / n;
      cg += std::complex<double>(g.frames[t](0, j), g.frames[t](1, j)) / n;
      zp += p.frames[t](2, j) / n;
      zg += g.frames[t](2, j) / n;
    }
  const std::complex<double> r = std::polar(1.0, th);
  double sse = 0;
  for (int t = 0; t < fit_frames; ++t)
    for (int j = 0; j < J; ++j) {
      const std::complex<double> a(p.frames[t](0, j), p.frames[t](1, j));
      const std::complex<double> b(g.frames[t](0, j), g.frames[t](1, j));
      sse += std::norm(r * (a - cp) + cg - b);
      const double dz = p.frames[t](2, j) - zp + zg - g.frames[t](2, j);
      sse += dz * dz;
    }
  return sse;
}

double loop_yaw_mpjpe(const Motion3D& p, const Motion3D& g, int fit_frames) {
  const YawFit f = loop_yaw_fit(p, g, fit_frames);
  const double c = std::cos(f.theta), s = std::sin(f.theta);
  double sum = 0;
  int n = 0;
  for (int t = 0; t < g.frame_count(); ++t)
    for (int j = 0; j < g.joint_count(); ++j) {
      const double x = c * p.frames[t](0, j) - s * p.frames[t](1, j) + f.tx;
      const double y = s * p.frames[t](0, j) + c * p.frames[t](1, j) + f.ty;
      const double z = p.frames[t](2, j) + f.tz;
      sum += std::sqrt((x - g.frames[t](0, j)) * (x - g.frames[t](0, j)) +
                       (y - g.frames[t](1, j)) * (y - g.frames[t](1, j)) +
                       (z - g.frames[t](2, j)) * (z - g.frames[t](2, j)));
      ++n;
    }
  return 1000 * sum / n;
}

double loop_accel(const Motion3D& p, const Motion3D& g) {
  double sum = 0;
  int n = 0;
  for (int t = 1; t + 1 < g.frame_count(); ++t)
    for (int j = 0; j < g.joint_count(); ++j) {
      double s = 0;
      for (int c = 0; c < 3; ++c) {
        const double ap = p.frames[t + 1](c, j) - 2 * p.frames[t](c, j) + p.frames[t - 1](c, j);
        const double ag = g.frames[t + 1](c, j) - 2 * g.frames[t](c, j) + g.frames[t - 1](c, j);
        s += (ap - ag) * (ap - ag);
      }
      sum += std::sqrt(s);
      ++n;
    }
  return 1000 * sum / n;
}

double loop_jitter(const Motion3D& p) {
  double sum = 0;
  int n = 0;
  for (int t = 0; t + 3 < p.frame_count(); ++t)
    for (int j = 0; j < p.joint_count(); ++j) {
      double s = 0;
      for (int c = 0; c < 3; ++c) {
        const double d = p.frames[t + 3](c, j) - 3 * p.frames[t + 2](c, j) + 3 * p.frames[t + 1](c, j) -
                         p.frames[t](c, j);
        s += d * d;
      }
      sum += std::sqrt(s);
      ++n;
    }
  return 1000 * sum / n;
}

double loop_fs(const Motion3D& p, const std::vector<int>& feet, double h) {
  double sum = 0;
  int n = 0;
  for (int f : feet)
    for (int t = 0; t + 1 < p.frame_count(); ++t)
      if (p.frames[t](2, f) < h && p.frames[t + 1](2, f) < h) {
        const double dx = p.frames[t + 1](0, f) - p.frames[t](0, f);
        const double dy = p.frames[t + 1](1, f) - p.frames[t](1, f);
        sum += std::sqrt(dx * dx + dy * dy);
        ++n;
      }
  return n ? 1000 * sum / n : 0.0;
}

double loop_troot(const Motion3D& p, const Motion3D& g) {
  double sum = 0;
  for (int t = 0; t < g.frame_count(); ++t) sum += loop_dist(p.frames[t], 0, g.frames[t], 0);
  return 1000 * sum / g.frame_count();
}

Outcome metric_oracles() {
  std::mt19937_64 rng(505);
  std::normal_distribution<double> n;
  const Skeleton sk = toy8();
  double worst = 0;
  std::string worst_name = "none";
  int chain_broken = 0, scan_beaten = 0;
  auto check = [&](const char* name, double lib, double oracle) {
    const double d = std::abs(lib - oracle);
    if (!(d <= worst)) {
      worst = d;
      worst_name = name;
    }
  };
  // 100 structured pairs (gt plus noise under a random rigid move and scale)
  // carry the ordering chain; 100 uncorrelated pairs only the oracle checks,
  // since least-squares alignment need not lower a mean distance there.
  for (int trial = 0; trial < 200; ++trial) {
    const bool structured = trial < 100;
    Motion3D g, p;
    if (structured) {
      g = generate_motion(sk, kAllKinds[trial % 4], 12, mix_seed(505, trial));
      p = g;
      const Eigen::Matrix3d r = trial % 2 ? random_rotation(rng)
                                          : Eigen::AngleAxisd(3 * n(rng), Eigen::Vector3d::UnitZ()).toRotationMatrix();
      const Eigen::Vector3d t(n(rng), n(rng), n(rng));
      const double scale = std::exp(0.2 * n(rng));
      const double sigma = 0.01 + 0.1 * std::abs(n(rng));
      for (auto& f : p.frames) f = ((scale * r * f).colwise() + t) + Mat3X::NullaryExpr(3, f.cols(), [&] { return sigma * n(rng); });
    } else {
      g = random_motion(rng, 12, 8);
      p = random_motion(rng, 12, 8);
      for (auto& f : g.frames) f.row(2).array() = f.row(2).array().abs() * 0.1;
      for (auto& f : p.frames) f.row(2).array() = f.row(2).array().abs() * 0.1;
    }
    check("mpjpe", mpjpe(p, g), loop_mpjpe(p, g, true));
    check("abs_mpjpe", abs_mpjpe(p, g), loop_mpjpe(p, g, false));
    check("pa_mpjpe", pa_mpjpe(p, g), loop_pa(p, g));
    check("w_mpjpe", w_mpjpe(p, g), loop_yaw_mpjpe(p, g, 2));
    check("wa_mpjpe", wa_mpjpe(p, g), loop_yaw_mpjpe(p, g, g.frame_count()));
    check("t_root", t_root(p, g), loop_troot(p, g));
    check("accel", accel_error(p, g), loop_accel(p, g));
    check("jitter", jitter(p), loop_jitter(p));
    check("fs", foot_sliding(p, sk.feet), loop_fs(p, sk.feet, kDefaultContactHeight));
    if (structured && !(pa_mpjpe(p, g) <= mpjpe(p, g) && wa_mpjpe(p, g) <= abs_mpjpe(p, g))) ++chain_broken;

    // The closed-form yaw must not be beaten by a dense scan.
    const double best = yaw_sse(p, g, g.frame_count(), loop_yaw_fit(p, g, g.frame_count()).theta);
    for (int k = 0; k < 720; ++k)
      if (yaw_sse(p, g, g.frame_count(), k * std::numbers::pi / 360) < best * (1 - 1e-12)) ++scan_beaten;
  }

  // Procrustes optimality against random similarities.
  int beaten = 0;
  for (int cfg = 0; cfg < 20; ++cfg) {
    const Mat3X x = random_motion(rng, 1, 8).frames[0];
    Mat3X y = random_motion(rng, 1, 8).frames[0];
    if (cfg % 2 == 0) y = (1.3 * random_rotation(rng) * x + 0.05 * random_motion(rng, 1, 8).frames[0]).colwise() +
                          Eigen::Vector3d(n(rng), n(rng), n(rng));
    const Similarity s = procrustes(x, y);
    const double opt = (s.apply(x) - y).squaredNorm();
    for (int k = 0; k < 100000; ++k) {
      Similarity r;
      r.rotation = random_rotation(rng);
      r.scale = std::exp(0.5 * n(rng));
      r.translation = Eigen::Vector3d(n(rng), n(rng), n(rng)) * 0.5;
      if ((r.apply(x) - y).squaredNorm() < opt - 1e-12) ++beaten;
    }
  }
  return {worst < 1e-9 && chain_broken == 0 && scan_beaten == 0 && beaten == 0,
          fmt("200 pairs: worst |lib - oracle| %.3g (%s, < 1e-9); pa <= mpjpe and wa <= abs broken on %d of 100; "
              "closed-form yaw beaten by scan %d times; Procrustes beaten %d times in 20 x 1e5 random similarities",
              worst, worst_name.c_str(), chain_broken, scan_beaten, beaten)};
}

// ---------------------------------------------------------------- criterion 6

DenoiserConfig mv_config(bool decoupled, bool pointmaps, int width, int blocks) {
  DenoiserConfig c;
  c.width = width;
  c.blocks = blocks;
  c.heads = 4;
  c.multi_view = true;
  c.pointmaps = pointmaps;
  c.decoupled = decoupled;
  return c;
}

Outcome training_convergence() {
  const auto t0 = std::chrono::steady_clock::now();
  const DenoiserConfig cfg = mv_config(true, false, 64, 4);
  const auto data = make_training_set(make_samples(606, 2000, 16), cfg.layout(), false);
  TrainConfig tc;
  tc.epochs = 200;
  tc.seed = 6;

  TransformerNet<float> net(cfg);
  net.init(tc.seed);
  const TrainingLog log = train(net, data, TrainStage::FinetuneMV, tc, {}, [](int e, const TrainingLog& l) {
    if (e % 20 == 0) std::cerr << "  [6] epoch " << e << " eval " << l.eval_loss.back() << std::endl;
  });
  const double ratio = log.final_loss() / log.initial_loss();

  TrainConfig prefix = tc;
  prefix.stop_after = 3;
  TransformerNet<float> again(cfg);
  again.init(tc.seed);
  const TrainingLog log2 = train(again, data, TrainStage::FinetuneMV, prefix);
  bool same = log2.eval_loss.size() == 4;
  for (std::size_t e = 0; same && e < log2.eval_loss.size(); ++e)
    same = log2.eval_loss[e] == log.eval_loss[e] && (e == 0 || log2.train_loss[e - 1] == log.train_loss[e - 1]);
  const double secs = seconds_since(t0);
  return {ratio <= 0.2 && same && secs <= 3600,
          fmt("2000 samples, T=16, width 64, 4 blocks, 200 epochs: eval MSE %.4g -> %.4g (%.1f%% of initial, "
              "<= 20%%); 3-epoch rerun bit-identical: %s; %.0f s (<= 3600)",
              log.initial_loss(), log.final_loss(), 100 * ratio, same ? "yes" : "no", secs)};
}

// ---------------------------------------------------------------- criterion 7

struct AblationBudget {
  int samples = 500;
  int frames = 16;
  int epochs = 60;
  int heldout = 16;
  int width = 64;
  int blocks = 4;
};

double heldout_mpjpe(const TransformerDenoiser& model, const std::vector<Sample>& test, std::uint64_t seed) {
  std::vector<double> errs;
  const auto sched = make_schedule(model.config().steps, model.config().schedule);
  for (std::size_t i = 0; i < test.size(); ++i) {
    const Sample& s = test[i];
    try {
      const LiftResult r = lift(s.views[s.rig.primary_index], s.rig, model, sched, mix_seed(seed, i));
      errs.push_back(mpjpe(r.motion3d, s.motion));
    } catch (const Error&) {
      errs.push_back(kInf);  // a failed lift counts as unbounded error
    }
  }
  return median(errs);
}

Outcome decoupling_ablation(const AblationBudget& b) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> dec, dir;
  std::ostringstream per_seed;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto train_samples = make_samples(mix_seed(700, seed), b.samples, b.frames);
    const auto test = make_samples(mix_seed(701, seed), b.heldout, b.frames);
    double med[2];
    for (int variant = 0; variant < 2; ++variant) {
      const bool decoupled = variant == 0;
      const DenoiserConfig cfg = mv_config(decoupled, false, b.width, b.blocks);
      auto net = std::make_shared<TransformerNet<float>>(cfg);
      net->init(seed);
      TrainConfig tc;
      tc.epochs = b.epochs;
      tc.seed = seed;
      const TrainingLog log =
          train(*net, make_training_set(train_samples, cfg.layout(), false), TrainStage::FinetuneMV, tc);
      med[variant] = heldout_mpjpe(TransformerDenoiser(net), test, seed);
      std::cerr << "  [7] seed " << seed << (decoupled ? " decoupled" : " direct") << " eval "
                << log.initial_loss() << " -> " << log.final_loss() << ", held-out median MPJPE " << med[variant]
                << " mm" << std::endl;
    }
    dec.push_back(med[0]);
    dir.push_back(med[1]);
    per_seed << fmt(" s%d %.1f/%.1f", int(seed), med[0], med[1]);
  }
  const double md = median(dec), mr = median(dir);
  return {md < mr, fmt("median held-out MPJPE decoupled %.1f mm vs direct %.1f mm (must be lower); per seed "
                       "dec/dir:%s; budget %d samples x %d epochs, %d held-out; %.0f s",
                       md, mr, per_seed.str().c_str(), b.samples, b.epochs, b.heldout, seconds_since(t0))};
}

// ---------------------------------------------------------------- criterion 8

struct PointmapBudget {
  int samples = 300;
  int frames = 16;
  int epochs = 40;
  int width = 64;
  int blocks = 4;
};

Outcome pointmap_convergence(const PointmapBudget& b) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> on_epochs, off_epochs;
  std::ostringstream per_seed;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto samples = make_samples(mix_seed(800, seed), b.samples, b.frames);
    TrainingLog logs[2];
    for (int variant = 0; variant < 2; ++variant) {
      const bool pm = variant == 1;
      const DenoiserConfig cfg = mv_config(true, pm, b.width, b.blocks);
      TransformerNet<float> net(cfg);
      // Both variants start from the same function: the pointmap model takes
      // the shared weights and its zero-initialised cross-attention output.
      TransformerNet<float> base(mv_config(true, false, b.width, b.blocks));
      base.init(seed);
      if (pm)
        net.init_from(base.params(), seed);
      else
        net = base;
      TrainConfig tc;
      tc.epochs = b.epochs;
      tc.seed = seed;
      logs[variant] = train(net, make_training_set(samples, cfg.layout(), pm), TrainStage::FinetuneMV, tc);
      std::cerr << "  [8] seed " << seed << (pm ? " pointmaps on" : " pointmaps off") << " eval "
                << logs[variant].initial_loss() << " -> " << logs[variant].final_loss() << std::endl;
    }
    const double target = logs[0].final_loss();
    const int off = logs[0].epochs_to(target), on = logs[1].epochs_to(target);
    off_epochs.push_back(off);
    on_epochs.push_back(on < 0 ? kInf : on);
    per_seed << fmt(" s%d on %s/off %d", int(seed), on < 0 ? "never" : std::to_string(on).c_str(), off);
  }
  const double mon = median(on_epochs), moff = median(off_epochs);
  return {mon < moff, fmt("median epochs to the off-run's final loss: on %.0f vs off %.0f (must be lower);%s; "
                          "budget %d samples x %d epochs; %.0f s",
                          mon, moff, per_seed.str().c_str(), b.samples, b.epochs, seconds_since(t0))};
}

// ---------------------------------------------------------------- criterion 9

Outcome refinement() {
  const Skeleton sk = toy8();
  std::mt19937_64 rng(909);
  std::normal_distribution<double> n(0.0, 0.01);
  auto rmse = [](const Motion3D& a, const Motion3D& b) {
    double s = 0;
    long k = 0;
    for (int t = 0; t < a.frame_count(); ++t) {
      s += (a.frames[t] - b.frames[t]).squaredNorm();
      k += a.frames[t].cols();
    }
    return std::sqrt(s / k);
  };
  bool improves = true, monotone = true;
  double worst_bone = 0, worst_ratio = 0;
  for (int i = 0; i < 8; ++i) {
    const Motion3D gt = generate_motion(sk, kAllKinds[i % 4], 32, mix_seed(909, i));
    Motion3D w = gt;
    for (auto& f : w.frames) f += Mat3X::NullaryExpr(3, f.cols(), [&] { return n(rng); });
    FitConfig cfg;
    cfg.bone_weight = 100;
    cfg.smooth_weight = i % 2;  // both the per-frame and the coupled solver
    const FitResult r = fit_skeleton_detailed(w, sk, cfg);
    improves = improves && rmse(r.motion, gt) < rmse(w, gt);
    worst_ratio = std::max(worst_ratio, rmse(r.motion, gt) / rmse(w, gt));
    worst_bone = std::max(worst_bone, max_bone_deviation(r.motion, sk));
    for (std::size_t k = 1; k < r.cost_history.size(); ++k)
      monotone = monotone && r.cost_history[k] <= r.cost_history[k - 1];
  }

  // Central-difference Jacobian check on a short noisy sequence.
  const Motion3D gt = generate_motion(sk, MotionKind::Walker, 4, 99);
  Motion3D w = gt;
  for (auto& f : w.frames) f += Mat3X::NullaryExpr(3, f.cols(), [&] { return 5 * n(rng); });
  const FitProblem prob{w, sk, FitConfig{100.0, 1.0, 10, 1e-8, 1e-3}};
  Eigen::VectorXd x = flatten(gt);
  for (int k = 0; k < x.size(); ++k) x[k] += 3 * n(rng);
  const Eigen::MatrixXd jac(prob.jacobian(x));
  double worst_rel = 0;
  const double h = 1e-6;
  for (int i = 0; i < prob.variables(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const Eigen::VectorXd fd = (prob.residual(xp) - prob.residual(xm)) / (2 * h);
    for (int k = 0; k < prob.residuals(); ++k)
      worst_rel = std::max(worst_rel, std::abs(jac(k, i) - fd[k]) / std::max(1.0, std::abs(fd[k])));
  }
  return {improves && monotone && worst_bone < 0.01 && worst_rel < 1e-5,
          fmt("8 sequences + 1 cm noise: RMSE ratio <= %.3f (< 1), worst bone deviation %.3f%% (< 1%%), cost "
              "%s; Jacobian worst relative error %.3g (< 1e-5)",
              worst_ratio, 100 * worst_bone, monotone ? "non-increasing" : "increased", worst_rel)};
}

// ---------------------------------------------------------------- criterion 10

Outcome gravity_aligned_metrics() {
  double worst_w = 0, worst_wa = 0, min_abs = kInf;
  for (int i = 0; i < 8; ++i) {
    const Motion3D gt = toy_sample(mix_seed(1010, i), 16, kAllKinds[i % 4]).motion;
    Motion3D pred = gt;
    const Eigen::Matrix3d r = Eigen::AngleAxisd(std::numbers::pi / 6, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    const Eigen::Vector3d t = Eigen::Vector3d(std::cos(0.7 * i), std::sin(0.7 * i), 0.0);  // 1 m horizontal
    for (auto& f : pred.frames) f = (r * f).colwise() + t;
    worst_w = std::max(worst_w, w_mpjpe(pred, gt));
    worst_wa = std::max(worst_wa, wa_mpjpe(pred, gt));
    min_abs = std::min(min_abs, abs_mpjpe(pred, gt));
  }
  return {worst_w < 1e-9 && worst_wa < 1e-9 && min_abs > 500,
          fmt("8 sequences, 30 deg yaw + 1 m shift: worst W-MPJPE %.3g, WA-MPJPE %.3g (< 1e-9), min Abs-MPJPE %.0f "
              "mm (> 500)",
              worst_w, worst_wa, min_abs)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  AblationBudget ab;
  PointmapBudget pb;
  app.add_option("--only", only, "criteria to run (default: all)")->check(CLI::Range(1, 10));
  app.add_option("--ablation-samples", ab.samples);
  app.add_option("--ablation-epochs", ab.epochs);
  app.add_option("--ablation-heldout", ab.heldout);
  app.add_option("--pointmap-samples", pb.samples);
  app.add_option("--pointmap-epochs", pb.epochs);
  CLI11_PARSE(app, argc, argv);

  const std::set<int> soft{8};
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"geometric exactness", geometric_exactness},
      {"representation exactness", representation_exactness},
      {"oracle end-to-end lift", oracle_end_to_end},
      {"consistency idempotence", consistency_idempotence},
      {"metric oracle equivalence", metric_oracles},
      {"toy training convergence", training_convergence},
      {"decoupling ablation direction", [&] { return decoupling_ablation(ab); }},
      {"pointmap convergence direction (soft)", [&] { return pointmap_convergence(pb); }},
      {"refinement", refinement},
      {"gravity-aligned metrics", gravity_aligned_metrics},
  };

  int hard_failures = 0;
  for (int i = 1; i <= static_cast<int>(criteria.size()); ++i) {
    if (!only.empty() && std::find(only.begin(), only.end(), i) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i - 1].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << i << ": " << criteria[i - 1].first << " | "
              << o.detail << std::endl;
    if (!o.pass && !soft.count(i)) ++hard_failures;
  }
  return hard_failures ? 1 : 0;
}
