#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mocap/metrics.hpp"
#include "mocap/synthdata.hpp"

using namespace mocap;

namespace {

Motion3D random_motion(std::mt19937_64& rng, int frames, int joints, double spread = 1.0) {
  std::normal_distribution<double> n(0.0, spread);
  Motion3D m(frames, joints);
  for (auto& f : m.frames) f = Mat3X::NullaryExpr(3, joints, [&] { return n(rng); });
  return m;
}

Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized().toRotationMatrix();
}

Motion3D transform(const Motion3D& m, const Eigen::Matrix3d& r, const Eigen::Vector3d& t, double s = 1) {
  Motion3D out = m;
  for (auto& f : out.frames) f = ((s * r) * f).colwise() + t;
  return out;
}

double dist(const Mat3X& a, const Mat3X& b, int ja, int jb, int c0 = 0, int dims = 3) {
  double s = 0;
  for (int c = c0; c < c0 + dims; ++c) s += (a(c, ja) - b(c, jb)) * (a(c, ja) - b(c, jb));
  return std::sqrt(s);
}

double mpjpe_loop(const Motion3D& p, const Motion3D& g, bool root_aligned) {
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

double frame_error(const Mat3X& a, const Mat3X& b) {
  double s = 0;
  for (int j = 0; j < a.cols(); ++j) s += dist(a, b, j, j);
  return s / a.cols();
}

}  // namespace

TEST(Procrustes, IdentityOnEqualInputs) {
  std::mt19937_64 rng(1);
  const Mat3X x = random_motion(rng, 1, 10).frames[0];
  const Similarity s = procrustes(x, x);
  EXPECT_LT((s.rotation - Eigen::Matrix3d::Identity()).norm(), 1e-12);
  EXPECT_NEAR(s.scale, 1.0, 1e-12);
  EXPECT_LT(s.translation.norm(), 1e-12);
}

TEST(Procrustes, RecoversExactSimilarity) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat3X x = random_motion(rng, 1, 12).frames[0];
    const Eigen::Matrix3d r = random_rotation(rng);
    const Eigen::Vector3d t(0.3, -2, 1.5);
    const Mat3X y = ((2.0 * r) * x).colwise() + t;
    const Similarity s = procrustes(x, y, true);
    EXPECT_LT((s.rotation - r).norm(), 1e-9);
    EXPECT_NEAR(s.scale, 2.0, 1e-9);
    EXPECT_LT((s.translation - t).norm(), 1e-9);
    EXPECT_NEAR(s.rotation.determinant(), 1.0, 1e-12);
  }
}

TEST(Procrustes, ProperRotationForReflectedInput) {
  std::mt19937_64 rng(3);
  const Mat3X x = random_motion(rng, 1, 8).frames[0];
  Mat3X y = x;
  y.row(0) *= -1;
  EXPECT_NEAR(procrustes(x, y).rotation.determinant(), 1.0, 1e-12);
}

TEST(Procrustes, BeatsRandomSimilarities) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  for (int cfg = 0; cfg < 5; ++cfg) {
    const Mat3X x = random_motion(rng, 1, 8).frames[0];
    const Mat3X y = random_motion(rng, 1, 8).frames[0];
    const Similarity best = procrustes(x, y);
    const double opt = (best.apply(x) - y).squaredNorm();
    for (int k = 0; k < 2000; ++k) {
      Similarity s;
      s.rotation = random_rotation(rng);
      s.translation = Eigen::Vector3d(n(rng), n(rng), n(rng)) * 0.5;
      s.scale = std::exp(0.5 * n(rng));
      EXPECT_LE(opt, (s.apply(x) - y).squaredNorm() + 1e-12);
    }
  }
}

TEST(Procrustes, CollinearIsDegenerate) {
  Mat3X x(3, 5);
  for (int j = 0; j < 5; ++j) x.col(j) = Eigen::Vector3d(1, 2, 3) * j;
  try {
    procrustes(x, x);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateConfiguration);
  }
  EXPECT_THROW(procrustes(Mat3X::Ones(3, 4), Mat3X::Ones(3, 4)), Error);
}

TEST(Mpjpe, Examples) {
  std::mt19937_64 rng(5);
  const Motion3D g = random_motion(rng, 4, 6);
  EXPECT_EQ(mpjpe(g, g), 0.0);
  const Motion3D p = transform(g, Eigen::Matrix3d::Identity(), {0.01, 0, 0});
  EXPECT_NEAR(mpjpe(p, g, MpjpeMode::None), 10.0, 1e-9);
  EXPECT_NEAR(mpjpe(p, g, MpjpeMode::RootAligned), 0.0, 1e-9);
  EXPECT_NEAR(t_root(transform(g, Eigen::Matrix3d::Identity(), {0, 0.05, 0}), g), 50.0, 1e-9);
  EXPECT_THROW(mpjpe(g, random_motion(rng, 3, 6)), Error);
}

TEST(Metrics, MatchLoopOracles) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const Motion3D g = random_motion(rng, 6, 7);
    const Motion3D p = random_motion(rng, 6, 7);
    EXPECT_NEAR(mpjpe(p, g, MpjpeMode::RootAligned), mpjpe_loop(p, g, true), 1e-9);
    EXPECT_NEAR(mpjpe(p, g, MpjpeMode::None), mpjpe_loop(p, g, false), 1e-9);
    double tr = 0;
    for (int t = 0; t < 6; ++t) tr += dist(p.frames[t], g.frames[t], 0, 0);
    EXPECT_NEAR(t_root(p, g), 1000 * tr / 6, 1e-9);

    double acc = 0, jit = 0;
    for (int t = 1; t < 5; ++t)
      for (int j = 0; j < 7; ++j) {
        double s = 0;
        for (int c = 0; c < 3; ++c) {
          const double ap = p.frames[t + 1](c, j) - 2 * p.frames[t](c, j) + p.frames[t - 1](c, j);
          const double ag = g.frames[t + 1](c, j) - 2 * g.frames[t](c, j) + g.frames[t - 1](c, j);
          s += (ap - ag) * (ap - ag);
        }
        acc += std::sqrt(s);
      }
    for (int t = 0; t < 3; ++t)
      for (int j = 0; j < 7; ++j) {
        double s = 0;
        for (int c = 0; c < 3; ++c) {
          const double d = p.frames[t + 3](c, j) - 3 * p.frames[t + 2](c, j) +
                           3 * p.frames[t + 1](c, j) - p.frames[t](c, j);
          s += d * d;
        }
        jit += std::sqrt(s);
      }
    EXPECT_NEAR(accel_error(p, g), 1000 * acc / 28, 1e-9);
    EXPECT_NEAR(jitter(p), 1000 * jit / 21, 1e-9);

    // PA: aligned error is the per-frame error after the returned similarity.
    double pa = 0;
    for (int t = 0; t < 6; ++t)
      pa += frame_error(procrustes(p.frames[t], g.frames[t]).apply(p.frames[t]), g.frames[t]);
    EXPECT_NEAR(pa_mpjpe(p, g), 1000 * pa / 6, 1e-9);
    EXPECT_LE(pa_mpjpe(p, g), mpjpe(p, g) + 1e-9);
    EXPECT_LE(wa_mpjpe(p, g), abs_mpjpe(p, g) + 1e-9);
  }
}

TEST(WorldAlignment, YawAndTranslationAreRemoved) {
  const Skeleton sk = toy8();
  const Motion3D g = generate_motion(sk, MotionKind::Walker, 20, 3);
  const Eigen::Matrix3d r = Eigen::AngleAxisd(0.52, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  const Motion3D p = transform(g, r, {1.0, -0.4, 0.2});
  EXPECT_LT(w_mpjpe(p, g), 1e-9);
  EXPECT_LT(wa_mpjpe(p, g), 1e-9);
  EXPECT_GT(abs_mpjpe(p, g), 500);
}

TEST(WorldAlignment, TiltIsNotRemoved) {
  const Motion3D g = generate_motion(toy8(), MotionKind::Circle, 10, 3);
  const Eigen::Matrix3d r = Eigen::AngleAxisd(0.2, Eigen::Vector3d::UnitX()).toRotationMatrix();
  EXPECT_GT(wa_mpjpe(transform(g, r, Eigen::Vector3d::Zero()), g), 1.0);
}

TEST(WorldAlignment, YawAlignBeatsRandomYaw) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3.2, 3.2);
  for (int trial = 0; trial < 10; ++trial) {
    const Mat3X x = random_motion(rng, 1, 9).frames[0];
    const Mat3X y = random_motion(rng, 1, 9).frames[0];
    const Similarity s = yaw_align(x, y);
    const double opt = (s.apply(x) - y).squaredNorm();
    for (int k = 0; k < 500; ++k) {
      const Eigen::Matrix3d r = Eigen::AngleAxisd(u(rng), Eigen::Vector3d::UnitZ()).toRotationMatrix();
      const Mat3X rx = r * x;
      const Eigen::Vector3d t = y.rowwise().mean() - rx.rowwise().mean();
      EXPECT_LE(opt, ((rx.colwise() + t) - y).squaredNorm() + 1e-12);
    }
  }
}

TEST(WorldAlignment, DriftAfterSecondFrame) {
  const Motion3D g = generate_motion(toy8(), MotionKind::Walker, 30, 4);
  for (double rate : {0.001, 0.01, 0.05}) {
    Motion3D p = g;
    for (int t = 2; t < 30; ++t) p.frames[t].row(0).array() += rate * (t - 1);
    EXPECT_GT(w_mpjpe(p, g), 0.0);
    EXPECT_LE(wa_mpjpe(p, g), w_mpjpe(p, g) + 1e-9);
  }
}

TEST(Smoothness, ConstantVelocity) {
  Motion3D m(10, 3);
  for (int t = 0; t < 10; ++t) m.frames[t] = Mat3X::Constant(3, 3, 0.1 * t);
  EXPECT_NEAR(jitter(m), 0.0, 1e-9);
  EXPECT_NEAR(accel_error(m, m), 0.0, 1e-12);
  EXPECT_THROW(jitter(Motion3D(3, 2)), Error);
}

TEST(FootSliding, PinnedFootIsZero) {
  Motion3D m(10, 2);
  for (int t = 0; t < 10; ++t) m.frames[t].col(1) = Eigen::Vector3d(0.3, 0.1, 0.0);
  EXPECT_EQ(foot_sliding(m, {1}), 0.0);
}

TEST(FootSliding, InjectedSlip) {
  const Skeleton sk = toy8();
  Motion3D m = generate_motion(sk, MotionKind::Walker, 60, 2);
  // Freeze feet while in contact, then add 3 mm/frame slip along x.
  for (int f : sk.feet)
    for (int t = 1; t < 60; ++t)
      if (m.frames[t](2, f) < kDefaultContactHeight && m.frames[t - 1](2, f) < kDefaultContactHeight)
        m.frames[t].col(f).head<2>() = m.frames[t - 1].col(f).head<2>() + Eigen::Vector2d(0.003, 0);
  EXPECT_NEAR(foot_sliding(m, sk.feet), 3.0, 0.15);
}

TEST(Metrics, ScaleEquivariance) {
  std::mt19937_64 rng(8);
  const Motion3D g = random_motion(rng, 8, 6), p = random_motion(rng, 8, 6);
  const double k = 2.5;
  const Motion3D gk = transform(g, Eigen::Matrix3d::Identity(), Eigen::Vector3d::Zero(), k);
  const Motion3D pk = transform(p, Eigen::Matrix3d::Identity(), Eigen::Vector3d::Zero(), k);
  EXPECT_NEAR(mpjpe(pk, gk), k * mpjpe(p, g), 1e-9);
  EXPECT_NEAR(pa_mpjpe(pk, gk), k * pa_mpjpe(p, g), 1e-9);
  EXPECT_NEAR(wa_mpjpe(pk, gk), k * wa_mpjpe(p, g), 1e-9);
  EXPECT_NEAR(w_mpjpe(pk, gk), k * w_mpjpe(p, g), 1e-9);
  EXPECT_NEAR(jitter(pk), k * jitter(p), 1e-9);
}

TEST(EvaluateAll, IdentityAndRigid) {
  const Skeleton sk = toy8();
  const Motion3D g = generate_motion(sk, MotionKind::Walker, 16, 9);
  const EvalOptions opt{0, sk.feet, kDefaultContactHeight};
  const MetricsReport same = evaluate_all(g, g, opt);
  for (double v : {same.pa_mpjpe, same.mpjpe, same.w_mpjpe, same.wa_mpjpe, same.abs_mpjpe, same.t_root, same.accel})
    EXPECT_NEAR(v, 0.0, 1e-9);
  EXPECT_DOUBLE_EQ(same.jitter, jitter(g));

  const Eigen::Matrix3d r = Eigen::AngleAxisd(0.4, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  const Motion3D p = transform(g, r, {0.5, 0.2, 0});
  const MetricsReport rep = evaluate_all(p, g, opt);
  EXPECT_LT(rep.pa_mpjpe, 1e-9);
  EXPECT_LT(rep.wa_mpjpe, 1e-9);
  EXPECT_GT(rep.abs_mpjpe, 0.0);
  EXPECT_EQ(rep.abs_mpjpe, abs_mpjpe(p, g));
  EXPECT_EQ(rep.w_mpjpe, w_mpjpe(p, g));
  EXPECT_EQ(rep.fs, foot_sliding(p, sk.feet));

  const CameraRig rig = default_rig();
  const MetricsReport cam = evaluate_all(p, g, opt, &rig);
  EXPECT_TRUE(cam.camera_frame);
  EXPECT_NEAR(cam.mpjpe, rep.mpjpe, 1e-9);  // rotation-invariant
}

TEST(Report, CsvFieldsAndMean) {
  MetricsReport a, b;
  a.name = "a";
  a.mpjpe = 1;
  b.name = "b";
  b.mpjpe = 2;
  a.frame_count = b.frame_count = 3;
  const MetricsReport m = mean_report({a, b});
  EXPECT_DOUBLE_EQ(m.mpjpe, 1.5);
  const std::string header = MetricsReport::csv_header();
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), 12);
  const std::string row = a.csv_row();
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), 12);
  EXPECT_EQ(row.substr(0, 2), "a,");
}

TEST(Units, Conversions) {
  EXPECT_NEAR(mm_per_frame2_to_m_per_s2(1.0, 30), 0.9, 1e-12);
  EXPECT_NEAR(mm_per_frame3_to_m_per_s3(1.0, 10), 1.0, 1e-12);
}
