#pragma once

// Transformer denoiser predicting the clean MotionTensor (x0) from a noisy
// one. Tokens are one per (sample, view, frame). Each block runs temporal
// self-attention, then (multi-view) attention across views at each frame,
// then (pointmap-enabled) cross-attention to the view's ground pointmap,
// then a feedforward layer, all pre-norm residual.
//
// Token input: [x_n row features | primary-view M0 features or zeros |
// primary flag]. Timestep and per-view camera embeddings are added to every
// token; a fixed sinusoidal frame encoding is added as well.

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "mocap/diffusion.hpp"
#include "mocap/geometry.hpp"
#include "mocap/motion_tensor.hpp"
#include "mocap/nn/layers.hpp"
#include "mocap/nn/params.hpp"

namespace mocap {

struct DenoiserConfig {
  int joints = 8;
  int root_joint = 0;
  int width = 64;
  int blocks = 4;
  int heads = 4;
  int ffn_mult = 2;
  bool multi_view = true;
  bool pointmaps = false;
  bool decoupled = true;
  int pointmap_grid = kDefaultPointmapGrid;
  int steps = kDefaultSteps;
  ScheduleKind schedule = ScheduleKind::Cosine;

  int rows() const { return joints + 1; }
  int motion_features() const { return 2 * rows(); }
  int input_features() const { return 2 * motion_features() + 1; }
  int cells() const { return pointmap_grid * pointmap_grid; }
  TensorLayout layout() const { return {joints, root_joint, decoupled}; }

  bool operator==(const DenoiserConfig&) const = default;
};

inline constexpr int kCameraFeatures = 16;
inline constexpr int kPointmapFeatures = 7;
inline constexpr int kPointmapValidColumn = 3;

// Intrinsics normalised by image size, world->camera rotation, and the camera
// centre in units of 3 m.
inline Eigen::Matrix<double, 1, kCameraFeatures> camera_features(const Camera& c) {
  Eigen::Matrix<double, 1, kCameraFeatures> f;
  f << c.fx / c.image_w, c.fy / c.image_h, c.cx / c.image_w, c.cy / c.image_h, c.rotation(0, 0),
      c.rotation(0, 1), c.rotation(0, 2), c.rotation(1, 0), c.rotation(1, 1), c.rotation(1, 2),
      c.rotation(2, 0), c.rotation(2, 1), c.rotation(2, 2), 0, 0, 0;
  f.tail<3>() = c.center().transpose() / 3.0;
  return f;
}

// Per cell: ground x/5, y/5, (x^2+y^2)/25, valid, centred cell u, v and
// u^2+v^2. The quadratic terms let a linear key express distance.
inline Eigen::MatrixXd pointmap_features(const Pointmap& pm) {
  Eigen::MatrixXd f(pm.grid_w * pm.grid_h, kPointmapFeatures);
  for (int r = 0; r < pm.grid_h; ++r) {
    for (int c = 0; c < pm.grid_w; ++c) {
      const int i = r * pm.grid_w + c;
      const double u = (c + 0.5) / pm.grid_w - 0.5, v = (r + 0.5) / pm.grid_h - 0.5;
      const bool ok = pm.valid[i] != 0;
      const double x = ok ? pm.points[i].x() / 5.0 : 0.0, y = ok ? pm.points[i].y() / 5.0 : 0.0;
      f.row(i) << x, y, x * x + y * y, ok ? 1.0 : 0.0, u, v, u * u + v * v;
    }
  }
  return f;
}

template <class S>
struct DenoiserBatch {
  int samples = 0, views = 0, frames = 0;
  nn::Mat<S> tokens;     // samples*views*frames x input_features
  std::vector<int> steps;  // per sample
  nn::Mat<S> cameras;    // samples*views x kCameraFeatures
  nn::Mat<S> pointmaps;  // samples*views*cells x kPointmapFeatures, may be empty

  int token_count() const { return samples * views * frames; }
};

template <class S>
class TransformerNet {
 public:
  using Mat = nn::Mat<S>;

  explicit TransformerNet(const DenoiserConfig& cfg) : cfg_(cfg) {
    require(cfg.width % 2 == 0 && cfg.width % cfg.heads == 0, ErrorKind::InvalidArgument,
            "width must be even and divisible by heads");
    require(cfg.blocks >= 1 && cfg.joints >= 2, ErrorKind::InvalidArgument, "bad denoiser config");
    const int d = cfg.width;
    input_ = nn::Linear<S>::create(p_, "input", cfg.input_features(), d);
    time1_ = nn::Linear<S>::create(p_, "time.0", d, d);
    time2_ = nn::Linear<S>::create(p_, "time.1", d, d);
    cam1_ = nn::Linear<S>::create(p_, "camera.0", kCameraFeatures, d);
    cam2_ = nn::Linear<S>::create(p_, "camera.1", d, d);
    for (int b = 0; b < cfg.blocks; ++b) {
      const std::string name = "block" + std::to_string(b);
      Block blk;
      blk.ln_time = nn::LayerNorm<S>::create(p_, name + ".temporal_norm", d);
      blk.temporal = nn::GroupedSelfAttention<S>::create(p_, name + ".temporal", d, cfg.heads);
      if (cfg.multi_view) {
        blk.ln_view = nn::LayerNorm<S>::create(p_, name + ".view_norm", d);
        blk.view = nn::GroupedSelfAttention<S>::create(p_, name + ".view", d, cfg.heads);
      }
      if (cfg.pointmaps) {
        blk.ln_cross = nn::LayerNorm<S>::create(p_, name + ".cross_norm", d);
        blk.cross = nn::FeatureCrossAttention<S>::create(p_, name + ".cross", d, cfg.heads,
                                                         kPointmapFeatures, kPointmapValidColumn);
      }
      blk.ln_ff = nn::LayerNorm<S>::create(p_, name + ".ff_norm", d);
      blk.ff = nn::FeedForward<S>::create(p_, name + ".ff", d, cfg.ffn_mult * d);
      blocks_.push_back(blk);
    }
    final_norm_ = nn::LayerNorm<S>::create(p_, "final_norm", d);
    output_ = nn::Linear<S>::create(p_, "output", d, cfg.motion_features());
  }

  const DenoiserConfig& config() const { return cfg_; }
  nn::ParamSet<S>& params() { return p_; }
  const nn::ParamSet<S>& params() const { return p_; }

  void init(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const double res_gain = 1.0 / std::sqrt(2.0 * cfg_.blocks);
    input_.init(p_, rng);
    time1_.init(p_, rng);
    time2_.init(p_, rng);
    cam1_.init(p_, rng);
    cam2_.init(p_, rng);
    for (const Block& b : blocks_) {
      b.ln_time.init(p_);
      b.temporal.init(p_, rng, res_gain);
      if (cfg_.multi_view) {
        b.ln_view.init(p_);
        b.view.init(p_, rng, res_gain);
      }
      if (cfg_.pointmaps) {
        b.ln_cross.init(p_);
        b.cross.init(p_, rng, res_gain);
      }
      b.ln_ff.init(p_);
      b.ff.init(p_, rng, res_gain);
    }
    final_norm_.init(p_);
    output_.init(p_, rng);
  }

  // Initialise every parameter, then overwrite those whose name and shape
  // match `source`. The output projections of layers absent from `source`
  // start at zero so the loaded network's function is unchanged.
  // Returns the number of parameters copied.
  int init_from(const nn::ParamSet<S>& source, std::uint64_t seed) {
    init(seed);
    int copied = 0;
    for (int i = 0; i < p_.size(); ++i) {
      const int j = source.find(p_.name(i));
      if (j >= 0 && source[j].rows() == p_[i].rows() && source[j].cols() == p_[i].cols()) {
        p_[i] = source[j];
        ++copied;
      }
    }
    for (const Block& b : blocks_) {
      if (cfg_.multi_view && source.find(p_.name(b.view.proj.w)) < 0) {
        p_[b.view.proj.w].setZero();
        p_[b.view.proj.b].setZero();
      }
      if (cfg_.pointmaps && source.find(p_.name(b.cross.proj.w)) < 0) {
        p_[b.cross.proj.w].setZero();
        p_[b.cross.proj.b].setZero();
      }
    }
    return copied;
  }

  struct BlockCache {
    typename nn::LayerNorm<S>::Cache ln_time, ln_view, ln_cross, ln_ff;
    typename nn::GroupedSelfAttention<S>::Cache temporal, view;
    typename nn::FeatureCrossAttention<S>::Cache cross;
    typename nn::FeedForward<S>::Cache ff;
  };

  struct Cache {
    Mat input;
    Mat time_in, time_hidden, time_act;
    Mat cam_hidden, cam_act;
    std::vector<int> view_perm;
    std::vector<BlockCache> blocks;
    typename nn::LayerNorm<S>::Cache final_norm;
    Mat final_out;
  };

  Mat forward(const DenoiserBatch<S>& batch, Cache& c) const {
    check(batch);
    const int d = cfg_.width;
    const int n = batch.token_count();
    const int per_sample = batch.views * batch.frames;

    c.input = batch.tokens;
    Mat h = input_.forward(p_, batch.tokens);

    Mat pos(batch.frames, d);
    for (int t = 0; t < batch.frames; ++t) nn::sinusoid<S>(t, d, pos.row(t).data());

    c.time_in.resize(batch.samples, d);
    for (int b = 0; b < batch.samples; ++b)
      nn::sinusoid<S>(batch.steps[b], d, c.time_in.row(b).data());
    c.time_hidden = time1_.forward(p_, c.time_in);
    c.time_act = nn::Gelu<S>::forward(c.time_hidden);
    const Mat temb = time2_.forward(p_, c.time_act);

    c.cam_hidden = cam1_.forward(p_, batch.cameras);
    c.cam_act = nn::Gelu<S>::forward(c.cam_hidden);
    const Mat cemb = cam2_.forward(p_, c.cam_act);

    for (int i = 0; i < n; ++i)
      h.row(i) += pos.row(i % batch.frames) + temb.row(i / per_sample) + cemb.row(i / batch.frames);

    c.view_perm = view_permutation(batch);
    c.blocks.resize(blocks_.size());
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
      const Block& blk = blocks_[k];
      BlockCache& bc = c.blocks[k];
      h += blk.temporal.forward(p_, blk.ln_time.forward(p_, h, bc.ln_time), batch.frames, nullptr,
                                bc.temporal);
      if (cfg_.multi_view)
        h += blk.view.forward(p_, blk.ln_view.forward(p_, h, bc.ln_view), batch.views,
                              &c.view_perm, bc.view);
      if (cfg_.pointmaps)
        h += blk.cross.forward(p_, blk.ln_cross.forward(p_, h, bc.ln_cross), batch.pointmaps,
                               batch.frames, cfg_.cells(), bc.cross);
      h += blk.ff.forward(p_, blk.ln_ff.forward(p_, h, bc.ln_ff), bc.ff);
    }
    c.final_out = final_norm_.forward(p_, h, c.final_norm);
    return output_.forward(p_, c.final_out);
  }

  // Accumulates parameter gradients of sum(dout .* output) into `g`.
  void backward(const DenoiserBatch<S>& batch, const Cache& c, const Mat& dout,
                nn::ParamSet<S>& g) const {
    const int n = batch.token_count();
    const int per_sample = batch.views * batch.frames;
    Mat dh = final_norm_.backward(p_, c.final_norm, output_.backward(p_, c.final_out, dout, g), g);
    for (int k = static_cast<int>(blocks_.size()) - 1; k >= 0; --k) {
      const Block& blk = blocks_[k];
      const BlockCache& bc = c.blocks[k];
      dh += blk.ln_ff.backward(p_, bc.ln_ff, blk.ff.backward(p_, bc.ff, dh, g), g);
      if (cfg_.pointmaps)
        dh += blk.ln_cross.backward(
            p_, bc.ln_cross,
            blk.cross.backward(p_, bc.cross, batch.pointmaps, dh, batch.frames, cfg_.cells(), g), g);
      if (cfg_.multi_view)
        dh += blk.ln_view.backward(
            p_, bc.ln_view, blk.view.backward(p_, bc.view, dh, batch.views, &c.view_perm, g), g);
      dh += blk.ln_time.backward(
          p_, bc.ln_time, blk.temporal.backward(p_, bc.temporal, dh, batch.frames, nullptr, g), g);
    }

    Mat dtemb = Mat::Zero(batch.samples, cfg_.width);
    Mat dcemb = Mat::Zero(batch.samples * batch.views, cfg_.width);
    for (int i = 0; i < n; ++i) {
      dtemb.row(i / per_sample) += dh.row(i);
      dcemb.row(i / batch.frames) += dh.row(i);
    }
    const Mat dtime_act = time2_.backward(p_, c.time_act, dtemb, g);
    time1_.backward(p_, c.time_in, nn::Gelu<S>::backward(c.time_hidden, dtime_act), g);
    const Mat dcam_act = cam2_.backward(p_, c.cam_act, dcemb, g);
    cam1_.backward(p_, batch.cameras, nn::Gelu<S>::backward(c.cam_hidden, dcam_act), g);
    input_.backward(p_, c.input, dh, g);
  }

 private:
  struct Block {
    nn::LayerNorm<S> ln_time, ln_view, ln_cross, ln_ff;
    nn::GroupedSelfAttention<S> temporal, view;
    nn::FeatureCrossAttention<S> cross;
    nn::FeedForward<S> ff;
  };

  void check(const DenoiserBatch<S>& b) const {
    require(b.tokens.rows() == b.token_count() && b.tokens.cols() == cfg_.input_features(),
            ErrorKind::ShapeMismatch, "denoiser batch token shape");
    require(static_cast<int>(b.steps.size()) == b.samples, ErrorKind::ShapeMismatch,
            "denoiser batch step count");
    require(b.cameras.rows() == b.samples * b.views && b.cameras.cols() == kCameraFeatures,
            ErrorKind::ShapeMismatch, "denoiser batch camera features");
    if (!cfg_.multi_view && b.views != 1)
      throw Error(ErrorKind::ModeMismatch, "single-view denoiser given multi-view input");
    if (cfg_.pointmaps)
      require(b.pointmaps.rows() == b.samples * b.views * cfg_.cells() &&
                  b.pointmaps.cols() == kPointmapFeatures,
              ErrorKind::ShapeMismatch, "denoiser batch pointmap features");
  }

  // Source row for each token in (sample, frame, view) order.
  static std::vector<int> view_permutation(const DenoiserBatch<S>& b) {
    std::vector<int> perm(b.token_count());
    int i = 0;
    for (int s = 0; s < b.samples; ++s)
      for (int t = 0; t < b.frames; ++t)
        for (int v = 0; v < b.views; ++v) perm[i++] = (s * b.views + v) * b.frames + t;
    return perm;
  }

  DenoiserConfig cfg_;
  nn::ParamSet<S> p_;
  nn::Linear<S> input_, time1_, time2_, cam1_, cam2_, output_;
  std::vector<Block> blocks_;
  nn::LayerNorm<S> final_norm_;
};

// Everything a denoiser may condition on besides x_n and the step.
struct Conditioning {
  Motion2D m0;  // primary-view global 2D motion, pixels
  CameraRig rig;
  std::vector<Pointmap> pointmaps;  // one per view; may be empty
};

class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual MotionTensor predict(const MotionTensor& x_n, int step, const Conditioning& cond) const = 0;
  virtual TensorLayout layout() const = 0;
};

// Test double: ignores its input and returns a fixed clean tensor.
class OracleDenoiser : public Denoiser {
 public:
  OracleDenoiser(MotionTensor gt, TensorLayout layout) : gt_(std::move(gt)), layout_(layout) {}

  MotionTensor predict(const MotionTensor&, int, const Conditioning&) const override { return gt_; }
  TensorLayout layout() const override { return layout_; }

 private:
  MotionTensor gt_;
  TensorLayout layout_;
};

inline OracleDenoiser oracle_denoiser(const MotionTensor& gt, TensorLayout layout) {
  return OracleDenoiser(gt, layout);
}

// Appends the rows for one sample to a batch under construction.
template <class S>
void append_sample(DenoiserBatch<S>& batch, int sample, const DenoiserConfig& cfg,
                   const MotionTensor& x_n, const MotionTensor* m0_tensor, int primary_view,
                   const std::vector<Camera>& cameras, const std::vector<Eigen::MatrixXd>* pm_feats) {
  const int f = cfg.motion_features();
  const int per = batch.views * batch.frames;
  for (int v = 0; v < batch.views; ++v) {
    for (int t = 0; t < batch.frames; ++t) {
      auto row = batch.tokens.row(sample * per + v * batch.frames + t);
      row.head(f) = x_n.values.row(v * batch.frames + t).template cast<S>();
      if (m0_tensor && v == primary_view) {
        row.segment(f, f) = m0_tensor->values.row(t).template cast<S>();
        row(2 * f) = S(1);
      } else {
        row.segment(f, f).setZero();
        row(2 * f) = S(0);
      }
    }
    batch.cameras.row(sample * batch.views + v) = camera_features(cameras[v]).template cast<S>();
    if (cfg.pointmaps) {
      const int cells = cfg.cells();
      batch.pointmaps.block((sample * batch.views + v) * cells, 0, cells, kPointmapFeatures) =
          (*pm_feats)[v].template cast<S>();
    }
  }
}

template <class S>
DenoiserBatch<S> make_batch(const DenoiserConfig& cfg, int samples, int views, int frames) {
  DenoiserBatch<S> b;
  b.samples = samples;
  b.views = views;
  b.frames = frames;
  b.tokens.resize(samples * views * frames, cfg.input_features());
  b.steps.assign(samples, 0);
  b.cameras.resize(samples * views, kCameraFeatures);
  if (cfg.pointmaps) b.pointmaps.resize(samples * views * cfg.cells(), kPointmapFeatures);
  return b;
}

// Trained network behind the Denoiser interface. Inference runs in float.
class TransformerDenoiser : public Denoiser {
 public:
  explicit TransformerDenoiser(const DenoiserConfig& cfg) : net_(std::make_shared<TransformerNet<float>>(cfg)) {}
  explicit TransformerDenoiser(std::shared_ptr<TransformerNet<float>> net) : net_(std::move(net)) {}

  const DenoiserConfig& config() const { return net_->config(); }
  TransformerNet<float>& net() { return *net_; }
  const TransformerNet<float>& net() const { return *net_; }
  TensorLayout layout() const override { return config().layout(); }

  MotionTensor predict(const MotionTensor& x_n, int step, const Conditioning& cond) const override {
    const DenoiserConfig& cfg = config();
    require(x_n.rows == cfg.rows(), ErrorKind::ShapeMismatch, "denoise: row count");
    require(x_n.views == cond.rig.view_count(), ErrorKind::ShapeMismatch, "denoise: view count");
    if (!cfg.multi_view && x_n.views != 1)
      throw Error(ErrorKind::ModeMismatch, "single-view denoiser given multi-view input");
    if (cfg.pointmaps)
      require(static_cast<int>(cond.pointmaps.size()) == x_n.views, ErrorKind::InvalidArgument,
              "denoise: pointmaps required by this model");
    auto batch = make_batch<float>(cfg, 1, x_n.views, x_n.frames);
    batch.steps[0] = step;
    const TensorLayout lay = cfg.layout();
    MotionTensor m0;
    const bool has_m0 = cfg.multi_view && cond.m0.frame_count() > 0;
    if (has_m0) {
      require(cond.m0.frame_count() == x_n.frames, ErrorKind::ShapeMismatch, "denoise: m0 frames");
      m0 = lay.pack_single(cond.m0, cond.rig.primary());
    }
    std::vector<Eigen::MatrixXd> feats;
    if (cfg.pointmaps)
      for (const auto& pm : cond.pointmaps) feats.push_back(pointmap_features(pm));
    append_sample(batch, 0, cfg, x_n, has_m0 ? &m0 : nullptr, cond.rig.primary_index,
                  cond.rig.cameras, cfg.pointmaps ? &feats : nullptr);
    typename TransformerNet<float>::Cache cache;
    const nn::Mat<float> y = net_->forward(batch, cache);
    MotionTensor out(x_n.views, x_n.frames, x_n.rows);
    out.values = y.cast<double>();
    return out;
  }

 private:
  std::shared_ptr<TransformerNet<float>> net_;
};

}  // namespace mocap
