#pragma once

// Denoiser training: single-view pretraining and multi-view fine-tuning with
// an x0 MSE objective. Single-threaded; the loss curve is a pure function of
// (seed, data, config) for a given build.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "mocap/denoiser.hpp"
#include "mocap/synthdata.hpp"

namespace mocap {

enum class TrainStage { Pretrain2D, FinetuneMV };

inline std::string to_string(TrainStage s) {
  return s == TrainStage::Pretrain2D ? "pretrain_2d" : "finetune_mv";
}

inline TrainStage train_stage_from_string(const std::string& s) {
  if (s == "pretrain_2d") return TrainStage::Pretrain2D;
  if (s == "finetune_mv") return TrainStage::FinetuneMV;
  throw Error(ErrorKind::UnknownKind, "unknown training stage '" + s + "'");
}

// One sample in network layout.
struct TrainingItem {
  MotionTensor x0;  // all views
  MotionTensor m0;  // primary view, single-view tensor
  int primary = 0;
  std::vector<Camera> cameras;
  std::vector<Eigen::MatrixXd> pointmap_features;  // empty when not needed
};

inline TrainingItem make_training_item(const Sample& s, const TensorLayout& layout, bool pointmaps) {
  TrainingItem it;
  it.x0 = layout.pack(s.views, s.rig);
  it.primary = s.rig.primary_index;
  it.m0 = layout.pack_single(s.views[it.primary], s.rig.primary());
  it.cameras = s.rig.cameras;
  if (pointmaps) {
    require(static_cast<int>(s.pointmaps.size()) == s.rig.view_count(),
            ErrorKind::DatasetModeMismatch, "dataset has no pointmaps");
    for (const auto& pm : s.pointmaps) it.pointmap_features.push_back(pointmap_features(pm));
  }
  return it;
}

inline std::vector<TrainingItem> make_training_set(const std::vector<Sample>& samples,
                                                   const TensorLayout& layout, bool pointmaps) {
  std::vector<TrainingItem> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(make_training_item(s, layout, pointmaps));
  return out;
}

struct TrainConfig {
  int epochs = 10;
  int batch_size = 32;
  double lr = 0.02;
  double momentum = 0.9;
  double clip_norm = 1.0;
  bool cosine_decay = true;  // lr follows a half cosine to 5% of its start
  int eval_samples = 64;
  std::uint64_t seed = 0;
  int stop_after = -1;  // if >= 0, run only this many epochs of the `epochs`-long schedule
};

struct TrainingLog {
  std::vector<double> train_loss;  // mean batch loss per epoch
  std::vector<double> eval_loss;   // [0] before training, then one per epoch
  std::vector<double> grad_norm;   // mean pre-clip norm per epoch

  double initial_loss() const { return eval_loss.front(); }
  double final_loss() const { return eval_loss.back(); }

  // First epoch whose eval loss is at or below `target`; -1 if never.
  int epochs_to(double target) const {
    for (std::size_t e = 0; e < eval_loss.size(); ++e)
      if (eval_loss[e] <= target) return static_cast<int>(e);
    return -1;
  }
};

namespace detail {

// Fixed draws of (view, step, noise) for one item, used by both the training
// and the evaluation batches.
struct Draw {
  int view = 0;  // pretraining only
  int step = 0;
  MotionTensor noise;
};

inline void check_stage(const DenoiserConfig& cfg, TrainStage stage,
                        const std::vector<TrainingItem>& data) {
  require(!data.empty(), ErrorKind::InvalidArgument, "empty training set");
  const int views = data.front().x0.views;
  for (const auto& it : data)
    require(it.x0.views == views && it.x0.frames == data.front().x0.frames &&
                it.x0.rows == cfg.rows(),
            ErrorKind::ShapeMismatch, "training items must share one shape");
  if (stage == TrainStage::Pretrain2D) {
    if (cfg.multi_view || cfg.pointmaps)
      throw Error(ErrorKind::DatasetModeMismatch, "pretrain_2d needs a single-view model");
  } else {
    if (!cfg.multi_view)
      throw Error(ErrorKind::DatasetModeMismatch, "finetune_mv needs a multi-view model");
    if (views < 2)
      throw Error(ErrorKind::DatasetModeMismatch, "finetune_mv needs multi-view samples");
    if (cfg.pointmaps)
      for (const auto& it : data)
        require(static_cast<int>(it.pointmap_features.size()) == views,
                ErrorKind::DatasetModeMismatch, "dataset has no pointmaps");
  }
}

// Fills sample slot `k` of `batch` and the matching rows of `target`.
template <class S>
void fill_slot(DenoiserBatch<S>& batch, nn::Mat<S>& target, int k, const DenoiserConfig& cfg,
               TrainStage stage, const TrainingItem& it, const Draw& d,
               const DiffusionSchedule& sched) {
  batch.steps[k] = d.step;
  if (stage == TrainStage::Pretrain2D) {
    MotionTensor x0(1, it.x0.frames, it.x0.rows);
    x0.values = it.x0.values.middleRows(d.view * it.x0.frames, it.x0.frames);
    const MotionTensor xn = q_sample(x0, d.step, d.noise, sched);
    append_sample(batch, k, cfg, xn, nullptr, 0, {it.cameras[d.view]}, nullptr);
    target.middleRows(k * x0.frames, x0.frames) = x0.values.cast<S>();
  } else {
    const MotionTensor xn = q_sample(it.x0, d.step, d.noise, sched);
    append_sample(batch, k, cfg, xn, &it.m0, it.primary, it.cameras,
                  cfg.pointmaps ? &it.pointmap_features : nullptr);
    const int rows = it.x0.views * it.x0.frames;
    target.middleRows(k * rows, rows) = it.x0.values.cast<S>();
  }
}

inline Draw make_draw(const TrainingItem& it, TrainStage stage, int view, int steps,
                      std::mt19937_64& rng) {
  Draw d;
  d.view = view;
  d.step = std::uniform_int_distribution<int>(0, steps - 1)(rng);
  d.noise = gaussian_like(
      MotionTensor(stage == TrainStage::Pretrain2D ? 1 : it.x0.views, it.x0.frames, it.x0.rows), rng);
  return d;
}

}  // namespace detail

// Mean squared error of the network over fixed draws.
template <class S>
double evaluate_loss(const TransformerNet<S>& net, TrainStage stage,
                     const std::vector<TrainingItem>& data, const std::vector<int>& items,
                     const std::vector<detail::Draw>& draws, const DiffusionSchedule& sched,
                     int batch_size) {
  const DenoiserConfig& cfg = net.config();
  const int frames = data.front().x0.frames;
  const int views = stage == TrainStage::Pretrain2D ? 1 : data.front().x0.views;
  double sum = 0;
  long count = 0;
  for (std::size_t b0 = 0; b0 < items.size(); b0 += batch_size) {
    const int nb = static_cast<int>(std::min<std::size_t>(batch_size, items.size() - b0));
    auto batch = make_batch<S>(cfg, nb, views, frames);
    nn::Mat<S> target(batch.token_count(), cfg.motion_features());
    for (int k = 0; k < nb; ++k)
      detail::fill_slot(batch, target, k, cfg, stage, data[items[b0 + k]], draws[b0 + k], sched);
    typename TransformerNet<S>::Cache cache;
    const nn::Mat<S> y = net.forward(batch, cache);
    sum += (y - target).template cast<double>().squaredNorm();
    count += y.size();
  }
  return sum / static_cast<double>(count);
}

using EpochCallback = std::function<void(int epoch, const TrainingLog&)>;

// Trains `net` in place. `eval_data` defaults to the first
// cfg.eval_samples items of `data` when empty.
template <class S>
TrainingLog train(TransformerNet<S>& net, const std::vector<TrainingItem>& data, TrainStage stage,
                  const TrainConfig& tc, const std::vector<TrainingItem>& eval_data = {},
                  const EpochCallback& on_epoch = {}) {
  const DenoiserConfig& cfg = net.config();
  detail::check_stage(cfg, stage, data);
  require(tc.epochs >= 0 && tc.batch_size >= 1 && tc.lr > 0, ErrorKind::InvalidArgument,
          "bad training config");
  const DiffusionSchedule sched = make_schedule(cfg.steps, cfg.schedule);
  const int views = data.front().x0.views;
  const int frames = data.front().x0.frames;
  const int batch_views = stage == TrainStage::Pretrain2D ? 1 : views;

  const std::vector<TrainingItem>& ev = eval_data.empty() ? data : eval_data;
  if (!eval_data.empty()) detail::check_stage(cfg, stage, eval_data);
  std::vector<int> eval_items(std::min<int>(tc.eval_samples, static_cast<int>(ev.size())));
  std::iota(eval_items.begin(), eval_items.end(), 0);
  std::vector<detail::Draw> eval_draws;
  {
    std::mt19937_64 erng(mix_seed(tc.seed, 0xE7A1));
    for (int i : eval_items)
      eval_draws.push_back(detail::make_draw(ev[i], stage, i % views, cfg.steps, erng));
  }

  TrainingLog log;
  log.eval_loss.push_back(evaluate_loss(net, stage, ev, eval_items, eval_draws, sched, 64));
  if (on_epoch) on_epoch(0, log);

  std::mt19937_64 rng(mix_seed(tc.seed, 0x7A1));
  nn::SgdMomentum<S> opt(net.params(), tc.lr, tc.momentum, tc.clip_norm);
  auto grads = net.params().zeros_like();
  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const int batches = static_cast<int>((data.size() + tc.batch_size - 1) / tc.batch_size);
  const long total_steps = static_cast<long>(batches) * tc.epochs;
  long step_index = 0;

  const int last = tc.stop_after >= 0 ? std::min(tc.stop_after, tc.epochs) : tc.epochs;
  for (int epoch = 1; epoch <= last; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0, norm_sum = 0;
    for (int b = 0; b < batches; ++b) {
      const int b0 = b * tc.batch_size;
      const int nb = std::min<int>(tc.batch_size, static_cast<int>(data.size()) - b0);
      const int view = std::uniform_int_distribution<int>(0, views - 1)(rng);
      auto batch = make_batch<S>(cfg, nb, batch_views, frames);
      nn::Mat<S> target(batch.token_count(), cfg.motion_features());
      for (int k = 0; k < nb; ++k) {
        const TrainingItem& it = data[order[b0 + k]];
        const detail::Draw d = detail::make_draw(it, stage, view, cfg.steps, rng);
        detail::fill_slot(batch, target, k, cfg, stage, it, d, sched);
      }
      typename TransformerNet<S>::Cache cache;
      const nn::Mat<S> y = net.forward(batch, cache);
      const nn::Mat<S> diff = y - target;
      const double loss = diff.template cast<double>().squaredNorm() / diff.size();
      if (!std::isfinite(loss)) throw Error(ErrorKind::NonFiniteCost, "training loss is not finite");
      grads.set_zero();
      net.backward(batch, cache, diff * static_cast<S>(2.0 / diff.size()), grads);
      if (tc.cosine_decay && total_steps > 1) {
        const double f = static_cast<double>(step_index) / (total_steps - 1);
        opt.set_lr(tc.lr * (0.05 + 0.95 * 0.5 * (1 + std::cos(std::numbers::pi * f))));
      }
      norm_sum += opt.step(net.params(), grads);
      loss_sum += loss;
      ++step_index;
    }
    log.train_loss.push_back(loss_sum / batches);
    log.grad_norm.push_back(norm_sum / batches);
    log.eval_loss.push_back(evaluate_loss(net, stage, ev, eval_items, eval_draws, sched, 64));
    if (on_epoch) on_epoch(epoch, log);
  }
  return log;
}

}  // namespace mocap
