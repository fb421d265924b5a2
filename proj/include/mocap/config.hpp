#pragma once

// Pipeline configuration: one JSON document, every key optional. Command-line
// flags override values read from the file.

#include <string>
#include <vector>

#include "mocap/dataset.hpp"
#include "mocap/denoiser.hpp"
#include "mocap/io.hpp"
#include "mocap/refine.hpp"
#include "mocap/training.hpp"

namespace mocap {

struct PipelineConfig {
  std::string skeleton = "toy8";
  std::string rig_path;  // empty: default rig with `views` cameras
  int views = 4;
  int count = 100;
  int frames = 16;
  std::vector<std::string> kinds{"walker", "circle", "squat", "random_smooth"};
  AugmentParams augment = default_augment();
  int steps = kDefaultSteps;
  std::string schedule = "cosine";
  int width = 64;
  int blocks = 4;
  int heads = 4;
  bool pointmaps = false;
  bool decouple = true;
  int pointmap_grid = kDefaultPointmapGrid;
  TrainConfig train;
  FitConfig fit;
  std::uint64_t seed = 0;
  std::string out;

  CameraRig rig() const { return rig_path.empty() ? default_rig(views) : io::load_rig(rig_path); }

  DenoiserConfig denoiser(bool multi_view) const {
    const Skeleton sk = skeleton_by_name(skeleton);
    DenoiserConfig c;
    c.joints = sk.joint_count();
    c.root_joint = sk.root;
    c.width = width;
    c.blocks = blocks;
    c.heads = heads;
    c.multi_view = multi_view;
    c.pointmaps = multi_view && pointmaps;
    c.decoupled = decouple;
    c.pointmap_grid = pointmap_grid;
    c.steps = steps;
    c.schedule = schedule_kind_from_string(schedule);
    return c;
  }

  DatasetParams dataset() const {
    DatasetParams p;
    p.skeleton = skeleton;
    p.kinds.clear();
    for (const auto& k : kinds) p.kinds.push_back(motion_kind_from_string(k));
    p.count = count;
    p.frames = frames;
    p.rig = rig();
    p.augment = augment;
    p.seed = seed;
    p.pointmap_grid = pointmap_grid;
    return p;
  }

  void validate() const {
    skeleton_by_name(skeleton);
    schedule_kind_from_string(schedule);
    for (const auto& k : kinds) motion_kind_from_string(k);
    require(!kinds.empty(), ErrorKind::InvalidArgument, "config: kinds must not be empty");
    require(views >= 2, ErrorKind::InvalidArgument, "config: views must be at least 2");
    require(count >= 1 && frames >= 1, ErrorKind::InvalidArgument, "config: count and frames must be positive");
    require(steps >= 2, ErrorKind::BadStepCount, "config: steps must be at least 2");
    require(width > 0 && blocks > 0 && heads > 0 && width % heads == 0, ErrorKind::InvalidArgument,
            "config: width must be a positive multiple of heads");
    if (!rig_path.empty() && !io::fs::exists(rig_path))
      throw Error(ErrorKind::Io, "config: rig file " + rig_path + " does not exist");
    mocap::validate(augment);
    mocap::validate(fit);
  }
};

inline PipelineConfig config_from_json(const io::json& j, const std::string& where = "config") {
  PipelineConfig c;
  const std::string& w = where;
  c.skeleton = io::field_or(j, "skeleton", c.skeleton, w);
  c.rig_path = io::field_or(j, "rig", c.rig_path, w);
  c.views = io::field_or(j, "views", c.views, w);
  c.count = io::field_or(j, "count", c.count, w);
  c.frames = io::field_or(j, "frames", c.frames, w);
  c.kinds = io::field_or(j, "kinds", c.kinds, w);
  c.steps = io::field_or(j, "steps", c.steps, w);
  c.schedule = io::field_or(j, "schedule", c.schedule, w);
  c.width = io::field_or(j, "width", c.width, w);
  c.blocks = io::field_or(j, "blocks", c.blocks, w);
  c.heads = io::field_or(j, "heads", c.heads, w);
  c.pointmaps = io::field_or(j, "pointmaps", c.pointmaps, w);
  c.decouple = io::field_or(j, "decouple", c.decouple, w);
  c.pointmap_grid = io::field_or(j, "pointmap_grid", c.pointmap_grid, w);
  c.seed = io::field_or<std::uint64_t>(j, "seed", c.seed, w);
  c.out = io::field_or(j, "out", c.out, w);
  if (j.contains("augment")) {
    const auto& a = j["augment"];
    const std::string aw = w + ".augment";
    c.augment.yaw_range = io::field_or(a, "yaw_range", c.augment.yaw_range, aw);
    c.augment.translation_range = io::field_or(a, "translation_range", c.augment.translation_range, aw);
    c.augment.cam_pitch_range = io::field_or(a, "cam_pitch_range", c.augment.cam_pitch_range, aw);
    c.augment.cam_yaw_range = io::field_or(a, "cam_yaw_range", c.augment.cam_yaw_range, aw);
    c.augment.cam_roll_range = io::field_or(a, "cam_roll_range", c.augment.cam_roll_range, aw);
    c.augment.cam_distance_range = io::field_or(a, "cam_distance_range", c.augment.cam_distance_range, aw);
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    const std::string tw = w + ".train";
    c.train.epochs = io::field_or(t, "epochs", c.train.epochs, tw);
    c.train.batch_size = io::field_or(t, "batch_size", c.train.batch_size, tw);
    c.train.lr = io::field_or(t, "lr", c.train.lr, tw);
    c.train.momentum = io::field_or(t, "momentum", c.train.momentum, tw);
    c.train.clip_norm = io::field_or(t, "clip_norm", c.train.clip_norm, tw);
    c.train.cosine_decay = io::field_or(t, "cosine_decay", c.train.cosine_decay, tw);
    c.train.eval_samples = io::field_or(t, "eval_samples", c.train.eval_samples, tw);
  }
  if (j.contains("fit")) {
    const auto& f = j["fit"];
    const std::string fw = w + ".fit";
    c.fit.bone_weight = io::field_or(f, "bone_weight", c.fit.bone_weight, fw);
    c.fit.smooth_weight = io::field_or(f, "smooth_weight", c.fit.smooth_weight, fw);
    c.fit.max_iters = io::field_or(f, "max_iters", c.fit.max_iters, fw);
    c.fit.tol = io::field_or(f, "tol", c.fit.tol, fw);
    c.fit.damping = io::field_or(f, "damping", c.fit.damping, fw);
  }
  return c;
}

inline PipelineConfig load_config(const io::fs::path& p) { return config_from_json(io::read_json(p), p.string()); }

}  // namespace mocap
