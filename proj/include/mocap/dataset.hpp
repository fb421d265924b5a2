#pragma once

// On-disk datasets: manifest.json plus one sample_NNNNN.json per sample.

#include <cstdio>
#include <string>
#include <vector>

#include "mocap/io.hpp"
#include "mocap/synthdata.hpp"

namespace mocap {

struct DatasetParams {
  std::string skeleton = "toy8";
  std::vector<MotionKind> kinds{MotionKind::Walker, MotionKind::Circle, MotionKind::Squat,
                                MotionKind::RandomSmooth};
  int count = 100;
  int frames = 16;
  CameraRig rig = default_rig();
  AugmentParams augment = default_augment();
  std::uint64_t seed = 0;
  int pointmap_grid = kDefaultPointmapGrid;
};

struct DatasetSummary {
  int count = 0, frames = 0, views = 0, joints = 0;
  double min_z = 0, max_z = 0;        // over all joints, meters
  double max_abs_xy = 0;              // horizontal extent, meters
  double min_px = 0, max_px = 0;      // over all projected coordinates
  std::vector<std::string> files;
};

inline std::string sample_file_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sample_%05d.json", index);
  return buf;
}

inline Sample dataset_sample(const DatasetParams& p, int index) {
  return generate_indexed_sample(skeleton_by_name(p.skeleton), p.kinds, p.frames, p.rig, p.augment,
                                 p.seed, index, p.pointmap_grid);
}

inline io::json to_json(const DatasetParams& p, const DatasetSummary& s) {
  std::vector<std::string> kinds;
  for (auto k : p.kinds) kinds.push_back(to_string(k));
  const AugmentParams& a = p.augment;
  return {{"format_version", io::kFormatVersion}, {"type", "manifest"}, {"skeleton", p.skeleton},
          {"kinds", kinds}, {"count", p.count}, {"frames", p.frames}, {"seed", p.seed},
          {"pointmap_grid", p.pointmap_grid}, {"rig", io::to_json(p.rig)},
          {"augment",
           {{"yaw_range", a.yaw_range}, {"translation_range", a.translation_range},
            {"cam_pitch_range", a.cam_pitch_range}, {"cam_yaw_range", a.cam_yaw_range},
            {"cam_roll_range", a.cam_roll_range}, {"cam_distance_range", a.cam_distance_range}}},
          {"summary",
           {{"views", s.views}, {"joints", s.joints}, {"min_z", s.min_z}, {"max_z", s.max_z},
            {"max_abs_xy", s.max_abs_xy}, {"min_px", s.min_px}, {"max_px", s.max_px}}},
          {"files", s.files}};
}

inline DatasetParams dataset_params_from_json(const io::json& j, const std::string& where) {
  io::check_version(j, where);
  DatasetParams p;
  p.skeleton = io::field<std::string>(j, "skeleton", where);
  p.kinds.clear();
  for (const auto& k : io::field<std::vector<std::string>>(j, "kinds", where))
    p.kinds.push_back(motion_kind_from_string(k));
  p.count = io::field<int>(j, "count", where);
  p.frames = io::field<int>(j, "frames", where);
  p.seed = io::field<std::uint64_t>(j, "seed", where);
  p.pointmap_grid = io::field<int>(j, "pointmap_grid", where);
  p.rig = io::rig_from_json(io::child(j, "rig", where), where + ".rig");
  const io::json& a = io::child(j, "augment", where);
  const std::string aw = where + ".augment";
  p.augment.yaw_range = io::field<double>(a, "yaw_range", aw);
  p.augment.translation_range = io::field<double>(a, "translation_range", aw);
  p.augment.cam_pitch_range = io::field<double>(a, "cam_pitch_range", aw);
  p.augment.cam_yaw_range = io::field<double>(a, "cam_yaw_range", aw);
  p.augment.cam_roll_range = io::field<double>(a, "cam_roll_range", aw);
  p.augment.cam_distance_range = io::field<double>(a, "cam_distance_range", aw);
  return p;
}

inline DatasetSummary build_dataset(const DatasetParams& p, const io::fs::path& dir) {
  require(p.count >= 1, ErrorKind::InvalidArgument, "dataset count must be at least 1");
  require(p.frames >= 1, ErrorKind::InvalidArgument, "dataset frames must be at least 1");
  validate(p.rig);
  validate(p.augment);
  const Skeleton sk = skeleton_by_name(p.skeleton);
  std::error_code ec;
  io::fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());

  DatasetSummary s;
  s.count = p.count;
  s.frames = p.frames;
  s.views = p.rig.view_count();
  s.joints = sk.joint_count();
  s.min_z = s.min_px = 1e300;
  s.max_z = s.max_px = -1e300;
  for (int i = 0; i < p.count; ++i) {
    const Sample smp = dataset_sample(p, i);
    for (const auto& f : smp.motion.frames) {
      s.min_z = std::min(s.min_z, f.row(2).minCoeff());
      s.max_z = std::max(s.max_z, f.row(2).maxCoeff());
      s.max_abs_xy = std::max(s.max_abs_xy, f.topRows(2).cwiseAbs().maxCoeff());
    }
    for (const auto& v : smp.views)
      for (const auto& f : v.frames) {
        s.min_px = std::min(s.min_px, f.minCoeff());
        s.max_px = std::max(s.max_px, f.maxCoeff());
      }
    const std::string name = sample_file_name(i);
    io::write_json(dir / name, io::to_json(smp, sk));
    s.files.push_back(name);
  }
  io::write_json(dir / "manifest.json", to_json(p, s));
  return s;
}

struct Dataset {
  DatasetParams params;
  std::vector<Sample> samples;
};

inline Dataset load_dataset(const io::fs::path& dir, int limit = -1) {
  const io::fs::path mpath = dir / "manifest.json";
  const io::json m = io::read_json(mpath);
  Dataset d;
  d.params = dataset_params_from_json(m, mpath.string());
  const auto files = io::field<std::vector<std::string>>(m, "files", mpath.string());
  const int n = limit >= 0 ? std::min<int>(limit, static_cast<int>(files.size())) : static_cast<int>(files.size());
  for (int i = 0; i < n; ++i) d.samples.push_back(io::sample_from_json(io::read_json(dir / files[i]), (dir / files[i]).string()));
  return d;
}

struct VerifyReport {
  int samples = 0;
  int checks = 0;
  std::vector<std::string> failures;
  bool ok() const { return failures.empty(); }
};

// Self-consistency of a dataset directory: every stored sample must equal its
// regeneration from the manifest, its 2D views must be projections of its
// motion, encoded views must decode to them, and the round trip through
// triangulation must recover the motion.
inline VerifyReport verify_dataset(const io::fs::path& dir) {
  const Dataset d = load_dataset(dir);
  const Skeleton sk = skeleton_by_name(d.params.skeleton);
  VerifyReport r;
  auto check = [&](bool ok, int i, const std::string& what) {
    ++r.checks;
    if (!ok) r.failures.push_back(sample_file_name(i) + ": " + what);
  };
  check(static_cast<int>(d.samples.size()) == d.params.count, -1, "sample count differs from manifest");
  for (int i = 0; i < static_cast<int>(d.samples.size()); ++i) {
    const Sample& s = d.samples[i];
    ++r.samples;
    const Sample regen = dataset_sample(d.params, i);
    check(s.seed == regen.seed && s.kind == regen.kind, i, "seed or kind differs from regeneration");
    check(max_joint_distance(s.motion, regen.motion) == 0.0, i, "motion differs from regeneration");
    check(static_cast<int>(s.views.size()) == s.rig.view_count() &&
              static_cast<int>(s.encoded.size()) == s.rig.view_count(),
          i, "view count");
    double proj = 0, dec = 0;
    for (int v = 0; v < s.rig.view_count() && v < static_cast<int>(s.views.size()); ++v) {
      proj = std::max(proj, max_joint_distance(s.views[v], project(s.rig.cameras[v], s.motion, v)));
      if (v < static_cast<int>(s.encoded.size()))
        dec = std::max(dec, max_joint_distance(decode(s.encoded[v]), s.views[v]));
    }
    check(proj < 1e-9, i, "stored 2D is not the projection of the motion");
    check(dec < 1e-9, i, "encoded views do not decode to the stored 2D");
    std::vector<Motion2D> decoded;
    for (const auto& e : s.encoded) decoded.push_back(decode(e));
    check(max_joint_distance(triangulate(s.rig, decoded), s.motion) < 1e-6, i,
          "triangulated round trip exceeds 1e-6 m");
    double bone = 0, lowest = 1e300;
    for (const auto& f : s.motion.frames) {
      const auto len = bone_lengths(f, sk);
      for (int j = 0; j < sk.joint_count(); ++j) bone = std::max(bone, std::abs(len[j] - sk.rest_length(j)));
      lowest = std::min(lowest, f.row(2).minCoeff());
    }
    check(bone < 1e-6, i, "bone lengths differ from rest lengths");
    check(lowest >= -1e-6, i, "motion goes below the ground");
    bool pm_ok = static_cast<int>(s.pointmaps.size()) == s.rig.view_count();
    for (std::size_t v = 0; pm_ok && v < s.pointmaps.size(); ++v) {
      const Pointmap& pm = s.pointmaps[v];
      const Camera& cam = s.rig.cameras[v];
      for (int row = 0; row < pm.grid_h; ++row)
        for (int col = 0; col < pm.grid_w; ++col) {
          if (!pm.is_valid(row, col)) continue;
          const Eigen::Vector3d& x = pm.at(row, col);
          const Eigen::Vector2d px = project_point(cam, x);
          const double cw = static_cast<double>(cam.image_w) / pm.grid_w;
          const double ch = static_cast<double>(cam.image_h) / pm.grid_h;
          if (std::abs(x.z()) >= 1e-9 ||
              (px - cell_center(cam, pm.grid_w, pm.grid_h, row, col)).norm() >= 0.5 * std::min(cw, ch))
            pm_ok = false;
        }
    }
    check(pm_ok, i, "pointmap invariants violated");
  }
  return r;
}

}  // namespace mocap
