#pragma once

// JSON documents for motions, rigs, samples and checkpoints. Doubles are
// written with round-trip precision. Files are written to a temporary name
// and renamed into place.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mocap/denoiser.hpp"
#include "mocap/error.hpp"
#include "mocap/geometry.hpp"
#include "mocap/motion.hpp"
#include "mocap/representation.hpp"
#include "mocap/synthdata.hpp"

namespace mocap::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr int kFormatVersion = 1;

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_atomic(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create directory " + path.parent_path().string() + ": " + ec.message());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot open " + tmp.string() + " for writing");
    out << text;
    out.flush();
    if (!out) throw Error(ErrorKind::Io, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorKind::Io, "cannot move " + tmp.string() + " to " + path.string());
  }
}

inline json read_json(const fs::path& path) {
  const std::string text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, path.string() + ": " + e.what());
  }
}

inline void write_json(const fs::path& path, const json& j) { write_text_atomic(path, j.dump(1) + "\n"); }

// Field access that reports the offending field path on failure.
template <class T>
T field(const json& j, const std::string& key, const std::string& where) {
  if (!j.is_object() || !j.contains(key))
    throw Error(ErrorKind::Parse, where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, where + "." + key + ": " + e.what());
  }
}

template <class T>
T field_or(const json& j, const std::string& key, const T& fallback, const std::string& where) {
  return j.is_object() && j.contains(key) ? field<T>(j, key, where) : fallback;
}

inline const json& child(const json& j, const std::string& key, const std::string& where) {
  if (!j.is_object() || !j.contains(key))
    throw Error(ErrorKind::Parse, where + ": missing field '" + key + "'");
  return j.at(key);
}

inline void check_version(const json& j, const std::string& where) {
  const int v = field<int>(j, "format_version", where);
  if (v != kFormatVersion)
    throw Error(ErrorKind::Parse, where + ": unsupported format_version " + std::to_string(v));
}

// ---- motions

inline json to_json(const Motion3D& m, const std::vector<std::string>& joint_names = {}) {
  json frames = json::array();
  for (const auto& f : m.frames) {
    json fr = json::array();
    for (int j = 0; j < f.cols(); ++j) fr.push_back({f(0, j), f(1, j), f(2, j)});
    frames.push_back(std::move(fr));
  }
  return {{"format_version", kFormatVersion}, {"type", "motion3d"}, {"fps", m.fps},
          {"joint_names", joint_names}, {"frames", std::move(frames)}};
}

inline json to_json(const Motion2D& m, const std::vector<std::string>& joint_names = {}, double fps = 30.0) {
  json frames = json::array();
  for (const auto& f : m.frames) {
    json fr = json::array();
    for (int j = 0; j < f.cols(); ++j) fr.push_back({f(0, j), f(1, j)});
    frames.push_back(std::move(fr));
  }
  return {{"format_version", kFormatVersion}, {"type", "motion2d"}, {"fps", fps},
          {"view_index", m.view_index}, {"joint_names", joint_names}, {"frames", std::move(frames)}};
}

namespace detail {

template <int D>
std::vector<Eigen::Matrix<double, D, Eigen::Dynamic>> parse_frames(const json& j, const std::string& where) {
  const json& frames = child(j, "frames", where);
  if (!frames.is_array()) throw Error(ErrorKind::Parse, where + ".frames: expected an array");
  std::vector<Eigen::Matrix<double, D, Eigen::Dynamic>> out;
  long joints = -1;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const json& fr = frames[t];
    const std::string at = where + ".frames[" + std::to_string(t) + "]";
    if (!fr.is_array()) throw Error(ErrorKind::Parse, at + ": expected an array of joints");
    if (joints < 0) joints = static_cast<long>(fr.size());
    if (static_cast<long>(fr.size()) != joints)
      throw Error(ErrorKind::Parse, at + ": joint count differs from frame 0");
    Eigen::Matrix<double, D, Eigen::Dynamic> f(D, joints);
    for (long jn = 0; jn < joints; ++jn) {
      const json& p = fr[jn];
      const std::string pat = at + "[" + std::to_string(jn) + "]";
      if (!p.is_array() || p.size() != D)
        throw Error(ErrorKind::Parse, pat + ": expected " + std::to_string(D) + " numbers");
      for (int c = 0; c < D; ++c) {
        if (!p[c].is_number()) throw Error(ErrorKind::Parse, pat + ": non-numeric coordinate");
        f(c, jn) = p[c].get<double>();
      }
    }
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace detail

inline Motion3D motion3d_from_json(const json& j, const std::string& where = "motion3d") {
  check_version(j, where);
  Motion3D m;
  m.fps = field_or<double>(j, "fps", 30.0, where);
  m.frames = detail::parse_frames<3>(j, where);
  return m;
}

inline Motion2D motion2d_from_json(const json& j, const std::string& where = "motion2d") {
  check_version(j, where);
  Motion2D m;
  m.view_index = field_or<int>(j, "view_index", 0, where);
  m.frames = detail::parse_frames<2>(j, where);
  return m;
}

inline Motion3D load_motion3d(const fs::path& p) { return motion3d_from_json(read_json(p), p.string()); }
inline Motion2D load_motion2d(const fs::path& p) { return motion2d_from_json(read_json(p), p.string()); }

// ---- cameras

inline json to_json(const Camera& c) {
  json r = json::array();
  for (int i = 0; i < 3; ++i) r.push_back({c.rotation(i, 0), c.rotation(i, 1), c.rotation(i, 2)});
  return {{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy}, {"image_w", c.image_w},
          {"image_h", c.image_h}, {"rotation", r},
          {"translation", {c.translation.x(), c.translation.y(), c.translation.z()}}};
}

inline Camera camera_from_json(const json& j, const std::string& where) {
  Camera c;
  c.fx = field<double>(j, "fx", where);
  c.fy = field<double>(j, "fy", where);
  c.cx = field<double>(j, "cx", where);
  c.cy = field<double>(j, "cy", where);
  c.image_w = field<int>(j, "image_w", where);
  c.image_h = field<int>(j, "image_h", where);
  const auto r = field<std::vector<std::vector<double>>>(j, "rotation", where);
  const auto t = field<std::vector<double>>(j, "translation", where);
  if (r.size() != 3 || t.size() != 3) throw Error(ErrorKind::Parse, where + ": rotation must be 3x3, translation 3");
  for (int i = 0; i < 3; ++i) {
    if (r[i].size() != 3) throw Error(ErrorKind::Parse, where + ".rotation: rows must have 3 entries");
    for (int k = 0; k < 3; ++k) c.rotation(i, k) = r[i][k];
    c.translation[i] = t[i];
  }
  try {
    validate(c);
  } catch (const Error& e) {
    throw Error(ErrorKind::Parse, where + ": " + e.what());
  }
  return c;
}

inline json to_json(const CameraRig& rig) {
  json cams = json::array();
  for (const auto& c : rig.cameras) cams.push_back(to_json(c));
  return {{"format_version", kFormatVersion}, {"type", "rig"}, {"primary_index", rig.primary_index},
          {"cameras", cams}};
}

inline CameraRig rig_from_json(const json& j, const std::string& where = "rig") {
  check_version(j, where);
  CameraRig rig;
  rig.primary_index = field<int>(j, "primary_index", where);
  const json& cams = child(j, "cameras", where);
  if (!cams.is_array()) throw Error(ErrorKind::Parse, where + ".cameras: expected an array");
  for (std::size_t i = 0; i < cams.size(); ++i)
    rig.cameras.push_back(camera_from_json(cams[i], where + ".cameras[" + std::to_string(i) + "]"));
  try {
    validate(rig);
  } catch (const Error& e) {
    throw Error(ErrorKind::Parse, where + ": " + e.what());
  }
  return rig;
}

inline CameraRig load_rig(const fs::path& p) { return rig_from_json(read_json(p), p.string()); }

// ---- samples

inline json to_json(const Pointmap& pm) {
  json pts = json::array();
  for (std::size_t i = 0; i < pm.points.size(); ++i)
    pts.push_back({pm.points[i].x(), pm.points[i].y(), pm.points[i].z()});
  return {{"grid_w", pm.grid_w}, {"grid_h", pm.grid_h}, {"view_index", pm.view_index},
          {"valid", std::vector<int>(pm.valid.begin(), pm.valid.end())}, {"points", pts}};
}

inline Pointmap pointmap_from_json(const json& j, const std::string& where) {
  Pointmap pm;
  pm.grid_w = field<int>(j, "grid_w", where);
  pm.grid_h = field<int>(j, "grid_h", where);
  pm.view_index = field<int>(j, "view_index", where);
  const auto valid = field<std::vector<int>>(j, "valid", where);
  const auto pts = field<std::vector<std::vector<double>>>(j, "points", where);
  const std::size_t n = static_cast<std::size_t>(pm.grid_w) * pm.grid_h;
  if (valid.size() != n || pts.size() != n) throw Error(ErrorKind::Parse, where + ": grid size mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (pts[i].size() != 3) throw Error(ErrorKind::Parse, where + ".points: expected 3 numbers");
    pm.points.emplace_back(pts[i][0], pts[i][1], pts[i][2]);
    pm.valid.push_back(static_cast<char>(valid[i] != 0));
  }
  return pm;
}

inline json to_json(const DisentangledMotion& d) {
  json local = json::array(), traj = json::array(), scale = json::array();
  for (std::size_t t = 0; t < d.local.size(); ++t) {
    json fr = json::array();
    for (int k = 0; k < d.local[t].cols(); ++k) fr.push_back({d.local[t](0, k), d.local[t](1, k)});
    local.push_back(std::move(fr));
    traj.push_back({d.trajectory[t].x(), d.trajectory[t].y()});
    scale.push_back({d.scale[t].x(), d.scale[t].y()});
  }
  return {{"root_joint", d.root_joint}, {"view_index", d.view_index}, {"local", local},
          {"trajectory", traj}, {"scale", scale}};
}

inline DisentangledMotion disentangled_from_json(const json& j, const std::string& where) {
  DisentangledMotion d;
  d.root_joint = field<int>(j, "root_joint", where);
  d.view_index = field<int>(j, "view_index", where);
  json wrapped = {{"frames", child(j, "local", where)}};
  d.local = detail::parse_frames<2>(wrapped, where + ".local");
  const auto traj = field<std::vector<std::vector<double>>>(j, "trajectory", where);
  const auto scale = field<std::vector<std::vector<double>>>(j, "scale", where);
  if (traj.size() != d.local.size() || scale.size() != d.local.size())
    throw Error(ErrorKind::Parse, where + ": trajectory/scale length differs from local");
  for (std::size_t t = 0; t < traj.size(); ++t) {
    if (traj[t].size() != 2 || scale[t].size() != 2)
      throw Error(ErrorKind::Parse, where + ": trajectory/scale entries need 2 numbers");
    d.trajectory.emplace_back(traj[t][0], traj[t][1]);
    d.scale.emplace_back(scale[t][0], scale[t][1]);
  }
  return d;
}

inline json to_json(const Sample& s, const Skeleton& sk) {
  json views = json::array(), enc = json::array(), pms = json::array();
  for (const auto& v : s.views) views.push_back(to_json(v, sk.joint_names, s.motion.fps));
  for (const auto& e : s.encoded) enc.push_back(to_json(e));
  for (const auto& p : s.pointmaps) pms.push_back(to_json(p));
  return {{"format_version", kFormatVersion}, {"type", "sample"}, {"seed", s.seed},
          {"kind", s.kind}, {"skeleton", sk.name}, {"motion", to_json(s.motion, sk.joint_names)},
          {"rig", to_json(s.rig)}, {"views", views}, {"encoded", enc}, {"pointmaps", pms}};
}

inline Sample sample_from_json(const json& j, const std::string& where = "sample") {
  check_version(j, where);
  Sample s;
  s.seed = field<std::uint64_t>(j, "seed", where);
  s.kind = field<std::string>(j, "kind", where);
  s.motion = motion3d_from_json(child(j, "motion", where), where + ".motion");
  s.rig = rig_from_json(child(j, "rig", where), where + ".rig");
  const json& views = child(j, "views", where);
  for (std::size_t v = 0; v < views.size(); ++v)
    s.views.push_back(motion2d_from_json(views[v], where + ".views[" + std::to_string(v) + "]"));
  const json& enc = child(j, "encoded", where);
  for (std::size_t v = 0; v < enc.size(); ++v)
    s.encoded.push_back(disentangled_from_json(enc[v], where + ".encoded[" + std::to_string(v) + "]"));
  if (j.contains("pointmaps"))
    for (std::size_t v = 0; v < j["pointmaps"].size(); ++v)
      s.pointmaps.push_back(pointmap_from_json(j["pointmaps"][v], where + ".pointmaps[" + std::to_string(v) + "]"));
  return s;
}

// ---- checkpoints

inline json to_json(const DenoiserConfig& c) {
  return {{"joints", c.joints}, {"root_joint", c.root_joint}, {"width", c.width}, {"blocks", c.blocks},
          {"heads", c.heads}, {"ffn_mult", c.ffn_mult}, {"multi_view", c.multi_view},
          {"pointmaps", c.pointmaps}, {"decoupled", c.decoupled}, {"pointmap_grid", c.pointmap_grid},
          {"steps", c.steps}, {"schedule", to_string(c.schedule)}};
}

inline DenoiserConfig denoiser_config_from_json(const json& j, const std::string& where) {
  DenoiserConfig c;
  c.joints = field<int>(j, "joints", where);
  c.root_joint = field<int>(j, "root_joint", where);
  c.width = field<int>(j, "width", where);
  c.blocks = field<int>(j, "blocks", where);
  c.heads = field<int>(j, "heads", where);
  c.ffn_mult = field<int>(j, "ffn_mult", where);
  c.multi_view = field<bool>(j, "multi_view", where);
  c.pointmaps = field<bool>(j, "pointmaps", where);
  c.decoupled = field<bool>(j, "decoupled", where);
  c.pointmap_grid = field<int>(j, "pointmap_grid", where);
  c.steps = field<int>(j, "steps", where);
  c.schedule = schedule_kind_from_string(field<std::string>(j, "schedule", where));
  return c;
}

inline void save_checkpoint(const fs::path& path, const TransformerNet<float>& net,
                            const json& extra = json::object()) {
  json params = json::array();
  const auto& p = net.params();
  for (int i = 0; i < p.size(); ++i) {
    std::vector<float> data(p[i].data(), p[i].data() + p[i].size());
    params.push_back({{"name", p.name(i)}, {"rows", p[i].rows()}, {"cols", p[i].cols()}, {"data", data}});
  }
  json j = {{"format_version", kFormatVersion}, {"type", "checkpoint"},
            {"config", to_json(net.config())}, {"params", params}, {"meta", extra}};
  write_text_atomic(path, j.dump() + "\n");
}

struct Checkpoint {
  std::shared_ptr<TransformerNet<float>> net;
  json meta;
};

// Loads a checkpoint. When `expected` is given its configuration must match
// the stored one exactly.
inline Checkpoint load_checkpoint(const fs::path& path, const DenoiserConfig* expected = nullptr) {
  const json j = read_json(path);
  const std::string where = path.string();
  check_version(j, where);
  const DenoiserConfig cfg = denoiser_config_from_json(child(j, "config", where), where + ".config");
  if (expected && !(*expected == cfg))
    throw Error(ErrorKind::ModeMismatch, where + ": checkpoint configuration differs from the requested model");
  Checkpoint ck;
  ck.net = std::make_shared<TransformerNet<float>>(cfg);
  auto& p = ck.net->params();
  std::vector<char> seen(p.size(), 0);
  for (const json& e : child(j, "params", where)) {
    const std::string name = field<std::string>(e, "name", where + ".params");
    const int id = p.find(name);
    if (id < 0) throw Error(ErrorKind::ModeMismatch, where + ": unexpected parameter " + name);
    const auto data = field<std::vector<float>>(e, "data", where + ".params." + name);
    if (field<long>(e, "rows", name) != p[id].rows() || field<long>(e, "cols", name) != p[id].cols() ||
        static_cast<long>(data.size()) != p[id].size())
      throw Error(ErrorKind::ModeMismatch, where + ": shape mismatch for parameter " + name);
    std::copy(data.begin(), data.end(), p[id].data());
    seen[id] = 1;
  }
  for (int i = 0; i < p.size(); ++i)
    if (!seen[i]) throw Error(ErrorKind::ModeMismatch, where + ": missing parameter " + p.name(i));
  ck.meta = j.value("meta", json::object());
  return ck;
}

}  // namespace mocap::io
