// mocap: synth / train / lift / eval / verify / export driver.
// Exit codes: 0 success, 1 usage or configuration, 2 I/O or parse, 3 numerical.

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "mocap/config.hpp"
#include "mocap/dataset.hpp"
#include "mocap/io.hpp"
#include "mocap/lifting.hpp"
#include "mocap/metrics.hpp"
#include "mocap/refine.hpp"
#include "mocap/training.hpp"

using namespace mocap;
namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 1, kExitIo = 2, kExitNumerical = 3;

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Io:
    case ErrorKind::Parse:
      return kExitIo;
    case ErrorKind::NonPositiveDepth:
    case ErrorKind::InsufficientViews:
    case ErrorKind::DegenerateGeometry:
    case ErrorKind::DegenerateConfiguration:
    case ErrorKind::NonFiniteState:
    case ErrorKind::NonFiniteCost:
      return kExitNumerical;
    default:
      return kExitUsage;
  }
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flags shared by several subcommands; unset optionals keep config values.
struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> count, frames, views, steps, epochs;
  std::optional<double> lr;
  std::optional<std::string> schedule, pointmaps, decouple, skeleton, rig;
  std::string out;

  PipelineConfig resolve() const {
    PipelineConfig c = config.empty() ? PipelineConfig{} : load_config(config);
    if (seed) c.seed = *seed;
    if (count) c.count = *count;
    if (frames) c.frames = *frames;
    if (views) c.views = *views;
    if (steps) c.steps = *steps;
    if (epochs) c.train.epochs = *epochs;
    if (lr) c.train.lr = *lr;
    if (schedule) c.schedule = *schedule;
    if (skeleton) c.skeleton = *skeleton;
    if (rig) c.rig_path = *rig;
    if (pointmaps) c.pointmaps = on_off(*pointmaps, "--pointmaps");
    if (decouple) c.decouple = on_off(*decouple, "--decouple");
    if (!out.empty()) c.out = out;
    c.validate();
    return c;
  }

  static bool on_off(const std::string& v, const char* flag) {
    if (v == "on") return true;
    if (v == "off") return false;
    throw UsageError(std::string(flag) + " expects on|off");
  }
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "random seed");
  cmd->add_option("--out", o.out, "output path");
  cmd->add_option("--skeleton", o.skeleton, "toy8 | smpl22 | coco17");
}

void add_model(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--steps", o.steps, "diffusion steps N");
  cmd->add_option("--schedule", o.schedule, "cosine | linear");
  cmd->add_option("--pointmaps", o.pointmaps, "on | off");
  cmd->add_option("--decouple", o.decouple, "on | off (off: direct global (u,v) layout)");
}

std::string require_out(const PipelineConfig& c, const char* cmd) {
  if (c.out.empty()) throw UsageError(std::string(cmd) + ": --out is required");
  return c.out;
}

int cmd_synth(const Overrides& o) {
  const PipelineConfig c = o.resolve();
  const fs::path dir = require_out(c, "synth");
  const DatasetSummary s = build_dataset(c.dataset(), dir);
  std::cout << "wrote " << s.count << " samples to " << dir.string() << " (" << s.frames << " frames, "
            << s.views << " views, " << s.joints << " joints)\n"
            << "height range [" << s.min_z << ", " << s.max_z << "] m, |xy| <= " << s.max_abs_xy
            << " m, pixels in [" << s.min_px << ", " << s.max_px << "]\n";
  return 0;
}

int cmd_verify(const std::string& data) {
  const VerifyReport r = verify_dataset(data);
  for (const auto& f : r.failures) std::cout << "FAIL " << f << "\n";
  std::cout << r.samples << " samples, " << r.checks << " checks, " << r.failures.size() << " failures\n";
  return r.ok() ? 0 : kExitNumerical;
}

int cmd_train(const Overrides& o, const std::string& data, const std::string& stage_name,
              const std::string& init_from) {
  const PipelineConfig c = o.resolve();
  const fs::path out = require_out(c, "train");
  const TrainStage stage = train_stage_from_string(stage_name);
  const DenoiserConfig cfg = c.denoiser(stage == TrainStage::FinetuneMV);
  const Dataset ds = load_dataset(data);
  if (ds.params.skeleton != c.skeleton)
    throw Error(ErrorKind::DatasetModeMismatch,
                "dataset skeleton " + ds.params.skeleton + " differs from configured " + c.skeleton);
  const auto items = make_training_set(ds.samples, cfg.layout(), cfg.pointmaps);

  TransformerNet<float> net(cfg);
  if (!init_from.empty()) {
    const io::Checkpoint src = io::load_checkpoint(init_from);
    const int copied = net.init_from(src.net->params(), c.seed);
    std::cout << "loaded " << copied << " of " << net.params().size() << " parameter arrays from "
              << init_from << "\n";
  } else {
    net.init(c.seed);
  }
  TrainConfig tc = c.train;
  tc.seed = c.seed;
  const TrainingLog log = train(net, items, stage, tc, {}, [](int e, const TrainingLog& l) {
    std::cout << "epoch " << e << " eval_loss " << l.eval_loss.back();
    if (!l.train_loss.empty()) std::cout << " train_loss " << l.train_loss.back();
    std::cout << std::endl;
  });
  io::save_checkpoint(out, net, {{"stage", to_string(stage)}, {"epochs", tc.epochs}, {"seed", c.seed}});
  io::json lj = {{"format_version", io::kFormatVersion}, {"type", "training_log"},
                 {"stage", to_string(stage)}, {"eval_loss", log.eval_loss},
                 {"train_loss", log.train_loss}, {"grad_norm", log.grad_norm}};
  fs::path log_path = out;
  log_path += ".log.json";
  io::write_json(log_path, lj);
  std::cout << "checkpoint " << out.string() << ", log " << log_path.string() << "\n";
  return 0;
}

int cmd_lift(const Overrides& o, const std::string& input, const std::string& checkpoint,
             const std::string& oracle, bool fit) {
  if (checkpoint.empty() == oracle.empty())
    throw UsageError("lift: give exactly one of --checkpoint or --oracle");
  const PipelineConfig c = o.resolve();
  const fs::path out = require_out(c, "lift");
  const CameraRig rig = c.rig();
  const Motion2D m0 = io::load_motion2d(input);
  const Skeleton sk = skeleton_by_name(c.skeleton);

  std::unique_ptr<Denoiser> model;
  int steps = c.steps;
  int grid = c.pointmap_grid;
  ScheduleKind sched_kind = schedule_kind_from_string(c.schedule);
  if (!oracle.empty()) {
    const Motion3D gt = io::load_motion3d(oracle);
    const TensorLayout layout{gt.joint_count(), sk.root, c.decouple};
    model = std::make_unique<OracleDenoiser>(layout.pack(project(rig, gt), rig), layout);
  } else {
    io::Checkpoint ck = io::load_checkpoint(checkpoint);
    const DenoiserConfig& mc = ck.net->config();
    if (!mc.multi_view) throw Error(ErrorKind::ModeMismatch, "lift needs a multi-view checkpoint");
    if (o.steps && *o.steps != mc.steps)
      throw UsageError("lift: --steps differs from the checkpoint's training schedule");
    steps = mc.steps;
    grid = mc.pointmap_grid;
    sched_kind = mc.schedule;
    model = std::make_unique<TransformerDenoiser>(ck.net);
  }
  const LiftResult r = lift(m0, rig, *model, make_schedule(steps, sched_kind), c.seed, grid);
  Motion3D result = r.motion3d;
  result.fps = 30.0;
  io::write_json(out / "motion.json", io::to_json(result, sk.joint_names));
  io::write_json(out / "residuals.json",
                 {{"format_version", io::kFormatVersion}, {"type", "lift_residuals"}, {"seed", c.seed},
                  {"per_step_residuals", r.per_step_residuals},
                  {"pre_projection_residuals", r.pre_projection_residuals}});
  std::cout << "lifted " << result.frame_count() << " frames with " << steps
            << " steps; final residual " << r.per_step_residuals.back() << " px\n";
  if (fit) {
    const FitResult f = fit_skeleton_detailed(result, sk, c.fit);
    io::write_json(out / "motion_fit.json", io::to_json(f.motion, sk.joint_names));
    std::cout << "fit: cost " << f.cost_history.front() << " -> " << f.cost_history.back() << " in "
              << f.iterations << " iterations, max bone deviation "
              << 100 * max_bone_deviation(f.motion, sk) << "%\n";
  }
  return 0;
}

int cmd_eval(const Overrides& o, const std::string& pred, const std::string& gt, bool with_rig) {
  const PipelineConfig c = o.resolve();
  const Skeleton sk = skeleton_by_name(c.skeleton);
  std::optional<CameraRig> rig;
  if (with_rig) rig = c.rig();
  const EvalOptions opt{sk.root, sk.feet, kDefaultContactHeight};

  std::vector<std::pair<std::string, std::pair<fs::path, fs::path>>> pairs;
  if (fs::is_directory(pred)) {
    if (!fs::is_directory(gt)) throw UsageError("eval: --pred is a directory but --gt is not");
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(pred))
      if (e.path().extension() == ".json" && fs::exists(fs::path(gt) / e.path().filename()))
        names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    if (names.empty()) throw Error(ErrorKind::Io, "eval: no matching .json files in " + pred + " and " + gt);
    for (const auto& n : names) pairs.push_back({n, {fs::path(pred) / n, fs::path(gt) / n}});
  } else {
    pairs.push_back({fs::path(pred).stem().string(), {pred, gt}});
  }

  std::vector<MetricsReport> rows;
  for (const auto& [name, paths] : pairs) {
    MetricsReport r = evaluate_all(io::load_motion3d(paths.first), io::load_motion3d(paths.second), opt,
                                   rig ? &*rig : nullptr);
    r.name = name;
    rows.push_back(r);
  }
  std::ostringstream csv;
  csv << MetricsReport::csv_header() << "\n";
  for (const auto& r : rows) csv << r.csv_row() << "\n";
  if (rows.size() > 1) csv << mean_report(rows).csv_row() << "\n";
  std::cout << csv.str();
  std::cerr << (rows.size() > 1 ? mean_report(rows) : rows.front()).summary() << "\n";
  if (!c.out.empty()) io::write_text_atomic(c.out, csv.str());
  return 0;
}

// Writes one dataset sample as standalone lift inputs.
int cmd_export(const std::string& data, int index, const std::string& out) {
  if (out.empty()) throw UsageError("export: --out is required");
  const Dataset ds = load_dataset(data, index + 1);
  if (index < 0 || index >= static_cast<int>(ds.samples.size()))
    throw UsageError("export: sample index out of range");
  const Sample& s = ds.samples[index];
  const Skeleton sk = skeleton_by_name(ds.params.skeleton);
  const fs::path dir = out;
  io::write_json(dir / "gt.json", io::to_json(s.motion, sk.joint_names));
  io::write_json(dir / "input2d.json", io::to_json(s.views[s.rig.primary_index], sk.joint_names, s.motion.fps));
  io::write_json(dir / "rig.json", io::to_json(s.rig));
  std::cout << "exported sample " << index << " (" << s.kind << ") to " << dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view diffusion lifting of 2D motion to 3D"};
  app.require_subcommand(1);

  Overrides o;
  std::string data, stage = "finetune_mv", init_from, input, checkpoint, oracle, pred, gt;
  bool fit = false, eval_rig = false;
  int index = 0;

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  add_common(synth, o);
  synth->add_option("--count", o.count, "number of samples");
  synth->add_option("--frames", o.frames, "frames per sample");
  synth->add_option("--views", o.views, "cameras in the default rig");
  synth->add_option("--rig", o.rig, "rig JSON file instead of the default rig");

  auto* verify = app.add_subcommand("verify", "check a dataset's self-consistency");
  verify->add_option("--data", data, "dataset directory")->required();

  auto* trn = app.add_subcommand("train", "train a denoiser");
  add_common(trn, o);
  add_model(trn, o);
  trn->add_option("--data", data, "dataset directory")->required();
  trn->add_option("--stage", stage, "pretrain_2d | finetune_mv");
  trn->add_option("--epochs", o.epochs, "training epochs");
  trn->add_option("--lr", o.lr, "learning rate");
  trn->add_option("--init-from", init_from, "checkpoint to initialise shared layers from")
      ->check(CLI::ExistingFile);

  auto* lft = app.add_subcommand("lift", "lift a 2D motion to 3D");
  add_common(lft, o);
  add_model(lft, o);
  lft->add_option("--input", input, "primary-view 2D motion JSON")->required()->check(CLI::ExistingFile);
  lft->add_option("--rig", o.rig, "rig JSON");
  lft->add_option("--checkpoint", checkpoint, "trained multi-view checkpoint")->check(CLI::ExistingFile);
  lft->add_option("--oracle", oracle, "ground-truth 3D motion; use the oracle denoiser")
      ->check(CLI::ExistingFile);
  lft->add_flag("--fit", fit, "also run the skeleton fit");

  auto* ev = app.add_subcommand("eval", "compute metrics");
  add_common(ev, o);
  ev->add_option("--pred", pred, "predicted motion file or directory")->required()->check(CLI::ExistingPath);
  ev->add_option("--gt", gt, "ground-truth motion file or directory")->required()->check(CLI::ExistingPath);
  ev->add_option("--rig", o.rig, "rig JSON; camera-frame MPJPE/PA-MPJPE when given");

  auto* exp = app.add_subcommand("export", "write a dataset sample as lift inputs");
  exp->add_option("--data", data, "dataset directory")->required();
  exp->add_option("--index", index, "sample index");
  exp->add_option("--out", o.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*synth) return cmd_synth(o);
    if (*verify) return cmd_verify(data);
    if (*trn) return cmd_train(o, data, stage, init_from);
    if (*lft) return cmd_lift(o, input, checkpoint, oracle, fit);
    if (*ev) {
      eval_rig = o.rig.has_value();
      return cmd_eval(o, pred, gt, eval_rig);
    }
    if (*exp) return cmd_export(data, index, o.out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}
