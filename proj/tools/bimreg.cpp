// Command line front end: synthetic data generation, offline database
// builds, registration and evaluation.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include "bimreg/config.hpp"
#include "bimreg/error.hpp"
#include "bimreg/ingest.hpp"
#include "bimreg/pipeline.hpp"

namespace fs = std::filesystem;
using namespace bimreg;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitLowConfidence = 3;

struct ConfigOptions {
  std::string file;
  std::map<std::string, std::string> values;
  std::vector<std::pair<std::string, CLI::Option*>> flags;
};

void add_config_options(CLI::App* cmd, ConfigOptions& opts) {
  cmd->add_option("--config", opts.file, "Config file with key = value lines");
  for (const std::string& key : config_keys()) {
    CLI::Option* opt = cmd->add_option("--" + key, opts.values[key]);
    opt->group("Pipeline parameters");
    opts.flags.emplace_back(key, opt);
  }
}

PipelineConfig resolve_config(const ConfigOptions& opts) {
  PipelineConfig cfg = opts.file.empty() ? PipelineConfig{} : load_config(opts.file);
  for (const auto& [key, opt] : opts.flags) {
    if (opt->count() > 0) set_config_value(cfg, key, opts.values.at(key));
  }
  cfg.validate();
  return cfg;
}

void write_header(std::ostream& out, const std::string& command, const PipelineConfig& cfg) {
  out << "# bimreg " << command << '\n';
  write_config(out, cfg, "# ");
}

std::vector<WallModel> select_floors(const std::string& model_path, const std::string& floor) {
  std::vector<WallModel> floors = load_building(model_path);
  if (floor.empty()) return floors;
  std::erase_if(floors, [&](const WallModel& m) { return m.floor_id != floor; });
  if (floors.empty()) {
    throw Error(ErrorCode::kEmptyModel, "floor '" + floor + "' not found in " + model_path);
  }
  return floors;
}

/// Model floors paired with stored databases, or built on the fly.
std::vector<FloorIndex> load_floors(const std::string& model_path,
                                    const std::vector<std::string>& db_paths,
                                    const std::string& floor, const PipelineConfig& cfg) {
  const std::vector<WallModel> models = select_floors(model_path, floor);
  std::vector<FloorIndex> out;
  if (db_paths.empty()) {
    for (const WallModel& m : models) out.push_back(build_floor_index(m, cfg));
    return out;
  }
  for (const std::string& path : db_paths) {
    DescriptorDB db = deserialize_db(path);
    if (db.side_res() != cfg.side_res || db.angle_res_deg() != cfg.angle_res_deg) {
      throw Error(ErrorCode::kResolutionMismatch,
                  path + " was built with a different quantisation than the config");
    }
    const auto it = std::find_if(models.begin(), models.end(),
                                 [&](const WallModel& m) { return m.floor_id == db.floor_id(); });
    if (it == models.end()) {
      throw Error(ErrorCode::kEmptyModel,
                  "no model floor '" + db.floor_id() + "' for database " + path);
    }
    out.push_back(make_floor_index(*it, std::move(db), cfg));
  }
  return out;
}

std::vector<fs::path> list_scenes(const std::string& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::kIoError, dir + " is not a directory");
  std::vector<fs::path> scenes;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".bin") {
      scenes.push_back(entry.path());
    }
  }
  std::sort(scenes.begin(), scenes.end());
  if (scenes.empty()) throw Error(ErrorCode::kIoError, "no .bin submaps in " + dir);
  return scenes;
}

std::string scene_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%04zu", i);
  return buf;
}

/// Runs `fn(i)` for i in [0, n) on up to `threads` workers.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn fn) {
  const auto workers = std::min<std::size_t>(std::max(threads, 1), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

/// Registers every submap in `dir`; gt poses are read when present.
std::vector<EvalRecord> run_scenes(const std::string& dir, const std::vector<FloorIndex>& floors,
                                   PipelineConfig cfg) {
  const auto scenes = list_scenes(dir);
  const int threads = cfg.threads;
  if (threads > 1) cfg.threads = 1;
  std::vector<EvalRecord> records(scenes.size());
  parallel_for(scenes.size(), threads, [&](std::size_t i) {
    const fs::path& path = scenes[i];
    fs::path pose_path = path;
    pose_path.replace_extension(".pose");
    EvalRecord& rec = records[i];
    rec.scene = path.stem().string();
    try {
      const Se2Pose gt = fs::exists(pose_path) ? load_pose(pose_path) : Se2Pose{};
      const RegistrationResult res = register_submap(load_submap(path), floors, cfg);
      rec = evaluate_result(rec.scene, res, gt);
    } catch (const Error& e) {
      rec.error = e.what();
      rec.confidence = -std::numeric_limits<double>::infinity();
    }
  });
  return records;
}

int cmd_gen_floorplan(const std::string& out, std::uint64_t seed, int rooms, bool no_corridor,
                      double extent, int n_floors) {
  std::vector<WallModel> floors;
  for (int f = 0; f < n_floors; ++f) {
    WallModel m = generate_floorplan(seed + static_cast<std::uint64_t>(f), rooms, !no_corridor,
                                     extent);
    m.floor_id = std::to_string(f);
    floors.push_back(std::move(m));
  }
  save_building(floors, out);
  for (const WallModel& m : floors) {
    std::cout << "floor " << m.floor_id << ": " << m.walls.size() << " walls\n";
  }
  return 0;
}

struct SceneOptions {
  std::string out_dir;
  std::string model;
  std::string floor;
  std::uint64_t seed = 0;
  int count = 1;
  int rooms = 12;
  bool no_corridor = false;
  double extent = 10.0;
  SynthesisOptions synth;
};

int cmd_gen_scene(const SceneOptions& o) {
  fs::create_directories(o.out_dir);
  std::optional<FloorplanLayout> layout;
  WallModel model;
  if (o.model.empty()) {
    layout = generate_floorplan_layout(o.seed, o.rooms, !o.no_corridor, o.extent);
    model = layout->model;
    save_wall_model(model, fs::path(o.out_dir) / "model.txt");
  } else {
    model = select_floors(o.model, o.floor).front();
  }
  for (int i = 0; i < o.count; ++i) {
    const auto k = static_cast<std::uint64_t>(i);
    const std::uint64_t pose_seed = o.seed * 1000003ULL + 2 * k;
    const Se2Pose pose =
        layout ? sample_free_pose(*layout, pose_seed) : sample_pose_in_model(model, pose_seed);
    SynthesisOptions synth = o.synth;
    synth.seed = o.seed * 1000003ULL + 2 * k + 1;
    const SyntheticScene scene = synthesize_submap(model, pose, synth);
    const fs::path base = fs::path(o.out_dir) / scene_name(k);
    save_submap(scene.submap, fs::path(base).replace_extension(".bin"));
    save_pose(scene.gt_pose, fs::path(base).replace_extension(".pose"));
    std::ofstream dev(fs::path(base).replace_extension(".dev"));
    write_deviation_log(dev, scene.deviation_log);
  }
  std::cout << "wrote " << o.count << " scenes to " << o.out_dir << '\n';
  return 0;
}

int cmd_build_db(const std::string& model_path, const std::string& floor, const std::string& out,
                 const PipelineConfig& cfg) {
  const auto floors = select_floors(model_path, floor);
  for (const WallModel& m : floors) {
    fs::path path = out;
    if (floors.size() > 1) {
      path = fs::path(out).parent_path() /
             (fs::path(out).stem().string() + "_" + m.floor_id + fs::path(out).extension().string());
    }
    const DescriptorDB db = build_model_db(m, cfg);
    serialize_db(db, path);
    std::cout << "floor " << m.floor_id << ": " << db.corners().size() << " corners, "
              << db.unique_triplet_count() << " triplets, " << db.triplet_count()
              << " entries, " << db.key_count() << " keys -> "
              << path.string() << '\n';
  }
  return 0;
}

int cmd_register(const std::string& submap_path, const std::string& model_path,
                 const std::vector<std::string>& db_paths, const std::string& floor,
                 const std::string& out_path, const std::string& csv_path,
                 const PipelineConfig& cfg) {
  const auto floors = load_floors(model_path, db_paths, floor, cfg);
  const RegistrationResult res = register_submap(load_submap(submap_path), floors, cfg);
  const FloorResult& fr = res.best_floor();

  std::ostringstream out;
  write_header(out, "register", cfg);
  const Se2Pose& p = res.best.candidate.pose;
  out << "# submap " << submap_path << '\n'
      << "# floor " << res.floor_id << '\n'
      << "# pose " << p.x << ' ' << p.y << ' ' << rad2deg(p.yaw) << '\n'
      << "# confidence " << res.best.confidence << '\n'
      << "# timing_ms plane " << res.timings.plane_ms << " line " << res.timings.line_ms
      << " descriptor " << res.timings.descriptor_ms << " vote " << res.timings.vote_ms
      << " verify " << res.timings.verify_ms << " total " << res.timings.total_ms() << '\n'
      << "# corners " << res.n_corners << " correspondences " << fr.stats.correspondences
      << " votes " << fr.stats.accepted << " candidates " << fr.candidates.size() << '\n'
      << "# candidate_idx x y yaw_deg votes s_a s_p confidence\n";
  write_reports(out, fr.reports);
  if (out_path.empty()) {
    std::cout << out.str();
  } else {
    std::ofstream(out_path) << out.str();
    std::cout << "pose " << p.x << ' ' << p.y << ' ' << rad2deg(p.yaw) << " confidence "
              << res.best.confidence << '\n';
  }
  if (!csv_path.empty()) {
    std::ofstream csv(csv_path);
    write_candidates_csv(csv, fr.candidates);
  }
  if (res.best.confidence < cfg.min_confidence) {
    std::cerr << "registration confidence " << res.best.confidence << " is below "
              << cfg.min_confidence << '\n';
    return kExitLowConfidence;
  }
  return 0;
}

int cmd_evaluate(const std::string& scenes, const std::string& model_path,
                 const std::vector<std::string>& db_paths, const std::string& floor,
                 const std::string& out_path, const PipelineConfig& cfg) {
  const auto floors = load_floors(model_path, db_paths, floor, cfg);
  const EvalSummary summary = summarize(run_scenes(scenes, floors, cfg));
  std::ostringstream out;
  write_header(out, "evaluate", cfg);
  out << "# scenes " << summary.records.size() << '\n'
      << "# recall " << summary.recall << '\n'
      << "# time_ms mean " << summary.mean_ms << " median " << summary.median_ms << " p90 "
      << summary.p90_ms << '\n';
  write_eval_csv(out, summary);
  if (out_path.empty()) {
    std::cout << out.str();
  } else {
    std::ofstream(out_path) << out.str();
    std::cout << "recall " << summary.recall << " over " << summary.records.size()
              << " scenes, mean " << summary.mean_ms << " ms\n";
  }
  return 0;
}

int cmd_pr_curve(const std::string& pos_dir, const std::string& neg_dir,
                 const std::string& model_path, const std::vector<std::string>& db_paths,
                 const std::string& floor, const std::string& out_path,
                 const PipelineConfig& cfg) {
  const auto floors = load_floors(model_path, db_paths, floor, cfg);
  auto confidences = [&](const std::string& dir) {
    std::vector<double> c;
    for (const EvalRecord& r : run_scenes(dir, floors, cfg)) c.push_back(r.confidence);
    return c;
  };
  const auto pos = confidences(pos_dir);
  const auto neg = confidences(neg_dir);
  const PrCurve curve = reliability_curve(pos, neg);
  std::ostringstream out;
  write_header(out, "pr-curve", cfg);
  out << "# positives " << pos.size() << " negatives " << neg.size() << '\n'
      << "# auc " << curve.auc << '\n'
      << "threshold,precision,recall\n";
  for (const PrPoint& p : curve.points) {
    out << p.threshold << ',' << p.precision << ',' << p.recall << '\n';
  }
  if (out_path.empty()) {
    std::cout << out.str();
  } else {
    std::ofstream(out_path) << out.str();
    std::cout << "auc " << curve.auc << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BIM wall model to LiDAR submap registration"};
  app.require_subcommand(1);

  // gen-floorplan
  std::string fp_out;
  std::uint64_t fp_seed = 0;
  int fp_rooms = 12, fp_floors = 1;
  bool fp_no_corridor = false;
  double fp_extent = 10.0;
  auto* gen_fp = app.add_subcommand("gen-floorplan", "Write a seeded synthetic wall model");
  gen_fp->add_option("--out", fp_out, "Output wall model")->required();
  gen_fp->add_option("--seed", fp_seed);
  gen_fp->add_option("--rooms", fp_rooms)->check(CLI::PositiveNumber);
  gen_fp->add_option("--floors", fp_floors)->check(CLI::PositiveNumber);
  gen_fp->add_option("--extent", fp_extent, "Largest room side in meters");
  gen_fp->add_flag("--no-corridor", fp_no_corridor);

  // gen-scene
  SceneOptions sc;
  auto* gen_sc = app.add_subcommand("gen-scene", "Write seeded synthetic submaps with gt poses");
  gen_sc->add_option("--out-dir", sc.out_dir)->required();
  gen_sc->add_option("--model", sc.model, "Wall model; a floorplan is generated when omitted");
  gen_sc->add_option("--floor", sc.floor);
  gen_sc->add_option("--seed", sc.seed);
  gen_sc->add_option("--count", sc.count)->check(CLI::PositiveNumber);
  gen_sc->add_option("--rooms", sc.rooms)->check(CLI::PositiveNumber);
  gen_sc->add_option("--extent", sc.extent);
  gen_sc->add_flag("--no-corridor", sc.no_corridor);
  gen_sc->add_option("--radius", sc.synth.radius_m);
  gen_sc->add_option("--noise", sc.synth.noise_sigma_m);
  gen_sc->add_option("--drop", sc.synth.drop_wall_frac);
  gen_sc->add_option("--clutter", sc.synth.clutter_frac);
  gen_sc->add_option("--bias-frac", sc.synth.bias_wall_frac);
  gen_sc->add_option("--bias-m", sc.synth.bias_m);
  gen_sc->add_option("--density", sc.synth.density_per_m2);

  // build-db
  ConfigOptions db_cfg;
  std::string db_model, db_floor, db_out;
  auto* build = app.add_subcommand("build-db", "Build the descriptor database of a wall model");
  build->add_option("--model", db_model)->required();
  build->add_option("--floor", db_floor);
  build->add_option("--out", db_out)->required();
  add_config_options(build, db_cfg);

  // register
  ConfigOptions reg_cfg;
  std::string reg_submap, reg_model, reg_floor, reg_out, reg_csv;
  std::vector<std::string> reg_dbs;
  auto* reg = app.add_subcommand("register", "Register one submap against the model");
  reg->add_option("--submap", reg_submap)->required();
  reg->add_option("--model", reg_model)->required();
  reg->add_option("--db", reg_dbs, "Stored floor databases (built on the fly when omitted)");
  reg->add_option("--floor", reg_floor);
  reg->add_option("--out", reg_out, "Report file (stdout when omitted)");
  reg->add_option("--candidates", reg_csv, "Candidate CSV output");
  add_config_options(reg, reg_cfg);

  // evaluate
  ConfigOptions ev_cfg;
  std::string ev_scenes, ev_model, ev_floor, ev_out;
  std::vector<std::string> ev_dbs;
  auto* ev = app.add_subcommand("evaluate", "Registration recall and timing over a scene dir");
  ev->add_option("--scenes", ev_scenes)->required();
  ev->add_option("--model", ev_model)->required();
  ev->add_option("--db", ev_dbs);
  ev->add_option("--floor", ev_floor);
  ev->add_option("--out", ev_out, "Per-scene CSV (stdout when omitted)");
  add_config_options(ev, ev_cfg);

  // pr-curve
  ConfigOptions pr_cfg;
  std::string pr_pos, pr_neg, pr_model, pr_floor, pr_out;
  std::vector<std::string> pr_dbs;
  auto* pr = app.add_subcommand("pr-curve", "Precision/recall of the confidence score");
  pr->add_option("--pos", pr_pos, "Registrable scenes")->required();
  pr->add_option("--neg", pr_neg, "Unregistrable scenes")->required();
  pr->add_option("--model", pr_model)->required();
  pr->add_option("--db", pr_dbs);
  pr->add_option("--floor", pr_floor);
  pr->add_option("--out", pr_out, "PR CSV (stdout when omitted)");
  add_config_options(pr, pr_cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*gen_fp) return cmd_gen_floorplan(fp_out, fp_seed, fp_rooms, fp_no_corridor, fp_extent,
                                          fp_floors);
    if (*gen_sc) return cmd_gen_scene(sc);
    if (*build) return cmd_build_db(db_model, db_floor, db_out, resolve_config(db_cfg));
    if (*reg) {
      return cmd_register(reg_submap, reg_model, reg_dbs, reg_floor, reg_out, reg_csv,
                          resolve_config(reg_cfg));
    }
    if (*ev) return cmd_evaluate(ev_scenes, ev_model, ev_dbs, ev_floor, ev_out,
                                 resolve_config(ev_cfg));
    if (*pr) return cmd_pr_curve(pr_pos, pr_neg, pr_model, pr_dbs, pr_floor, pr_out,
                                 resolve_config(pr_cfg));
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::kInvalidArgument ? kExitUsage : kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
