#include "bimreg/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>

#include "bimreg/error.hpp"

namespace bimreg {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

std::vector<Point2> thin_points_2d(const std::vector<PlanarPatch>& patches, double cell_m) {
  std::map<std::pair<std::int64_t, std::int64_t>, Point2> cells;
  for (const PlanarPatch& patch : patches) {
    for (const Point3& p : patch.points) {
      const std::pair<std::int64_t, std::int64_t> key{
          static_cast<std::int64_t>(std::floor(p.x() / cell_m)),
          static_cast<std::int64_t>(std::floor(p.y() / cell_m))};
      cells.emplace(key, Point2(p.x(), p.y()));
    }
  }
  std::vector<Point2> out;
  out.reserve(cells.size());
  for (const auto& [key, p] : cells) out.push_back(p);
  return out;
}

SubmapFeatures extract_submap_features(const Submap& submap, const PipelineConfig& cfg) {
  if (submap.points.empty()) throw Error(ErrorCode::kEmptySubmap, "submap has no points");
  SubmapFeatures f;

  auto t0 = Clock::now();
  auto patches = segment_planes(submap, cfg.plane_params());
  patches = merge_patches(std::move(patches), cfg.merge_normal_deg, cfg.merge_dist_m,
                          cfg.sigma_lambda);
  f.segmentation = classify_patches(std::move(patches), submap.gravity, cfg.classify_angle_deg);
  f.q_ng = thin_points_2d(f.segmentation.walls, cfg.score_grid_m);
  f.q_g = thin_points_2d(f.segmentation.ground, cfg.score_grid_m);
  f.timings.plane_ms = ms_since(t0);

  t0 = Clock::now();
  const BevRaster raster = rasterize_walls(f.segmentation.walls, cfg.raster_scale);
  const auto raw = detect_segments(raster, cfg.min_segment_px, cfg.hough_params());
  f.segments = merge_refit(raw, cfg.segment_merge_tol_m, cfg.segment_merge_angle_deg, raster);
  f.corners = extract_corners(f.segments, cfg.corner_params());
  f.timings.line_ms = ms_since(t0);

  t0 = Clock::now();
  f.db = build_db(f.corners, cfg.db_params(), DbSource::kSubmap, "submap");
  f.timings.descriptor_ms = ms_since(t0);
  return f;
}

DescriptorDB build_model_db(const WallModel& model, const PipelineConfig& cfg) {
  if (model.walls.empty()) throw Error(ErrorCode::kEmptyModel, "wall model has no walls");
  const auto corners = model_corners(model, cfg.corner_params());
  return build_db(corners, cfg.db_params(), DbSource::kModel, model.floor_id);
}

FloorIndex build_floor_index(const WallModel& model, const PipelineConfig& cfg) {
  return make_floor_index(model, build_model_db(model, cfg), cfg);
}

FloorIndex make_floor_index(const WallModel& model, DescriptorDB db, const PipelineConfig& cfg) {
  if (db.floor_id() != model.floor_id) {
    throw Error(ErrorCode::kInvalidArgument, "database floor '" + db.floor_id() +
                                                 "' does not match model floor '" +
                                                 model.floor_id + "'");
  }
  FloorIndex idx;
  idx.model = model;
  idx.db = std::move(db);
  idx.field = build_score_field(model, cfg.score_res, cfg.kernel);
  return idx;
}

const FloorResult& RegistrationResult::best_floor() const {
  for (const FloorResult& f : floors) {
    if (f.valid && f.floor_id == floor_id) return f;
  }
  throw Error(ErrorCode::kNoCandidates, "no floor produced a candidate");
}

RegistrationResult register_features(const SubmapFeatures& features,
                                     const std::vector<FloorIndex>& floors,
                                     const PipelineConfig& cfg) {
  if (features.q_ng.empty()) {
    throw Error(ErrorCode::kEmptySubmap, "submap has no wall points");
  }
  RegistrationResult result;
  result.timings = features.timings;
  result.n_corners = features.corners.size();
  result.n_segments = features.segments.size();
  const ScoreVariant variant = cfg.variant();

  const VerificationReport* best = nullptr;
  result.floors.reserve(floors.size());
  for (const FloorIndex& floor : floors) {
    FloorResult fr;
    fr.floor_id = floor.model.floor_id;

    auto t0 = Clock::now();
    VoteGrid grid(cfg.xy_res, deg2rad(cfg.yaw_res_deg));
    fr.stats = cast_votes(features.db, floor.db, grid, cfg.residual_max_m);
    if (!grid.empty()) {
      if (cfg.voting == "vanilla") {
        fr.candidates = {vanilla_vote(grid)};
      } else {
        fr.candidates = hierarchical_vote(grid, cfg.voting_params());
      }
    }
    result.timings.vote_ms += ms_since(t0);

    t0 = Clock::now();
    if (!fr.candidates.empty()) {
      fr.reports = score_candidates(floor.field, fr.candidates, features.q_ng, features.q_g,
                                    cfg.lambda, variant, cfg.threads);
      fr.best = best_report(fr.reports);
      fr.valid = true;
    }
    result.timings.verify_ms += ms_since(t0);
    result.floors.push_back(std::move(fr));
  }
  for (const FloorResult& fr : result.floors) {
    if (fr.valid && (best == nullptr || fr.best.confidence > best->confidence)) {
      best = &fr.best;
      result.floor_id = fr.floor_id;
    }
  }
  if (best == nullptr) {
    throw Error(ErrorCode::kNoCandidates, "no descriptor matches produced a pose candidate");
  }
  result.best = *best;
  return result;
}

RegistrationResult register_submap(const Submap& submap, const std::vector<FloorIndex>& floors,
                                   const PipelineConfig& cfg) {
  return register_features(extract_submap_features(submap, cfg), floors, cfg);
}

EvalRecord evaluate_result(const std::string& scene, const RegistrationResult& result,
                           const Se2Pose& gt) {
  EvalRecord r;
  r.scene = scene;
  r.gt = gt;
  r.estimate = result.best.candidate.pose;
  r.confidence = result.best.confidence;
  r.rot_err_deg = rad2deg(rotation_error(r.estimate, gt));
  r.trans_err_m = translation_error(r.estimate, gt);
  r.success = registration_success(r.estimate, gt, 5.0, 3.0);
  r.time_ms = result.timings.total_ms();
  r.floor_id = result.floor_id;
  return r;
}

EvalSummary summarize(std::vector<EvalRecord> records) {
  EvalSummary s;
  s.records = std::move(records);
  if (s.records.empty()) return s;
  const auto n = static_cast<double>(s.records.size());
  std::vector<double> times;
  std::size_t hits = 0;
  for (const EvalRecord& r : s.records) {
    if (r.success) ++hits;
    times.push_back(r.time_ms);
  }
  s.recall = static_cast<double>(hits) / n;
  s.mean_ms = std::accumulate(times.begin(), times.end(), 0.0) / n;
  std::sort(times.begin(), times.end());
  auto pct = [&](double q) {
    const auto k = static_cast<std::size_t>(std::ceil(q * n)) - 1;
    return times[std::min(k, times.size() - 1)];
  };
  s.median_ms = pct(0.5);
  s.p90_ms = pct(0.9);
  return s;
}

void write_eval_csv(std::ostream& out, const EvalSummary& summary) {
  out << "scene,gt_x,gt_y,gt_yaw_deg,x,y,yaw_deg,floor,confidence,rot_err_deg,trans_err_m,"
         "success,time_ms,error\n";
  for (const EvalRecord& r : summary.records) {
    out << r.scene << ',' << r.gt.x << ',' << r.gt.y << ',' << rad2deg(r.gt.yaw) << ','
        << r.estimate.x << ',' << r.estimate.y << ',' << rad2deg(r.estimate.yaw) << ','
        << r.floor_id << ',' << r.confidence << ',' << r.rot_err_deg << ',' << r.trans_err_m
        << ',' << (r.success ? 1 : 0) << ',' << r.time_ms << ',' << r.error << '\n';
  }
}

}  // namespace bimreg
