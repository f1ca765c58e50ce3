#pragma once

#include <string>
#include <vector>

#include "bimreg/config.hpp"
#include "bimreg/descriptor.hpp"
#include "bimreg/ingest.hpp"
#include "bimreg/line_corner.hpp"
#include "bimreg/plane_seg.hpp"
#include "bimreg/verify.hpp"
#include "bimreg/voting.hpp"

namespace bimreg {

struct StageTimings {
  double plane_ms = 0.0;
  double line_ms = 0.0;
  double descriptor_ms = 0.0;
  double vote_ms = 0.0;
  double verify_ms = 0.0;
  double total_ms() const { return plane_ms + line_ms + descriptor_ms + vote_ms + verify_ms; }
};

/// Everything the registration needs from one submap.
struct SubmapFeatures {
  SegmentationResult segmentation;
  std::vector<LineSegment2> segments;
  std::vector<Corner> corners;
  DescriptorDB db;
  std::vector<Point2> q_ng;  // wall points, 2D, thinned to one per score_grid_m cell
  std::vector<Point2> q_g;   // ground points, likewise
  StageTimings timings;
};

SubmapFeatures extract_submap_features(const Submap& submap, const PipelineConfig& cfg);

/// One point per occupied `cell_m` grid cell (the first in lexicographic
/// cell order), dropping z.
std::vector<Point2> thin_points_2d(const std::vector<PlanarPatch>& patches, double cell_m);

/// Offline products for one floor of the model.
struct FloorIndex {
  WallModel model;
  DescriptorDB db;
  ScoreField field;
};

DescriptorDB build_model_db(const WallModel& model, const PipelineConfig& cfg);
FloorIndex build_floor_index(const WallModel& model, const PipelineConfig& cfg);
/// Pairs a stored database with its model; throws InvalidArgument when the
/// floor ids disagree.
FloorIndex make_floor_index(const WallModel& model, DescriptorDB db, const PipelineConfig& cfg);

struct FloorResult {
  std::string floor_id;
  CastStats stats;
  std::vector<PoseCandidate> candidates;
  std::vector<VerificationReport> reports;  // one per candidate
  VerificationReport best;
  bool valid = false;  // false when the floor produced no candidate
};

struct RegistrationResult {
  VerificationReport best;
  std::string floor_id;
  std::vector<FloorResult> floors;
  StageTimings timings;
  std::size_t n_corners = 0;
  std::size_t n_segments = 0;

  const FloorResult& best_floor() const;
};

/// Votes the submap against every floor and keeps the highest confidence.
/// Throws NoCandidates when no floor yields a candidate.
RegistrationResult register_features(const SubmapFeatures& features,
                                     const std::vector<FloorIndex>& floors,
                                     const PipelineConfig& cfg);
RegistrationResult register_submap(const Submap& submap, const std::vector<FloorIndex>& floors,
                                   const PipelineConfig& cfg);

struct EvalRecord {
  std::string scene;
  Se2Pose gt;
  Se2Pose estimate;
  double confidence = 0.0;
  double rot_err_deg = 0.0;
  double trans_err_m = 0.0;
  bool success = false;
  double time_ms = 0.0;
  std::string floor_id;
  std::string error;  // non-empty when registration threw
};

struct EvalSummary {
  std::vector<EvalRecord> records;
  double recall = 0.0;
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double p90_ms = 0.0;
};

EvalRecord evaluate_result(const std::string& scene, const RegistrationResult& result,
                           const Se2Pose& gt);
EvalSummary summarize(std::vector<EvalRecord> records);

/// "scene,gt_x,...,error" CSV.
void write_eval_csv(std::ostream& out, const EvalSummary& summary);

}  // namespace bimreg
