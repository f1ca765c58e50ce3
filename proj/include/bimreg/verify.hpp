#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "bimreg/geometry.hpp"
#include "bimreg/ingest.hpp"
#include "bimreg/voting.hpp"

namespace bimreg {

/// Dilated wall occupancy raster. Cell (i, j) covers
/// [origin + (i, j) * resolution, origin + (i + 1, j + 1) * resolution).
class ScoreField {
 public:
  ScoreField() = default;
  ScoreField(Point2 origin, double resolution, int kernel, int width, int height,
             std::vector<float> values);

  const Point2& origin() const { return origin_; }
  double resolution() const { return resolution_; }
  int kernel() const { return kernel_; }
  int width() const { return width_; }
  int height() const { return height_; }

  /// 0 outside the grid.
  double at_cell(int i, int j) const;
  double value(const Point2& p) const;
  std::pair<int, int> cell_of(const Point2& p) const;

  /// 1 - (d / k_d)(1 - 1 / k_d) for d <= k_d, else 0.
  static double falloff(int chebyshev_distance, int kernel);

 private:
  Point2 origin_ = Point2::Zero();
  double resolution_ = 0.2;
  int kernel_ = 5;
  int width_ = 0;
  int height_ = 0;
  std::vector<float> values_;
};

/// Rasterises every wall (all cells the segment passes through) and dilates
/// with a Chebyshev falloff of `kernel` cells. Throws EmptyModel.
ScoreField build_score_field(const WallModel& model, double resolution_m, int kernel);
ScoreField build_score_field(std::span<const LineSegment2> walls, double resolution_m,
                             int kernel);

enum class ScoreVariant {
  kFull,                 // award - lambda * ground penalty
  kAwardOnly,            // award alone
  kFreeFreeAward,        // full plus ground points on free cells as award
  kOccupiedFreePenalty,  // full minus lambda * non-ground points on free cells
};

struct VerificationReport {
  PoseCandidate candidate;
  double s_a = 0.0;
  double s_p = 0.0;
  double confidence = 0.0;
  std::size_t n_nonground = 0;
  std::size_t index = 0;  // position in the scored candidate list
};

/// Transforms the points by `pose` and scores them against the field.
/// Throws EmptySubmap when q_ng is empty.
VerificationReport score_candidate(const ScoreField& field, std::span<const Point2> q_ng,
                                   std::span<const Point2> q_g, const Se2Pose& pose,
                                   double lambda, ScoreVariant variant = ScoreVariant::kFull);

/// Scores all candidates, in parallel when threads > 1.
std::vector<VerificationReport> score_candidates(const ScoreField& field,
                                                 std::span<const PoseCandidate> candidates,
                                                 std::span<const Point2> q_ng,
                                                 std::span<const Point2> q_g, double lambda,
                                                 ScoreVariant variant = ScoreVariant::kFull,
                                                 int threads = 1);

/// Highest confidence; ties go to more votes, then the smaller (x, y, yaw).
/// Throws NoCandidates.
const VerificationReport& best_report(std::span<const VerificationReport> reports);

VerificationReport select_best(const ScoreField& field,
                               std::span<const PoseCandidate> candidates,
                               std::span<const Point2> q_ng, std::span<const Point2> q_g,
                               double lambda, ScoreVariant variant = ScoreVariant::kFull,
                               int threads = 1);

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

struct PrCurve {
  std::vector<PrPoint> points;  // thresholds descending
  double auc = 0.0;             // step-wise average precision
};

/// Sweeps every distinct confidence as a threshold (accept when >=).
PrCurve reliability_curve(std::span<const double> positives, std::span<const double> negatives);

/// One "candidate_idx x y yaw_deg votes s_a s_p confidence" line per report.
void write_reports(std::ostream& out, std::span<const VerificationReport> reports);

}  // namespace bimreg
