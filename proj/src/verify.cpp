#include "bimreg/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <thread>
#include <tuple>

#include "bimreg/error.hpp"

namespace bimreg {

ScoreField::ScoreField(Point2 origin, double resolution, int kernel, int width, int height,
                       std::vector<float> values)
    : origin_(std::move(origin)),
      resolution_(resolution),
      kernel_(kernel),
      width_(width),
      height_(height),
      values_(std::move(values)) {
  if (values_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(ErrorCode::kInvalidArgument, "score field size mismatch");
  }
}

double ScoreField::at_cell(int i, int j) const {
  if (i < 0 || j < 0 || i >= width_ || j >= height_) return 0.0;
  return values_[static_cast<std::size_t>(j) * width_ + i];
}

std::pair<int, int> ScoreField::cell_of(const Point2& p) const {
  const Point2 q = (p - origin_) / resolution_;
  return {static_cast<int>(std::floor(q.x())), static_cast<int>(std::floor(q.y()))};
}

double ScoreField::value(const Point2& p) const {
  const auto [i, j] = cell_of(p);
  return at_cell(i, j);
}

double ScoreField::falloff(int d, int kernel) {
  if (d < 0 || d > kernel) return 0.0;
  const double k = kernel;
  return 1.0 - (d / k) * (1.0 - 1.0 / k);
}

namespace {

/// Marks every cell whose closed square touches the segment, so walls lying
/// on a grid line occupy the cells on both sides.
void trace_segment(const Point2& a, const Point2& b, const Point2& origin, double res,
                   int width, int height, std::vector<int>& dist) {
  constexpr double eps = 1e-9;
  const Point2 p = (a - origin) / res;
  const Point2 q = (b - origin) / res;
  const Vec2 d = q - p;
  const int i_lo = std::max(0, static_cast<int>(std::floor(std::min(p.x(), q.x()) - eps)));
  const int i_hi = std::min(width - 1, static_cast<int>(std::floor(std::max(p.x(), q.x()) + eps)));
  for (int i = i_lo; i <= i_hi; ++i) {
    double t0 = 0.0, t1 = 1.0;
    if (std::abs(d.x()) > 1e-15) {
      t0 = (i - eps - p.x()) / d.x();
      t1 = (i + 1 + eps - p.x()) / d.x();
      if (t0 > t1) std::swap(t0, t1);
      t0 = std::max(t0, 0.0);
      t1 = std::min(t1, 1.0);
      if (t0 > t1) continue;
    }
    const double y0 = p.y() + t0 * d.y(), y1 = p.y() + t1 * d.y();
    const int j_lo = std::max(0, static_cast<int>(std::floor(std::min(y0, y1) - eps)));
    const int j_hi = std::min(height - 1, static_cast<int>(std::floor(std::max(y0, y1) + eps)));
    for (int j = j_lo; j <= j_hi; ++j) dist[static_cast<std::size_t>(j) * width + i] = 0;
  }
}

}  // namespace

ScoreField build_score_field(std::span<const LineSegment2> walls, double resolution_m,
                             int kernel) {
  if (!(resolution_m > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "score resolution must be positive");
  }
  if (kernel < 1) throw Error(ErrorCode::kInvalidArgument, "score kernel must be >= 1");
  if (walls.empty()) throw Error(ErrorCode::kEmptyModel, "wall model has no walls");

  Point2 lo = walls.front().p0(), hi = lo;
  for (const LineSegment2& w : walls) {
    lo = lo.cwiseMin(w.p0()).cwiseMin(w.p1());
    hi = hi.cwiseMax(w.p0()).cwiseMax(w.p1());
  }
  const double margin = (kernel + 2) * resolution_m;
  const Point2 origin = lo - Point2::Constant(margin);
  const int width = static_cast<int>(std::floor((hi.x() + margin - origin.x()) / resolution_m)) + 1;
  const int height = static_cast<int>(std::floor((hi.y() + margin - origin.y()) / resolution_m)) + 1;

  const int far = std::numeric_limits<int>::max() / 2;
  std::vector<int> dist(static_cast<std::size_t>(width) * height, far);
  for (const LineSegment2& w : walls) {
    trace_segment(w.p0(), w.p1(), origin, resolution_m, width, height, dist);
  }

  // Two-pass chessboard distance transform.
  auto at = [&](int i, int j) -> int& { return dist[static_cast<std::size_t>(j) * width + i]; };
  auto relax = [&](int i, int j, int ni, int nj) {
    if (ni < 0 || nj < 0 || ni >= width || nj >= height) return;
    at(i, j) = std::min(at(i, j), at(ni, nj) + 1);
  };
  for (int j = 0; j < height; ++j) {
    for (int i = 0; i < width; ++i) {
      relax(i, j, i - 1, j - 1);
      relax(i, j, i, j - 1);
      relax(i, j, i + 1, j - 1);
      relax(i, j, i - 1, j);
    }
  }
  for (int j = height - 1; j >= 0; --j) {
    for (int i = width - 1; i >= 0; --i) {
      relax(i, j, i + 1, j + 1);
      relax(i, j, i, j + 1);
      relax(i, j, i - 1, j + 1);
      relax(i, j, i + 1, j);
    }
  }

  std::vector<float> values(dist.size());
  for (std::size_t k = 0; k < dist.size(); ++k) {
    values[k] = static_cast<float>(ScoreField::falloff(dist[k], kernel));
  }
  return ScoreField(origin, resolution_m, kernel, width, height, std::move(values));
}

ScoreField build_score_field(const WallModel& model, double resolution_m, int kernel) {
  return build_score_field(model.walls, resolution_m, kernel);
}

VerificationReport score_candidate(const ScoreField& field, std::span<const Point2> q_ng,
                                   std::span<const Point2> q_g, const Se2Pose& pose,
                                   double lambda, ScoreVariant variant) {
  if (q_ng.empty()) throw Error(ErrorCode::kEmptySubmap, "no non-ground points to score");
  const Eigen::Matrix2d r = pose.rotation();
  const Vec2 t = pose.translation();

  VerificationReport rep;
  rep.n_nonground = q_ng.size();
  std::size_t ng_free = 0;
  for (const Point2& q : q_ng) {
    const double v = field.value(r * q + t);
    rep.s_a += v;
    if (v == 0.0) ++ng_free;
  }
  std::size_t g_free = 0;
  for (const Point2& q : q_g) {
    const double v = field.value(r * q + t);
    rep.s_p += v;
    if (v == 0.0) ++g_free;
  }
  const double n = static_cast<double>(q_ng.size());
  switch (variant) {
    case ScoreVariant::kFull:
      rep.confidence = (rep.s_a - lambda * rep.s_p) / n;
      break;
    case ScoreVariant::kAwardOnly:
      rep.confidence = rep.s_a / n;
      break;
    case ScoreVariant::kFreeFreeAward:
      rep.confidence = (rep.s_a + static_cast<double>(g_free) - lambda * rep.s_p) /
                       (n + static_cast<double>(q_g.size()));
      break;
    case ScoreVariant::kOccupiedFreePenalty:
      rep.confidence = (rep.s_a - lambda * rep.s_p - lambda * static_cast<double>(ng_free)) / n;
      break;
  }
  return rep;
}

std::vector<VerificationReport> score_candidates(const ScoreField& field,
                                                 std::span<const PoseCandidate> candidates,
                                                 std::span<const Point2> q_ng,
                                                 std::span<const Point2> q_g, double lambda,
                                                 ScoreVariant variant, int threads) {
  if (q_ng.empty()) throw Error(ErrorCode::kEmptySubmap, "no non-ground points to score");
  std::vector<VerificationReport> out(candidates.size());
  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < candidates.size(); i += stride) {
      out[i] = score_candidate(field, q_ng, q_g, candidates[i].pose, lambda, variant);
      out[i].candidate = candidates[i];
      out[i].index = i;
    }
  };
  const auto n_threads = static_cast<std::size_t>(std::max(1, threads));
  if (n_threads == 1 || candidates.size() < 2) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t k = 0; k < n_threads; ++k) pool.emplace_back(work, k, n_threads);
  }
  return out;
}

const VerificationReport& best_report(std::span<const VerificationReport> reports) {
  if (reports.empty()) throw Error(ErrorCode::kNoCandidates, "no pose candidates to verify");
  const VerificationReport* best = &reports.front();
  for (const VerificationReport& r : reports.subspan(1)) {
    const auto key = [](const VerificationReport& v) {
      return std::tuple(-v.confidence, -static_cast<double>(v.candidate.votes), v.candidate.pose.x,
                        v.candidate.pose.y, v.candidate.pose.yaw);
    };
    if (key(r) < key(*best)) best = &r;
  }
  return *best;
}

VerificationReport select_best(const ScoreField& field,
                               std::span<const PoseCandidate> candidates,
                               std::span<const Point2> q_ng, std::span<const Point2> q_g,
                               double lambda, ScoreVariant variant, int threads) {
  if (candidates.empty()) throw Error(ErrorCode::kNoCandidates, "no pose candidates to verify");
  const auto reports = score_candidates(field, candidates, q_ng, q_g, lambda, variant, threads);
  return best_report(reports);
}

PrCurve reliability_curve(std::span<const double> positives, std::span<const double> negatives) {
  if (positives.empty() || negatives.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "PR curve needs positive and negative scores");
  }
  // threshold -> (positives, negatives) exactly at that score
  std::map<double, std::pair<std::size_t, std::size_t>, std::greater<>> counts;
  for (double s : positives) ++counts[s].first;
  for (double s : negatives) ++counts[s].second;

  PrCurve curve;
  const auto total_pos = static_cast<double>(positives.size());
  std::size_t tp = 0, fp = 0;
  double prev_recall = 0.0;
  for (const auto& [threshold, c] : counts) {
    tp += c.first;
    fp += c.second;
    PrPoint p;
    p.threshold = threshold;
    p.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    p.recall = static_cast<double>(tp) / total_pos;
    curve.auc += (p.recall - prev_recall) * p.precision;
    prev_recall = p.recall;
    curve.points.push_back(p);
  }
  return curve;
}

void write_reports(std::ostream& out, std::span<const VerificationReport> reports) {
  for (const VerificationReport& r : reports) {
    out << r.index << ' ' << r.candidate.pose.x << ' ' << r.candidate.pose.y << ' '
        << rad2deg(r.candidate.pose.yaw) << ' ' << r.candidate.votes << ' ' << r.s_a << ' '
        << r.s_p << ' ' << r.confidence << '\n';
  }
}

}  // namespace bimreg
