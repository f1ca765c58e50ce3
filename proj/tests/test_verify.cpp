#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "bimreg/error.hpp"
#include "bimreg/ingest.hpp"
#include "bimreg/verify.hpp"
#include "support.hpp"

using namespace bimreg;
using testing::Gen;

namespace {

constexpr double kRes = 0.2;
constexpr int kKernel = 5;

std::vector<LineSegment2> square_room(double side) {
  return {LineSegment2({0, 0}, {side, 0}), LineSegment2({side, 0}, {side, side}),
          LineSegment2({side, side}, {0, side}), LineSegment2({0, side}, {0, 0})};
}

std::vector<Point2> sample_walls(const std::vector<LineSegment2>& walls, double step) {
  std::vector<Point2> out;
  for (const LineSegment2& w : walls) {
    const int n = std::max(1, static_cast<int>(w.length() / step));
    for (int k = 0; k <= n; ++k) out.push_back(w.p0() + w.direction() * (w.length() * k / n));
  }
  return out;
}

std::vector<Point2> grid_points(const Point2& lo, const Point2& hi, double step) {
  std::vector<Point2> out;
  for (double x = lo.x(); x <= hi.x(); x += step) {
    for (double y = lo.y(); y <= hi.y(); y += step) out.emplace_back(x, y);
  }
  return out;
}

/// Average precision computed per positive, as an independent reference.
double reference_ap(std::vector<double> pos, const std::vector<double>& neg) {
  double sum = 0.0;
  for (double p : pos) {
    const auto tp = std::count_if(pos.begin(), pos.end(), [&](double s) { return s >= p; });
    const auto fp = std::count_if(neg.begin(), neg.end(), [&](double s) { return s >= p; });
    sum += static_cast<double>(tp) / static_cast<double>(tp + fp);
  }
  return sum / static_cast<double>(pos.size());
}

}  // namespace

TEST_CASE("falloff: endpoints and cut-off") {
  CHECK(ScoreField::falloff(0, 5) == doctest::Approx(1.0));
  CHECK(ScoreField::falloff(5, 5) == doctest::Approx(0.2));
  CHECK(ScoreField::falloff(6, 5) == 0.0);
  CHECK(ScoreField::falloff(-1, 5) == 0.0);
  for (int d = 1; d <= 5; ++d) {
    CHECK(ScoreField::falloff(d, 5) < ScoreField::falloff(d - 1, 5));
  }
}

TEST_CASE("field: matches a brute force chessboard distance") {
  Gen g(1);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<LineSegment2> walls;
    for (int i = 0; i < 4; ++i) {
      const Point2 a = g.point(4.0);
      walls.emplace_back(a, a + Vec2(g.uniform(-3, 3), g.uniform(-3, 3)));
    }
    const ScoreField f = build_score_field(walls, kRes, kKernel);
    std::vector<std::pair<int, int>> ones;
    for (int j = 0; j < f.height(); ++j) {
      for (int i = 0; i < f.width(); ++i) {
        if (f.at_cell(i, j) == 1.0) ones.emplace_back(i, j);
      }
    }
    // every occupied cell is touched by a wall
    for (const auto& [i, j] : ones) {
      const Point2 c = f.origin() + Vec2((i + 0.5) * kRes, (j + 0.5) * kRes);
      double d = 1e9;
      for (const auto& w : walls) d = std::min(d, w.distance_to(c));
      CHECK(d <= kRes * std::sqrt(0.5) + 1e-9);
    }
    // every densely sampled wall point lands on an occupied cell
    for (const Point2& p : sample_walls(walls, kRes / 20)) CHECK(f.value(p) == 1.0);
    // the rest follows from the occupied set
    for (int j = 0; j < f.height(); j += 2) {
      for (int i = 0; i < f.width(); i += 2) {
        int d = 1 << 20;
        for (const auto& [oi, oj] : ones) d = std::min(d, std::max(std::abs(oi - i), std::abs(oj - j)));
        CHECK(f.at_cell(i, j) == doctest::Approx(ScoreField::falloff(d, kKernel)).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("field: neighbouring cells differ by at most one falloff step") {
  const ScoreField f = build_score_field(square_room(6.3), kRes, kKernel);
  const double step = 1.0 / kKernel;
  for (int j = -1; j <= f.height(); ++j) {
    for (int i = -1; i <= f.width(); ++i) {
      for (int dj = -1; dj <= 1; ++dj) {
        for (int di = -1; di <= 1; ++di) {
          CHECK(std::abs(f.at_cell(i, j) - f.at_cell(i + di, j + dj)) <= step + 1e-6);
        }
      }
    }
  }
}

TEST_CASE("field: margins keep the whole kernel inside") {
  const ScoreField f = build_score_field(square_room(4.0), kRes, kKernel);
  for (int i = 0; i < f.width(); ++i) {
    CHECK(f.at_cell(i, 0) == 0.0);
    CHECK(f.at_cell(i, f.height() - 1) == 0.0);
  }
  CHECK(f.value({-100, -100}) == 0.0);
}

TEST_CASE("field: invalid inputs") {
  CHECK_THROWS_AS(build_score_field(square_room(4.0), 0.0, 5), Error);
  CHECK_THROWS_AS(build_score_field(square_room(4.0), 0.2, 0), Error);
  try {
    build_score_field(std::vector<LineSegment2>{}, 0.2, 5);
    FAIL("expected EmptyModel");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptyModel);
  }
}

TEST_CASE("score: points on the walls at the true pose score one") {
  const auto walls = square_room(8.0);
  const ScoreField f = build_score_field(walls, kRes, kKernel);
  const auto q_ng = sample_walls(walls, 0.1);
  // ground at least kernel + 1 cells away from any wall
  const auto q_g = grid_points({1.3, 1.3}, {6.7, 6.7}, 0.25);
  const auto rep = score_candidate(f, q_ng, q_g, Se2Pose(), 0.5);
  CHECK(rep.s_a == doctest::Approx(static_cast<double>(q_ng.size())));
  CHECK(rep.s_p == 0.0);
  CHECK(rep.confidence == doctest::Approx(1.0));
  CHECK(rep.n_nonground == q_ng.size());
}

TEST_CASE("score: the pose is applied to the submap points") {
  Gen g(2);
  const auto walls = square_room(8.0);
  const ScoreField f = build_score_field(walls, kRes, kKernel);
  for (int trial = 0; trial < 10; ++trial) {
    const Se2Pose pose = g.pose(10.0);
    std::vector<Point2> q_ng;
    for (const Point2& p : sample_walls(walls, 0.1)) q_ng.push_back(pose.inverse() * p);
    CHECK(score_candidate(f, q_ng, {}, pose, 0.5).confidence == doctest::Approx(1.0));
  }
}

TEST_CASE("score: points far from walls score zero, ground on walls goes negative") {
  const auto walls = square_room(8.0);
  const ScoreField f = build_score_field(walls, kRes, kKernel);
  const auto far = grid_points({100, 100}, {102, 102}, 0.5);
  CHECK(score_candidate(f, far, {}, Se2Pose(), 0.5).confidence == 0.0);
  const auto on = sample_walls(walls, 0.2);
  const auto rep = score_candidate(f, far, on, Se2Pose(), 0.5);
  CHECK(rep.confidence < 0.0);
  CHECK(rep.confidence == doctest::Approx(-0.5 * static_cast<double>(on.size()) / far.size()));
}

TEST_CASE("score: confidence never exceeds one") {
  Gen g(3);
  const auto walls = square_room(8.0);
  const ScoreField f = build_score_field(walls, kRes, kKernel);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Point2> q_ng, q_g;
    for (int i = 0; i < 50; ++i) q_ng.push_back(g.point(10.0));
    for (int i = 0; i < 50; ++i) q_g.push_back(g.point(10.0));
    const auto rep = score_candidate(f, q_ng, q_g, g.pose(2.0), g.uniform(0.0, 1.0));
    CHECK(rep.confidence <= 1.0 + 1e-12);
    CHECK(rep.confidence >= -1.0 * static_cast<double>(q_g.size()) / q_ng.size() - 1e-12);
  }
}

TEST_CASE("score: duplicating every point changes nothing") {
  Gen g(4);
  const auto walls = square_room(8.0);
  const ScoreField f = build_score_field(walls, kRes, kKernel);
  std::vector<Point2> q_ng, q_g;
  for (int i = 0; i < 80; ++i) q_ng.push_back(g.point(9.0));
  for (int i = 0; i < 40; ++i) q_g.push_back(g.point(9.0));
  auto twice = [](std::vector<Point2> v) {
    const auto n = v.size();
    for (std::size_t i = 0; i < n; ++i) v.push_back(v[i]);
    return v;
  };
  const Se2Pose pose(0.3, -0.2, 0.1);
  for (auto variant : {ScoreVariant::kFull, ScoreVariant::kAwardOnly, ScoreVariant::kFreeFreeAward,
                       ScoreVariant::kOccupiedFreePenalty}) {
    const double a = score_candidate(f, q_ng, q_g, pose, 0.5, variant).confidence;
    const double b = score_candidate(f, twice(q_ng), twice(q_g), pose, 0.5, variant).confidence;
    CHECK(a == doctest::Approx(b));
  }
}

TEST_CASE("score: clutter away from walls only dilutes the award") {
  const auto walls = square_room(8.0);
  const ScoreField f = build_score_field(walls, kRes, kKernel);
  auto q_ng = sample_walls(walls, 0.1);
  const auto n = static_cast<double>(q_ng.size());
  const auto clutter = grid_points({3.5, 3.5}, {4.5, 4.5}, 0.25);
  q_ng.insert(q_ng.end(), clutter.begin(), clutter.end());
  const auto rep = score_candidate(f, q_ng, {}, Se2Pose(), 0.5);
  CHECK(rep.confidence == doctest::Approx(n / (n + clutter.size())));
}

TEST_CASE("score: the true pose beats shifted and rotated ones") {
  const WallModel m = generate_floorplan(3, 8, true, 60.0);
  const ScoreField f = build_score_field(m, kRes, kKernel);
  const Se2Pose truth = sample_pose_in_model(m, 17);
  std::vector<Point2> q_ng;
  for (const Point2& p : sample_walls(m.walls, 0.1)) {
    if ((p - truth.translation()).norm() < 10.0) q_ng.push_back(truth.inverse() * p);
  }
  REQUIRE(q_ng.size() > 50);
  const double at_truth = score_candidate(f, q_ng, {}, truth, 0.5).confidence;
  CHECK(at_truth == doctest::Approx(1.0));
  for (double shift : {0.5, 1.0, 2.0}) {
    CHECK(score_candidate(f, q_ng, {}, Se2Pose(truth.x + shift, truth.y, truth.yaw), 0.5)
              .confidence < at_truth);
  }
  CHECK(score_candidate(f, q_ng, {}, Se2Pose(truth.x, truth.y, truth.yaw + 0.3), 0.5).confidence <
        at_truth);
}

TEST_CASE("score: variants") {
  const auto walls = square_room(8.0);
  const ScoreField f = build_score_field(walls, kRes, kKernel);
  std::vector<Point2> q_ng = sample_walls(walls, 0.5);
  const std::size_t on_walls = q_ng.size();
  q_ng.emplace_back(4.0, 4.0);  // free cell
  q_ng.emplace_back(4.1, 3.9);
  const std::vector<Point2> q_g{{4.0, 4.0}, {0.0, 4.0}, {4.0, 4.2}};
  const auto full = score_candidate(f, q_ng, q_g, Se2Pose(), 0.5, ScoreVariant::kFull);
  const double n = static_cast<double>(q_ng.size());
  CHECK(full.s_a == doctest::Approx(static_cast<double>(on_walls)));
  CHECK(full.s_p == doctest::Approx(1.0));
  CHECK(full.confidence == doctest::Approx((on_walls - 0.5) / n));
  CHECK(score_candidate(f, q_ng, q_g, Se2Pose(), 0.5, ScoreVariant::kAwardOnly).confidence ==
        doctest::Approx(on_walls / n));
  CHECK(score_candidate(f, q_ng, q_g, Se2Pose(), 0.5, ScoreVariant::kFreeFreeAward).confidence ==
        doctest::Approx((on_walls + 2.0 - 0.5) / (n + 3.0)));
  CHECK(score_candidate(f, q_ng, q_g, Se2Pose(), 0.5, ScoreVariant::kOccupiedFreePenalty)
            .confidence == doctest::Approx((on_walls - 0.5 - 0.5 * 2.0) / n));
}

TEST_CASE("score: no non-ground points") {
  const ScoreField f = build_score_field(square_room(8.0), kRes, kKernel);
  try {
    score_candidate(f, {}, std::vector<Point2>{{1, 1}}, Se2Pose(), 0.5);
    FAIL("expected EmptySubmap");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptySubmap);
  }
}

TEST_CASE("select: parallel scoring matches serial") {
  Gen g(5);
  const auto walls = square_room(8.0);
  const ScoreField f = build_score_field(walls, kRes, kKernel);
  const auto q_ng = sample_walls(walls, 0.2);
  std::vector<PoseCandidate> cands(37);
  for (auto& c : cands) c.pose = g.pose(1.0);
  const auto a = score_candidates(f, cands, q_ng, {}, 0.5, ScoreVariant::kFull, 1);
  const auto b = score_candidates(f, cands, q_ng, {}, 0.5, ScoreVariant::kFull, 4);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].confidence == b[i].confidence);
    CHECK(b[i].index == i);
  }
}

TEST_CASE("select: ties go to votes, then to the smaller pose") {
  std::vector<VerificationReport> reps(3);
  reps[0].confidence = 0.8;
  reps[0].candidate.votes = 5;
  reps[0].candidate.pose = {2, 0, 0};
  reps[1] = reps[0];
  reps[1].candidate.votes = 9;
  reps[2] = reps[1];
  reps[2].candidate.pose = {1, 0, 0};
  CHECK(best_report(reps).candidate.pose.x == 1.0);
  reps[2].candidate.votes = 1;
  CHECK(best_report(reps).candidate.votes == 9);
  reps[0].confidence = 0.81;
  CHECK(&best_report(reps) == &reps[0]);
}

TEST_CASE("select: picks the true candidate and rejects empty lists") {
  const auto walls = square_room(8.0);
  const ScoreField f = build_score_field(walls, kRes, kKernel);
  const auto q_ng = sample_walls(walls, 0.2);
  std::vector<PoseCandidate> cands(3);
  cands[0].pose = {1.0, 0.0, 0.0};
  cands[1].pose = {0.0, 0.0, 0.0};
  cands[2].pose = {0.0, 0.0, 0.5};
  CHECK(select_best(f, cands, q_ng, {}, 0.5).index == 1);
  try {
    select_best(f, std::vector<PoseCandidate>{}, q_ng, {}, 0.5);
    FAIL("expected NoCandidates");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNoCandidates);
  }
}

TEST_CASE("pr: hand-computed curve") {
  const std::vector<double> pos{0.9, 0.7, 0.4}, neg{0.8, 0.3};
  const PrCurve c = reliability_curve(pos, neg);
  REQUIRE(c.points.size() == 5);
  CHECK(c.points[0].threshold == 0.9);
  CHECK(c.points[0].precision == 1.0);
  CHECK(c.points[1].precision == 0.5);
  CHECK(c.points[2].recall == doctest::Approx(2.0 / 3.0));
  CHECK(c.points[3].precision == doctest::Approx(0.75));
  CHECK(c.points[4].recall == 1.0);
  CHECK(c.auc == doctest::Approx(1.0 / 3 + 2.0 / 9 + 0.25));
}

TEST_CASE("pr: separable scores give area one, identical scores give the base rate") {
  CHECK(reliability_curve(std::vector<double>{0.9, 0.8}, std::vector<double>{0.1, 0.2}).auc == 1.0);
  const PrCurve flat = reliability_curve(std::vector<double>{0.5, 0.5},
                                         std::vector<double>{0.5, 0.5, 0.5});
  REQUIRE(flat.points.size() == 1);
  CHECK(flat.auc == doctest::Approx(0.4));
}

TEST_CASE("pr: matches per-positive average precision, with ties") {
  Gen g(6);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> pos(g.integer(1, 30)), neg(g.integer(1, 30));
    for (double& s : pos) s = g.integer(0, 10) / 10.0;
    for (double& s : neg) s = g.integer(0, 10) / 10.0;
    const PrCurve c = reliability_curve(pos, neg);
    CHECK(c.auc == doctest::Approx(reference_ap(pos, neg)));
    for (std::size_t i = 1; i < c.points.size(); ++i) {
      CHECK(c.points[i].threshold < c.points[i - 1].threshold);
      CHECK(c.points[i].recall >= c.points[i - 1].recall);
    }
    CHECK(c.points.back().recall == 1.0);
  }
}

TEST_CASE("pr: empty inputs") {
  CHECK_THROWS_AS(reliability_curve(std::vector<double>{}, std::vector<double>{0.1}), Error);
  CHECK_THROWS_AS(reliability_curve(std::vector<double>{0.1}, std::vector<double>{}), Error);
}

TEST_CASE("report lines") {
  VerificationReport r;
  r.index = 3;
  r.candidate.pose = {1.5, 2.0, kPi / 2};
  r.candidate.votes = 12;
  r.s_a = 40;
  r.s_p = 2;
  r.confidence = 0.9;
  std::ostringstream out;
  write_reports(out, std::vector<VerificationReport>{r});
  CHECK(out.str() == "3 1.5 2 90 12 40 2 0.9\n");
}
