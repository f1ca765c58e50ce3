#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bimreg/error.hpp"
#include "bimreg/line_corner.hpp"
#include "support.hpp"

using namespace bimreg;
using testing::Gen;

namespace {

constexpr double kScale = 60.0;
constexpr double kTol = 2.0 / kScale;

/// Endpoint distance allowing either orientation.
double endpoint_error(const LineSegment2& s, const Point2& a, const Point2& b) {
  return std::min(std::max((s.p0() - a).norm(), (s.p1() - b).norm()),
                  std::max((s.p0() - b).norm(), (s.p1() - a).norm()));
}

BevRaster raster_of(const std::vector<LineSegment2>& walls, const Point2& lo, const Point2& hi) {
  BevRaster r = make_raster(lo, hi, kScale);
  // dense sampling, independent of the library's line drawing
  for (const LineSegment2& w : walls) {
    const int n = static_cast<int>(w.length() * kScale * 4);
    for (int k = 0; k <= n; ++k) {
      const auto [u, v] = r.pixel_of(w.p0() + w.direction() * (w.length() * k / n));
      r.set(u, v);
    }
  }
  return r;
}

}  // namespace

TEST_CASE("rasterising segments and points") {
  const std::vector<LineSegment2> wall{LineSegment2({0, 0}, {5, 0})};
  const BevRaster r = rasterize_walls(wall, kScale);
  CHECK(r.occupied() >= 299);
  CHECK(r.occupied() <= 302);
  CHECK(r.height == 1);

  CHECK(rasterize_walls(std::vector<LineSegment2>{}, kScale).empty());
  CHECK(rasterize_points(std::vector<Point2>{}, kScale).empty());
  CHECK(rasterize_walls(std::vector<PlanarPatch>{}, kScale).empty());

  const BevRaster p = rasterize_points(std::vector<Point2>{{0, 0}, {1, 1}}, kScale);
  CHECK(p.origin == Point2(0, 0));
  CHECK(p.at(0, 0));
  CHECK(p.pixel_of({0.0, 0.0}) == std::pair(0, 0));
  CHECK(p.pixel_of({1.0 / kScale + 1e-9, 0.0}) == std::pair(1, 0));
  CHECK_THROWS_AS(make_raster({0, 0}, {1, 1}, 0.0), Error);
}

TEST_CASE("a straight wall becomes one segment") {
  const Point2 a(0.5, 0.7), b(10.5, 3.2);
  const BevRaster r = raster_of({LineSegment2(a, b)}, {0, 0}, {11, 4});
  const auto segs = detect_segments(r, 30);
  REQUIRE(segs.size() == 1);
  CHECK(endpoint_error(segs[0], a, b) <= kTol);
}

TEST_CASE("an L-shaped wall gives two segments meeting at the bend") {
  const Point2 bend(3.0, 1.0);
  const BevRaster r =
      raster_of({LineSegment2({0.5, 1.0}, bend), LineSegment2(bend, {3.0, 5.0})}, {0, 0}, {4, 6});
  const auto segs = detect_segments(r, 30);
  REQUIRE(segs.size() == 2);
  const auto corners = extract_corners(segs, 1.0, 0.5);
  REQUIRE(corners.size() == 1);
  CHECK((corners[0].position - bend).norm() <= kTol);
}

TEST_CASE("short walls are dropped") {
  const BevRaster r = raster_of({LineSegment2({1.0, 1.0}, {1.0 + 19.5 / kScale, 1.0})}, {0, 0}, {2, 2});
  CHECK(r.occupied() == 20);
  CHECK(detect_segments(r, 30).empty());
  CHECK_THROWS_AS(detect_segments(r, 0), Error);
}

TEST_CASE("segments survive a noisy point raster") {
  Gen gen(3);
  std::vector<Point2> pts;
  for (int i = 0; i < 3000; ++i) pts.emplace_back(gen.uniform(0, 8), 2.0 + gen.normal(0.02));
  for (int i = 0; i < 2000; ++i) pts.emplace_back(8.0 + gen.normal(0.02), gen.uniform(2, 6));
  const BevRaster r = rasterize_points(pts, kScale);
  auto segs = detect_segments(r, 30);
  segs = merge_refit(segs, 0.3, 5.0, r);
  REQUIRE(segs.size() == 2);
  const auto corners = extract_corners(segs, 1.0, 0.5);
  REQUIRE(corners.size() == 1);
  CHECK((corners[0].position - Point2(8, 2)).norm() < 0.1);
}

TEST_CASE("merge_refit joins collinear pieces") {
  const LineSegment2 a({0, 0}, {3, 0}), b({3.1, 0}, {6, 0});
  const BevRaster r = raster_of({a, b}, {-1, -1}, {7, 1});
  const auto merged = merge_refit(std::vector<LineSegment2>{a, b}, 0.3, 5.0, r);
  REQUIRE(merged.size() == 1);
  CHECK(endpoint_error(merged[0], {0, 0}, {6, 0}) <= kTol);

  const LineSegment2 c({3, 0}, {3, 3});
  const auto perp = merge_refit(std::vector<LineSegment2>{a, c}, 0.3, 5.0, r);
  REQUIRE(perp.size() == 2);
  CHECK(perp[0] == a);
  CHECK(perp[1] == c);
  const auto single = merge_refit(std::vector<LineSegment2>{a}, 0.3, 5.0, r);
  REQUIRE(single.size() == 1);
  CHECK(single[0] == a);
  CHECK_THROWS_AS(merge_refit(std::vector<LineSegment2>{a}, 0.0, 5.0, r), Error);
}

TEST_CASE("corner extraction fixtures") {
  SUBCASE("perpendicular walls") {
    const std::vector<LineSegment2> walls{LineSegment2({-3, 3}, {2, 3}), LineSegment2({2, -2}, {2, 3})};
    const auto c = extract_corners(walls, 1.0, 0.5);
    REQUIRE(c.size() == 1);
    CHECK((c[0].position - Point2(2, 3)).norm() <= kTol);
    CHECK(c[0].wall_a == walls[0]);
    CHECK(c[0].wall_b == walls[1]);
  }
  SUBCASE("parallel walls") {
    const std::vector<LineSegment2> walls{LineSegment2({0, 0}, {5, 0}), LineSegment2({0, 1}, {5, 1})};
    CHECK(extract_corners(walls, 1.0, 0.5).empty());
  }
  SUBCASE("crossing walls") {
    const std::vector<LineSegment2> walls{LineSegment2({-2, 0}, {2, 0}), LineSegment2({0, -2}, {0, 2})};
    const auto c = extract_corners(walls, 1.0, 0.5);
    REQUIRE(c.size() == 1);
    CHECK(c[0].position.norm() < 1e-12);
  }
  SUBCASE("the extension bridges a door-sized gap only") {
    const std::vector<LineSegment2> near{LineSegment2({0, 0}, {4, 0}), LineSegment2({4.8, 0.5}, {4.8, 4})};
    CHECK(extract_corners(near, 1.0, 0.5).size() == 1);
    const std::vector<LineSegment2> far{LineSegment2({0, 0}, {4, 0}), LineSegment2({6.5, 0.5}, {6.5, 4})};
    CHECK(extract_corners(far, 1.0, 0.5).empty());
  }
  CHECK_THROWS_AS(extract_corners(std::vector<LineSegment2>{}, -1.0, 0.5), Error);
}

TEST_CASE("model corners") {
  WallModel square;
  square.walls = {LineSegment2({0, 0}, {1, 0}), LineSegment2({1, 0}, {1, 1}),
                  LineSegment2({1, 1}, {0, 1}), LineSegment2({0, 1}, {0, 0})};
  const auto c = model_corners(square, 1.0, 0.5);
  REQUIRE(c.size() == 4);
  for (const Point2& v : {Point2(0, 0), Point2(1, 0), Point2(1, 1), Point2(0, 1)}) {
    CHECK(std::any_of(c.begin(), c.end(), [&](const Corner& k) { return (k.position - v).norm() < 1e-12; }));
  }

  // two rooms sharing the wall x = 4
  WallModel two;
  two.walls = {LineSegment2({0, 0}, {8, 0}), LineSegment2({0, 3}, {8, 3}), LineSegment2({0, 0}, {0, 3}),
               LineSegment2({8, 0}, {8, 3}), LineSegment2({4, 0}, {4, 3})};
  const auto tc = model_corners(two, 1.0, 0.5);
  CHECK(tc.size() == 6);
  for (const Corner& k : tc) {
    if ((k.position - Point2(4, 0)).norm() < 1e-9) {
      const bool attached = (k.wall_a == two.walls[0] && k.wall_b == two.walls[4]) ||
                            (k.wall_a == two.walls[4] && k.wall_b == two.walls[0]);
      CHECK(attached);
    }
  }
  CHECK(model_corners(WallModel{}, 1.0, 0.5).empty());
}

TEST_CASE("corner invariants on random floorplans") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const WallModel m = generate_floorplan(seed, 8, true, 10.0);
    const auto corners = model_corners(m, 1.0, 0.5);
    for (std::size_t i = 0; i < corners.size(); ++i) {
      CHECK_FALSE(corners[i].wall_a == corners[i].wall_b);
      CHECK(corners[i].wall_a.line_distance_to(corners[i].position) <= kTol);
      CHECK(corners[i].wall_b.line_distance_to(corners[i].position) <= kTol);
      CHECK(corners[i].wall_a.distance_to(corners[i].position) <= 1.0 + 1e-9);
      for (std::size_t j = i + 1; j < corners.size(); ++j) {
        CHECK((corners[i].position - corners[j].position).norm() >= 0.5);
      }
    }
  }
}

TEST_CASE("corner extraction is rigid-motion equivariant") {
  Gen gen(9);
  for (int trial = 0; trial < 20; ++trial) {
    const WallModel m = generate_floorplan(100 + trial, 6, trial % 2 == 0, 10.0);
    const Se2Pose t = gen.pose(30.0);
    std::vector<LineSegment2> moved;
    for (const LineSegment2& w : m.walls) moved.push_back(w.transformed(t));
    const auto a = extract_corners(m.walls, 1.0, 0.5);
    const auto b = extract_corners(moved, 1.0, 0.5);
    REQUIRE(a.size() == b.size());
    for (const Corner& c : a) {
      const Point2 expected = t * c.position;
      double best = 1e300;
      for (const Corner& d : b) best = std::min(best, (d.position - expected).norm());
      CHECK(best <= kTol);
    }
  }
}
