#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <deque>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bimreg/error.hpp"
#include "bimreg/ingest.hpp"
#include "support.hpp"

using namespace bimreg;
using testing::Gen;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "bimreg_test_ingest";
  fs::create_directories(dir);
  return dir / name;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an exception");
  return ErrorCode::kInvalidArgument;
}

ScanSequence moving_sequence(int n_scans, double step_m) {
  ScanSequence seq;
  Gen gen(11);
  for (int k = 0; k < n_scans; ++k) {
    TimedScan scan;
    scan.timestamp = 0.1 * k;
    for (int i = 0; i < 200; ++i) {
      scan.points.emplace_back(gen.uniform(-5, 5), gen.uniform(-5, 5), gen.uniform(0, 2.5));
    }
    seq.scans.push_back(scan);
    Eigen::Isometry3d pose = Eigen::Isometry3d::Identity();
    pose.translation() = Vec3(step_m * k, 0.0, 0.0);
    seq.poses.push_back(pose);
  }
  return seq;
}

}  // namespace

TEST_CASE("voxel downsampling keeps one centroid per voxel") {
  std::vector<Point3> pts;
  Point3 mean = Point3::Zero();
  Gen gen(1);
  for (int i = 0; i < 8; ++i) {
    pts.emplace_back(gen.uniform(0.01, 0.79), gen.uniform(0.01, 0.79), gen.uniform(0.01, 0.79));
    mean += pts.back();
  }
  mean /= 8.0;
  const auto out = voxel_downsample(pts, 0.8);
  REQUIRE(out.size() == 1);
  CHECK((out[0] - mean).norm() < 1e-12);
}

TEST_CASE("duplicated scans downsample to the same set") {
  Gen gen(2);
  std::vector<Point3> scan;
  for (int i = 0; i < 300; ++i) scan.emplace_back(gen.uniform(-4, 4), gen.uniform(-4, 4), gen.uniform(0, 2));
  std::vector<Point3> twice = scan;
  twice.insert(twice.end(), scan.begin(), scan.end());
  const auto a = voxel_downsample(scan, 0.8);
  const auto b = voxel_downsample(twice, 0.8);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK((a[i] - b[i]).norm() < 1e-12);
}

TEST_CASE("a 1 m point grid survives 0.8 m voxels") {
  std::vector<Point3> grid;
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) grid.emplace_back(i, j, 0.0);
  }
  CHECK(voxel_downsample(grid, 0.8).size() == 100);
}

TEST_CASE("downsampling is independent of input order") {
  Gen gen(3);
  std::vector<Point3> pts;
  for (int i = 0; i < 500; ++i) pts.emplace_back(gen.uniform(-3, 3), gen.uniform(-3, 3), gen.uniform(-3, 3));
  auto shuffled = pts;
  std::shuffle(shuffled.begin(), shuffled.end(), gen.engine());
  const auto a = voxel_downsample(pts, 0.5), b = voxel_downsample(shuffled, 0.5);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK((a[i] - b[i]).norm() < 1e-9);
}

TEST_CASE("accumulate_submap uses the shortest prefix covering the travel") {
  const ScanSequence seq = moving_sequence(10, 1.0);
  const Submap s = accumulate_submap(seq, 0.8, 3.5);
  CHECK(s.source_span_m == doctest::Approx(4.0));
  CHECK(s.source_span_m >= 3.5);

  std::vector<Point3> world;
  for (int k = 0; k < 5; ++k) {
    for (const Point3& p : seq.scans[k].points) world.push_back(seq.poses[k] * p);
  }
  CHECK(s.points.size() <= world.size());
  // every output point lies near some input point
  for (const Point3& q : s.points) {
    double best = 1e300;
    for (const Point3& p : world) best = std::min(best, (p - q).norm());
    CHECK(best <= 0.8 * std::sqrt(3.0) / 2.0 + 1e-9);
  }
  const auto expected = voxel_downsample(world, 0.8);
  CHECK(expected.size() == s.points.size());
}

TEST_CASE("accumulate_submap errors") {
  CHECK(code_of([] { accumulate_submap(moving_sequence(1, 1.0), 0.8, 1.0); }) ==
        ErrorCode::kInsufficientTravel);
  CHECK(code_of([] { accumulate_submap(moving_sequence(5, 1.0), 0.8, 15.0); }) ==
        ErrorCode::kInsufficientTravel);
  CHECK(code_of([] { accumulate_submap(ScanSequence{}, 0.8, 1.0); }) ==
        ErrorCode::kInvalidArgument);
  ScanSequence bad = moving_sequence(3, 1.0);
  bad.scans[2].timestamp = bad.scans[1].timestamp;
  CHECK(code_of([&] { accumulate_submap(bad, 0.8, 1.0); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("submap binary round trip") {
  Gen gen(4);
  Submap s;
  for (int i = 0; i < 100; ++i) {
    s.points.emplace_back(static_cast<float>(gen.uniform(-9, 9)), static_cast<float>(gen.uniform(-9, 9)),
                          static_cast<float>(gen.uniform(0, 3)));
  }
  s.gravity = Vec3(0, 0, -1);
  const fs::path path = temp_path("cloud.bin");
  save_submap(s, path);
  CHECK(fs::file_size(path) == 4 + 4 + 12 + 12 * 100);
  const Submap t = load_submap(path);
  REQUIRE(t.points.size() == 100);
  for (std::size_t i = 0; i < 100; ++i) CHECK(t.points[i] == s.points[i]);
  CHECK(t.gravity == s.gravity);

  std::ofstream(temp_path("bad.bin"), std::ios::binary) << "XXXXjunk";
  CHECK(code_of([] { load_submap(temp_path("bad.bin")); }) == ErrorCode::kVersionMismatch);
  {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    std::ofstream(temp_path("short.bin"), std::ios::binary) << bytes.substr(0, 50);
  }
  CHECK(code_of([] { load_submap(temp_path("short.bin")); }) == ErrorCode::kParseError);
}

TEST_CASE("wall model parsing") {
  std::istringstream one("0 0 5 0\n");
  const auto floors = parse_building(one);
  REQUIRE(floors.size() == 1);
  REQUIRE(floors[0].walls.size() == 1);
  CHECK(floors[0].walls[0].p0() == Point2(0, 0));
  CHECK(floors[0].walls[0].p1() == Point2(5, 0));

  std::istringstream malformed("# header\n0 0 5 0\n0 0 five 0\n");
  try {
    parse_building(malformed);
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kParseError);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }

  std::istringstream empty("# nothing\n\n");
  CHECK(code_of([&] { parse_building(empty); }) == ErrorCode::kEmptyModel);
  std::istringstream dup("floor a\n0 0 1 0\nfloor a\n0 0 0 1\n");
  CHECK(code_of([&] { parse_building(dup); }) == ErrorCode::kParseError);
  std::istringstream zero("1 1 1 1\n");
  CHECK(code_of([&] { parse_building(zero); }) == ErrorCode::kParseError);

  std::istringstream multi("floor 1\n0 0 1 0  # trailing\nfloor 2\n0 0 0 2\n1 1 2 2\n");
  const auto two = parse_building(multi);
  REQUIRE(two.size() == 2);
  CHECK(two[0].floor_id == "1");
  CHECK(two[1].walls.size() == 2);
}

TEST_CASE("wall model save/load is bit exact") {
  Gen gen(5);
  WallModel m;
  m.floor_id = "3";
  for (int i = 0; i < 500; ++i) m.walls.emplace_back(gen.point(100.0), gen.point(100.0));
  const fs::path path = temp_path("walls.txt");
  save_wall_model(m, path);
  const WallModel back = load_wall_model(path);
  CHECK(back.floor_id == "3");
  REQUIRE(back.walls.size() == 500);
  for (std::size_t i = 0; i < 500; ++i) CHECK(back.walls[i] == m.walls[i]);
  save_wall_model(back, temp_path("walls2.txt"));
  std::ifstream a(path), b(temp_path("walls2.txt"));
  CHECK(std::string((std::istreambuf_iterator<char>(a)), {}) ==
        std::string((std::istreambuf_iterator<char>(b)), {}));
  CHECK(code_of([&] { load_wall_model(path, "9"); }) == ErrorCode::kEmptyModel);
}

TEST_CASE("pose files round trip exactly") {
  Gen gen(6);
  for (int i = 0; i < 50; ++i) {
    const Se2Pose p = gen.pose();
    save_pose(p, temp_path("pose.txt"));
    const Se2Pose q = load_pose(temp_path("pose.txt"));
    CHECK(q.x == p.x);
    CHECK(q.y == p.y);
    CHECK(q.yaw == p.yaw);
  }
}

TEST_CASE("single room floorplan is a rectangle") {
  const WallModel m = generate_floorplan(1, 1, false, 10.0);
  CHECK(m.walls.size() == 4);
  double len = 0.0;
  for (const LineSegment2& w : m.walls) {
    len += w.length();
    CHECK((std::abs(w.direction().x()) == 1.0 || std::abs(w.direction().y()) == 1.0));
  }
  CHECK(len >= 12.0);
  CHECK(len <= 40.0);
}

TEST_CASE("floorplans are deterministic") {
  const WallModel a = generate_floorplan(42, 8, true, 10.0);
  const WallModel b = generate_floorplan(42, 8, true, 10.0);
  REQUIRE(a.walls.size() == b.walls.size());
  for (std::size_t i = 0; i < a.walls.size(); ++i) CHECK(a.walls[i] == b.walls[i]);
  const WallModel c = generate_floorplan(43, 8, true, 10.0);
  bool differs = c.walls.size() != a.walls.size();
  for (std::size_t i = 0; !differs && i < a.walls.size(); ++i) differs = !(a.walls[i] == c.walls[i]);
  CHECK(differs);
}

TEST_CASE("floorplan walls only touch at endpoints") {
  for (std::uint64_t seed : {7u, 8u, 9u}) {
    const WallModel m = generate_floorplan(seed, 12, true, 10.0);
    for (std::size_t i = 0; i < m.walls.size(); ++i) {
      for (std::size_t j = i + 1; j < m.walls.size(); ++j) {
        const LineSegment2 &a = m.walls[i], &b = m.walls[j];
        const Vec2 r = a.p1() - a.p0(), s = b.p1() - b.p0();
        const double denom = r.x() * s.y() - r.y() * s.x();
        if (std::abs(denom) < 1e-12) {
          // parallel: collinear overlap would be a crossing
          if (a.line_distance_to(b.p0()) > 1e-9) continue;
          const double t0 = (b.p0() - a.p0()).dot(a.direction());
          const double t1 = (b.p1() - a.p0()).dot(a.direction());
          const double overlap = std::min(a.length(), std::max(t0, t1)) - std::max(0.0, std::min(t0, t1));
          CHECK(overlap <= 1e-9);
          continue;
        }
        const Vec2 q = b.p0() - a.p0();
        const double t = (q.x() * s.y() - q.y() * s.x()) / denom;
        const double u = (q.x() * r.y() - q.y() * r.x()) / denom;
        const double eps = 1e-9;
        const bool interior = t > eps && t < 1 - eps && u > eps && u < 1 - eps;
        CHECK_FALSE(interior);
      }
    }
  }
}

TEST_CASE("every room of a corridor floorplan is reachable") {
  const FloorplanLayout layout = generate_floorplan_layout(7, 12, true, 10.0);
  REQUIRE(layout.rooms.size() == 12);
  REQUIRE(layout.corridor.has_value());
  CHECK(layout.model.walls.size() >= 2 * 12);

  // free-space raster at 5 cm, walls thickened to one cell
  const double res = 0.05;
  Point2 lo = layout.model.walls.front().p0(), hi = lo;
  for (const LineSegment2& w : layout.model.walls) {
    lo = lo.cwiseMin(w.p0()).cwiseMin(w.p1());
    hi = hi.cwiseMax(w.p0()).cwiseMax(w.p1());
  }
  lo -= Point2(1, 1);
  hi += Point2(1, 1);
  const int W = static_cast<int>((hi.x() - lo.x()) / res) + 1;
  const int H = static_cast<int>((hi.y() - lo.y()) / res) + 1;
  std::vector<std::uint8_t> blocked(static_cast<std::size_t>(W) * H, 0);
  auto cell = [&](const Point2& p) {
    return std::pair<int, int>(static_cast<int>((p.x() - lo.x()) / res), static_cast<int>((p.y() - lo.y()) / res));
  };
  for (const LineSegment2& w : layout.model.walls) {
    const int steps = static_cast<int>(w.length() / (0.25 * res)) + 1;
    for (int k = 0; k <= steps; ++k) {
      const auto [i, j] = cell(w.p0() + w.direction() * (w.length() * k / steps));
      for (int di = -1; di <= 1; ++di) {
        for (int dj = -1; dj <= 1; ++dj) {
          const int a = i + di, b = j + dj;
          if (a >= 0 && b >= 0 && a < W && b < H) blocked[static_cast<std::size_t>(b) * W + a] = 1;
        }
      }
    }
  }
  std::vector<std::uint8_t> seen(blocked.size(), 0);
  std::deque<std::pair<int, int>> queue{cell(0.5 * (layout.corridor->min + layout.corridor->max))};
  seen[static_cast<std::size_t>(queue.front().second) * W + queue.front().first] = 1;
  while (!queue.empty()) {
    const auto [i, j] = queue.front();
    queue.pop_front();
    for (const auto& [di, dj] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
      const int a = i + di, b = j + dj;
      if (a < 0 || b < 0 || a >= W || b >= H) continue;
      const auto k = static_cast<std::size_t>(b) * W + a;
      if (blocked[k] || seen[k]) continue;
      seen[k] = 1;
      queue.emplace_back(a, b);
    }
  }
  for (const Rect& room : layout.rooms) {
    const auto [i, j] = cell(0.5 * (room.min + room.max));
    CHECK(seen[static_cast<std::size_t>(j) * W + i]);
  }
  // the building envelope is closed
  CHECK_FALSE(seen[0]);
}

TEST_CASE("synthetic scenes") {
  const FloorplanLayout layout = generate_floorplan_layout(3, 6, true, 10.0);
  const Se2Pose pose = sample_free_pose(layout, 5);

  SUBCASE("deterministic given a seed") {
    SynthesisOptions opt;
    opt.noise_sigma_m = 0.03;
    opt.drop_wall_frac = 0.2;
    opt.clutter_frac = 0.1;
    opt.seed = 17;
    const auto a = synthesize_submap(layout.model, pose, opt);
    const auto b = synthesize_submap(layout.model, pose, opt);
    REQUIRE(a.submap.points.size() == b.submap.points.size());
    CHECK(a.submap.points == b.submap.points);
    CHECK(a.deviation_log.dropped_walls == b.deviation_log.dropped_walls);
  }

  SUBCASE("undeviated wall points land on model walls through gt") {
    const auto scene = synthesize_submap(layout.model, pose, 10.0, 0.0, 0.0, 0.0, 1);
    CHECK(scene.deviation_log.ground_points > 0);
    std::size_t walls = 0;
    for (const Point3& p : scene.submap.points) {
      if (p.z() == 0.0) continue;  // ground
      ++walls;
      const Point2 q = scene.gt_pose * Point2(p.x(), p.y());
      double best = 1e300;
      for (const LineSegment2& w : layout.model.walls) best = std::min(best, w.distance_to(q));
      CHECK(best <= 0.0 + 0.2);
      CHECK(best < 1e-9);
    }
    CHECK(walls == scene.deviation_log.wall_points);
  }

  SUBCASE("noisy wall points stay within noise plus a score cell") {
    const auto scene = synthesize_submap(layout.model, pose, 10.0, 0.03, 0.0, 0.0, 2);
    std::size_t far = 0, walls = 0;
    for (const Point3& p : scene.submap.points) {
      const Point2 q = scene.gt_pose * Point2(p.x(), p.y());
      double best = 1e300;
      for (const LineSegment2& w : layout.model.walls) best = std::min(best, w.distance_to(q));
      if (best > 1.0) continue;  // ground, which keeps its clearance
      ++walls;
      if (best > 0.03 + 0.2) ++far;
    }
    CHECK(walls > 1000);
    CHECK(far == 0);
  }

  SUBCASE("deviation knobs") {
    SynthesisOptions opt;
    opt.drop_wall_frac = 0.5;
    opt.clutter_frac = 0.2;
    opt.seed = 9;
    const auto s = synthesize_submap(layout.model, pose, opt);
    const auto& log = s.deviation_log;
    CHECK(log.dropped_walls.size() ==
          static_cast<std::size_t>(std::lround(0.5 * log.visible_walls.size())));
    for (std::size_t w : log.dropped_walls) {
      CHECK(std::find(log.visible_walls.begin(), log.visible_walls.end(), w) != log.visible_walls.end());
    }
    CHECK(log.clutter_points > 0);
    CHECK(log.clutter_points <= static_cast<std::size_t>(std::lround(0.2 * log.wall_points)));
    CHECK(s.submap.points.size() == log.wall_points + log.ground_points + log.clutter_points);
  }

  SUBCASE("all walls dropped") {
    CHECK(code_of([&] { synthesize_submap(layout.model, pose, 10.0, 0.0, 1.0, 0.0, 1); }) ==
          ErrorCode::kEmptyScene);
  }

  SUBCASE("bad fractions") {
    CHECK(code_of([&] { synthesize_submap(layout.model, pose, 10.0, 0.0, 1.5, 0.0, 1); }) ==
          ErrorCode::kInvalidArgument);
  }
}

TEST_CASE("poses sampled inside a model keep their clearance") {
  const WallModel m = generate_floorplan(12, 10, true, 10.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Se2Pose p = sample_pose_in_model(m, seed, 1.0);
    for (const LineSegment2& w : m.walls) CHECK(w.distance_to(p.translation()) >= 1.0);
  }
}
