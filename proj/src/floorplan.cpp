#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "bimreg/error.hpp"
#include "bimreg/ingest.hpp"

namespace bimreg {

namespace {

constexpr double kDoorWidth = 0.9;
constexpr double kDoorMargin = 0.5;

double round_cm(double v) { return std::round(v * 100.0) / 100.0; }

class WallBuilder {
 public:
  void add(Point2 a, Point2 b) {
    a = {round_cm(a.x()), round_cm(a.y())};
    b = {round_cm(b.x()), round_cm(b.y())};
    if ((a - b).norm() > 1e-6) raw_.emplace_back(a, b);
  }

  /// Adds an axis-parallel wall with an optional door gap [g0, g0 + width]
  /// measured along the wall from `a`.
  void add_with_door(const Point2& a, const Point2& b, std::optional<double> g0) {
    if (!g0) {
      add(a, b);
      return;
    }
    const Vec2 d = (b - a).normalized();
    add(a, a + *g0 * d);
    add(a + (*g0 + kDoorWidth) * d, b);
  }

  /// Splits every wall at endpoints of other walls that touch its interior so
  /// walls only ever meet at shared endpoints.
  std::vector<LineSegment2> finish() const {
    std::vector<LineSegment2> out;
    for (std::size_t i = 0; i < raw_.size(); ++i) {
      const LineSegment2& s = raw_[i];
      std::vector<double> cuts{0.0, s.length()};
      for (std::size_t j = 0; j < raw_.size(); ++j) {
        if (i == j) continue;
        for (const Point2& p : {raw_[j].p0(), raw_[j].p1()}) {
          const double t = (p - s.p0()).dot(s.direction());
          if (t > 1e-6 && t < s.length() - 1e-6 && s.line_distance_to(p) < 1e-6) {
            cuts.push_back(t);
          }
        }
      }
      std::sort(cuts.begin(), cuts.end());
      cuts.erase(std::unique(cuts.begin(), cuts.end(),
                             [](double x, double y) { return y - x < 1e-6; }),
                 cuts.end());
      for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const Point2 a = s.p0() + cuts[k] * s.direction();
        const Point2 b = s.p0() + cuts[k + 1] * s.direction();
        out.emplace_back(Point2(round_cm(a.x()), round_cm(a.y())),
                         Point2(round_cm(b.x()), round_cm(b.y())));
      }
    }
    return out;
  }

 private:
  std::vector<LineSegment2> raw_;
};

struct SideRoom {
  double x0, x1, depth;
};

/// Returns t in [0, len] where a door may start, keeping `kDoorMargin` from
/// both ends; nullopt when the wall is too short for a door.
std::optional<double> door_start(double len, std::mt19937_64& rng) {
  const double lo = kDoorMargin, hi = len - kDoorMargin - kDoorWidth;
  if (hi < lo) return std::nullopt;
  return round_cm(std::uniform_real_distribution<double>(lo, hi)(rng));
}

// Intersection parameters of segment s with the disk (c, r), if any.
std::optional<std::pair<double, double>> clip_to_disk(const LineSegment2& s,
                                                      const Point2& c, double r) {
  const Vec2 f = s.p0() - c;
  const double b = f.dot(s.direction());
  const double cc = f.squaredNorm() - r * r;
  const double disc = b * b - cc;
  if (disc <= 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  const double t0 = std::max(0.0, -b - sq), t1 = std::min(s.length(), -b + sq);
  if (t1 - t0 <= 1e-6) return std::nullopt;
  return std::make_pair(t0, t1);
}

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

bool segments_cross(const Point2& a0, const Point2& a1, const Point2& b0,
                    const Point2& b1) {
  const Vec2 r = a1 - a0, s = b1 - b0;
  const double denom = cross2(r, s);
  if (std::abs(denom) < 1e-12) return false;
  const Vec2 q = b0 - a0;
  const double t = cross2(q, s) / denom;
  const double u = cross2(q, r) / denom;
  return t >= 0.0 && t <= 1.0 && u >= 0.0 && u <= 1.0;
}

}  // namespace

FloorplanLayout generate_floorplan_layout(std::uint64_t seed, int n_rooms,
                                          bool corridor, double extent_m) {
  if (n_rooms < 1) {
    throw Error(ErrorCode::kInvalidArgument, "floorplan needs at least one room");
  }
  std::mt19937_64 rng(seed);
  const double max_side = std::clamp(extent_m, 3.0, 10.0);
  std::uniform_real_distribution<double> side(3.0, max_side);

  FloorplanLayout layout;
  WallBuilder walls;

  auto make_side = [&](int count) {
    std::vector<SideRoom> rooms;
    double x = 0.0;
    for (int i = 0; i < count; ++i) {
      const double w = round_cm(side(rng));
      const double d = round_cm(side(rng));
      rooms.push_back({x, round_cm(x + w), d});
      x = round_cm(x + w);
    }
    return rooms;
  };

  if (!corridor) {
    // A single row of rooms; neighbours connect through partition doors.
    const auto rooms = make_side(n_rooms);
    const double len = rooms.back().x1;
    walls.add({0.0, 0.0}, {len, 0.0});
    for (std::size_t i = 0; i < rooms.size(); ++i) {
      walls.add({rooms[i].x0, rooms[i].depth}, {rooms[i].x1, rooms[i].depth});
      layout.rooms.push_back({{rooms[i].x0, 0.0}, {rooms[i].x1, rooms[i].depth}});
    }
    walls.add({0.0, 0.0}, {0.0, rooms.front().depth});
    walls.add({len, 0.0}, {len, rooms.back().depth});
    for (std::size_t i = 0; i + 1 < rooms.size(); ++i) {
      const double x = rooms[i].x1;
      const double shared = std::min(rooms[i].depth, rooms[i + 1].depth);
      const double full = std::max(rooms[i].depth, rooms[i + 1].depth);
      walls.add_with_door({x, 0.0}, {x, shared}, door_start(shared, rng));
      if (full > shared) walls.add({x, shared}, {x, full});
    }
  } else {
    const double half = round_cm(std::uniform_real_distribution<double>(0.9, 1.5)(rng));
    const auto top = make_side((n_rooms + 1) / 2);
    const auto bottom = make_side(n_rooms / 2);
    const double len = std::max(top.back().x1, bottom.empty() ? 0.0 : bottom.back().x1);
    layout.corridor = Rect{{0.0, -half}, {len, half}};
    walls.add({0.0, -half}, {0.0, half});
    walls.add({len, -half}, {len, half});

    auto build_side = [&](const std::vector<SideRoom>& rooms, double sign) {
      const double y0 = sign * half;
      auto at = [&](double x, double depth) { return Point2(x, y0 + sign * depth); };
      double cursor = 0.0;
      for (std::size_t i = 0; i < rooms.size(); ++i) {
        const SideRoom& r = rooms[i];
        walls.add(at(r.x0, r.depth), at(r.x1, r.depth));
        // Corridor wall of this room, with its door.
        walls.add_with_door(at(r.x0, 0.0), at(r.x1, 0.0), door_start(r.x1 - r.x0, rng));
        const double prev = i == 0 ? 0.0 : rooms[i - 1].depth;
        walls.add(at(r.x0, 0.0), at(r.x0, std::max(prev, r.depth)));
        const Point2 a = at(r.x0, 0.0), b = at(r.x1, r.depth);
        layout.rooms.push_back({a.cwiseMin(b), a.cwiseMax(b)});
        cursor = r.x1;
      }
      if (!rooms.empty()) walls.add(at(cursor, 0.0), at(cursor, rooms.back().depth));
      if (cursor < len) walls.add(at(cursor, 0.0), at(len, 0.0));
    };
    build_side(top, 1.0);
    build_side(bottom, -1.0);
  }

  layout.model.floor_id = "0";
  layout.model.walls = walls.finish();
  return layout;
}

WallModel generate_floorplan(std::uint64_t seed, int n_rooms, bool corridor,
                             double extent_m) {
  return generate_floorplan_layout(seed, n_rooms, corridor, extent_m).model;
}

Se2Pose sample_free_pose(const FloorplanLayout& layout, std::uint64_t seed,
                         double clearance_m) {
  std::vector<Rect> areas = layout.rooms;
  if (layout.corridor) areas.push_back(*layout.corridor);
  if (areas.empty()) throw Error(ErrorCode::kInvalidArgument, "layout has no free space");
  std::mt19937_64 rng(seed);
  const Rect& area = areas[std::uniform_int_distribution<std::size_t>(0, areas.size() - 1)(rng)];
  auto pick = [&](double lo, double hi) {
    if (hi - lo <= 2.0 * clearance_m) return 0.5 * (lo + hi);
    return std::uniform_real_distribution<double>(lo + clearance_m, hi - clearance_m)(rng);
  };
  const double x = pick(area.min.x(), area.max.x());
  const double y = pick(area.min.y(), area.max.y());
  const double yaw = std::uniform_real_distribution<double>(-kPi, kPi)(rng);
  return {x, y, yaw};
}

Se2Pose sample_pose_in_model(const WallModel& model, std::uint64_t seed,
                             double clearance_m) {
  if (model.walls.empty()) throw Error(ErrorCode::kEmptyModel, "wall model has no walls");
  Point2 lo = model.walls.front().p0(), hi = lo;
  for (const LineSegment2& w : model.walls) {
    lo = lo.cwiseMin(w.p0()).cwiseMin(w.p1());
    hi = hi.cwiseMax(w.p0()).cwiseMax(w.p1());
  }
  const double reach = (hi - lo).norm() + 1.0;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(lo.x(), hi.x()), uy(lo.y(), hi.y());
  std::uniform_real_distribution<double> uyaw(-kPi, kPi);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const Point2 p(ux(rng), uy(rng));
    const double yaw = uyaw(rng);
    bool ok = true;
    for (const LineSegment2& w : model.walls) {
      if (w.distance_to(p) < clearance_m) {
        ok = false;
        break;
      }
    }
    for (const Vec2& d : {Vec2(1, 0), Vec2(-1, 0), Vec2(0, 1), Vec2(0, -1)}) {
      if (!ok) break;
      ok = std::any_of(model.walls.begin(), model.walls.end(), [&](const LineSegment2& w) {
        return segments_cross(p, p + reach * d, w.p0(), w.p1());
      });
    }
    if (ok) return {p.x(), p.y(), yaw};
  }
  throw Error(ErrorCode::kEmptyScene, "no free pose found inside the model");
}

SyntheticScene synthesize_submap(const WallModel& model, const Se2Pose& pose,
                                 const SynthesisOptions& opt) {
  if (!(opt.radius_m > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "radius must be positive");
  }
  for (double f : {opt.drop_wall_frac, opt.clutter_frac, opt.bias_wall_frac}) {
    if (f < 0.0 || f > 1.0) {
      throw Error(ErrorCode::kInvalidArgument, "fractions must lie in [0, 1]");
    }
  }
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const Point2 center = pose.translation();
  SyntheticScene scene;
  scene.wall_model = model;
  scene.gt_pose = pose;
  DeviationLog& log = scene.deviation_log;

  struct Piece {
    std::size_t wall;
    LineSegment2 seg;
  };
  std::vector<Piece> visible;
  for (std::size_t i = 0; i < model.walls.size(); ++i) {
    const LineSegment2& w = model.walls[i];
    if (auto t = clip_to_disk(w, center, opt.radius_m)) {
      visible.push_back({i, LineSegment2(w.p0() + t->first * w.direction(),
                                         w.p0() + t->second * w.direction())});
      log.visible_walls.push_back(i);
    }
  }

  std::vector<std::size_t> order(visible.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_drop = static_cast<std::size_t>(std::lround(opt.drop_wall_frac * visible.size()));
  std::vector<bool> dropped(visible.size(), false);
  for (std::size_t k = 0; k < n_drop; ++k) dropped[order[k]] = true;
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_bias = static_cast<std::size_t>(std::lround(opt.bias_wall_frac * visible.size()));
  std::vector<bool> biased(visible.size(), false);
  for (std::size_t k = 0, taken = 0; k < order.size() && taken < n_bias; ++k) {
    if (dropped[order[k]]) continue;
    biased[order[k]] = true;
    ++taken;
  }

  std::vector<LineSegment2> constructed;
  for (std::size_t i = 0; i < visible.size(); ++i) {
    if (dropped[i]) {
      log.dropped_walls.push_back(visible[i].wall);
      continue;
    }
    LineSegment2 seg = visible[i].seg;
    if (biased[i]) {
      const Vec2 n(-seg.direction().y(), seg.direction().x());
      const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
      seg = LineSegment2(seg.p0() + sign * opt.bias_m * n, seg.p1() + sign * opt.bias_m * n);
      log.biased_walls.push_back(visible[i].wall);
    }
    constructed.push_back(seg);
  }
  std::sort(log.dropped_walls.begin(), log.dropped_walls.end());
  std::sort(log.biased_walls.begin(), log.biased_walls.end());
  if (constructed.empty()) {
    throw Error(ErrorCode::kEmptyScene, "no constructed wall within the scan radius");
  }

  std::vector<Point3> world;
  auto noisy = [&](Point3 p) {
    if (opt.noise_sigma_m > 0.0) {
      p += opt.noise_sigma_m * Point3(gauss(rng), gauss(rng), gauss(rng));
    }
    return p;
  };

  auto sample_vertical = [&](const LineSegment2& seg, double height, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      const Point2 q = seg.p0() + unit(rng) * seg.length() * seg.direction();
      world.push_back(noisy(Point3(q.x(), q.y(), unit(rng) * height)));
    }
  };

  for (const LineSegment2& seg : constructed) {
    const auto n = static_cast<std::size_t>(
        std::lround(opt.density_per_m2 * seg.length() * opt.wall_height_m));
    sample_vertical(seg, opt.wall_height_m, n);
    log.wall_points += n;
  }

  auto min_wall_distance = [&](const Point2& p) {
    double best = std::numeric_limits<double>::infinity();
    for (const LineSegment2& w : model.walls) best = std::min(best, w.distance_to(p));
    return best;
  };

  // Floor visible from the sensor through constructed walls only.
  {
    const auto n = static_cast<std::size_t>(
        std::lround(opt.density_per_m2 * kPi * opt.radius_m * opt.radius_m));
    for (std::size_t k = 0; k < n; ++k) {
      const double r = opt.radius_m * std::sqrt(unit(rng));
      const double a = 2.0 * kPi * unit(rng);
      const Point2 q = center + r * Vec2(std::cos(a), std::sin(a));
      if (min_wall_distance(q) < opt.ground_clearance_m) continue;
      bool blocked = false;
      for (const LineSegment2& w : constructed) {
        if (segments_cross(center, q, w.p0(), w.p1())) {
          blocked = true;
          break;
        }
      }
      if (blocked) continue;
      world.push_back(noisy(Point3(q.x(), q.y(), 0.0)));
      ++log.ground_points;
    }
  }

  // Extra construction: free-standing vertical panels away from the walls.
  const auto clutter_target =
      static_cast<std::size_t>(std::lround(opt.clutter_frac * log.wall_points));
  for (int attempt = 0; attempt < 500 && log.clutter_points < clutter_target; ++attempt) {
    const double r = (opt.radius_m - 1.0) * std::sqrt(unit(rng));
    const double a = 2.0 * kPi * unit(rng);
    const Point2 c = center + std::max(r, 0.0) * Vec2(std::cos(a), std::sin(a));
    const double yaw = kPi * unit(rng);
    const double width = 0.6 + 0.9 * unit(rng);
    const double height = 0.8 + 1.2 * unit(rng);
    const Vec2 d(std::cos(yaw), std::sin(yaw));
    const Point2 p0 = c - 0.5 * width * d, p1 = c + 0.5 * width * d;
    if (min_wall_distance(p0) < 0.3 || min_wall_distance(p1) < 0.3 ||
        min_wall_distance(c) < 0.3) {
      continue;
    }
    const LineSegment2 panel(p0, p1);
    const auto n = std::min<std::size_t>(
        clutter_target - log.clutter_points,
        static_cast<std::size_t>(std::lround(opt.density_per_m2 * width * height)));
    sample_vertical(panel, height, n);
    log.clutter.push_back(panel);
    log.clutter_points += n;
  }

  const Se2Pose to_submap = pose.inverse();
  scene.submap.points.reserve(world.size());
  for (const Point3& p : world) {
    const Point2 q = to_submap * Point2(p.x(), p.y());
    scene.submap.points.emplace_back(q.x(), q.y(), p.z());
  }
  scene.submap.gravity = Vec3(0.0, 0.0, -1.0);
  scene.submap.source_span_m = opt.source_span_m;
  return scene;
}

SyntheticScene synthesize_submap(const WallModel& model, const Se2Pose& pose,
                                 double radius_m, double noise_sigma_m,
                                 double drop_wall_frac, double clutter_frac,
                                 std::uint64_t seed) {
  SynthesisOptions opt;
  opt.radius_m = radius_m;
  opt.noise_sigma_m = noise_sigma_m;
  opt.drop_wall_frac = drop_wall_frac;
  opt.clutter_frac = clutter_frac;
  opt.seed = seed;
  return synthesize_submap(model, pose, opt);
}

}  // namespace bimreg
