#include "bimreg/line_corner.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <queue>

#include "bimreg/error.hpp"

namespace bimreg {

namespace {

struct LineFit {
  Point2 mean = Point2::Zero();
  Vec2 dir = Vec2::UnitX();
  double sigma = 0.0;  // RMS distance to the fitted line
};

LineFit fit_line(std::span<const Point2> pts) {
  LineFit fit;
  if (pts.empty()) return fit;
  for (const Point2& p : pts) fit.mean += p;
  fit.mean /= static_cast<double>(pts.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const Point2& p : pts) {
    const Vec2 d = p - fit.mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(pts.size());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> solver(cov);
  fit.dir = solver.eigenvectors().col(1).normalized();
  fit.sigma = std::sqrt(std::max(solver.eigenvalues()[0], 0.0));
  return fit;
}

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

/// Occupied-pixel bookkeeping for the Hough detector.
class PixelSet {
 public:
  explicit PixelSet(const BevRaster& raster) : raster_(raster) {
    id_.assign(raster.grid.size(), -1);
    for (int v = 0; v < raster.height; ++v) {
      for (int u = 0; u < raster.width; ++u) {
        if (raster.grid[v * raster.width + u]) {
          id_[v * raster.width + u] = static_cast<int>(centers_.size());
          centers_.emplace_back(u + 0.5, v + 0.5);
        }
      }
    }
    alive_.assign(centers_.size(), true);
  }

  std::size_t size() const { return centers_.size(); }
  const Point2& center(int id) const { return centers_[id]; }
  bool alive(int id) const { return alive_[id]; }
  void kill(int id) { alive_[id] = false; }

  /// Alive pixels whose centers lie within `band` of the line through `c`
  /// with unit normal `n`, all in pixel units.
  std::vector<int> collect(const Point2& c, const Vec2& n, double band) const {
    std::vector<int> out;
    const bool horizontal = std::abs(n.y()) >= std::abs(n.x());
    const int outer = horizontal ? raster_.width : raster_.height;
    const double reach = band / std::max(std::abs(horizontal ? n.y() : n.x()), 1e-9);
    for (int a = 0; a < outer; ++a) {
      const double pa = a + 0.5;
      double pb;
      if (horizontal) {
        pb = c.y() - n.x() * (pa - c.x()) / n.y();
      } else {
        pb = c.x() - n.y() * (pa - c.y()) / n.x();
      }
      const int inner = horizontal ? raster_.height : raster_.width;
      const int lo = std::max(0, static_cast<int>(std::floor(pb - reach - 1.0)));
      const int hi = std::min(inner - 1, static_cast<int>(std::ceil(pb + reach)));
      for (int b = lo; b <= hi; ++b) {
        const int u = horizontal ? a : b;
        const int v = horizontal ? b : a;
        const int id = id_[v * raster_.width + u];
        if (id < 0 || !alive_[id]) continue;
        if (std::abs(n.dot(centers_[id] - c)) <= band) out.push_back(id);
      }
    }
    return out;
  }

 private:
  const BevRaster& raster_;
  std::vector<int> id_;
  std::vector<Point2> centers_;
  std::vector<bool> alive_;
};

class HoughAccumulator {
 public:
  HoughAccumulator(const BevRaster& raster, const HoughParams& params)
      : rho_res_(params.rho_px) {
    n_theta_ = std::max(1, static_cast<int>(std::lround(180.0 / params.theta_deg)));
    max_rho_ = std::hypot(raster.width, raster.height) + 1.0;
    n_rho_ = static_cast<int>(std::ceil(2.0 * max_rho_ / rho_res_)) + 1;
    cos_.resize(n_theta_);
    sin_.resize(n_theta_);
    for (int k = 0; k < n_theta_; ++k) {
      const double th = kPi * k / n_theta_;
      cos_[k] = std::cos(th);
      sin_[k] = std::sin(th);
    }
    votes_.assign(static_cast<std::size_t>(n_theta_) * n_rho_, 0);
  }

  void add(const Point2& p, int delta) {
    for (int k = 0; k < n_theta_; ++k) {
      const double r = p.x() * cos_[k] + p.y() * sin_[k];
      const auto idx = static_cast<int>(std::lround((r + max_rho_) / rho_res_));
      votes_[static_cast<std::size_t>(k) * n_rho_ + idx] += delta;
    }
  }

  std::size_t cells() const { return votes_.size(); }
  int votes(std::size_t cell) const { return votes_[cell]; }

  /// Line through the cell as (point on line, unit normal).
  std::pair<Point2, Vec2> line(std::size_t cell) const {
    const int k = static_cast<int>(cell / n_rho_);
    const int idx = static_cast<int>(cell % n_rho_);
    const double rho = idx * rho_res_ - max_rho_;
    const Vec2 n(cos_[k], sin_[k]);
    return {rho * n, n};
  }

 private:
  double rho_res_;
  int n_theta_ = 0;
  int n_rho_ = 0;
  double max_rho_ = 0.0;
  std::vector<double> cos_, sin_;
  std::vector<int> votes_;
};

}  // namespace

std::pair<int, int> BevRaster::pixel_of(const Point2& p) const {
  const Point2 q = (p - origin) * scale;
  return {static_cast<int>(std::floor(q.x())), static_cast<int>(std::floor(q.y()))};
}

Point2 BevRaster::to_metric(double u, double v) const {
  return origin + Point2(u, v) / scale;
}

std::size_t BevRaster::occupied() const {
  return static_cast<std::size_t>(std::count_if(grid.begin(), grid.end(),
                                                [](std::uint8_t c) { return c != 0; }));
}

BevRaster make_raster(const Point2& lo, const Point2& hi, double scale) {
  if (!(scale > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "raster scale must be positive");
  }
  BevRaster r;
  r.origin = lo;
  r.scale = scale;
  r.width = static_cast<int>(std::floor((hi.x() - lo.x()) * scale)) + 1;
  r.height = static_cast<int>(std::floor((hi.y() - lo.y()) * scale)) + 1;
  r.grid.assign(static_cast<std::size_t>(r.width) * r.height, 0);
  return r;
}

BevRaster rasterize_points(std::span<const Point2> points, double scale) {
  if (!(scale > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "raster scale must be positive");
  }
  BevRaster r;
  r.scale = scale;
  if (points.empty()) return r;
  Point2 lo = points.front(), hi = points.front();
  for (const Point2& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  r = make_raster(lo, hi, scale);
  for (const Point2& p : points) {
    const auto [u, v] = r.pixel_of(p);
    r.set(u, v);
  }
  return r;
}

BevRaster rasterize_walls(std::span<const PlanarPatch> walls, double scale) {
  std::vector<Point2> pts;
  for (const PlanarPatch& w : walls) {
    for (const Point3& p : w.points) pts.emplace_back(p.x(), p.y());
  }
  return rasterize_points(pts, scale);
}

BevRaster rasterize_walls(std::span<const LineSegment2> walls, double scale) {
  if (!(scale > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "raster scale must be positive");
  }
  if (walls.empty()) {
    BevRaster r;
    r.scale = scale;
    return r;
  }
  Point2 lo = walls.front().p0(), hi = lo;
  for (const LineSegment2& w : walls) {
    lo = lo.cwiseMin(w.p0()).cwiseMin(w.p1());
    hi = hi.cwiseMax(w.p0()).cwiseMax(w.p1());
  }
  BevRaster r = make_raster(lo, hi, scale);
  for (const LineSegment2& w : walls) {
    auto [x0, y0] = r.pixel_of(w.p0());
    const auto [x1, y1] = r.pixel_of(w.p1());
    const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
      r.set(x0, y0);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }
  return r;
}

std::vector<LineSegment2> detect_segments(const BevRaster& raster, int min_length_px,
                                          const HoughParams& params) {
  if (min_length_px < 1) {
    throw Error(ErrorCode::kInvalidArgument, "minimum segment length must be >= 1");
  }
  std::vector<LineSegment2> out;
  if (raster.empty()) return out;

  PixelSet pixels(raster);
  if (pixels.size() < static_cast<std::size_t>(min_length_px)) return out;
  HoughAccumulator acc(raster, params);
  for (std::size_t i = 0; i < pixels.size(); ++i) acc.add(pixels.center(static_cast<int>(i)), 1);

  // Max-heap on votes; ties resolve to the lower cell index.
  using Entry = std::pair<int, std::int64_t>;
  std::priority_queue<Entry> heap;
  for (std::size_t c = 0; c < acc.cells(); ++c) {
    if (acc.votes(c) >= min_length_px) heap.emplace(acc.votes(c), -static_cast<std::int64_t>(c));
  }

  auto gather = [&](const std::vector<int>& ids) {
    std::vector<Point2> pts;
    pts.reserve(ids.size());
    for (int id : ids) pts.push_back(pixels.center(id));
    return pts;
  };

  while (!heap.empty()) {
    const auto [votes, neg_cell] = heap.top();
    heap.pop();
    const auto cell = static_cast<std::size_t>(-neg_cell);
    const int current = acc.votes(cell);
    if (current != votes) {
      if (current >= min_length_px) heap.emplace(current, neg_cell);
      continue;
    }

    const auto [c0, n0] = acc.line(cell);
    std::vector<int> ids = pixels.collect(c0, n0, params.band_px);
    if (ids.size() < static_cast<std::size_t>(min_length_px)) continue;
    const LineFit coarse = fit_line(gather(ids));
    const double band = std::clamp(3.0 * coarse.sigma, params.band_px, params.max_band_px);
    const Vec2 n1(-coarse.dir.y(), coarse.dir.x());
    ids = pixels.collect(coarse.mean, n1, band);

    std::vector<std::pair<double, int>> along;
    along.reserve(ids.size());
    for (int id : ids) along.emplace_back(coarse.dir.dot(pixels.center(id) - coarse.mean), id);
    std::sort(along.begin(), along.end());

    bool emitted = false;
    std::size_t start = 0;
    for (std::size_t k = 1; k <= along.size(); ++k) {
      if (k < along.size() && along[k].first - along[k - 1].first <= params.gap_px) continue;
      const double extent = along[k - 1].first - along[start].first + 1.0;
      if (extent >= min_length_px) {
        std::vector<int> run;
        for (std::size_t m = start; m < k; ++m) run.push_back(along[m].second);
        const auto pts = gather(run);
        const LineFit fine = fit_line(pts);
        double tmin = std::numeric_limits<double>::infinity(), tmax = -tmin;
        for (const Point2& p : pts) {
          const double t = fine.dir.dot(p - fine.mean);
          tmin = std::min(tmin, t);
          tmax = std::max(tmax, t);
        }
        const Point2 a = fine.mean + tmin * fine.dir, b = fine.mean + tmax * fine.dir;
        if ((b - a).norm() > 0.0) {
          out.emplace_back(raster.to_metric(a.x(), a.y()), raster.to_metric(b.x(), b.y()));
          emitted = true;
        }
        for (int id : run) {
          pixels.kill(id);
          acc.add(pixels.center(id), -1);
        }
      }
      start = k;
    }
    if (!emitted) continue;  // cell stays below its popped value once stale
    if (acc.votes(cell) >= min_length_px) heap.emplace(acc.votes(cell), neg_cell);
  }
  return out;
}

std::vector<LineSegment2> merge_refit(std::span<const LineSegment2> segments,
                                      double endpoint_tol_m, double angle_tol_deg,
                                      const BevRaster& support) {
  if (!(endpoint_tol_m > 0.0) || !(angle_tol_deg > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "merge tolerances must be positive");
  }
  const std::size_t n = segments.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  const double angle_tol = deg2rad(angle_tol_deg);

  auto mergeable = [&](const LineSegment2& a, const LineSegment2& b) {
    if (acute_angle(a.direction(), b.direction()) > angle_tol) return false;
    if (a.line_distance_to(b.p0()) > endpoint_tol_m ||
        a.line_distance_to(b.p1()) > endpoint_tol_m ||
        b.line_distance_to(a.p0()) > endpoint_tol_m ||
        b.line_distance_to(a.p1()) > endpoint_tol_m) {
      return false;
    }
    const double t0 = (b.p0() - a.p0()).dot(a.direction());
    const double t1 = (b.p1() - a.p0()).dot(a.direction());
    const double gap = std::max({0.0, std::min(t0, t1) - a.length(), -std::max(t0, t1)});
    return gap <= endpoint_tol_m;
  };

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (mergeable(segments[i], segments[j])) {
        const std::size_t ri = find(i), rj = find(j);
        if (ri != rj) parent[std::max(ri, rj)] = std::min(ri, rj);
      }
    }
  }

  std::vector<std::vector<std::size_t>> groups(n);
  for (std::size_t i = 0; i < n; ++i) groups[find(i)].push_back(i);

  std::vector<LineSegment2> out;
  for (const auto& members : groups) {
    if (members.empty()) continue;
    if (members.size() == 1) {
      out.push_back(segments[members.front()]);
      continue;
    }
    // Support pixels lying close to any member segment.
    std::vector<Point2> pts;
    const double reach = std::max(2.0 / std::max(support.scale, 1e-9), 0.5 * endpoint_tol_m);
    for (int v = 0; v < support.height; ++v) {
      for (int u = 0; u < support.width; ++u) {
        if (!support.grid[v * support.width + u]) continue;
        const Point2 p = support.to_metric(u + 0.5, v + 0.5);
        for (std::size_t m : members) {
          if (segments[m].distance_to(p) <= reach) {
            pts.push_back(p);
            break;
          }
        }
      }
    }
    if (pts.size() < 2) {
      for (std::size_t m : members) {
        pts.push_back(segments[m].p0());
        pts.push_back(segments[m].p1());
      }
    }
    const LineFit fit = fit_line(pts);
    double tmin = std::numeric_limits<double>::infinity(), tmax = -tmin;
    for (std::size_t m : members) {
      for (const Point2& p : {segments[m].p0(), segments[m].p1()}) {
        const double t = fit.dir.dot(p - fit.mean);
        tmin = std::min(tmin, t);
        tmax = std::max(tmax, t);
      }
    }
    out.emplace_back(fit.mean + tmin * fit.dir, fit.mean + tmax * fit.dir);
  }
  return out;
}

std::vector<Corner> extract_corners(std::span<const LineSegment2> segments,
                                    const CornerParams& params) {
  if (params.extend_m < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "extension distance must be >= 0");
  }
  const double min_angle = deg2rad(params.min_angle_deg);
  std::vector<Corner> candidates;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const LineSegment2 a = segments[i].extended(params.extend_m);
    for (std::size_t j = i + 1; j < segments.size(); ++j) {
      if (acute_angle(segments[i].direction(), segments[j].direction()) < min_angle) continue;
      const LineSegment2 b = segments[j].extended(params.extend_m);
      const double denom = cross2(a.direction(), b.direction());
      const Vec2 q = b.p0() - a.p0();
      const double s = cross2(q, b.direction()) / denom;
      const double t = cross2(q, a.direction()) / denom;
      if (s < 0.0 || s > a.length() || t < 0.0 || t > b.length()) continue;
      candidates.push_back({a.p0() + s * a.direction(), segments[i], segments[j]});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Corner& x, const Corner& y) {
    if (x.support() != y.support()) return x.support() > y.support();
    if (x.position.x() != y.position.x()) return x.position.x() < y.position.x();
    return x.position.y() < y.position.y();
  });
  std::vector<Corner> kept;
  for (const Corner& c : candidates) {
    const bool clear = std::none_of(kept.begin(), kept.end(), [&](const Corner& k) {
      return (k.position - c.position).norm() < params.nms_radius_m;
    });
    if (clear) kept.push_back(c);
  }
  return kept;
}

std::vector<Corner> extract_corners(std::span<const LineSegment2> segments,
                                    double extend_m, double nms_radius_m) {
  CornerParams params;
  params.extend_m = extend_m;
  params.nms_radius_m = nms_radius_m;
  return extract_corners(segments, params);
}

std::vector<Corner> model_corners(const WallModel& model, const CornerParams& params) {
  return extract_corners(model.walls, params);
}

std::vector<Corner> model_corners(const WallModel& model, double extend_m,
                                  double nms_radius_m) {
  return extract_corners(model.walls, extend_m, nms_radius_m);
}

void write_pgm(const BevRaster& raster, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << "P5\n" << raster.width << ' ' << raster.height << "\n255\n";
  // Image rows run top-down, raster rows bottom-up.
  for (int v = raster.height - 1; v >= 0; --v) {
    for (int u = 0; u < raster.width; ++u) {
      out.put(raster.grid[v * raster.width + u] ? static_cast<char>(255) : 0);
    }
  }
}

void write_corners(std::ostream& out, std::span<const Corner> corners) {
  out << "# corners: each corner lists its two generating walls\n";
  for (const Corner& c : corners) {
    out << "# corner " << c.position.x() << ' ' << c.position.y() << '\n';
    for (const LineSegment2* w : {&c.wall_a, &c.wall_b}) {
      out << w->p0().x() << ' ' << w->p0().y() << ' ' << w->p1().x() << ' '
          << w->p1().y() << '\n';
    }
  }
}

}  // namespace bimreg
