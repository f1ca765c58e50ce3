#include "bimreg/plane_seg.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <tuple>

#include "bimreg/error.hpp"

namespace bimreg {

namespace {

constexpr double kLambdaFloor = 1e-12;

struct DisjointSets {
  explicit DisjointSets(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  std::size_t find(std::size_t i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::vector<std::size_t> parent;
};

class OctreeSegmenter {
 public:
  OctreeSegmenter(const PlaneSegParams& params, std::vector<PlanarPatch>& out)
      : params_(params), out_(out) {}

  void visit(std::vector<Point3> points, const Eigen::AlignedBox3d& box, int depth) {
    if (points.size() < 4) return;
    PlanarPatch patch;
    if (fit_plane(points, patch.centroid, patch.normal, patch.eigvals) &&
        patch.planarity() > params_.sigma_lambda &&
        patch.eigvals[2] <= params_.max_rms_m * params_.max_rms_m) {
      patch.points = std::move(points);
      patch.cells.push_back(box);
      out_.push_back(std::move(patch));
      return;
    }
    if (depth >= params_.max_depth) return;
    const Point3 mid = box.center();
    std::array<std::vector<Point3>, 8> children;
    for (const Point3& p : points) {
      const int idx = (p.x() >= mid.x() ? 1 : 0) | (p.y() >= mid.y() ? 2 : 0) |
                      (p.z() >= mid.z() ? 4 : 0);
      children[idx].push_back(p);
    }
    points.clear();
    points.shrink_to_fit();
    for (int idx = 0; idx < 8; ++idx) {
      Point3 lo = box.min(), hi = box.max();
      for (int axis = 0; axis < 3; ++axis) {
        if (idx & (1 << axis)) {
          lo[axis] = mid[axis];
        } else {
          hi[axis] = mid[axis];
        }
      }
      visit(std::move(children[idx]), Eigen::AlignedBox3d(lo, hi), depth + 1);
    }
  }

 private:
  const PlaneSegParams& params_;
  std::vector<PlanarPatch>& out_;
};

}  // namespace

double PlanarPatch::planarity() const {
  return eigvals[1] / std::max(eigvals[2], kLambdaFloor);
}

bool fit_plane(std::span<const Point3> points, Point3& centroid, Vec3& normal,
               Vec3& eigvals) {
  if (points.size() < 3) return false;
  const double n = static_cast<double>(points.size());
  centroid = Point3::Zero();
  for (const Point3& p : points) centroid += p;
  centroid /= n;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const Point3& p : points) {
    const Vec3 d = p - centroid;
    cov += d * d.transpose();
  }
  cov /= n;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  const Vec3 ascending = solver.eigenvalues();
  eigvals = Vec3(ascending[2], ascending[1], std::max(ascending[0], 0.0));
  normal = solver.eigenvectors().col(0).normalized();
  return true;
}

std::vector<PlanarPatch> segment_planes(const Submap& submap,
                                        const PlaneSegParams& params) {
  if (!(params.voxel_size > 0.0) || !(params.sigma_lambda > 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "segment_planes: need voxel_size > 0 and sigma_lambda > 1");
  }
  using Key = std::tuple<std::int64_t, std::int64_t, std::int64_t>;
  std::map<Key, std::vector<Point3>> cells;
  for (const Point3& p : submap.points) {
    const Key k{static_cast<std::int64_t>(std::floor(p.x() / params.voxel_size)),
                static_cast<std::int64_t>(std::floor(p.y() / params.voxel_size)),
                static_cast<std::int64_t>(std::floor(p.z() / params.voxel_size))};
    cells[k].push_back(p);
  }
  std::vector<PlanarPatch> patches;
  OctreeSegmenter segmenter(params, patches);
  for (auto& [key, pts] : cells) {
    const Point3 lo(std::get<0>(key) * params.voxel_size,
                    std::get<1>(key) * params.voxel_size,
                    std::get<2>(key) * params.voxel_size);
    const Point3 hi = lo + Point3::Constant(params.voxel_size);
    segmenter.visit(std::move(pts), Eigen::AlignedBox3d(lo, hi), 0);
  }
  return patches;
}

std::vector<PlanarPatch> segment_planes(const Submap& submap, double voxel_size,
                                        double sigma_lambda) {
  PlaneSegParams params;
  params.voxel_size = voxel_size;
  params.sigma_lambda = sigma_lambda;
  return segment_planes(submap, params);
}

bool cells_adjacent(const Eigen::AlignedBox3d& a, const Eigen::AlignedBox3d& b) {
  constexpr double eps = 1e-9;
  int overlapping = 0;
  for (int axis = 0; axis < 3; ++axis) {
    const double overlap = std::min(a.max()[axis], b.max()[axis]) -
                           std::max(a.min()[axis], b.min()[axis]);
    if (overlap < -eps) return false;
    if (overlap > eps) ++overlapping;
  }
  return overlapping >= 1;
}

std::vector<PlanarPatch> merge_patches(std::vector<PlanarPatch> patches,
                                       double normal_tol_deg, double dist_tol_m,
                                       double sigma_lambda) {
  if (!(normal_tol_deg > 0.0) || !(dist_tol_m > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "merge tolerances must be positive");
  }
  const std::size_t n = patches.size();
  if (n == 0) return patches;

  std::vector<Eigen::AlignedBox3d> bounds(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& c : patches[i].cells) bounds[i].extend(c);
  }
  const double cos_tol = std::cos(deg2rad(normal_tol_deg));

  auto mergeable = [&](std::size_t i, std::size_t j) {
    const PlanarPatch& a = patches[i];
    const PlanarPatch& b = patches[j];
    if (std::abs(a.normal.dot(b.normal)) < cos_tol) return false;
    if (std::abs(a.normal.dot(b.centroid - a.centroid)) > dist_tol_m) return false;
    if (std::abs(b.normal.dot(a.centroid - b.centroid)) > dist_tol_m) return false;
    for (const auto& ca : a.cells) {
      for (const auto& cb : b.cells) {
        if (cells_adjacent(ca, cb)) return true;
      }
    }
    return false;
  };

  // Sweep along x so only patches with overlapping x-extent are compared.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return bounds[a].min().x() < bounds[b].min().x();
  });
  DisjointSets sets(n);
  for (std::size_t oi = 0; oi < n; ++oi) {
    const std::size_t i = order[oi];
    for (std::size_t oj = oi + 1; oj < n; ++oj) {
      const std::size_t j = order[oj];
      if (bounds[j].min().x() > bounds[i].max().x() + 1e-9) break;
      if (sets.find(i) == sets.find(j)) continue;
      if (mergeable(i, j)) sets.unite(i, j);
    }
  }

  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[sets.find(i)].push_back(i);

  std::vector<PlanarPatch> out;
  out.reserve(groups.size());
  for (auto& [root, members] : groups) {
    if (members.size() == 1) {
      out.push_back(std::move(patches[members.front()]));
      continue;
    }
    PlanarPatch merged;
    for (std::size_t m : members) {
      merged.points.insert(merged.points.end(), patches[m].points.begin(),
                           patches[m].points.end());
      merged.cells.insert(merged.cells.end(), patches[m].cells.begin(),
                          patches[m].cells.end());
    }
    fit_plane(merged.points, merged.centroid, merged.normal, merged.eigvals);
    if (merged.planarity() > sigma_lambda) {
      out.push_back(std::move(merged));
    } else {
      for (std::size_t m : members) out.push_back(std::move(patches[m]));
    }
  }
  return out;
}

SegmentationResult classify_patches(std::vector<PlanarPatch> patches,
                                    const Vec3& gravity, double angle_tol_deg) {
  if (std::abs(gravity.norm() - 1.0) > 1e-6) {
    throw Error(ErrorCode::kInvalidArgument, "gravity must be a unit vector");
  }
  const double tol = deg2rad(angle_tol_deg);
  SegmentationResult result;
  for (PlanarPatch& p : patches) {
    const double c = std::clamp(std::abs(p.normal.dot(gravity)), 0.0, 1.0);
    const double angle = std::acos(c);
    if (angle <= tol) {
      result.ground.push_back(std::move(p));
    } else if (angle >= kPi / 2.0 - tol) {
      result.walls.push_back(std::move(p));
    } else {
      result.unassigned += p.points.size();
    }
  }
  return result;
}

}  // namespace bimreg
