#pragma once

#include <Eigen/Geometry>
#include <span>
#include <vector>

#include "bimreg/geometry.hpp"
#include "bimreg/ingest.hpp"

namespace bimreg {

struct PlanarPatch {
  std::vector<Point3> points;
  Vec3 normal = Vec3::UnitZ();
  Point3 centroid = Point3::Zero();
  Vec3 eigvals = Vec3::Zero();  // descending: l1 >= l2 >= l3
  /// Octree cells the patch was grown from; used for adjacency.
  std::vector<Eigen::AlignedBox3d> cells;

  /// l2 / max(l3, 1e-12).
  double planarity() const;
};

/// Fits centroid, normal and eigenvalues of the points' covariance.
/// Returns false when there are fewer than three points.
bool fit_plane(std::span<const Point3> points, Point3& centroid, Vec3& normal,
               Vec3& eigvals);

struct PlaneSegParams {
  double voxel_size = 2.0;
  double sigma_lambda = 10.0;
  int max_depth = 6;
  double max_rms_m = 0.1;  // thicker cells are split even when flat enough
};

/// Octree plane detection: a cell whose covariance has l2/l3 > sigma_lambda
/// and an rms distance to its plane below max_rms_m becomes a patch, otherwise it is split into eight children; cells with
/// fewer than four points are dropped.
std::vector<PlanarPatch> segment_planes(const Submap& submap,
                                        const PlaneSegParams& params);
std::vector<PlanarPatch> segment_planes(const Submap& submap, double voxel_size,
                                        double sigma_lambda);

/// True when the boxes share a face or an edge (corner contact excluded).
bool cells_adjacent(const Eigen::AlignedBox3d& a, const Eigen::AlignedBox3d& b);

/// Union-find merge of adjacent, near-coplanar patches. A merged group whose
/// refit fails `sigma_lambda` is left unmerged.
std::vector<PlanarPatch> merge_patches(std::vector<PlanarPatch> patches,
                                       double normal_tol_deg, double dist_tol_m,
                                       double sigma_lambda = 10.0);

struct SegmentationResult {
  std::vector<PlanarPatch> walls;
  std::vector<PlanarPatch> ground;
  std::size_t unassigned = 0;  // points in patches that are neither
};

SegmentationResult classify_patches(std::vector<PlanarPatch> patches,
                                    const Vec3& gravity, double angle_tol_deg);

}  // namespace bimreg
