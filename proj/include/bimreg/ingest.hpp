#pragma once

#include <Eigen/Geometry>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bimreg/geometry.hpp"

namespace bimreg {

struct TimedScan {
  double timestamp = 0.0;
  std::vector<Point3> points;  // sensor frame
};

/// Sequential scans with their odometry poses (body -> world).
struct ScanSequence {
  std::vector<TimedScan> scans;
  std::vector<Eigen::Isometry3d> poses;
  Vec3 gravity{0.0, 0.0, -1.0};

  /// Throws InvalidArgument when the sequence violates its invariants.
  void validate() const;
};

struct Submap {
  std::vector<Point3> points;  // world frame
  Vec3 gravity{0.0, 0.0, -1.0};
  double source_span_m = 0.0;
};

/// Centroid-per-voxel downsampling. Output order follows voxel index order so
/// results do not depend on input order.
std::vector<Point3> voxel_downsample(std::span<const Point3> points,
                                     double voxel_size);

/// Accumulates the shortest scan prefix whose odometry path exceeds
/// `min_travel_m`, then voxel-downsamples it.
Submap accumulate_submap(const ScanSequence& seq, double voxel_size,
                         double min_travel_m);

/// Binary point cloud: "L2B1", u32 count, 3 x f32 gravity, count x 3 x f32.
void save_submap(const Submap& submap, const std::filesystem::path& path);
Submap load_submap(const std::filesystem::path& path);

struct WallModel {
  std::string floor_id = "0";
  std::vector<LineSegment2> walls;
  std::vector<Corner> corners;
};

/// Text wall models: one "x1 y1 x2 y2" row per wall, '#' comments and
/// optional "floor <id>" section headers.
std::vector<WallModel> parse_building(std::istream& in);
std::vector<WallModel> load_building(const std::filesystem::path& path);
void write_building(std::ostream& out, std::span<const WallModel> floors);
void save_building(std::span<const WallModel> floors,
                   const std::filesystem::path& path);

/// Loads one floor (the first one when `floor_id` is empty).
WallModel load_wall_model(const std::filesystem::path& path,
                          const std::string& floor_id = {});
void save_wall_model(const WallModel& model, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Synthetic floorplans and scenes.

struct Rect {
  Point2 min = Point2::Zero();
  Point2 max = Point2::Zero();
  bool contains(const Point2& p) const {
    return p.x() >= min.x() && p.x() <= max.x() && p.y() >= min.y() &&
           p.y() <= max.y();
  }
};

struct FloorplanLayout {
  WallModel model;
  std::vector<Rect> rooms;
  std::optional<Rect> corridor;
};

/// Seeded axis-aligned floorplan: rooms with sides in [3, min(10, extent_m)]
/// lined up along an optional central corridor, one door per room.
FloorplanLayout generate_floorplan_layout(std::uint64_t seed, int n_rooms,
                                          bool corridor, double extent_m);
WallModel generate_floorplan(std::uint64_t seed, int n_rooms, bool corridor,
                             double extent_m);

/// Random pose inside a room or the corridor, at least `clearance_m` from the
/// enclosing rectangle's sides.
Se2Pose sample_free_pose(const FloorplanLayout& layout, std::uint64_t seed,
                         double clearance_m = 1.5);

/// Rejection-sampled pose inside the building: at least `clearance_m` from
/// every wall and enclosed by walls in all four axis directions.
Se2Pose sample_pose_in_model(const WallModel& model, std::uint64_t seed,
                             double clearance_m = 1.0);

struct SynthesisOptions {
  double radius_m = 10.0;
  double noise_sigma_m = 0.0;
  double drop_wall_frac = 0.0;
  double clutter_frac = 0.0;
  double bias_wall_frac = 0.0;
  double bias_m = 0.2;
  double density_per_m2 = 100.0;
  double wall_height_m = 2.5;
  /// Floor points closer than this to any model wall are not sampled.
  double ground_clearance_m = 1.2;
  double source_span_m = 15.0;
  std::uint64_t seed = 0;
};

struct DeviationLog {
  std::vector<std::size_t> visible_walls;
  std::vector<std::size_t> dropped_walls;
  std::vector<std::size_t> biased_walls;
  std::vector<LineSegment2> clutter;  // model frame footprints
  std::size_t wall_points = 0;
  std::size_t ground_points = 0;
  std::size_t clutter_points = 0;
};

void write_deviation_log(std::ostream& out, const DeviationLog& log);

struct SyntheticScene {
  WallModel wall_model;
  Se2Pose gt_pose;  // submap frame -> model frame
  Submap submap;
  DeviationLog deviation_log;
};

/// Samples a submap around the sensor placed at `pose` in the model frame.
/// Throws EmptyScene if no constructed wall lies within the radius.
SyntheticScene synthesize_submap(const WallModel& model, const Se2Pose& pose,
                                 const SynthesisOptions& options);

SyntheticScene synthesize_submap(const WallModel& model, const Se2Pose& pose,
                                 double radius_m, double noise_sigma_m,
                                 double drop_wall_frac, double clutter_frac,
                                 std::uint64_t seed);

/// "x y yaw_rad" on one line.
void save_pose(const Se2Pose& pose, const std::filesystem::path& path);
Se2Pose load_pose(const std::filesystem::path& path);

}  // namespace bimreg
