#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "bimreg/geometry.hpp"
#include "bimreg/plane_seg.hpp"

namespace bimreg {

/// Bird's-eye occupancy raster. Pixel (u, v) covers
/// [origin + (u, v) / scale, origin + (u + 1, v + 1) / scale).
struct BevRaster {
  int width = 0;
  int height = 0;
  Point2 origin = Point2::Zero();
  double scale = 1.0;  // pixels per meter
  std::vector<std::uint8_t> grid;

  bool empty() const { return width == 0 || height == 0; }
  bool in_bounds(int u, int v) const { return u >= 0 && v >= 0 && u < width && v < height; }
  bool at(int u, int v) const { return in_bounds(u, v) && grid[v * width + u] != 0; }
  void set(int u, int v) {
    if (in_bounds(u, v)) grid[v * width + u] = 1;
  }
  std::pair<int, int> pixel_of(const Point2& p) const;
  /// Metric position of a point given in continuous pixel coordinates.
  Point2 to_metric(double u, double v) const;
  std::size_t occupied() const;
};

/// Allocates an empty raster spanning `lo`..`hi` anchored at `lo`.
BevRaster make_raster(const Point2& lo, const Point2& hi, double scale);

BevRaster rasterize_points(std::span<const Point2> points, double scale);
/// Drops z from every patch point.
BevRaster rasterize_walls(std::span<const PlanarPatch> walls, double scale);
/// Bresenham-draws each segment.
BevRaster rasterize_walls(std::span<const LineSegment2> walls, double scale);

struct HoughParams {
  double rho_px = 1.0;
  double theta_deg = 1.0;
  int gap_px = 5;
  /// Half-width of the pixel band collected around a detected line.
  double band_px = 2.5;
  double max_band_px = 8.0;
};

/// Accumulator Hough transform with peak tracing. Each accepted peak is
/// refined by a total-least-squares fit, traced into runs of occupied pixels
/// (splitting at gaps wider than gap_px) and runs of at least
/// `min_length_px` are emitted in meters and erased from the accumulator.
std::vector<LineSegment2> detect_segments(const BevRaster& raster, int min_length_px,
                                          const HoughParams& params = {});

/// Merges chains of nearly collinear segments whose extents lie within
/// `endpoint_tol_m` of each other, refitting each chain to the occupied
/// pixels of `support` around it.
std::vector<LineSegment2> merge_refit(std::span<const LineSegment2> segments,
                                      double endpoint_tol_m, double angle_tol_deg,
                                      const BevRaster& support);

struct CornerParams {
  double extend_m = 1.0;
  double nms_radius_m = 0.5;
  /// Segment pairs closer to parallel than this do not form corners.
  double min_angle_deg = 15.0;
};

std::vector<Corner> extract_corners(std::span<const LineSegment2> segments,
                                    const CornerParams& params);
std::vector<Corner> extract_corners(std::span<const LineSegment2> segments,
                                    double extend_m, double nms_radius_m);

std::vector<Corner> model_corners(const WallModel& model, const CornerParams& params);
std::vector<Corner> model_corners(const WallModel& model, double extend_m,
                                  double nms_radius_m);

/// Debug dumps: binary PGM (occupied = 255) and corners as wall rows.
void write_pgm(const BevRaster& raster, const std::filesystem::path& path);
void write_corners(std::ostream& out, std::span<const Corner> corners);

}  // namespace bimreg
