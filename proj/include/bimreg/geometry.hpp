#pragma once

#include <Eigen/Core>
#include <numbers>
#include <span>
#include <vector>

namespace bimreg {

using Point2 = Eigen::Vector2d;
using Point3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

inline constexpr double kPi = std::numbers::pi;

inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Wraps an angle into [-pi, pi).
double wrap_angle(double rad);

/// Planar rigid transform. Maps a point p to R(yaw) * p + t.
struct Se2Pose {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;  // always in [-pi, pi)

  Se2Pose() = default;
  Se2Pose(double x_, double y_, double yaw_)
      : x(x_), y(y_), yaw(wrap_angle(yaw_)) {}

  static Se2Pose identity() { return {}; }

  Eigen::Matrix2d rotation() const;
  Vec2 translation() const { return {x, y}; }
  Eigen::Matrix3d matrix() const;

  Point2 operator*(const Point2& p) const;
  Se2Pose operator*(const Se2Pose& other) const;
  Se2Pose inverse() const;
};

Point2 se2_apply(const Se2Pose& pose, const Point2& p);

class LineSegment2 {
 public:
  LineSegment2() = default;
  /// Throws DegenerateInput for zero-length segments.
  LineSegment2(const Point2& p0, const Point2& p1);

  const Point2& p0() const { return p0_; }
  const Point2& p1() const { return p1_; }
  const Vec2& direction() const { return direction_; }
  double length() const { return length_; }
  Point2 midpoint() const { return 0.5 * (p0_ + p1_); }

  LineSegment2 transformed(const Se2Pose& pose) const;
  /// Lengthens the segment by `d` at both ends.
  LineSegment2 extended(double d) const;
  double distance_to(const Point2& p) const;
  /// Distance from p to the infinite supporting line.
  double line_distance_to(const Point2& p) const;

  friend bool operator==(const LineSegment2& a, const LineSegment2& b) {
    return a.p0_ == b.p0_ && a.p1_ == b.p1_;
  }

 private:
  Point2 p0_ = Point2::Zero();
  Point2 p1_ = Point2::UnitX();
  Vec2 direction_ = Vec2::UnitX();
  double length_ = 1.0;
};

/// Wall corner: the (extended) intersection of two wall segments.
struct Corner {
  Point2 position = Point2::Zero();
  LineSegment2 wall_a;
  LineSegment2 wall_b;

  Corner transformed(const Se2Pose& pose) const {
    return {pose * position, wall_a.transformed(pose), wall_b.transformed(pose)};
  }
  /// Summed length of the two generating segments.
  double support() const { return wall_a.length() + wall_b.length(); }
};

/// Acute angle in [0, pi/2] between two undirected directions.
double acute_angle(const Vec2& a, const Vec2& b);

struct Se2Fit {
  Se2Pose pose;
  double rms_residual = 0.0;
};

/// Closed-form least-squares rigid alignment of `src` onto `dst` (proper
/// rotations only). Throws DegenerateInput when the source points coincide.
Se2Fit solve_se2(std::span<const Point2> src, std::span<const Point2> dst);

/// Rotation error (radians) between two poses lifted to 3D with zero
/// roll/pitch/z: arccos((tr(R_est^T R_gt) - 1) / 2).
double rotation_error(const Se2Pose& est, const Se2Pose& gt);
/// Body-frame translation error ||R_est^T (t_gt - t_est)||.
double translation_error(const Se2Pose& est, const Se2Pose& gt);

bool registration_success(const Se2Pose& est, const Se2Pose& gt,
                          double rot_tol_deg, double trans_tol_m);

}  // namespace bimreg
