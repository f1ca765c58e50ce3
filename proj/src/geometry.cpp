#include "bimreg/geometry.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "bimreg/error.hpp"

namespace bimreg {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDegenerateInput: return "DegenerateInput";
    case ErrorCode::kInsufficientTravel: return "InsufficientTravel";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kEmptyModel: return "EmptyModel";
    case ErrorCode::kEmptyScene: return "EmptyScene";
    case ErrorCode::kDegenerateTriplet: return "DegenerateTriplet";
    case ErrorCode::kResolutionMismatch: return "ResolutionMismatch";
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
    case ErrorCode::kEmptyGrid: return "EmptyGrid";
    case ErrorCode::kEmptySubmap: return "EmptySubmap";
    case ErrorCode::kNoCandidates: return "NoCandidates";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

double wrap_angle(double rad) {
  if (rad >= -kPi && rad < kPi) return rad;
  double w = std::fmod(rad + kPi, 2.0 * kPi);
  if (w < 0.0) w += 2.0 * kPi;
  w -= kPi;
  // fmod can land exactly on +pi after the shift for inputs like -pi - eps.
  if (w >= kPi) w -= 2.0 * kPi;
  return w;
}

Eigen::Matrix2d Se2Pose::rotation() const {
  const double c = std::cos(yaw), s = std::sin(yaw);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

Eigen::Matrix3d Se2Pose::matrix() const {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m.topLeftCorner<2, 2>() = rotation();
  m(0, 2) = x;
  m(1, 2) = y;
  return m;
}

Point2 Se2Pose::operator*(const Point2& p) const {
  const double c = std::cos(yaw), s = std::sin(yaw);
  return {c * p.x() - s * p.y() + x, s * p.x() + c * p.y() + y};
}

Se2Pose Se2Pose::operator*(const Se2Pose& other) const {
  const Point2 t = (*this) * other.translation();
  return {t.x(), t.y(), yaw + other.yaw};
}

Se2Pose Se2Pose::inverse() const {
  const Vec2 t = -(rotation().transpose() * translation());
  return {t.x(), t.y(), -yaw};
}

Point2 se2_apply(const Se2Pose& pose, const Point2& p) { return pose * p; }

LineSegment2::LineSegment2(const Point2& p0, const Point2& p1)
    : p0_(p0), p1_(p1) {
  const Vec2 d = p1 - p0;
  length_ = d.norm();
  if (!(length_ > 0.0) || !std::isfinite(length_)) {
    throw Error(ErrorCode::kDegenerateInput, "zero-length line segment");
  }
  direction_ = d / length_;
}

LineSegment2 LineSegment2::transformed(const Se2Pose& pose) const {
  return {pose * p0_, pose * p1_};
}

LineSegment2 LineSegment2::extended(double d) const {
  return {p0_ - d * direction_, p1_ + d * direction_};
}

double LineSegment2::distance_to(const Point2& p) const {
  const double t = std::clamp((p - p0_).dot(direction_), 0.0, length_);
  return (p - (p0_ + t * direction_)).norm();
}

double LineSegment2::line_distance_to(const Point2& p) const {
  const Vec2 d = p - p0_;
  return std::abs(direction_.x() * d.y() - direction_.y() * d.x());
}

double acute_angle(const Vec2& a, const Vec2& b) {
  return std::atan2(std::abs(a.x() * b.y() - a.y() * b.x()), std::abs(a.dot(b)));
}

Se2Fit solve_se2(std::span<const Point2> src, std::span<const Point2> dst) {
  if (src.size() != dst.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "solve_se2: source and destination sizes differ");
  }
  if (src.size() < 2) {
    throw Error(ErrorCode::kDegenerateInput,
                "solve_se2: need at least two point pairs");
  }
  const double n = static_cast<double>(src.size());
  Point2 src_mean = Point2::Zero(), dst_mean = Point2::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    src_mean += src[i];
    dst_mean += dst[i];
  }
  src_mean /= n;
  dst_mean /= n;

  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  double spread = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Vec2 a = src[i] - src_mean;
    const Vec2 b = dst[i] - dst_mean;
    cov += a * b.transpose();
    spread = std::max(spread, a.norm());
  }
  if (spread <= 1e-9) {
    throw Error(ErrorCode::kDegenerateInput,
                "solve_se2: all source points coincide");
  }

  Eigen::JacobiSVD<Eigen::Matrix2d> svd(cov,
                                        Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix2d& u = svd.matrixU();
  const Eigen::Matrix2d& v = svd.matrixV();
  Eigen::Matrix2d fix = Eigen::Matrix2d::Identity();
  if ((v * u.transpose()).determinant() < 0.0) fix(1, 1) = -1.0;
  const Eigen::Matrix2d r = v * fix * u.transpose();
  const Vec2 t = dst_mean - r * src_mean;

  Se2Fit fit;
  fit.pose = Se2Pose(t.x(), t.y(), std::atan2(r(1, 0), r(0, 0)));
  double sq = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    sq += (r * src[i] + t - dst[i]).squaredNorm();
  }
  fit.rms_residual = std::sqrt(sq / n);
  return fit;
}

namespace {

Eigen::Matrix3d lift_rotation(const Se2Pose& p) {
  Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
  r.topLeftCorner<2, 2>() = p.rotation();
  return r;
}

}  // namespace

double rotation_error(const Se2Pose& est, const Se2Pose& gt) {
  const Eigen::Matrix3d rel = lift_rotation(est).transpose() * lift_rotation(gt);
  const double c = std::clamp((rel.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

double translation_error(const Se2Pose& est, const Se2Pose& gt) {
  const Eigen::Vector3d dt(gt.x - est.x, gt.y - est.y, 0.0);
  return (lift_rotation(est).transpose() * dt).norm();
}

bool registration_success(const Se2Pose& est, const Se2Pose& gt,
                          double rot_tol_deg, double trans_tol_m) {
  return rotation_error(est, gt) < deg2rad(rot_tol_deg) &&
         translation_error(est, gt) < trans_tol_m;
}

}  // namespace bimreg
