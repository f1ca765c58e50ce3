#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "bimreg/geometry.hpp"

namespace testing {

using bimreg::Point2;
using bimreg::Se2Pose;

/// Small seeded generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double normal(double sigma) { return std::normal_distribution<double>(0.0, sigma)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  Point2 point(double extent) { return {uniform(-extent, extent), uniform(-extent, extent)}; }
  Se2Pose pose(double extent = 50.0) {
    return {uniform(-extent, extent), uniform(-extent, extent), uniform(-bimreg::kPi, bimreg::kPi)};
  }
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

/// Hand-written homogeneous transform, independent of Se2Pose::matrix.
inline Point2 apply_by_matrix(const Se2Pose& p, const Point2& q) {
  const double c = std::cos(p.yaw), s = std::sin(p.yaw);
  const double m[3][3] = {{c, -s, p.x}, {s, c, p.y}, {0, 0, 1}};
  const double v[3] = {q.x(), q.y(), 1.0};
  double r[3] = {0, 0, 0};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r[i] += m[i][j] * v[j];
  }
  return {r[0], r[1]};
}

inline double angle_diff(double a, double b) {
  return std::abs(std::remainder(a - b, 2.0 * bimreg::kPi));
}

}  // namespace testing
