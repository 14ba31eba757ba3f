#pragma once

// Closed forms used as independent references by the tests.

#include <cmath>
#include <numbers>

#include "bubbleforge/geometry.hpp"

namespace oracle {

using bubbleforge::Point;

inline constexpr double pi = std::numbers::pi;
/// First zero of the Bessel function J0.
inline constexpr double j01 = 2.404825557695773;

inline double sinsin(Point p) { return std::sin(pi * p.x) * std::sin(pi * p.y); }

/// J0(j01 r) on the unit disk, the principal Dirichlet eigenfunction.
inline double disk_mode(Point p) { return std::cyl_bessel_j(0.0, j01 * std::hypot(p.x, p.y)); }

inline Point image(Point xi) {
  const double r2 = xi.x * xi.x + xi.y * xi.y;
  return {xi.x / r2, xi.y / r2};
}

/// Regular part on the unit disk: 4 log(|x - xi*| |xi|), 0 for xi = 0.
inline double disk_regular(Point x, Point xi) {
  const double r = std::hypot(xi.x, xi.y);
  if (r == 0.0) return 0.0;
  const Point s = image(xi);
  return 4.0 * std::log(std::hypot(x.x - s.x, x.y - s.y) * r);
}

/// Green's function on the unit disk (8 pi normalisation).
inline double disk_green(Point x, Point xi) {
  return disk_regular(x, xi) - 4.0 * std::log(std::hypot(x.x - xi.x, x.y - xi.y));
}

inline double disk_robin(Point xi) { return 4.0 * std::log(1.0 - (xi.x * xi.x + xi.y * xi.y)); }

/// Planar kernel functions of the linearised Liouville operator.
inline double z0(Point z) {
  const double r2 = z.x * z.x + z.y * z.y;
  return (r2 - 1.0) / (r2 + 1.0);
}
inline double z1(Point z) { return 4.0 * z.x / (1.0 + z.x * z.x + z.y * z.y); }
inline double z2(Point z) { return 4.0 * z.y / (1.0 + z.x * z.x + z.y * z.y); }

}  // namespace oracle
