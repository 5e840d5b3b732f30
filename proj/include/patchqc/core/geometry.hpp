#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace patchqc {

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

using Point3 = Eigen::Vector3d;
using Bounds3 = Eigen::AlignedBox3d;

/// Axis-aligned rectangle in the horizontal plane. Containment is half-open,
/// [xmin, xmax) x [ymin, ymax), so a tiling of boxes partitions the plane.
struct Box2 {
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 0.0;
  double ymax = 0.0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (xmin + xmax); }
  double center_y() const { return 0.5 * (ymin + ymax); }

  bool contains(double x, double y) const {
    return x >= xmin && x < xmax && y >= ymin && y < ymax;
  }
  template <typename Derived>
  bool contains(const Eigen::MatrixBase<Derived>& p) const {
    return contains(p.x(), p.y());
  }

  /// True when the two boxes share a region of positive area.
  bool overlaps(const Box2& other) const {
    return std::min(xmax, other.xmax) > std::max(xmin, other.xmin) &&
           std::min(ymax, other.ymax) > std::max(ymin, other.ymin);
  }

  bool operator==(const Box2&) const = default;
};

inline bool all_finite(const Point3& p) {
  return std::isfinite(p.x()) && std::isfinite(p.y()) && std::isfinite(p.z());
}

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

}  // namespace patchqc
