#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "patchqc/core/geometry.hpp"
#include "patchqc/error.hpp"

namespace patchqc {

/// Plane n.p = d with unit normal oriented upward (n.z >= 0).
/// `rpf` is the standard deviation of the signed point-to-plane distances of
/// the points the plane was fitted from.
template <typename Scalar>
struct Plane {
  Vector3<Scalar> normal = Vector3<Scalar>::UnitZ();
  Scalar d = 0;
  Scalar rpf = 0;
  std::size_t support = 0;

  template <typename Derived>
  Scalar signed_distance(const Eigen::MatrixBase<Derived>& p) const {
    return normal.dot(p.template cast<Scalar>()) - d;
  }

  /// Height of the plane above the footprint (x, y). Undefined for vertical
  /// planes; callers check `normal.z()` first.
  Scalar height_at(Scalar x, Scalar y) const {
    return (d - normal.x() * x - normal.y() * y) / normal.z();
  }

  /// Angle between the normal and the vertical axis, in degrees.
  Scalar slope_degrees() const {
    using std::acos;
    using std::abs;
    using std::min;
    return static_cast<Scalar>(rad2deg(acos(min(Scalar(1), abs(normal.z())))));
  }
};

using Planed = Plane<double>;

template <typename Scalar>
struct EigenFeatures {
  Scalar lambda1 = 0;  // largest
  Scalar lambda2 = 0;
  Scalar lambda3 = 0;  // smallest
  Scalar linearity = 0;
};

namespace detail {

template <typename Scalar>
struct CentredMoments {
  Vector3<Scalar> centroid = Vector3<Scalar>::Zero();
  Eigen::Matrix<Scalar, 3, 3> covariance = Eigen::Matrix<Scalar, 3, 3>::Zero();
  std::size_t count = 0;
};

// Two-pass centroid/covariance; the covariance is normalized by n.
template <typename Scalar, typename PointAt>
CentredMoments<Scalar> centred_moments(std::size_t n, PointAt&& point_at) {
  CentredMoments<Scalar> m;
  m.count = n;
  if (n == 0) return m;
  for (std::size_t i = 0; i < n; ++i) m.centroid += point_at(i).template cast<Scalar>();
  m.centroid /= static_cast<Scalar>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vector3<Scalar> q = point_at(i).template cast<Scalar>() - m.centroid;
    m.covariance.noalias() += q * q.transpose();
  }
  m.covariance /= static_cast<Scalar>(n);
  return m;
}

template <typename Scalar>
Scalar rank_tolerance() {
  return Scalar(1000) * std::numeric_limits<Scalar>::epsilon();
}

// Smallest-eigenvalue direction of `covariance`, oriented upward. Throws on
// rank-deficient covariance (coincident or collinear points).
template <typename Scalar>
Vector3<Scalar> normal_from_covariance(const Eigen::Matrix<Scalar, 3, 3>& covariance) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<Scalar, 3, 3>> solver(covariance);
  const auto& ev = solver.eigenvalues();  // ascending
  if (!(ev(2) > std::numeric_limits<Scalar>::min()) || ev(1) <= rank_tolerance<Scalar>() * ev(2)) {
    throw Error(ErrorKind::DegenerateGeometry, "plane fit: points are coincident or collinear");
  }
  Vector3<Scalar> n = solver.eigenvectors().col(0).normalized();
  if (n.z() < 0) n = -n;
  return n;
}

template <typename Scalar, typename PointAt>
Plane<Scalar> fit_plane_impl(std::size_t n, PointAt&& point_at) {
  if (n < 3) throw Error(ErrorKind::DegenerateGeometry, "plane fit needs at least 3 points");
  const auto m = centred_moments<Scalar>(n, point_at);
  Plane<Scalar> plane;
  plane.normal = normal_from_covariance<Scalar>(m.covariance);
  plane.d = plane.normal.dot(m.centroid);
  plane.support = n;

  Scalar sum = 0;
  Scalar sum_sq = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Scalar dist = plane.normal.dot(point_at(i).template cast<Scalar>() - m.centroid);
    sum += dist;
    sum_sq += dist * dist;
  }
  const Scalar mean = sum / static_cast<Scalar>(n);
  const Scalar var = (sum_sq - static_cast<Scalar>(n) * mean * mean) / static_cast<Scalar>(n - 1);
  using std::sqrt;
  plane.rpf = var > 0 ? sqrt(var) : Scalar(0);
  return plane;
}

}  // namespace detail

/// Total-least-squares plane through `points`.
template <typename Scalar>
Plane<Scalar> fit_plane(std::span<const Vector3<Scalar>> points) {
  return detail::fit_plane_impl<Scalar>(points.size(), [&](std::size_t i) -> const Vector3<Scalar>& { return points[i]; });
}

/// Plane through the subset `indices` of `points`.
template <typename Scalar>
Plane<Scalar> fit_plane(std::span<const Vector3<Scalar>> points, std::span<const std::size_t> indices) {
  return detail::fit_plane_impl<Scalar>(indices.size(),
                                        [&](std::size_t i) -> const Vector3<Scalar>& { return points[indices[i]]; });
}

template <typename Scalar>
EigenFeatures<Scalar> eigen_features(std::span<const Vector3<Scalar>> points) {
  if (points.size() < 3) throw Error(ErrorKind::DegenerateGeometry, "eigen features need at least 3 points");
  const auto m =
      detail::centred_moments<Scalar>(points.size(), [&](std::size_t i) -> const Vector3<Scalar>& { return points[i]; });
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<Scalar, 3, 3>> solver(m.covariance, Eigen::EigenvaluesOnly);
  const auto& ev = solver.eigenvalues();
  EigenFeatures<Scalar> f;
  using std::max;
  f.lambda1 = max(Scalar(0), ev(2));
  f.lambda2 = max(Scalar(0), ev(1));
  f.lambda3 = max(Scalar(0), ev(0));
  f.linearity = f.lambda1 > 0 ? (f.lambda1 - f.lambda2) / f.lambda1 : Scalar(0);
  return f;
}

inline Planed fit_plane(std::span<const Point3> points) { return fit_plane<double>(points); }
inline Planed fit_plane(std::span<const Point3> points, std::span<const std::size_t> indices) {
  return fit_plane<double>(points, indices);
}
inline EigenFeatures<double> eigen_features(std::span<const Point3> points) { return eigen_features<double>(points); }

/// Running plane fit supporting O(1) point insertion. Moments are kept
/// relative to the first inserted point so large map coordinates do not cancel.
template <typename Scalar>
class PlaneAccumulator {
 public:
  template <typename Derived>
  void add(const Eigen::MatrixBase<Derived>& p) {
    const Vector3<Scalar> q = p.template cast<Scalar>();
    if (count_ == 0) origin_ = q;
    const Vector3<Scalar> r = q - origin_;
    sum_ += r;
    sum_outer_.noalias() += r * r.transpose();
    ++count_;
  }

  std::size_t size() const { return count_; }

  /// Fitted plane; `rpf` derives from the smallest covariance eigenvalue.
  Plane<Scalar> fit() const {
    if (count_ < 3) throw Error(ErrorKind::DegenerateGeometry, "plane fit needs at least 3 points");
    const Scalar n = static_cast<Scalar>(count_);
    const Vector3<Scalar> mean = sum_ / n;
    const Eigen::Matrix<Scalar, 3, 3> cov = sum_outer_ / n - mean * mean.transpose();
    Plane<Scalar> plane;
    plane.normal = detail::normal_from_covariance<Scalar>(cov);
    const Vector3<Scalar> centroid = origin_ + mean;
    plane.d = plane.normal.dot(centroid);
    const Scalar along = plane.normal.dot(cov * plane.normal);
    using std::sqrt;
    plane.rpf = along > 0 ? sqrt(along * n / (n - 1)) : Scalar(0);
    plane.support = count_;
    return plane;
  }

 private:
  Vector3<Scalar> origin_ = Vector3<Scalar>::Zero();
  Vector3<Scalar> sum_ = Vector3<Scalar>::Zero();
  Eigen::Matrix<Scalar, 3, 3> sum_outer_ = Eigen::Matrix<Scalar, 3, 3>::Zero();
  std::size_t count_ = 0;
};

}  // namespace patchqc
