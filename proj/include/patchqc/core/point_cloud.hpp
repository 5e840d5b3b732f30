#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "patchqc/core/geometry.hpp"

namespace patchqc {

enum class PointClass : std::uint8_t { NonGround = 1, Ground = 2 };

inline constexpr std::int32_t kNoSegment = -1;

/// Point cloud with optional per-point ground class and segment labels.
/// Immutable after construction; the `with_*` members return relabelled copies.
class PointCloud {
 public:
  PointCloud() = default;
  explicit PointCloud(std::vector<Point3> points, std::optional<std::vector<PointClass>> classes = std::nullopt,
                      std::optional<std::vector<std::int32_t>> segments = std::nullopt);

  std::span<const Point3> points() const { return points_; }
  const Point3& operator[](std::size_t i) const { return points_[i]; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Bounds3& bounds() const { return bounds_; }

  bool has_classes() const { return classes_.has_value(); }
  bool has_segments() const { return segments_.has_value(); }
  std::span<const PointClass> classes() const;
  std::span<const std::int32_t> segments() const;

  /// Coordinate reference label from the file header; empty when undeclared.
  const std::string& crs() const { return crs_; }

  PointCloud with_classes(std::vector<PointClass> classes) const;
  PointCloud with_segments(std::vector<std::int32_t> segments) const;
  PointCloud with_crs(std::string crs) const;
  PointCloud translated(const Point3& offset) const;

  std::vector<std::size_t> indices_of(PointClass c) const;

 private:
  std::vector<Point3> points_;
  std::optional<std::vector<PointClass>> classes_;
  std::optional<std::vector<std::int32_t>> segments_;
  Bounds3 bounds_;
  std::string crs_;
};

}  // namespace patchqc
