#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "patchqc/core/geometry.hpp"

namespace patchqc {

/// Uniform bucket grid over the horizontal footprint of a point set.
/// The indexed points must outlive the index. All queries return point
/// indices in ascending order (knn: ascending distance, ties by index).
class SpatialIndex {
 public:
  SpatialIndex() = default;
  explicit SpatialIndex(std::span<const Point3> points, double bucket_size = 0.0);

  std::size_t size() const { return points_.size(); }
  std::span<const Point3> points() const { return points_; }

  std::vector<std::size_t> box_query(const Box2& box) const;
  std::vector<std::size_t> radius_query(const Point3& center, double radius) const;
  std::vector<std::size_t> radius_query_2d(double x, double y, double radius) const;
  std::vector<std::size_t> knn(const Point3& center, std::size_t k) const;

 private:
  template <typename Visit>
  void visit_cells(double xmin, double ymin, double xmax, double ymax, Visit&& visit) const;

  std::span<const Point3> points_;
  double origin_x_ = 0.0;
  double origin_y_ = 0.0;
  double bucket_ = 1.0;
  std::size_t cols_ = 0;
  std::size_t rows_ = 0;
  std::vector<std::size_t> cell_start_;  // CSR offsets, size cols*rows+1
  std::vector<std::size_t> cell_items_;
};

}  // namespace patchqc
