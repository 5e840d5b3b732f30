#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "patchqc/core/geometry.hpp"

namespace patchqc::ground {

/// Incremental 2D Delaunay triangulation (Bowyer-Watson) of 3D vertices,
/// built inside a large enclosing triangle whose vertices are 0, 1 and 2.
class Tin {
 public:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  explicit Tin(const Box2& extent);

  /// Inserts `p`; returns the existing vertex when `p` coincides with one
  /// horizontally. `p` must lie inside the extent given at construction.
  std::size_t insert(const Point3& p);

  /// Live triangle containing (x, y). `hint` may be any triangle id.
  std::size_t locate(double x, double y, std::size_t hint = kNone) const;

  const std::array<std::size_t, 3>& triangle(std::size_t t) const { return tris_[t].v; }
  const Point3& vertex(std::size_t v) const { return verts_[v]; }
  std::size_t vertex_count() const { return verts_.size(); }
  std::size_t triangle_capacity() const { return tris_.size(); }
  bool alive(std::size_t t) const { return tris_[t].alive; }
  bool touches_enclosure(std::size_t t) const;
  std::size_t live_triangle_count() const;

  /// Checks the empty-circumcircle property over all live triangles.
  bool is_delaunay() const;

 private:
  struct Tri {
    std::array<std::size_t, 3> v{};
    std::array<std::size_t, 3> n{kNone, kNone, kNone};  // n[i] is across the edge opposite v[i]
    bool alive = true;
  };

  double orient(std::size_t a, std::size_t b, double x, double y) const;
  bool in_circumcircle(const Tri& t, double x, double y) const;

  std::vector<Point3> verts_;
  std::vector<Tri> tris_;
  mutable std::size_t last_ = 0;
};

}  // namespace patchqc::ground
