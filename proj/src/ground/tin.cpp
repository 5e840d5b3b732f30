#include "patchqc/ground/tin.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "patchqc/error.hpp"

namespace patchqc::ground {

Tin::Tin(const Box2& extent) {
  const double cx = extent.center_x();
  const double cy = extent.center_y();
  const double r = 20.0 * std::max({extent.width(), extent.height(), 1.0});
  verts_.emplace_back(cx - r, cy - r, 0.0);
  verts_.emplace_back(cx + r, cy - r, 0.0);
  verts_.emplace_back(cx, cy + r, 0.0);
  tris_.push_back(Tri{{0, 1, 2}, {kNone, kNone, kNone}, true});
}

double Tin::orient(std::size_t a, std::size_t b, double x, double y) const {
  const Point3& pa = verts_[a];
  const Point3& pb = verts_[b];
  return (pb.x() - pa.x()) * (y - pa.y()) - (pb.y() - pa.y()) * (x - pa.x());
}

bool Tin::in_circumcircle(const Tri& t, double x, double y) const {
  const double ax = verts_[t.v[0]].x() - x, ay = verts_[t.v[0]].y() - y;
  const double bx = verts_[t.v[1]].x() - x, by = verts_[t.v[1]].y() - y;
  const double cx = verts_[t.v[2]].x() - x, cy = verts_[t.v[2]].y() - y;
  const double det = (ax * ax + ay * ay) * (bx * cy - cx * by) - (bx * bx + by * by) * (ax * cy - cx * ay) +
                     (cx * cx + cy * cy) * (ax * by - bx * ay);
  return det > 0.0;
}

bool Tin::touches_enclosure(std::size_t t) const {
  const auto& v = tris_[t].v;
  return v[0] < 3 || v[1] < 3 || v[2] < 3;
}

std::size_t Tin::live_triangle_count() const {
  return static_cast<std::size_t>(std::count_if(tris_.begin(), tris_.end(), [](const Tri& t) { return t.alive; }));
}

std::size_t Tin::locate(double x, double y, std::size_t hint) const {
  std::size_t t = (hint != kNone && hint < tris_.size() && tris_[hint].alive) ? hint : last_;
  if (!tris_[t].alive) {
    for (t = tris_.size(); t-- > 0;)
      if (tris_[t].alive) break;
  }
  // Visibility walk; terminates on Delaunay triangulations.
  const std::size_t max_steps = 4 * tris_.size() + 16;
  for (std::size_t step = 0; step < max_steps; ++step) {
    const Tri& tri = tris_[t];
    std::size_t next = kNone;
    for (std::size_t k = 0; k < 3; ++k) {
      const std::size_t i = (k + step) % 3;
      if (orient(tri.v[(i + 1) % 3], tri.v[(i + 2) % 3], x, y) < 0.0) {
        next = tri.n[i];
        break;
      }
    }
    if (next == kNone) {
      last_ = t;
      return t;
    }
    t = next;
  }
  // Numerical trouble: fall back to an exhaustive search.
  for (std::size_t s = 0; s < tris_.size(); ++s) {
    const Tri& tri = tris_[s];
    if (!tri.alive) continue;
    if (orient(tri.v[0], tri.v[1], x, y) >= 0 && orient(tri.v[1], tri.v[2], x, y) >= 0 &&
        orient(tri.v[2], tri.v[0], x, y) >= 0) {
      last_ = s;
      return s;
    }
  }
  throw Error(ErrorKind::DegenerateGeometry, "TIN point location failed");
}

std::size_t Tin::insert(const Point3& p) {
  const std::size_t start = locate(p.x(), p.y());
  for (std::size_t v : tris_[start].v) {
    const double dx = verts_[v].x() - p.x();
    const double dy = verts_[v].y() - p.y();
    if (dx * dx + dy * dy <= 1e-18) return v;
  }

  // Cavity of triangles whose circumcircle contains p.
  std::vector<std::size_t> cavity{start};
  std::vector<std::size_t> stack{start};
  tris_[start].alive = false;
  while (!stack.empty()) {
    const std::size_t t = stack.back();
    stack.pop_back();
    for (std::size_t nb : tris_[t].n) {
      if (nb == kNone || !tris_[nb].alive) continue;
      if (in_circumcircle(tris_[nb], p.x(), p.y())) {
        tris_[nb].alive = false;
        cavity.push_back(nb);
        stack.push_back(nb);
      }
    }
  }

  const std::size_t pv = verts_.size();
  verts_.push_back(p);

  struct Boundary {
    std::size_t a, b, outside;
  };
  std::vector<Boundary> boundary;
  for (std::size_t t : cavity) {
    const Tri& tri = tris_[t];
    for (std::size_t i = 0; i < 3; ++i) {
      const std::size_t nb = tri.n[i];
      if (nb != kNone && !tris_[nb].alive && std::find(cavity.begin(), cavity.end(), nb) != cavity.end()) continue;
      boundary.push_back({tri.v[(i + 1) % 3], tri.v[(i + 2) % 3], nb});
    }
  }

  std::unordered_map<std::size_t, std::size_t> by_start, by_end;
  std::vector<std::size_t> created;
  created.reserve(boundary.size());
  for (const auto& e : boundary) {
    const std::size_t id = tris_.size();
    tris_.push_back(Tri{{e.a, e.b, pv}, {kNone, kNone, e.outside}, true});
    if (e.outside != kNone) {
      for (auto& back : tris_[e.outside].n)
        if (back != kNone && !tris_[back].alive &&
            std::find(cavity.begin(), cavity.end(), back) != cavity.end()) {
          // The shared edge of the outside triangle is (b, a).
          const auto& ov = tris_[e.outside].v;
          const std::size_t k = static_cast<std::size_t>(&back - tris_[e.outside].n.data());
          if (ov[(k + 1) % 3] == e.b && ov[(k + 2) % 3] == e.a) back = id;
        }
    }
    by_start[e.a] = id;
    by_end[e.b] = id;
    created.push_back(id);
  }
  for (std::size_t id : created) {
    Tri& tri = tris_[id];
    tri.n[0] = by_start.at(tri.v[1]);  // edge (b, p) is shared with the triangle starting at b
    tri.n[1] = by_end.at(tri.v[0]);    // edge (p, a) is shared with the triangle ending at a
  }
  last_ = created.front();
  return pv;
}

bool Tin::is_delaunay() const {
  for (const Tri& t : tris_) {
    if (!t.alive) continue;
    for (std::size_t i = 0; i < 3; ++i) {
      const std::size_t nb = t.n[i];
      if (nb == kNone) continue;
      const Tri& o = tris_[nb];
      for (std::size_t v : o.v) {
        if (v == t.v[0] || v == t.v[1] || v == t.v[2] || v < 3) continue;
        if (in_circumcircle(t, verts_[v].x(), verts_[v].y())) return false;
      }
    }
  }
  return true;
}

}  // namespace patchqc::ground
