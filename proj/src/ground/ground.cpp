#include "patchqc/ground/ground.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>

#include <fmt/core.h>

#include "patchqc/error.hpp"
#include "patchqc/ground/tin.hpp"

namespace patchqc::ground {

void GroundParams::validate() const {
  if (!(initial_cell > 0.0)) throw Error(ErrorKind::ConfigError, "ground.cell must be > 0");
  if (!(max_angle > 0.0 && max_angle < 90.0)) throw Error(ErrorKind::ConfigError, "ground.max_angle must be in (0, 90)");
  if (!(max_dist > 0.0)) throw Error(ErrorKind::ConfigError, "ground.max_dist must be > 0");
  if (!(snap_dist >= 0.0 && snap_dist <= max_dist))
    throw Error(ErrorKind::ConfigError, "ground.snap_dist must be in [0, max_dist]");
  if (iterations == 0) throw Error(ErrorKind::ConfigError, "ground.iterations must be >= 1");
}

namespace {

// Interleaves the bits of two 16-bit grid coordinates.
std::uint32_t morton(std::uint32_t x, std::uint32_t y) {
  auto spread = [](std::uint32_t v) {
    v &= 0xffff;
    v = (v | (v << 8)) & 0x00ff00ff;
    v = (v | (v << 4)) & 0x0f0f0f0f;
    v = (v | (v << 2)) & 0x33333333;
    v = (v | (v << 1)) & 0x55555555;
    return v;
  };
  return spread(x) | (spread(y) << 1);
}

struct FacetTest {
  double dz = 0.0;         // vertical offset above the facet
  double max_angle = 0.0;  // degrees
};

FacetTest test_against_facet(const Tin& tin, std::size_t t, const Point3& p) {
  const auto& v = tin.triangle(t);
  const Point3& a = tin.vertex(v[0]);
  const Point3& b = tin.vertex(v[1]);
  const Point3& c = tin.vertex(v[2]);
  Point3 n = (b - a).cross(c - a);
  FacetTest out;
  if (std::abs(n.z()) < 1e-15) {
    out.dz = std::numeric_limits<double>::infinity();
    out.max_angle = 90.0;
    return out;
  }
  n.normalize();
  const double facet_z = a.z() - (n.x() * (p.x() - a.x()) + n.y() * (p.y() - a.y())) / n.z();
  out.dz = p.z() - facet_z;
  const double perp = std::abs(n.dot(p - a));
  for (const Point3* q : {&a, &b, &c}) {
    const double len = (p - *q).norm();
    const double angle = len > 0.0 ? rad2deg(std::asin(std::min(1.0, perp / len))) : (perp > 0.0 ? 90.0 : 0.0);
    out.max_angle = std::max(out.max_angle, angle);
  }
  return out;
}

}  // namespace

PointCloud classify_ground(const PointCloud& cloud, const GroundParams& params) {
  params.validate();
  if (cloud.empty()) throw Error(ErrorKind::EmptyInput, "ground filtering needs a non-empty cloud");

  const auto pts = cloud.points();
  const auto& bb = cloud.bounds();
  const double xmin = bb.min().x(), ymin = bb.min().y();
  std::vector<PointClass> labels(pts.size(), PointClass::NonGround);

  // Seeds: lowest point per coarse cell, smallest index on ties.
  std::map<std::pair<long long, long long>, std::size_t> lowest;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto key = std::make_pair(static_cast<long long>(std::floor((pts[i].x() - xmin) / params.initial_cell)),
                                    static_cast<long long>(std::floor((pts[i].y() - ymin) / params.initial_cell)));
    auto [it, inserted] = lowest.try_emplace(key, i);
    if (!inserted && pts[i].z() < pts[it->second].z()) it->second = i;
  }

  const double margin = 1.0;
  const Box2 extent{xmin - margin, ymin - margin, bb.max().x() + margin, bb.max().y() + margin};
  Tin tin(extent);

  std::vector<std::size_t> seeds;
  for (const auto& [key, idx] : lowest) seeds.push_back(idx);
  std::sort(seeds.begin(), seeds.end());

  // Virtual corners keep every data point inside triangles with real heights.
  for (const auto& [cx, cy] : {std::pair{extent.xmin, extent.ymin}, std::pair{extent.xmax, extent.ymin},
                               std::pair{extent.xmax, extent.ymax}, std::pair{extent.xmin, extent.ymax}}) {
    std::size_t nearest = seeds.front();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t s : seeds) {
      const double d = std::hypot(pts[s].x() - cx, pts[s].y() - cy);
      if (d < best) {
        best = d;
        nearest = s;
      }
    }
    tin.insert(Point3(cx, cy, pts[nearest].z()));
  }
  for (std::size_t s : seeds) {
    tin.insert(pts[s]);
    labels[s] = PointClass::Ground;
  }

  // Candidates visited in Morton order so consecutive walks are short.
  std::vector<std::size_t> pending;
  pending.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (labels[i] != PointClass::Ground) pending.push_back(i);
  {
    const double span = std::max({extent.width(), extent.height(), 1e-9});
    std::vector<std::uint32_t> key(pts.size());
    for (std::size_t i : pending) {
      const auto gx = static_cast<std::uint32_t>((pts[i].x() - extent.xmin) / span * 65535.0);
      const auto gy = static_cast<std::uint32_t>((pts[i].y() - extent.ymin) / span * 65535.0);
      key[i] = morton(gx, gy);
    }
    std::stable_sort(pending.begin(), pending.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
  }

  struct Best {
    double abs_dz;
    std::size_t index;
  };
  for (std::size_t iter = 0; iter < params.iterations && !pending.empty(); ++iter) {
    std::map<std::size_t, Best> winners;  // triangle -> best candidate
    std::size_t hint = Tin::kNone;
    for (std::size_t i : pending) {
      const std::size_t t = tin.locate(pts[i].x(), pts[i].y(), hint);
      hint = t;
      const FacetTest f = test_against_facet(tin, t, pts[i]);
      const double abs_dz = std::abs(f.dz);
      if (abs_dz > params.max_dist) continue;
      if (f.max_angle > params.max_angle && abs_dz > params.snap_dist) continue;
      auto [it, inserted] = winners.try_emplace(t, Best{abs_dz, i});
      if (!inserted && (abs_dz < it->second.abs_dz || (abs_dz == it->second.abs_dz && i < it->second.index)))
        it->second = Best{abs_dz, i};
    }
    if (winners.empty()) break;

    std::vector<std::size_t> accepted;
    accepted.reserve(winners.size());
    for (const auto& [t, b] : winners) accepted.push_back(b.index);
    std::sort(accepted.begin(), accepted.end());
    for (std::size_t i : accepted) {
      tin.insert(pts[i]);
      labels[i] = PointClass::Ground;
    }
    std::erase_if(pending, [&](std::size_t i) { return labels[i] == PointClass::Ground; });
  }

  return cloud.with_classes(std::move(labels));
}

PointCloud accept_ground_labels(const PointCloud& cloud) {
  if (!cloud.has_classes())
    throw Error(ErrorKind::MissingLabels, "input carries no class column; run ground filtering instead");
  return cloud;
}

}  // namespace patchqc::ground
