#include "patchqc/patching.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "patchqc/core/parallel.hpp"
#include "patchqc/error.hpp"

namespace patchqc::patching {

void PatchingParams::validate() const {
  if (!(cell > 0.0)) throw Error(ErrorKind::ConfigError, "patching.cell must be > 0");
  if (patch_cells < 1) throw Error(ErrorKind::ConfigError, "patching.patch_cells must be >= 1");
  if (stride < 1) throw Error(ErrorKind::ConfigError, "patching.stride must be >= 1");
  if (min_als_points < 3) throw Error(ErrorKind::ConfigError, "patching.min_als_points must be >= 3");
}

const char* to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::None: return "";
    case RejectReason::TooFewDimPoints: return "too_few_dim_points";
    case RejectReason::MeanDevExceeds: return "mean_dev_exceeds";
    case RejectReason::Shaded: return "shaded";
    case RejectReason::Vegetation: return "vegetation";
  }
  return "";
}

RejectReason reject_reason_from_string(std::string_view s) {
  for (auto r : {RejectReason::None, RejectReason::TooFewDimPoints, RejectReason::MeanDevExceeds,
                 RejectReason::Shaded, RejectReason::Vegetation})
    if (s == to_string(r)) return r;
  throw Error(ErrorKind::DataError, "unknown rejection reason '" + std::string(s) + "'");
}

Box2 OccupancyGrid::cell_box(std::size_t col, std::size_t row, std::size_t span) const {
  return Box2{origin_x + static_cast<double>(col) * cell, origin_y + static_cast<double>(row) * cell,
              origin_x + static_cast<double>(col + span) * cell, origin_y + static_cast<double>(row + span) * cell};
}

OccupancyGrid build_grid(std::span<const Point3> points, double cell) {
  if (!(cell > 0.0)) throw Error(ErrorKind::ConfigError, "occupancy cell must be > 0");
  OccupancyGrid g;
  g.cell = cell;
  if (points.empty()) return g;
  double xmin = points[0].x(), ymin = points[0].y(), xmax = xmin, ymax = ymin;
  for (const auto& p : points) {
    xmin = std::min(xmin, p.x());
    ymin = std::min(ymin, p.y());
    xmax = std::max(xmax, p.x());
    ymax = std::max(ymax, p.y());
  }
  g.origin_x = xmin;
  g.origin_y = ymin;
  g.width = static_cast<std::size_t>(std::floor((xmax - xmin) / cell)) + 1;
  g.height = static_cast<std::size_t>(std::floor((ymax - ymin) / cell)) + 1;
  g.occupied.assign(g.width * g.height, 0);
  for (const auto& p : points) {
    const auto c = std::min(g.width - 1, static_cast<std::size_t>(std::floor((p.x() - xmin) / cell)));
    const auto r = std::min(g.height - 1, static_cast<std::size_t>(std::floor((p.y() - ymin) / cell)));
    g.occupied[r * g.width + c] = 1;
  }
  return g;
}

std::vector<CellOrigin> select_patches(const OccupancyGrid& grid, std::size_t patch_cells, std::size_t stride) {
  std::vector<CellOrigin> out;
  if (patch_cells == 0 || stride == 0 || grid.width < patch_cells || grid.height < patch_cells) return out;
  // Summed-area table of occupied cells.
  const std::size_t w = grid.width + 1;
  std::vector<std::size_t> sat(w * (grid.height + 1), 0);
  for (std::size_t r = 0; r < grid.height; ++r)
    for (std::size_t c = 0; c < grid.width; ++c)
      sat[(r + 1) * w + c + 1] = (grid.at(c, r) ? 1 : 0) + sat[r * w + c + 1] + sat[(r + 1) * w + c] - sat[r * w + c];
  const std::size_t full = patch_cells * patch_cells;
  for (std::size_t r = 0; r + patch_cells <= grid.height; r += stride)
    for (std::size_t c = 0; c + patch_cells <= grid.width; c += stride) {
      const std::size_t r1 = r + patch_cells, c1 = c + patch_cells;
      const std::size_t count = sat[r1 * w + c1] + sat[r * w + c] - sat[r * w + c1] - sat[r1 * w + c];
      if (count == full) out.push_back({c, r});
    }
  return out;
}

std::vector<CellOrigin> dedupe_patches(std::span<const CellOrigin> candidates, std::size_t patch_cells) {
  std::vector<CellOrigin> out;
  if (candidates.empty()) return out;
  std::size_t cols = 0, rows = 0;
  for (const auto& c : candidates) {
    cols = std::max(cols, c.col + patch_cells);
    rows = std::max(rows, c.row + patch_cells);
  }
  std::vector<char> used(cols * rows, 0);
  for (const auto& c : candidates) {
    bool free = true;
    for (std::size_t r = c.row; r < c.row + patch_cells && free; ++r)
      for (std::size_t k = c.col; k < c.col + patch_cells; ++k)
        if (used[r * cols + k]) {
          free = false;
          break;
        }
    if (!free) continue;
    for (std::size_t r = c.row; r < c.row + patch_cells; ++r)
      for (std::size_t k = c.col; k < c.col + patch_cells; ++k) used[r * cols + k] = 1;
    out.push_back(c);
  }
  return out;
}

std::vector<std::size_t> dedupe_boxes(std::span<const Box2> boxes) {
  std::vector<std::size_t> out;
  if (boxes.empty()) return out;
  double bucket = 0.0;
  for (const auto& b : boxes) bucket = std::max({bucket, b.width(), b.height()});
  if (!(bucket > 0.0)) bucket = 1.0;
  const auto key = [](long long x, long long y) { return (x << 32) ^ (y & 0xffffffffll); };
  std::unordered_map<long long, std::vector<std::size_t>> grid;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const Box2& b = boxes[i];
    const auto bx = static_cast<long long>(std::floor(b.xmin / bucket));
    const auto by = static_cast<long long>(std::floor(b.ymin / bucket));
    bool clash = false;
    for (long long dx = -1; dx <= 1 && !clash; ++dx)
      for (long long dy = -1; dy <= 1 && !clash; ++dy) {
        auto it = grid.find(key(bx + dx, by + dy));
        if (it == grid.end()) continue;
        for (std::size_t j : it->second)
          if (boxes[j].overlaps(b)) {
            clash = true;
            break;
          }
      }
    if (clash) continue;
    grid[key(bx, by)].push_back(i);
    out.push_back(i);
  }
  return out;
}

std::vector<Patch> make_patches(const PointCloud& segmented, const PatchingParams& params, unsigned threads) {
  params.validate();
  const auto pts = segmented.points();
  const auto labels = segmented.segments();
  std::map<std::int32_t, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= 0) members[labels[i]].push_back(i);

  struct SegmentWork {
    std::int32_t id;
    std::vector<Point3> points;
    std::vector<Patch> patches;
  };
  std::vector<SegmentWork> work;
  for (auto& [id, idx] : members) {
    SegmentWork w{id, {}, {}};
    w.points.reserve(idx.size());
    for (std::size_t i : idx) w.points.push_back(pts[i]);
    work.push_back(std::move(w));
  }

  const double min_normal_z = std::cos(deg2rad(45.0));
  parallel_for(work.size(), threads, [&](std::size_t k) {
    SegmentWork& w = work[k];
    const OccupancyGrid grid = build_grid(w.points, params.cell);
    const auto accepted = dedupe_patches(select_patches(grid, params.patch_cells, params.stride), params.patch_cells);
    const SpatialIndex index(w.points);
    for (const auto& origin : accepted) {
      Patch p;
      p.bounds = grid.cell_box(origin.col, origin.row, params.patch_cells);
      p.segment_id = w.id;
      for (std::size_t i : index.box_query(p.bounds)) p.als_points.push_back(w.points[i]);
      p.als_count = p.als_points.size();
      if (p.als_count < params.min_als_points) continue;
      try {
        p.als_plane = fit_plane(p.als_points);
      } catch (const Error&) {
        continue;
      }
      if (p.als_plane.normal.z() <= min_normal_z) continue;
      w.patches.push_back(std::move(p));
    }
  });

  // Segments are disjoint in 3D but their grids may still overlap in 2D.
  std::vector<Patch> all;
  for (auto& w : work)
    for (auto& p : w.patches) all.push_back(std::move(p));
  std::vector<Box2> boxes;
  boxes.reserve(all.size());
  for (const auto& p : all) boxes.push_back(p.bounds);
  std::vector<Patch> out;
  for (std::size_t i : dedupe_boxes(boxes)) out.push_back(std::move(all[i]));
  for (std::size_t i = 0; i < out.size(); ++i) out[i].id = static_cast<std::int64_t>(i);
  return out;
}

void extract_dim_points(Patch& patch, const SpatialIndex& dim) {
  patch.dim_points.clear();
  const auto pts = dim.points();
  for (std::size_t i : dim.box_query(patch.bounds)) patch.dim_points.push_back(pts[i]);
}

std::vector<Point3> extract_dsm_cells(const Box2& bounds, const Raster& dsm) {
  std::vector<Point3> out;
  if (dsm.width() == 0 || dsm.height() == 0) return out;
  const double cell = dsm.cell_size();
  const auto clamp_index = [](double v, std::size_t n) {
    return static_cast<std::size_t>(std::clamp(v, 0.0, static_cast<double>(n)));
  };
  // Candidate ranges padded by one cell, then filtered on exact center containment.
  const std::size_t c0 = clamp_index(std::floor((bounds.xmin - dsm.origin_x()) / cell) - 1, dsm.width());
  const std::size_t c1 = clamp_index(std::ceil((bounds.xmax - dsm.origin_x()) / cell) + 1, dsm.width());
  const std::size_t r0 = clamp_index(std::floor((dsm.origin_y() - bounds.ymax) / cell) - 1, dsm.height());
  const std::size_t r1 = clamp_index(std::ceil((dsm.origin_y() - bounds.ymin) / cell) + 1, dsm.height());
  for (std::size_t r = r1; r-- > r0;) {
    const double y = dsm.center_y(r);
    for (std::size_t c = c0; c < c1; ++c) {
      const double x = dsm.center_x(c);
      if (!bounds.contains(x, y)) continue;
      const double z = dsm.at(0, c, r);
      if (dsm.is_nodata(z) || !std::isfinite(z)) continue;
      out.emplace_back(x, y, z);
    }
  }
  return out;
}

}  // namespace patchqc::patching
