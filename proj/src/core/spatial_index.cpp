#include "patchqc/core/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <utility>

namespace patchqc {

namespace {

// Average occupancy targeted by the automatic bucket size.
constexpr double kTargetPointsPerBucket = 4.0;

}  // namespace

SpatialIndex::SpatialIndex(std::span<const Point3> points, double bucket_size) : points_(points) {
  if (points_.empty()) {
    cell_start_.assign(1, 0);
    return;
  }
  double xmin = std::numeric_limits<double>::infinity(), ymin = xmin;
  double xmax = -xmin, ymax = -xmin;
  for (const auto& p : points_) {
    xmin = std::min(xmin, p.x());
    ymin = std::min(ymin, p.y());
    xmax = std::max(xmax, p.x());
    ymax = std::max(ymax, p.y());
  }
  const double w = std::max(xmax - xmin, 1e-9);
  const double h = std::max(ymax - ymin, 1e-9);
  if (!(bucket_size > 0.0)) {
    bucket_size = std::sqrt(w * h * kTargetPointsPerBucket / static_cast<double>(points_.size()));
    bucket_size = std::max(bucket_size, std::max(w, h) / 4096.0);
  }
  bucket_ = bucket_size;
  origin_x_ = xmin;
  origin_y_ = ymin;
  cols_ = static_cast<std::size_t>(std::floor(w / bucket_)) + 1;
  rows_ = static_cast<std::size_t>(std::floor(h / bucket_)) + 1;

  const auto cell_of = [&](const Point3& p) {
    const auto c = std::min(cols_ - 1, static_cast<std::size_t>(std::max(0.0, std::floor((p.x() - origin_x_) / bucket_))));
    const auto r = std::min(rows_ - 1, static_cast<std::size_t>(std::max(0.0, std::floor((p.y() - origin_y_) / bucket_))));
    return r * cols_ + c;
  };
  cell_start_.assign(cols_ * rows_ + 1, 0);
  for (const auto& p : points_) ++cell_start_[cell_of(p) + 1];
  for (std::size_t i = 1; i < cell_start_.size(); ++i) cell_start_[i] += cell_start_[i - 1];
  cell_items_.resize(points_.size());
  std::vector<std::size_t> fill(cell_start_.begin(), cell_start_.end() - 1);
  for (std::size_t i = 0; i < points_.size(); ++i) cell_items_[fill[cell_of(points_[i])]++] = i;
}

template <typename Visit>
void SpatialIndex::visit_cells(double xmin, double ymin, double xmax, double ymax, Visit&& visit) const {
  if (points_.empty()) return;
  const double c0 = std::floor((xmin - origin_x_) / bucket_);
  const double c1 = std::floor((xmax - origin_x_) / bucket_);
  const double r0 = std::floor((ymin - origin_y_) / bucket_);
  const double r1 = std::floor((ymax - origin_y_) / bucket_);
  if (c1 < 0 || r1 < 0 || c0 >= static_cast<double>(cols_) || r0 >= static_cast<double>(rows_)) return;
  const auto cb = static_cast<std::size_t>(std::max(0.0, c0));
  const auto rb = static_cast<std::size_t>(std::max(0.0, r0));
  const auto ce = std::min(cols_ - 1, static_cast<std::size_t>(c1));
  const auto re = std::min(rows_ - 1, static_cast<std::size_t>(r1));
  for (std::size_t r = rb; r <= re; ++r)
    for (std::size_t c = cb; c <= ce; ++c) {
      const std::size_t cell = r * cols_ + c;
      for (std::size_t k = cell_start_[cell]; k < cell_start_[cell + 1]; ++k) visit(cell_items_[k]);
    }
}

std::vector<std::size_t> SpatialIndex::box_query(const Box2& box) const {
  std::vector<std::size_t> out;
  if (!(box.xmax > box.xmin) || !(box.ymax > box.ymin)) return out;
  visit_cells(box.xmin, box.ymin, box.xmax, box.ymax, [&](std::size_t i) {
    if (box.contains(points_[i])) out.push_back(i);
  });
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> SpatialIndex::radius_query(const Point3& center, double radius) const {
  std::vector<std::size_t> out;
  const double r2 = radius * radius;
  visit_cells(center.x() - radius, center.y() - radius, center.x() + radius, center.y() + radius,
              [&](std::size_t i) {
                if ((points_[i] - center).squaredNorm() <= r2) out.push_back(i);
              });
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> SpatialIndex::radius_query_2d(double x, double y, double radius) const {
  std::vector<std::size_t> out;
  const double r2 = radius * radius;
  visit_cells(x - radius, y - radius, x + radius, y + radius, [&](std::size_t i) {
    const double dx = points_[i].x() - x;
    const double dy = points_[i].y() - y;
    if (dx * dx + dy * dy <= r2) out.push_back(i);
  });
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> SpatialIndex::knn(const Point3& center, std::size_t k) const {
  std::vector<std::size_t> out;
  if (k == 0 || points_.empty()) return out;
  k = std::min(k, points_.size());

  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry> best;  // max-heap on (distance, index)
  const auto offer = [&](std::size_t i) {
    const Entry e{(points_[i] - center).squaredNorm(), i};
    if (best.size() < k) {
      best.push(e);
    } else if (e < best.top()) {
      best.pop();
      best.push(e);
    }
  };

  const auto clamp_cell = [](double v, std::size_t n) {
    return static_cast<long long>(std::clamp(std::floor(v), 0.0, static_cast<double>(n - 1)));
  };
  const long long cc = clamp_cell((center.x() - origin_x_) / bucket_, cols_);
  const long long cr = clamp_cell((center.y() - origin_y_) / bucket_, rows_);
  const long long max_ring = static_cast<long long>(std::max(cols_, rows_));

  for (long long ring = 0; ring <= max_ring; ++ring) {
    for (long long r = cr - ring; r <= cr + ring; ++r) {
      if (r < 0 || r >= static_cast<long long>(rows_)) continue;
      const bool edge_row = (r == cr - ring || r == cr + ring);
      for (long long c = cc - ring; c <= cc + ring; c += (edge_row ? 1 : 2 * ring)) {
        if (c >= 0 && c < static_cast<long long>(cols_)) {
          const auto cell = static_cast<std::size_t>(r) * cols_ + static_cast<std::size_t>(c);
          for (std::size_t q = cell_start_[cell]; q < cell_start_[cell + 1]; ++q) offer(cell_items_[q]);
        }
        if (ring == 0) break;
      }
    }
    if (best.size() == k) {
      // Distance from the query to the outside of the visited block of cells.
      const double bx0 = origin_x_ + static_cast<double>(cc - ring) * bucket_;
      const double bx1 = origin_x_ + static_cast<double>(cc + ring + 1) * bucket_;
      const double by0 = origin_y_ + static_cast<double>(cr - ring) * bucket_;
      const double by1 = origin_y_ + static_cast<double>(cr + ring + 1) * bucket_;
      const double margin =
          std::min({center.x() - bx0, bx1 - center.x(), center.y() - by0, by1 - center.y()});
      if (margin > 0 && margin * margin >= best.top().first) break;
    }
  }

  std::vector<Entry> sorted;
  sorted.reserve(best.size());
  while (!best.empty()) {
    sorted.push_back(best.top());
    best.pop();
  }
  std::sort(sorted.begin(), sorted.end());
  out.reserve(sorted.size());
  for (const auto& e : sorted) out.push_back(e.second);
  return out;
}

}  // namespace patchqc
