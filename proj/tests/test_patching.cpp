#include <algorithm>
#include <random>

#include "doctest.h"
#include "support.hpp"

#include "patchqc/error.hpp"
#include "patchqc/patching.hpp"

using namespace patchqc;
using namespace patchqc::patching;

namespace {

OccupancyGrid make_grid(std::size_t w, std::size_t h, const std::vector<CellOrigin>& empty = {}) {
  OccupancyGrid g;
  g.width = w;
  g.height = h;
  g.occupied.assign(w * h, 1);
  for (const auto& e : empty) g.occupied[e.row * w + e.col] = 0;
  return g;
}

std::vector<CellOrigin> brute_select(const OccupancyGrid& g, std::size_t k, std::size_t stride) {
  std::vector<CellOrigin> out;
  for (std::size_t r = 0; r + k <= g.height; r += stride)
    for (std::size_t c = 0; c + k <= g.width; c += stride) {
      bool ok = true;
      for (std::size_t dr = 0; dr < k; ++dr)
        for (std::size_t dc = 0; dc < k; ++dc) ok = ok && g.at(c + dc, r + dr);
      if (ok) out.push_back({c, r});
    }
  return out;
}

bool share_cell(const CellOrigin& a, const CellOrigin& b, std::size_t k) {
  return a.col < b.col + k && b.col < a.col + k && a.row < b.row + k && b.row < a.row + k;
}

}  // namespace

TEST_CASE("build_grid examples") {
  const std::vector<Point3> centers{{0.25, 0.25, 0}, {0.75, 0.25, 0}, {0.25, 0.75, 0}, {0.75, 0.75, 0}};
  const auto g = build_grid(centers, 0.5);
  CHECK(g.width == 2);
  CHECK(g.height == 2);
  CHECK(std::all_of(g.occupied.begin(), g.occupied.end(), [](char c) { return c != 0; }));

  std::mt19937_64 rng(1);
  auto pts = testing::random_points(rng, 640, 0, 0, 8, 8, [](double, double) { return 0.0; });
  // Pin the bounding box to the square's corners.
  pts.emplace_back(0, 0, 0);
  pts.emplace_back(7.999, 7.999, 0);
  for (double y = 0.1; y < 8; y += 0.5)
    for (double x = 0.1; x < 8; x += 0.5) pts.emplace_back(x, y, 0);
  const auto full = build_grid(pts, 0.5);
  CHECK(full.width == 16);
  CHECK(full.height == 16);
  CHECK(std::count(full.occupied.begin(), full.occupied.end(), 1) == 256);

  std::vector<Point3> holed;
  for (const auto& p : pts)
    if (!(p.x() >= 3.0 && p.x() < 3.5 && p.y() >= 5.0 && p.y() < 5.5)) holed.push_back(p);
  const auto h = build_grid(holed, 0.5);
  CHECK(std::count(h.occupied.begin(), h.occupied.end(), 0) == 1);
  CHECK_FALSE(h.at(6, 10));

  // Direct binning oracle.
  for (std::size_t r = 0; r < h.height; ++r)
    for (std::size_t c = 0; c < h.width; ++c) {
      const Box2 b = h.cell_box(c, r);
      const bool any = std::any_of(holed.begin(), holed.end(), [&](const Point3& p) { return b.contains(p.x(), p.y()); });
      CHECK(any == h.at(c, r));
    }
}

TEST_CASE("select_patches examples") {
  CHECK(select_patches(make_grid(8, 8), 4).size() == 25);
  const auto c = select_patches(make_grid(8, 8, {{0, 0}}), 4);
  CHECK(c.size() == 24);
  CHECK(std::find(c.begin(), c.end(), CellOrigin{0, 0}) == c.end());
  CHECK(select_patches(make_grid(6, 6, {{2, 2}}), 4).empty());
  CHECK(select_patches(make_grid(3, 8), 4).empty());
  CHECK(select_patches(make_grid(8, 8), 4, 2).size() == 9);
}

TEST_CASE("select_patches equals brute-force enumeration") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t w = 1 + rng() % 20, h = 1 + rng() % 20, k = 1 + rng() % 5, stride = 1 + rng() % 3;
    OccupancyGrid g = make_grid(w, h);
    const double p_empty = 0.02 * static_cast<double>(rng() % 10);
    std::bernoulli_distribution hole(p_empty);
    for (auto& o : g.occupied) o = hole(rng) ? 0 : 1;
    REQUIRE(select_patches(g, k, stride) == brute_select(g, k, stride));
  }
}

TEST_CASE("dedupe examples") {
  const auto all = select_patches(make_grid(8, 8), 4);
  const auto d = dedupe_patches(all, 4);
  CHECK(d == std::vector<CellOrigin>{{0, 0}, {4, 0}, {0, 4}, {4, 4}});
  const std::vector<CellOrigin> one{{3, 2}};
  CHECK(dedupe_patches(one, 4) == one);
  const std::vector<CellOrigin> two{{0, 0}, {1, 0}};
  CHECK(dedupe_patches(two, 4) == std::vector<CellOrigin>{{0, 0}});
}

TEST_CASE("dedupe is greedy, disjoint and idempotent") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + rng() % 4;
    OccupancyGrid g = make_grid(5 + rng() % 15, 5 + rng() % 15);
    std::bernoulli_distribution hole(0.08);
    for (auto& o : g.occupied) o = hole(rng) ? 0 : 1;
    const auto cand = select_patches(g, k);
    const auto d = dedupe_patches(cand, k);
    for (std::size_t i = 0; i < d.size(); ++i)
      for (std::size_t j = i + 1; j < d.size(); ++j) REQUIRE_FALSE(share_cell(d[i], d[j], k));
    // Every rejected candidate clashes with an earlier accepted one.
    std::size_t next = 0;
    for (const auto& c : cand) {
      if (next < d.size() && d[next] == c) {
        ++next;
        continue;
      }
      bool clash = false;
      for (std::size_t j = 0; j < next; ++j) clash = clash || share_cell(d[j], c, k);
      REQUIRE(clash);
    }
    CHECK(dedupe_patches(d, k) == d);

    std::vector<Box2> boxes;
    for (const auto& c : cand) boxes.push_back(g.cell_box(c.col, c.row, k));
    std::vector<CellOrigin> via_boxes;
    for (std::size_t i : dedupe_boxes(boxes)) via_boxes.push_back(cand[i]);
    CHECK(via_boxes == d);
  }
}

TEST_CASE("select_patches is independent of point order") {
  std::mt19937_64 rng(4);
  auto pts = testing::random_points(rng, 3000, 0, 0, 15, 15, [](double, double) { return 0.0; });
  const auto a = select_patches(build_grid(pts, 0.5), 4);
  std::shuffle(pts.begin(), pts.end(), rng);
  CHECK(select_patches(build_grid(pts, 0.5), 4) == a);
}

TEST_CASE("make_patches over a segmented cloud") {
  std::mt19937_64 rng(5);
  auto a = testing::random_points(rng, 4000, 0, 0, 20, 20, [](double, double) { return 0.0; });
  auto b = testing::random_points(rng, 4000, 10, 0, 20, 20, [](double, double) { return 3.0; });
  std::vector<std::int32_t> seg(a.size(), 0);
  seg.resize(a.size() + b.size(), 1);
  a.insert(a.end(), b.begin(), b.end());
  seg[5] = kNoSegment;
  const PointCloud cloud = PointCloud(a).with_segments(seg);
  const auto patches = make_patches(cloud, PatchingParams{});
  REQUIRE(!patches.empty());
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto& p = patches[i];
    CHECK(p.id == static_cast<std::int64_t>(i));
    CHECK(p.bounds.width() == doctest::Approx(2.0));
    CHECK(p.bounds.height() == doctest::Approx(2.0));
    CHECK(p.als_count >= 12);
    for (const auto& q : p.als_points) REQUIRE(p.bounds.contains(q.x(), q.y()));
    for (const auto& q : p.als_points) REQUIRE(q.z() == (p.segment_id == 0 ? 0.0 : 3.0));
    for (std::size_t j = i + 1; j < patches.size(); ++j) REQUIRE_FALSE(p.bounds.overlaps(patches[j].bounds));
  }
  CHECK(std::is_sorted(patches.begin(), patches.end(),
                       [](const Patch& x, const Patch& y) { return x.segment_id < y.segment_id; }));
  const auto threaded = make_patches(cloud, PatchingParams{}, 4);
  REQUIRE(threaded.size() == patches.size());
  for (std::size_t i = 0; i < patches.size(); ++i) CHECK(threaded[i].bounds.xmin == patches[i].bounds.xmin);

  PatchingParams bad;
  bad.cell = 0;
  CHECK_THROWS_AS(make_patches(cloud, bad), Error);
}

TEST_CASE("extract_dim_points examples") {
  std::mt19937_64 rng(6);
  auto als = testing::random_points(rng, 2000, 0, 0, 10, 10, [](double, double) { return 0.0; });
  Patch p;
  p.bounds = Box2{2, 2, 4, 4};
  for (const auto& q : als)
    if (p.bounds.contains(q.x(), q.y())) p.als_points.push_back(q);
  const SpatialIndex same(als);
  extract_dim_points(p, same);
  CHECK(p.dim_points.size() == p.als_points.size());

  std::vector<Point3> holed;
  for (const auto& q : als)
    if (!(q.x() >= 1.5 && q.x() < 4.5 && q.y() >= 1.5 && q.y() < 4.5)) holed.push_back(q);
  extract_dim_points(p, SpatialIndex(holed));
  CHECK(p.dim_points.empty());

  const auto dense = testing::random_points(rng, 10000, 0, 0, 10, 10, [](double, double) { return 0.0; });
  extract_dim_points(p, SpatialIndex(dense));
  CHECK(std::abs(static_cast<double>(p.dim_points.size()) - 400.0) <= 60.0);
}

TEST_CASE("extract_dsm_cells examples") {
  Raster dsm(0.0, 10.0, 0.1, 100, 100, 1, 1.5, -9999.0);
  CHECK(extract_dsm_cells(Box2{2, 2, 4, 4}, dsm).size() == 400);
  for (const auto& s : extract_dsm_cells(Box2{2, 2, 4, 4}, dsm)) CHECK(s.z() == 1.5);
  CHECK(extract_dsm_cells(Box2{2.05, 2.05, 4.05, 4.05}, dsm).size() == 400);

  Raster nod(0.0, 10.0, 0.1, 100, 100, 1, -9999.0, -9999.0);
  CHECK(extract_dsm_cells(Box2{2, 2, 4, 4}, nod).empty());

  for (std::size_t r = 0; r < 100; ++r)
    for (std::size_t c = 0; c < 30; ++c) dsm.at(0, c, r) = -9999.0;
  CHECK(extract_dsm_cells(Box2{2, 2, 4, 4}, dsm).size() == 200);

  CHECK(extract_dsm_cells(Box2{20, 20, 22, 22}, dsm).empty());

  // Adjacent patches never share a cell.
  const auto left = extract_dsm_cells(Box2{4, 4, 6, 6}, dsm);
  const auto right = extract_dsm_cells(Box2{6, 4, 8, 6}, dsm);
  CHECK(left.size() + right.size() == extract_dsm_cells(Box2{4, 4, 8, 6}, dsm).size());
}

TEST_CASE("reject reasons round-trip through text") {
  for (auto r : {RejectReason::None, RejectReason::TooFewDimPoints, RejectReason::MeanDevExceeds, RejectReason::Shaded,
                 RejectReason::Vegetation})
    CHECK(reject_reason_from_string(to_string(r)) == r);
  CHECK_THROWS_AS(reject_reason_from_string("bogus"), Error);
}
