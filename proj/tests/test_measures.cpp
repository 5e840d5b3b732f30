#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "support.hpp"

#include "patchqc/error.hpp"
#include "patchqc/evaluate.hpp"
#include "patchqc/measures.hpp"

using namespace patchqc;
using namespace patchqc::measures;
using patching::Patch;

namespace {

Planed plane_z(double a, double bx = 0.0, double by = 0.0) {
  Planed p;
  p.normal = Point3(-bx, -by, 1.0).normalized();
  p.d = a * p.normal.z();
  return p;
}

// Inverse normal CDF by bisection.
double normal_quantile(double p) {
  double lo = -10, hi = 10;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

screening::ScreenConfig no_ortho() {
  screening::ScreenConfig c;
  c.use_shadow = false;
  c.use_vegetation = false;
  return c;
}

struct Block {
  std::vector<Point3> als;
  std::vector<Patch> patches;
};

// 5 x 5 patches of 2 m over a gently tilted noisy ALS surface.
Block make_block(std::mt19937_64& rng, double als_noise) {
  Block b;
  const auto surface = [](double x, double y) { return 10.0 + 0.02 * x - 0.01 * y; };
  b.als = testing::random_points(rng, 2500, 0, 0, 10, 10, surface, als_noise);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c) {
      Patch p;
      p.id = r * 5 + c;
      p.bounds = Box2{2.0 * c, 2.0 * r, 2.0 * c + 2, 2.0 * r + 2};
      for (const auto& q : b.als)
        if (p.bounds.contains(q.x(), q.y())) p.als_points.push_back(q);
      p.als_count = p.als_points.size();
      p.als_plane = fit_plane(p.als_points);
      b.patches.push_back(std::move(p));
    }
  return b;
}

std::vector<Point3> shifted(const std::vector<Point3>& pts, const std::function<double(double, double)>& dz) {
  std::vector<Point3> out;
  for (const auto& p : pts) out.emplace_back(p.x(), p.y(), p.z() + dz(p.x(), p.y()));
  return out;
}

}  // namespace

TEST_CASE("point_deviation examples") {
  CHECK(point_deviation(Point3(0, 0, 0.05), plane_z(0)) == doctest::Approx(0.05));
  CHECK(point_deviation(Point3(3, 4, 2), plane_z(2)) == doctest::Approx(0.0));
  CHECK(point_deviation(Point3(1, 0, 0.7), plane_z(0.5, 0.1)) == doctest::Approx(0.10));
  try {
    point_deviation(Point3(0, 0, 0), plane_z(0, 2.0));
    FAIL("expected NearVerticalPlane");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NearVerticalPlane);
  }
}

TEST_CASE("patch measure examples") {
  const std::vector<double> d{0.02, 0.00, -0.02};
  const auto m = measure_deviations(3, d);
  CHECK(m.patch_id == 3);
  CHECK(m.n == 3);
  CHECK(m.mu == doctest::Approx(0.0));
  CHECK(m.sigma == doctest::Approx(0.02));

  const std::vector<double> c(17, 0.031);
  const auto mc = measure_deviations(0, c);
  CHECK(mc.mu == doctest::Approx(0.031));
  CHECK(mc.sigma == doctest::Approx(0.0));

  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd(0.01, 0.05);
  std::vector<double> big;
  for (int i = 0; i < 100000; ++i) big.push_back(nd(rng));
  const auto mb = measure_deviations(0, big);
  CHECK(std::abs(mb.mu - 0.01) <= 0.0005);
  CHECK(std::abs(mb.sigma - 0.05) <= 0.0005);

  try {
    measure_deviations(0, std::vector<double>{1.0});
    FAIL("expected TooFewPoints");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TooFewPoints);
  }

  const std::vector<Point3> pts{{0, 0, 0.05}, {1, 0, 0.15}, {0, 1, 0.05}};
  const auto mp = patch_measure(9, pts, plane_z(0.0, 0.1));
  CHECK(mp.mu == doctest::Approx(0.05));
  CHECK(mp.sigma == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("block measure examples") {
  const std::vector<PatchMeasure> two{{0, 10, 0.01, 0.03}, {1, 10, 0.03, 0.04}};
  const auto b = block_measures(two);
  CHECK(b.m == 2);
  CHECK(b.m_md == doctest::Approx(0.02));
  CHECK(b.std_md == doctest::Approx(0.0141421356));
  CHECK(b.a_std == doctest::Approx(std::sqrt(0.00125)));

  const std::vector<PatchMeasure> same{{0, 5, 0.2, 0.07}, {1, 5, 0.2, 0.07}, {2, 5, 0.2, 0.07}};
  const auto s = block_measures(same);
  CHECK(s.m_md == doctest::Approx(0.2));
  CHECK(s.std_md == doctest::Approx(0.0));
  CHECK(s.a_std == doctest::Approx(0.07));

  try {
    block_measures(std::vector<PatchMeasure>{{0, 5, 0.2, 0.07}});
    FAIL("expected TooFewPatches");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TooFewPatches);
  }
}

TEST_CASE("block measure algebraic properties") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> mu(0.0, 0.04);
  std::uniform_real_distribution<double> sg(0.0, 0.2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<PatchMeasure> ms;
    const int m = 2 + static_cast<int>(rng() % 200);
    for (int i = 0; i < m; ++i) ms.push_back({i, 100, mu(rng), sg(rng)});
    const auto b = block_measures(ms);
    double mean_sq = 0;
    for (const auto& p : ms) mean_sq += p.sigma * p.sigma;
    mean_sq /= m;
    CHECK(std::abs(b.a_std * b.a_std - mean_sq) <= 1e-12);

    auto perm = ms;
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto bp = block_measures(perm);
    CHECK(bp.m_md == b.m_md);
    CHECK(bp.std_md == b.std_md);
    CHECK(bp.a_std == b.a_std);

    const double c = 0.123;
    auto moved = ms;
    for (auto& p : moved) p.mu += c;
    const auto bm = block_measures(moved);
    CHECK(std::abs(bm.m_md - (b.m_md + c)) <= 1e-12);
    CHECK(std::abs(bm.std_md - b.std_md) <= 1e-12);
    CHECK(bm.a_std == b.a_std);
  }
}

TEST_CASE("patch measures ignore DIM point order and shift with DIM z") {
  std::mt19937_64 rng(3);
  auto pts = testing::random_points(rng, 400, 0, 0, 2, 2, [](double x, double) { return 5 + 0.05 * x; }, 0.08);
  const Planed pl = plane_z(5.0, 0.05);
  const auto base = patch_measure(0, pts, pl);
  std::shuffle(pts.begin(), pts.end(), rng);
  const auto perm = patch_measure(0, pts, pl);
  CHECK(std::abs(perm.mu - base.mu) <= 1e-12);
  CHECK(std::abs(perm.sigma - base.sigma) <= 1e-12);
  const auto up = patch_measure(0, shifted(pts, [](double, double) { return 0.25; }), pl);
  CHECK(std::abs(up.mu - (base.mu + 0.25)) <= 1e-12);
  CHECK(std::abs(up.sigma - base.sigma) <= 1e-12);
}

TEST_CASE("reference target cross-verification") {
  std::mt19937_64 rng(4);
  const PointCloud flat(testing::random_points(rng, 20000, 0, 0, 100, 100, [](double, double) { return 2.0; }));

  std::vector<ReferenceTarget> on_plane;
  for (int i = 0; i < 10; ++i) on_plane.push_back({"T" + std::to_string(i), 10.0 + 8 * i, 50, 2.0});
  const auto a = crossverify_targets(on_plane, flat);
  CHECK(a.accepted == 10);
  CHECK(a.mu == doctest::Approx(0.0));
  CHECK(a.sigma == doctest::Approx(0.0));

  // 99 residuals on exact normal quantiles plus one 0.20 m outlier. The
  // residual is plane height minus target height.
  std::vector<ReferenceTarget> ts;
  for (int i = 0; i < 99; ++i) {
    const double r = 0.013 + 0.031 * normal_quantile((i + 0.5) / 99.0);
    ts.push_back({"N" + std::to_string(i), 5.0 + (i % 10) * 9.0, 5.0 + (i / 10) * 9.0, 2.0 - r});
  }
  ts.push_back({"OUT", 95, 95, 2.0 - 0.20});
  const auto v = crossverify_targets(ts, flat);
  REQUIRE(v.targets.size() == 100);
  CHECK(v.accepted == 99);
  CHECK_FALSE(v.targets.back().accepted);
  CHECK(v.targets.back().residual == doctest::Approx(0.20));
  CHECK(v.mu == doctest::Approx(0.013).epsilon(1e-6));
  CHECK(v.sigma == doctest::Approx(0.031).epsilon(0.05));
  CHECK(std::abs(0.20 - v.mu_all) > 3 * v.sigma_all);

  std::vector<Point3> holed;
  for (const auto& p : flat.points())
    if ((p - Point3(50, 50, 2)).head<2>().norm() > 5) holed.push_back(p);
  std::vector<ReferenceTarget> over_hole{{"H", 50, 50, 2.0}, {"A", 20, 20, 2.0}, {"B", 80, 80, 2.0}};
  const auto h = crossverify_targets(over_hole, PointCloud(holed));
  REQUIRE(h.insufficient.size() == 1);
  CHECK(h.insufficient[0] == "H");
  CHECK_FALSE(h.targets[0].has_residual);
  CHECK(h.accepted == 2);

  CHECK_THROWS_AS(crossverify_targets(over_hole, flat, 0.0), Error);
}

TEST_CASE("evaluate: DIM = ALS shifted by 5 cm") {
  std::mt19937_64 rng(5);
  auto blk = make_block(rng, 0.02);
  const PointCloud dim(shifted(blk.als, [](double, double) { return 0.05; }));
  const auto r = evaluate(blk.patches, DimSource{&dim}, no_ortho(), nullptr);
  REQUIRE(r.block);
  CHECK(r.block->m == 25);
  CHECK(std::abs(r.block->m_md - 0.05) <= 0.002);
  CHECK(r.block->std_md < 1e-9);
  CHECK(r.block->a_std == doctest::Approx(0.02).epsilon(0.15));
  CHECK(r.valid_ids.size() == 25);
}

TEST_CASE("evaluate: identity on a noise-free surface") {
  std::mt19937_64 rng(6);
  auto blk = make_block(rng, 0.0);
  const PointCloud dim(blk.als);
  const auto r = evaluate(blk.patches, DimSource{&dim}, no_ortho(), nullptr);
  REQUIRE(r.block);
  CHECK(std::abs(r.block->m_md) < 1e-12);
  CHECK(r.block->a_std < 1e-12);
}

TEST_CASE("evaluate: opposite biases on the two halves") {
  std::mt19937_64 rng(7);
  auto blk = make_block(rng, 0.0);
  // The middle column straddles the split and is left out.
  const double b = 0.04;
  const PointCloud dim(shifted(blk.als, [&](double x, double) { return x < 5 ? b : -b; }));
  std::vector<Patch> sides;
  for (auto& p : blk.patches)
    if (p.bounds.xmax <= 4 || p.bounds.xmin >= 6) sides.push_back(p);
  screening::ScreenConfig cfg = no_ortho();
  cfg.max_abs_mean_dev = 1.0;
  const auto r = evaluate(sides, DimSource{&dim}, cfg, nullptr);
  REQUIRE(r.block);
  double west = 0, east = 0;
  int nw = 0, ne = 0;
  for (const auto& m : r.block->patches) {
    const bool is_west = m.patch_id % 5 < 2;
    (is_west ? west : east) += m.mu;
    (is_west ? nw : ne) += 1;
  }
  CHECK(west / nw == doctest::Approx(b));
  CHECK(east / ne == doctest::Approx(-b));
  CHECK(r.block->m_md == doctest::Approx(0.0).epsilon(1e-12));
  // Two equal populations at +-b: sample sd = b * sqrt(m / (m - 1)).
  const double m = static_cast<double>(r.block->m);
  CHECK(r.block->std_md == doctest::Approx(b * std::sqrt(m / (m - 1))));
}

TEST_CASE("ALS offset shifts M_MD only") {
  std::mt19937_64 rng(8);
  auto blk = make_block(rng, 0.02);
  std::normal_distribution<double> noise(0.0, 0.06);
  std::vector<Point3> dim_pts;
  for (const auto& p : testing::random_points(rng, 20000, 0, 0, 10, 10,
                                              [](double x, double y) { return 10.03 + 0.02 * x - 0.01 * y; }))
    dim_pts.emplace_back(p.x(), p.y(), p.z() + noise(rng));
  const PointCloud dim(dim_pts);
  screening::ScreenConfig cfg = no_ortho();
  cfg.max_abs_mean_dev = 1.0;
  auto base_patches = blk.patches;
  const auto base = evaluate(base_patches, DimSource{&dim}, cfg, nullptr);

  const double c = 0.7;
  auto lifted = blk.patches;
  for (auto& p : lifted) {
    for (auto& q : p.als_points) q.z() += c;
    p.als_plane = fit_plane(p.als_points);
  }
  const auto up = evaluate(lifted, DimSource{&dim}, cfg, nullptr);
  REQUIRE(base.block);
  REQUIRE(up.block);
  CHECK(std::abs(up.block->m_md - (base.block->m_md - c)) <= 1e-9);
  CHECK(std::abs(up.block->std_md - base.block->std_md) <= 1e-9);
  CHECK(std::abs(up.block->a_std - base.block->a_std) <= 1e-9);
  for (std::size_t i = 0; i < base.block->patches.size(); ++i)
    CHECK(std::abs(up.block->patches[i].sigma - base.block->patches[i].sigma) <= 1e-9);
}

TEST_CASE("evaluate results do not depend on thread count") {
  std::mt19937_64 rng(9);
  auto blk = make_block(rng, 0.03);
  const PointCloud dim(shifted(blk.als, [](double x, double) { return 0.01 * x; }));
  auto p1 = blk.patches, p8 = blk.patches;
  const auto a = evaluate(p1, DimSource{&dim}, no_ortho(), nullptr, 1);
  const auto b = evaluate(p8, DimSource{&dim}, no_ortho(), nullptr, 8);
  REQUIRE(a.block);
  REQUIRE(b.block);
  CHECK(a.block->m_md == b.block->m_md);
  CHECK(a.block->std_md == b.block->std_md);
  CHECK(a.block->a_std == b.block->a_std);
  CHECK(a.valid_ids == b.valid_ids);
}

TEST_CASE("evaluate_fixed reuses a persisted patch set") {
  std::mt19937_64 rng(10);
  auto blk = make_block(rng, 0.02);
  const PointCloud dim(shifted(blk.als, [](double, double) { return 0.02; }));
  const std::vector<std::int64_t> ids{1, 4, 9, 16};
  auto ps = blk.patches;
  const auto r = evaluate_fixed(ps, DimSource{&dim}, ids);
  REQUIRE(r.block);
  CHECK(r.block->m == 4);
  CHECK(r.valid_ids == ids);
  CHECK(r.block->m_md == doctest::Approx(0.02));

  const std::vector<std::int64_t> bad{1, 99};
  try {
    evaluate_fixed(ps, DimSource{&dim}, bad);
    FAIL("expected PatchSetMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::PatchSetMismatch);
  }
}

TEST_CASE("evaluate over a DSM raster") {
  std::mt19937_64 rng(11);
  auto blk = make_block(rng, 0.0);
  Raster dsm(0.0, 10.0, 0.1, 100, 100, 1, 0.0, -9999.0);
  for (std::size_t r = 0; r < 100; ++r)
    for (std::size_t c = 0; c < 100; ++c)
      dsm.at(0, c, r) = 10.0 + 0.02 * dsm.center_x(c) - 0.01 * dsm.center_y(r) + 0.04;
  const auto res = evaluate(blk.patches, DimSource{&dsm}, no_ortho(), nullptr);
  REQUIRE(res.block);
  CHECK(res.block->m == 25);
  for (const auto& m : res.block->patches) CHECK(m.n == 400);
  CHECK(res.block->m_md == doctest::Approx(0.04).epsilon(1e-9));
  CHECK(res.block->a_std < 1e-9);
}
