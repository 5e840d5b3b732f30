#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "support.hpp"

#include "patchqc/core/io.hpp"
#include "patchqc/error.hpp"
#include "patchqc/report.hpp"

#include "json.hpp"

using namespace patchqc;
using namespace patchqc::report;
using patching::PatchStatus;
using patching::RejectReason;
namespace fs = std::filesystem;

namespace {

double normal_cdf(double x, double mu, double sigma) { return 0.5 * std::erfc(-(x - mu) / (sigma * std::sqrt(2.0))); }

std::vector<PatchRow> random_rows(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> mu(0.01, 0.03);
  std::uniform_real_distribution<double> sg(0.02, 0.12);
  std::vector<PatchRow> rows;
  for (int i = 0; i < n; ++i) {
    PatchRow r;
    r.id = i;
    r.x_center = 1.0 + 2.0 * (i % 30);
    r.y_center = 1.0 + 2.0 * (i / 30);
    r.n = 300 + static_cast<std::size_t>(rng() % 200);
    r.mu = mu(rng);
    r.sigma = sg(rng);
    if (i % 11 == 0) {
      r.status = PatchStatus::Rejected;
      r.reason = i % 2 ? RejectReason::Shaded : RejectReason::TooFewDimPoints;
    }
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

TEST_CASE("histogram of normal samples") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd(0.0, 0.04);
  std::vector<double> v;
  for (int i = 0; i < 10000; ++i) v.push_back(nd(rng));
  const auto h = build_histogram(v, 0.005);
  CHECK(std::abs(h.mu) <= 0.0015);
  CHECK(std::abs(h.sigma - 0.04) <= 0.0015);
  CHECK(std::accumulate(h.counts.begin(), h.counts.end(), std::size_t{0}) == v.size());
  CHECK(h.total == v.size());
  REQUIRE(h.bin_edges.size() == h.counts.size() + 1);
  for (std::size_t k = 1; k < h.bin_edges.size(); ++k) CHECK(h.bin_edges[k] > h.bin_edges[k - 1]);
  CHECK(h.bin_edges.front() <= *std::min_element(v.begin(), v.end()));
  CHECK(h.bin_edges.back() > *std::max_element(v.begin(), v.end()));

  // Direct binning oracle.
  for (std::size_t k = 0; k < h.counts.size(); ++k) {
    const auto c = std::count_if(v.begin(), v.end(), [&](double x) {
      const double lo = h.bin_edges[k], hi = h.bin_edges[k + 1];
      return x >= lo && x < hi;
    });
    CHECK(std::abs(static_cast<double>(c) - static_cast<double>(h.counts[k])) <= 1.0);
  }

  // Overlay area over the display interval vs bar mass in it.
  const double a = h.q01, b = h.q99;
  double area = 0.0;
  const int steps = 20000;
  for (int i = 0; i < steps; ++i) area += h.overlay(a + (i + 0.5) * (b - a) / steps) * (b - a) / steps;
  const double inside = static_cast<double>(std::count_if(v.begin(), v.end(), [&](double x) { return x >= a && x <= b; }));
  CHECK(std::abs(area - inside * h.bin_width) <= 0.05 * inside * h.bin_width);
  CHECK(area == doctest::Approx(h.total * h.bin_width * (normal_cdf(b, h.mu, h.sigma) - normal_cdf(a, h.mu, h.sigma))));

  const double outside = static_cast<double>(v.size()) - inside;
  CHECK(outside <= 0.02 * static_cast<double>(v.size()) + 1);
}

TEST_CASE("histogram of constant values and of an even grid") {
  const std::vector<double> c(50, 0.0123);
  const auto h = build_histogram(c, 0.005);
  CHECK(std::count_if(h.counts.begin(), h.counts.end(), [](std::size_t k) { return k > 0; }) == 1);
  CHECK(h.sigma == 0.0);
  const auto svg = histogram_svg(h, "constant");
  CHECK(svg.find("<line") != std::string::npos);

  std::vector<double> u;
  for (int i = -9; i <= 10; ++i) u.push_back(0.01 * i);
  const auto hu = build_histogram(u, 0.01);
  CHECK(hu.q01 == doctest::Approx(-0.0881));
  CHECK(hu.q99 == doctest::Approx(0.0981));

  try {
    build_histogram(std::vector<double>{1.0}, 0.01);
    FAIL("expected TooFewValues");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TooFewValues);
  }
  CHECK_THROWS_AS(build_histogram(u, 0.0), Error);
}

TEST_CASE("quantile clipping keeps at least 98% of the mass") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v;
    const int n = 2 + static_cast<int>(rng() % 3000);
    std::lognormal_distribution<double> ln(0.0, 1.0);
    for (int i = 0; i < n; ++i) v.push_back(ln(rng));
    const auto h = build_histogram(v, 0.1);
    const auto inside = std::count_if(v.begin(), v.end(), [&](double x) { return x >= h.q01 && x <= h.q99; });
    CHECK(static_cast<double>(n - inside) <= 0.02 * n + 2);
  }
}

TEST_CASE("patch map examples") {
  std::vector<PatchRow> zero(4);
  for (int i = 0; i < 4; ++i) {
    zero[i].id = i;
    zero[i].x_center = 1 + 2 * i;
    zero[i].y_center = 1;
  }
  const auto mz = build_patch_map(zero, 2.0, MapMode::Abs);
  REQUIRE(mz.entries.size() == 4);
  for (const auto& e : mz.entries) {
    CHECK(e.ramp == 0.0);
    CHECK(e.color == "#0000ff");
    CHECK(e.bounds.width() == doctest::Approx(2.0));
  }
  CHECK(mz.entries[2].bounds.xmin == doctest::Approx(4.0));

  std::vector<PatchRow> pm(2);
  pm[0].id = 0;
  pm[0].mu = 0.02;
  pm[1].id = 1;
  pm[1].mu = -0.02;
  const auto ms = build_patch_map(pm, 2.0, MapMode::Signed);
  CHECK(ms.entries[0].color == "#0000ff");
  CHECK(ms.entries[0].color_class == 1);
  CHECK(ms.entries[1].color == "#ff0000");
  CHECK(ms.entries[1].color_class == -1);

  // One quadrant lifted: those patches sit at the top of the ramp.
  std::vector<PatchRow> quad;
  for (int i = 0; i < 400; ++i) {
    PatchRow r;
    r.id = i;
    r.x_center = 1 + 2 * (i % 20);
    r.y_center = 1 + 2 * (i / 20);
    r.mu = (r.x_center < 20 && r.y_center < 20) ? 0.05 : 0.001 * ((i * 7) % 5 - 2);
    quad.push_back(r);
  }
  const auto mq = build_patch_map(quad, 2.0, MapMode::Abs);
  CHECK(mq.scale_max == doctest::Approx(0.05));
  for (const auto& e : mq.entries) {
    const bool sw = e.bounds.center_x() < 20 && e.bounds.center_y() < 20;
    CHECK((e.ramp >= 0.99) == sw);
    if (sw) CHECK(e.color == "#ff0000");
  }

  auto with_rejected = quad;
  with_rejected[5].status = PatchStatus::Rejected;
  CHECK(build_patch_map(with_rejected, 2.0, MapMode::Abs).entries.size() == 399);
  CHECK_THROWS_AS(map_mode_from_string("log"), Error);
  CHECK(map_mode_from_string(to_string(MapMode::Signed)) == MapMode::Signed);
}

TEST_CASE("GeoJSON round-trip") {
  std::mt19937_64 rng(3);
  auto rows = random_rows(rng, 300);
  for (auto& r : rows) {
    r.x_center += 512345.678901;
    r.y_center += 5412345.123457;
  }
  for (auto mode : {MapMode::Abs, MapMode::Signed}) {
    const auto map = build_patch_map(rows, 2.0, mode);
    const auto text = patch_map_geojson(map);
    const auto back = patch_map_from_geojson(text);
    CHECK(back.mode == mode);
    CHECK(back.scale_max == doctest::Approx(map.scale_max));
    REQUIRE(back.entries.size() == map.entries.size());
    for (std::size_t i = 0; i < map.entries.size(); ++i) {
      const auto& a = map.entries[i];
      const auto& b = back.entries[i];
      CHECK(a.id == b.id);
      CHECK(std::abs(a.bounds.xmin - b.bounds.xmin) <= 1e-6);
      CHECK(std::abs(a.bounds.ymin - b.bounds.ymin) <= 1e-6);
      CHECK(std::abs(a.bounds.xmax - b.bounds.xmax) <= 1e-6);
      CHECK(std::abs(a.bounds.ymax - b.bounds.ymax) <= 1e-6);
      CHECK(a.color == b.color);
      CHECK(a.color_class == b.color_class);
      CHECK(a.value == doctest::Approx(b.value));
    }
    const auto j = nlohmann::json::parse(text);
    CHECK(j["type"] == "FeatureCollection");
    CHECK(j["features"].size() == map.entries.size());
    CHECK(j["features"][0]["geometry"]["type"] == "Polygon");
  }
  CHECK_THROWS_AS(patch_map_from_geojson("{\"type\": \"Feature\"}"), Error);
}

TEST_CASE("per-patch CSV and summary round-trips") {
  std::mt19937_64 rng(4);
  const auto rows = random_rows(rng, 100);
  const auto csv = to_csv(rows);
  CHECK(csv.rfind("id,x_center,y_center,n_i,mu_i,sigma_i,status,reason\n", 0) == 0);
  const auto back = rows_from_csv(csv);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].id == rows[i].id);
    CHECK(back[i].mu == rows[i].mu);
    CHECK(back[i].sigma == rows[i].sigma);
    CHECK(back[i].n == rows[i].n);
    CHECK(back[i].status == rows[i].status);
    CHECK(back[i].reason == rows[i].reason);
  }
  CHECK(to_csv(back) == csv);
  CHECK_THROWS_AS(rows_from_csv("a,b\n1,2\n"), Error);

  ReportSummary s;
  s.source = "dim.xyz";
  s.m = 2;
  s.m_md = 0.0021;
  s.std_md = 0.0404;
  s.a_std = 0.0938;
  s.patch_size = 2.0;
  s.min_dim_points = 200;
  s.max_abs_mean_dev = 0.1;
  s.tallies = {{"valid", 2}, {"shaded", 3}};
  s.per_patch_csv = "patches_measured.csv";
  const auto text = to_json(s);
  const auto j = nlohmann::json::parse(text);
  CHECK(j["measures"] == "0.002; 0.040; 0.094");
  const auto s2 = summary_from_json(text);
  CHECK(s2.m_md == s.m_md);
  CHECK(s2.std_md == s.std_md);
  CHECK(s2.a_std == s.a_std);
  CHECK(s2.tallies == s.tallies);
  CHECK(s2.min_dim_points == s.min_dim_points);
  CHECK(s2.per_patch_csv == s.per_patch_csv);
  CHECK(to_json(s2) == text);
}

TEST_CASE("format_triplet") {
  CHECK(format_triplet(0.002, 0.040, 0.094) == "0.002; 0.040; 0.094");
  CHECK(format_triplet(-0.0126, 0.1, 1.23456) == "-0.013; 0.100; 1.235");
}

TEST_CASE("export writes every artifact byte-deterministically") {
  std::mt19937_64 rng(5);
  const auto rows = random_rows(rng, 250);
  ReportSummary s;
  s.source = "dim.xyz";
  s.m = 250 - 23;
  s.m_md = 0.01;
  s.std_md = 0.03;
  s.a_std = 0.07;
  s.patch_size = 2.0;
  s.per_patch_csv = "patches_measured.csv";
  const auto d1 = testing::scratch_dir("report_a");
  const auto d2 = testing::scratch_dir("report_b");
  const auto w1 = export_report(d1, s, rows, ExportParams{});
  const auto w2 = export_report(d2, s, rows, ExportParams{});
  REQUIRE(w1.size() == 7);
  for (std::size_t i = 0; i < w1.size(); ++i) {
    CHECK(w1[i].filename() == w2[i].filename());
    CHECK(io::read_text(w1[i]) == io::read_text(w2[i]));
  }
  const auto gj = nlohmann::json::parse(io::read_text(d1 / "patch_map.geojson"));
  CHECK(gj["features"].size() == 227);
  const auto hcsv = io::read_text(d1 / "hist_mu.csv");
  CHECK(hcsv.rfind("bin_lo,bin_hi,count\n", 0) == 0);

  ExportParams bad;
  bad.hist_bin_mu = 0;
  CHECK_THROWS_AS(export_report(d1, s, rows, bad), Error);
}

TEST_CASE("empty valid set produces an error report and no plots") {
  ReportSummary s;
  s.source = "dim.xyz";
  s.m = 0;
  s.error = "TooFewPatches: 0 valid patch(es)";
  const auto d = testing::scratch_dir("report_empty");
  const auto w = export_report(d, s, std::vector<PatchRow>{}, ExportParams{});
  REQUIRE(w.size() == 1);
  CHECK(w[0].filename() == "report.json");
  const auto j = nlohmann::json::parse(io::read_text(w[0]));
  CHECK(j["m"] == 0);
  CHECK(j.contains("error"));
  CHECK_FALSE(fs::exists(d / "hist_mu.svg"));
  CHECK_FALSE(fs::exists(d / "patch_map.geojson"));
}
