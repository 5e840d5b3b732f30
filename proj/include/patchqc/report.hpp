#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "patchqc/core/geometry.hpp"
#include "patchqc/patching.hpp"

namespace patchqc::report {

struct Histogram {
  std::vector<double> bin_edges;     // counts.size() + 1 edges
  std::vector<std::size_t> counts;
  double bin_width = 0.0;
  double mu = 0.0;                   // overlay normal
  double sigma = 0.0;
  double q01 = 0.0;                  // display interval
  double q99 = 0.0;
  std::size_t total = 0;

  /// Normal overlay scaled by total * bin_width so its area matches the bars.
  double overlay(double x) const;
};

Histogram build_histogram(std::span<const double> values, double bin_width);

enum class MapMode { Abs, Signed };
MapMode map_mode_from_string(const std::string& s);
const char* to_string(MapMode mode);

/// One row of the per-patch table.
struct PatchRow {
  std::int64_t id = -1;
  double x_center = 0.0;
  double y_center = 0.0;
  std::size_t n = 0;
  double mu = 0.0;
  double sigma = 0.0;
  patching::PatchStatus status = patching::PatchStatus::Valid;
  patching::RejectReason reason = patching::RejectReason::None;
};

struct MapEntry {
  std::int64_t id = -1;
  Box2 bounds;
  double value = 0.0;      // mu
  double ramp = 0.0;       // position on the color ramp in [0, 1] (abs mode)
  int color_class = 0;     // abs: 0..9 along the ramp; signed: +1, -1 or 0
  std::string color;       // "#rrggbb"
};

struct PatchMap {
  MapMode mode = MapMode::Abs;
  double scale_max = 0.0;  // q99 of |mu| (abs mode)
  std::vector<MapEntry> entries;
};

/// Entries for valid rows only; each footprint is a square of side
/// `patch_size` centred on the row.
PatchMap build_patch_map(std::span<const PatchRow> rows, double patch_size, MapMode mode);

/// Block-level summary as persisted in report.json.
struct ReportSummary {
  std::string source;      // DIM file evaluated
  std::size_t m = 0;
  double m_md = 0.0;
  double std_md = 0.0;
  double a_std = 0.0;
  double patch_size = 0.0;
  std::optional<std::size_t> min_dim_points;
  std::optional<double> max_abs_mean_dev;
  std::map<std::string, std::size_t> tallies;
  std::string per_patch_csv;  // relative to the report's directory
  std::optional<std::string> error;
};

std::string to_json(const ReportSummary& summary);
ReportSummary summary_from_json(const std::string& text);

/// "M_MD; STD_MD; A_STD" with three decimals.
std::string format_triplet(double m_md, double std_md, double a_std);

std::string to_csv(std::span<const PatchRow> rows);
std::vector<PatchRow> rows_from_csv(const std::string& text);

std::string histogram_csv(const Histogram& h);
std::string histogram_svg(const Histogram& h, const std::string& title);
std::string patch_map_geojson(const PatchMap& map);
PatchMap patch_map_from_geojson(const std::string& text);
std::string patch_map_svg(const PatchMap& map);

struct ExportParams {
  double hist_bin_mu = 0.005;
  double hist_bin_sigma = 0.01;
  MapMode map_mode = MapMode::Abs;

  void validate() const;
};

/// Writes report.json, and when at least two patches are valid, the
/// histograms and patch map. Returns the written paths in a fixed order.
std::vector<std::filesystem::path> export_report(const std::filesystem::path& out_dir, const ReportSummary& summary,
                                                 std::span<const PatchRow> rows, const ExportParams& params);

}  // namespace patchqc::report
