#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "patchqc/core/point_cloud.hpp"
#include "patchqc/error.hpp"
#include "patchqc/core/raster.hpp"
#include "patchqc/evaluate.hpp"
#include "patchqc/ground/ground.hpp"
#include "patchqc/patching.hpp"
#include "patchqc/report.hpp"
#include "patchqc/screening.hpp"
#include "patchqc/segmentation.hpp"

namespace patchqc::pipeline {

inline constexpr int kSchemaVersion = 1;

/// Everything `run` needs, read from an INI-style file with sections
/// [pipeline], [ground], [segment], [segment_screen], [patching], [screen],
/// [measures] and [report]. Relative paths resolve against the file's folder.
struct PipelineConfig {
  int schema_version = kSchemaVersion;
  std::filesystem::path als, dim, dsm, ortho, targets;  // empty when unset
  std::filesystem::path out_dir = "out";
  bool use_labels = false;
  ground::GroundParams ground;
  segmentation::SegParams segment;
  segmentation::ScreenThresholds segment_screen;
  patching::PatchingParams patching;
  screening::ScreenConfig screen;
  double rt_radius = 2.0;
  report::ExportParams report;

  /// Parameter blocks only; paths are checked by `run`.
  void validate() const;
};

PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);

/// A patch list as stored in patches.json / patches_valid.json.
struct PatchSet {
  double cell = 0.5;
  double patch_size = 2.0;
  std::vector<patching::Patch> patches;  // ALS point sets are not persisted
  bool screened = false;
  screening::ResolvedThresholds thresholds;
  std::map<std::string, std::size_t> tallies;

  std::vector<std::int64_t> valid_ids() const;
};

std::string to_json(const PatchSet& set);
PatchSet patch_set_from_json(const std::string& text);

/// DIM input owned by the caller of the stage functions.
struct DimData {
  std::optional<PointCloud> cloud;
  std::optional<Raster> dsm;
  std::string name;  // file name recorded in report.json

  measures::DimSource source() const;
};

DimData load_dim(const std::filesystem::path& path);

PointCloud stage_ground(const PointCloud& als, const PipelineConfig& config);
PointCloud stage_segment(const PointCloud& ground, const PipelineConfig& config, unsigned threads);
PatchSet stage_patches(const PointCloud& segmented, const PipelineConfig& config, unsigned threads);

/// Pass 1 over all candidates, then rules 1-4; statuses end up in `set`.
void stage_screen(PatchSet& set, const DimData& dim, const Raster* ortho, const PipelineConfig& config,
                  unsigned threads);

struct Evaluation {
  report::ReportSummary summary;
  std::vector<report::PatchRow> rows;  // every patch, sorted by id
};

/// Measures the valid patches of a screened set against one DIM source.
Evaluation stage_evaluate(const PatchSet& set, const DimData& dim, unsigned threads);

/// report.json (via report export) plus the per-patch CSV.
std::vector<std::filesystem::path> write_evaluation(const std::filesystem::path& out_dir, const Evaluation& eval,
                                                    const report::ExportParams& params);

/// targets.json content for a cross-verification result.
std::string verification_json(const measures::TargetVerification& v);

/// Runs every stage, writing intermediates, reports and manifest.json
/// under config.out_dir. On failure error.json names the stage.
void run(const PipelineConfig& config, unsigned threads = 1);

struct RunInput {
  std::string name;
  report::ReportSummary summary;
  std::vector<report::PatchRow> rows;
};

struct PairedDifference {
  std::int64_t id = -1;
  std::vector<double> mu;    // one per run
  std::vector<double> diff;  // mu[k] - mu[0]
};

struct Comparison {
  std::vector<RunInput> runs;
  std::vector<std::int64_t> patch_ids;
  std::vector<PairedDifference> differences;
};

/// Requires >= 2 runs over the same valid patch ids.
Comparison compare(std::vector<RunInput> runs);
std::string comparison_table(const Comparison& c);
std::string comparison_csv(const Comparison& c);

/// Exit status for an error kind: 2 config, 3 data, 4 internal.
int exit_code(ErrorKind kind);

}  // namespace patchqc::pipeline
