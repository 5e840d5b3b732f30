#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "patchqc/core/plane.hpp"
#include "patchqc/core/point_cloud.hpp"

namespace patchqc::measures {

/// Per-patch statistics of the vertical deviations of DIM samples from the
/// patch's ALS plane.
struct PatchMeasure {
  std::int64_t patch_id = -1;
  std::size_t n = 0;
  double mu = 0.0;     // mean deviation, meters
  double sigma = 0.0;  // (n - 1) standard deviation, meters
};

/// Block-level aggregation over valid patches.
struct BlockReport {
  std::size_t m = 0;
  double m_md = 0.0;   // mean of mean deviations
  double std_md = 0.0; // standard deviation of mean deviations, (m - 1)
  double a_std = 0.0;  // root mean square of the patch standard deviations
  std::vector<PatchMeasure> patches;  // sorted by id
};

/// Vertical offset of `p` above `plane` at p's footprint; positive when p
/// lies above the reference.
double point_deviation(const Point3& p, const Planed& plane);

PatchMeasure measure_deviations(std::int64_t patch_id, std::span<const double> deviations);
PatchMeasure patch_measure(std::int64_t patch_id, std::span<const Point3> dim_points, const Planed& plane);

BlockReport block_measures(std::span<const PatchMeasure> measures);

struct ReferenceTarget {
  std::string id;
  double x = 0.0, y = 0.0, z = 0.0;
  double residual = 0.0;  // ALS plane height minus surveyed height
  std::size_t neighbours = 0;
  bool has_residual = false;
  bool accepted = false;
};

struct TargetVerification {
  double mu_all = 0.0;     // over every target with a residual
  double sigma_all = 0.0;
  double mu = 0.0;         // recomputed over accepted targets
  double sigma = 0.0;
  std::size_t accepted = 0;
  std::vector<ReferenceTarget> targets;
  std::vector<std::string> insufficient;  // targets with < 3 ALS neighbours
};

/// Compares surveyed targets with planes fitted to ALS points within
/// `radius` (horizontal) and rejects targets beyond 3 sigma of the mean.
TargetVerification crossverify_targets(std::span<const ReferenceTarget> targets, const PointCloud& als,
                                       double radius = 2.0);

}  // namespace patchqc::measures
