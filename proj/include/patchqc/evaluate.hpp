#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "patchqc/core/point_cloud.hpp"
#include "patchqc/core/raster.hpp"
#include "patchqc/measures.hpp"
#include "patchqc/patching.hpp"
#include "patchqc/screening.hpp"

namespace patchqc::measures {

/// DIM data under evaluation: a point cloud or a raster DSM.
using DimSource = std::variant<const PointCloud*, const Raster*>;

/// Fills every patch's dim_points from the source (DSM cells become samples
/// at their centers).
void attach_dim_samples(std::span<patching::Patch> patches, const DimSource& dim, unsigned threads = 1);

/// One slot per patch; empty when the patch has fewer than 2 samples.
std::vector<std::optional<PatchMeasure>> measure_patches(std::span<const patching::Patch> patches,
                                                         unsigned threads = 1);

struct EvaluationResult {
  std::optional<BlockReport> block;  // empty when fewer than 2 patches are valid
  screening::ScreenResult screen;
  std::vector<std::optional<PatchMeasure>> measures;
  std::vector<std::int64_t> valid_ids;
};

/// Two-pass evaluation: measure every candidate, resolve thresholds and
/// screen, then aggregate over the survivors. Patch statuses are updated.
EvaluationResult evaluate(std::vector<patching::Patch>& patches, const DimSource& dim,
                          const screening::ScreenConfig& config, const Raster* ortho, unsigned threads = 1);

/// Aggregates over a persisted patch set (`valid_ids`) without re-screening,
/// so several DIM sources share exactly the same patches.
EvaluationResult evaluate_fixed(std::vector<patching::Patch>& patches, const DimSource& dim,
                                std::span<const std::int64_t> valid_ids, unsigned threads = 1);

}  // namespace patchqc::measures
