#include "patchqc/evaluate.hpp"

#include <algorithm>

#include "patchqc/core/parallel.hpp"
#include "patchqc/core/spatial_index.hpp"
#include "patchqc/error.hpp"

namespace patchqc::measures {

using patching::Patch;
using patching::PatchStatus;
using patching::RejectReason;

void attach_dim_samples(std::span<Patch> patches, const DimSource& dim, unsigned threads) {
  if (const auto* cloud = std::get_if<const PointCloud*>(&dim)) {
    const SpatialIndex index((*cloud)->points());
    parallel_for(patches.size(), threads, [&](std::size_t i) { patching::extract_dim_points(patches[i], index); });
  } else {
    const Raster& dsm = *std::get<const Raster*>(dim);
    parallel_for(patches.size(), threads,
                 [&](std::size_t i) { patches[i].dim_points = patching::extract_dsm_cells(patches[i].bounds, dsm); });
  }
}

std::vector<std::optional<PatchMeasure>> measure_patches(std::span<const Patch> patches, unsigned threads) {
  std::vector<std::optional<PatchMeasure>> out(patches.size());
  parallel_for(patches.size(), threads, [&](std::size_t i) {
    if (patches[i].dim_points.size() < 2) return;
    out[i] = patch_measure(patches[i].id, patches[i].dim_points, patches[i].als_plane);
  });
  return out;
}

namespace {

std::optional<BlockReport> aggregate(const std::vector<std::optional<PatchMeasure>>& measures,
                                     const std::vector<char>& valid) {
  std::vector<PatchMeasure> kept;
  for (std::size_t i = 0; i < measures.size(); ++i)
    if (valid[i] && measures[i]) kept.push_back(*measures[i]);
  if (kept.size() < 2) return std::nullopt;
  return block_measures(kept);
}

}  // namespace

EvaluationResult evaluate(std::vector<Patch>& patches, const DimSource& dim, const screening::ScreenConfig& config,
                          const Raster* ortho, unsigned threads) {
  attach_dim_samples(patches, dim, threads);
  EvaluationResult r;
  r.measures = measure_patches(patches, threads);
  r.screen = screening::screen_patches(patches, r.measures, config, nullptr, ortho);

  std::vector<char> valid(patches.size(), 0);
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto& v = r.screen.verdicts[i];
    patches[i].status = v.status;
    patches[i].reason = v.reason;
    patches[i].shaded = v.shaded;
    patches[i].vegetation = v.vegetation;
    if (v.status == PatchStatus::Valid) {
      valid[i] = 1;
      r.valid_ids.push_back(patches[i].id);
    }
  }
  r.block = aggregate(r.measures, valid);
  return r;
}

EvaluationResult evaluate_fixed(std::vector<Patch>& patches, const DimSource& dim,
                                std::span<const std::int64_t> valid_ids, unsigned threads) {
  std::vector<std::int64_t> wanted(valid_ids.begin(), valid_ids.end());
  std::sort(wanted.begin(), wanted.end());
  attach_dim_samples(patches, dim, threads);
  EvaluationResult r;
  r.measures = measure_patches(patches, threads);

  std::vector<char> valid(patches.size(), 0);
  std::size_t found = 0;
  for (std::size_t i = 0; i < patches.size(); ++i) {
    if (!std::binary_search(wanted.begin(), wanted.end(), patches[i].id)) continue;
    ++found;
    if (!r.measures[i])
      throw Error(ErrorKind::PatchSetMismatch,
                  "patch " + std::to_string(patches[i].id) + " has fewer than 2 samples in this source");
    valid[i] = 1;
    r.valid_ids.push_back(patches[i].id);
  }
  if (found != wanted.size()) throw Error(ErrorKind::PatchSetMismatch, "valid patch ids missing from the patch list");
  r.screen.verdicts.resize(patches.size());
  for (std::size_t i = 0; i < patches.size(); ++i) {
    r.screen.verdicts[i].status = patches[i].status;
    r.screen.verdicts[i].reason = patches[i].reason;
    r.screen.verdicts[i].shaded = patches[i].shaded;
    r.screen.verdicts[i].vegetation = patches[i].vegetation;
  }
  r.block = aggregate(r.measures, valid);
  return r;
}

}  // namespace patchqc::measures
