#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "patchqc/core/raster.hpp"
#include "patchqc/measures.hpp"
#include "patchqc/patching.hpp"

namespace patchqc::screening {

enum class ShadowMethod { Otsu, Fixed };

struct ScreenConfig {
  std::optional<std::size_t> min_dim_points;  // nullopt: auto
  double auto_dim_factor = 0.5;               // auto rule 1: factor x median DIM count
  std::optional<double> max_abs_mean_dev;     // nullopt: auto
  double mean_dev_quantile = 0.99;            // auto rule 2: quantile of |mu| ...
  double mean_dev_tolerance = 0.02;           // ... plus this tolerance, meters
  double negi_threshold = 0.1;
  ShadowMethod shadow_method = ShadowMethod::Otsu;
  double shadow_fixed_threshold = 80.0;       // luminance, for ShadowMethod::Fixed
  bool use_shadow = true;
  bool use_vegetation = true;

  void validate() const;
};

struct ResolvedThresholds {
  std::size_t min_dim_points = 1;
  double max_abs_mean_dev = 0.0;
};

struct ShadowMask {
  Raster mask;  // 1 band, 1 = shadow
  double threshold = 0.0;
  bool degenerate = false;  // constant luminance: nothing masked
};

struct Verdict {
  patching::PatchStatus status = patching::PatchStatus::Valid;
  patching::RejectReason reason = patching::RejectReason::None;
  bool shaded = false;
  bool vegetation = false;
};

/// (2g - r - b) / (2g + r + b); throws DivisionByZero when the denominator is 0.
double compute_negi(double r, double g, double b);
std::optional<double> try_negi(double r, double g, double b);

double luminance(double r, double g, double b);

/// Otsu threshold of a luminance histogram; `bins` equal-width bins over
/// [min, max]. Returns the upper edge of the last bin of the dark class.
std::optional<double> otsu_threshold(std::span<const double> values, std::size_t bins = 256);

ShadowMask compute_shadow_mask(const Raster& ortho);
ShadowMask shadow_mask_fixed(const Raster& ortho, double threshold);

/// The four corners (inset by a micrometre) and the center of `bounds`.
std::array<std::array<double, 2>, 5> probe_points(const Box2& bounds);

/// True iff `ok` holds at all five probe points.
bool five_point_probe(const Box2& bounds, const std::function<bool(double, double)>& ok);

bool probe_non_shadow(const Box2& bounds, const ShadowMask& shadow);
bool probe_non_vegetation(const Box2& bounds, const Raster& ortho, double negi_threshold);

/// Auto thresholds over all patches with a measure: rule 1 uses the DIM
/// counts, rule 2 the |mu| distribution.
ResolvedThresholds resolve_thresholds(std::span<const std::size_t> dim_counts,
                                      std::span<const std::optional<measures::PatchMeasure>> measures,
                                      const ScreenConfig& config);

struct ScreenResult {
  ResolvedThresholds thresholds;
  std::vector<Verdict> verdicts;  // parallel to the patch list
  std::map<std::string, std::size_t> tallies;
};

/// Applies the rules in order (DIM count, mean deviation, shadow,
/// vegetation); the first failing rule is recorded.
ScreenResult screen_patches(std::span<const patching::Patch> patches,
                            std::span<const std::optional<measures::PatchMeasure>> measures,
                            const ScreenConfig& config, const ShadowMask* shadow, const Raster* ortho);

}  // namespace patchqc::screening
