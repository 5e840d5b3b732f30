#include "patchqc/screening.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "patchqc/core/stats.hpp"
#include "patchqc/error.hpp"

namespace patchqc::screening {

using patching::PatchStatus;
using patching::RejectReason;

void ScreenConfig::validate() const {
  if (min_dim_points && *min_dim_points < 1) throw Error(ErrorKind::ConfigError, "screen.min_dim_points must be >= 1");
  if (!(auto_dim_factor > 0.0)) throw Error(ErrorKind::ConfigError, "screen.auto_dim_factor must be > 0");
  if (max_abs_mean_dev && !(*max_abs_mean_dev > 0.0))
    throw Error(ErrorKind::ConfigError, "screen.max_abs_mean_dev must be > 0");
  if (!(mean_dev_quantile > 0.0 && mean_dev_quantile <= 1.0))
    throw Error(ErrorKind::ConfigError, "screen.mean_dev_quantile must be in (0, 1]");
  if (!(mean_dev_tolerance >= 0.0)) throw Error(ErrorKind::ConfigError, "screen.mean_dev_tolerance must be >= 0");
  if (!(negi_threshold > -1.0 && negi_threshold < 1.0))
    throw Error(ErrorKind::ConfigError, "screen.negi_threshold must be in (-1, 1)");
}

std::optional<double> try_negi(double r, double g, double b) {
  const double den = 2.0 * g + r + b;
  if (den == 0.0) return std::nullopt;
  return (2.0 * g - r - b) / den;
}

double compute_negi(double r, double g, double b) {
  const auto v = try_negi(r, g, b);
  if (!v) throw Error(ErrorKind::DivisionByZero, "nEGI undefined for 2G + R + B = 0");
  return *v;
}

double luminance(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

namespace {

struct Histogram {
  double lo = 0.0;
  double width = 0.0;
  std::vector<double> counts;

  std::size_t bin(double v) const {
    const double f = std::floor((v - lo) / width);
    return static_cast<std::size_t>(std::clamp(f, 0.0, static_cast<double>(counts.size() - 1)));
  }
};

std::optional<std::pair<Histogram, std::size_t>> otsu_split(std::span<const double> values, std::size_t bins) {
  if (values.empty() || bins < 2) return std::nullopt;
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  if (!(*mx > *mn)) return std::nullopt;
  Histogram h{*mn, (*mx - *mn) / static_cast<double>(bins), std::vector<double>(bins, 0.0)};
  for (double v : values) h.counts[h.bin(v)] += 1.0;

  const double total = static_cast<double>(values.size());
  double sum_all = 0.0;
  for (std::size_t i = 0; i < bins; ++i) sum_all += static_cast<double>(i) * h.counts[i];
  double w0 = 0.0, sum0 = 0.0, best = -1.0;
  std::size_t best_k = 0;
  for (std::size_t k = 0; k + 1 < bins; ++k) {
    w0 += h.counts[k];
    sum0 += static_cast<double>(k) * h.counts[k];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double m0 = sum0 / w0;
    const double m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_k = k;
    }
  }
  return std::make_pair(std::move(h), best_k);
}

std::vector<double> luminance_of(const Raster& ortho) {
  if (ortho.band_count() != 3) throw Error(ErrorKind::DataError, "shadow detection needs a 3-band orthoimage");
  const std::size_t n = ortho.width() * ortho.height();
  std::vector<double> lum(n);
  for (std::size_t i = 0; i < n; ++i) lum[i] = luminance(ortho.band(0)[i], ortho.band(1)[i], ortho.band(2)[i]);
  return lum;
}

}  // namespace

std::optional<double> otsu_threshold(std::span<const double> values, std::size_t bins) {
  const auto split = otsu_split(values, bins);
  if (!split) return std::nullopt;
  const auto& [h, k] = *split;
  return h.lo + static_cast<double>(k + 1) * h.width;
}

ShadowMask compute_shadow_mask(const Raster& ortho) {
  const std::vector<double> lum = luminance_of(ortho);
  ShadowMask out{Raster(ortho.origin_x(), ortho.origin_y(), ortho.cell_size(), ortho.width(), ortho.height(), 1), 0.0,
                 false};
  const auto split = otsu_split(lum, 256);
  if (!split) {
    out.degenerate = true;
    return out;
  }
  const auto& [h, k] = *split;
  out.threshold = h.lo + static_cast<double>(k + 1) * h.width;
  auto& mask = out.mask.band(0);
  for (std::size_t i = 0; i < lum.size(); ++i) mask[i] = h.bin(lum[i]) <= k ? 1.0 : 0.0;
  return out;
}

ShadowMask shadow_mask_fixed(const Raster& ortho, double threshold) {
  const std::vector<double> lum = luminance_of(ortho);
  ShadowMask out{Raster(ortho.origin_x(), ortho.origin_y(), ortho.cell_size(), ortho.width(), ortho.height(), 1),
                 threshold, false};
  auto& mask = out.mask.band(0);
  for (std::size_t i = 0; i < lum.size(); ++i) mask[i] = lum[i] < threshold ? 1.0 : 0.0;
  return out;
}

std::array<std::array<double, 2>, 5> probe_points(const Box2& b) {
  constexpr double inset = 1e-6;
  return {{{b.xmin + inset, b.ymin + inset},
           {b.xmax - inset, b.ymin + inset},
           {b.xmin + inset, b.ymax - inset},
           {b.xmax - inset, b.ymax - inset},
           {b.center_x(), b.center_y()}}};
}

bool five_point_probe(const Box2& bounds, const std::function<bool(double, double)>& ok) {
  for (const auto& [x, y] : probe_points(bounds))
    if (!ok(x, y)) return false;
  return true;
}

bool probe_non_shadow(const Box2& bounds, const ShadowMask& shadow) {
  return five_point_probe(bounds, [&](double x, double y) {
    const auto px = shadow.mask.pixel_at(x, y);
    return px && shadow.mask.at(0, px->col, px->row) == 0.0;
  });
}

bool probe_non_vegetation(const Box2& bounds, const Raster& ortho, double negi_threshold) {
  return five_point_probe(bounds, [&](double x, double y) {
    const auto px = ortho.pixel_at(x, y);
    if (!px) return false;
    const auto v = try_negi(ortho.at(0, px->col, px->row), ortho.at(1, px->col, px->row), ortho.at(2, px->col, px->row));
    return !v || *v <= negi_threshold;
  });
}

ResolvedThresholds resolve_thresholds(std::span<const std::size_t> dim_counts,
                                      std::span<const std::optional<measures::PatchMeasure>> measures,
                                      const ScreenConfig& config) {
  config.validate();
  ResolvedThresholds t;
  if (config.min_dim_points) {
    t.min_dim_points = *config.min_dim_points;
  } else if (!dim_counts.empty()) {
    std::vector<double> counts(dim_counts.begin(), dim_counts.end());
    t.min_dim_points = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::ceil(config.auto_dim_factor * stats::median(counts))));
  } else {
    t.min_dim_points = 2;
  }
  if (config.max_abs_mean_dev) {
    t.max_abs_mean_dev = *config.max_abs_mean_dev;
  } else {
    std::vector<double> abs_mu;
    for (const auto& m : measures)
      if (m) abs_mu.push_back(std::abs(m->mu));
    t.max_abs_mean_dev = abs_mu.empty() ? std::numeric_limits<double>::infinity()
                                        : stats::quantile(abs_mu, config.mean_dev_quantile) + config.mean_dev_tolerance;
  }
  return t;
}

ScreenResult screen_patches(std::span<const patching::Patch> patches,
                            std::span<const std::optional<measures::PatchMeasure>> measures,
                            const ScreenConfig& config, const ShadowMask* shadow, const Raster* ortho) {
  config.validate();
  if ((config.use_shadow || config.use_vegetation) && ortho == nullptr)
    throw Error(ErrorKind::MissingOrtho, "shadow/vegetation rules need an orthoimage");
  if (measures.size() != patches.size()) throw Error(ErrorKind::DataError, "one measure slot per patch required");

  std::optional<ShadowMask> own_mask;
  if (config.use_shadow && shadow == nullptr) {
    own_mask = config.shadow_method == ShadowMethod::Otsu ? compute_shadow_mask(*ortho)
                                                          : shadow_mask_fixed(*ortho, config.shadow_fixed_threshold);
    shadow = &*own_mask;
  }

  std::vector<std::size_t> counts;
  counts.reserve(patches.size());
  for (const auto& p : patches) counts.push_back(p.dim_points.size());

  ScreenResult result;
  result.thresholds = resolve_thresholds(counts, measures, config);
  for (auto r : {RejectReason::TooFewDimPoints, RejectReason::MeanDevExceeds, RejectReason::Shaded,
                 RejectReason::Vegetation})
    result.tallies[patching::to_string(r)] = 0;
  result.tallies["valid"] = 0;

  result.verdicts.resize(patches.size());
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto& p = patches[i];
    Verdict& v = result.verdicts[i];
    if (config.use_shadow) v.shaded = !probe_non_shadow(p.bounds, *shadow);
    if (config.use_vegetation) v.vegetation = !probe_non_vegetation(p.bounds, *ortho, config.negi_threshold);

    if (!measures[i] || p.dim_points.size() < result.thresholds.min_dim_points)
      v.reason = RejectReason::TooFewDimPoints;
    else if (std::abs(measures[i]->mu) > result.thresholds.max_abs_mean_dev)
      v.reason = RejectReason::MeanDevExceeds;
    else if (v.shaded)
      v.reason = RejectReason::Shaded;
    else if (v.vegetation)
      v.reason = RejectReason::Vegetation;

    v.status = v.reason == RejectReason::None ? PatchStatus::Valid : PatchStatus::Rejected;
    ++result.tallies[v.reason == RejectReason::None ? "valid" : patching::to_string(v.reason)];
  }
  return result;
}

}  // namespace patchqc::screening
