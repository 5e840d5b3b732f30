#include "patchqc/core/stats.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "patchqc/error.hpp"

namespace patchqc::stats {

namespace {

// a + b = s + e exactly.
std::pair<double, double> two_sum(double a, double b) {
  const double s = a + b;
  const double bb = s - a;
  return {s, (a - (s - bb)) + (b - bb)};
}

// Compensated sum of v - shift; the rounding error of each offset and each
// addition is carried along.
double offset_sum(std::span<const double> values, double shift) {
  double sum = 0.0, comp = 0.0;
  for (double v : values) {
    const auto [d, e1] = two_sum(v, -shift);
    const auto [t, e2] = two_sum(sum, d);
    sum = t;
    comp += e1 + e2;
  }
  return sum + comp;
}

}  // namespace

double mean(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::TooFewValues, "mean of an empty set");
  const double n = static_cast<double>(values.size());
  // One refinement pass around the first estimate; constant input is exact.
  const double mu0 = offset_sum(values, 0.0) / n;
  return mu0 + offset_sum(values, mu0) / n;
}

double sample_stddev(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double mu = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - mu) * (v - mu);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double quantile(std::span<const double> values, double q) {
  if (values.empty()) throw Error(ErrorKind::TooFewValues, "quantile of an empty set");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(q, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double median(std::span<const double> values) { return quantile(values, 0.5); }

}  // namespace patchqc::stats
