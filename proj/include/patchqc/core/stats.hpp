#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace patchqc::stats {

double mean(std::span<const double> values);

/// Sample standard deviation with an (n - 1) denominator; 0 for n < 2.
double sample_stddev(std::span<const double> values);

/// Type-7 quantile (linear interpolation between order statistics).
double quantile(std::span<const double> values, double q);

double median(std::span<const double> values);

}  // namespace patchqc::stats
