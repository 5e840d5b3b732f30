#pragma once

// Hand-rolled generators and brute-force helpers shared by the tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "patchqc/core/geometry.hpp"

namespace testing {

using patchqc::Point3;

inline std::vector<Point3> grid_points(double x0, double y0, double w, double h, double spacing,
                                       const std::function<double(double, double)>& z) {
  std::vector<Point3> out;
  for (double y = y0 + 0.5 * spacing; y < y0 + h; y += spacing)
    for (double x = x0 + 0.5 * spacing; x < x0 + w; x += spacing) out.emplace_back(x, y, z(x, y));
  return out;
}

inline std::vector<Point3> random_points(std::mt19937_64& rng, std::size_t n, double x0, double y0, double w, double h,
                                         const std::function<double(double, double)>& z, double noise = 0.0) {
  std::uniform_real_distribution<double> ux(x0, x0 + w), uy(y0, y0 + h);
  std::normal_distribution<double> nz(0.0, noise > 0.0 ? noise : 1.0);
  std::vector<Point3> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = ux(rng), y = uy(rng);
    out.emplace_back(x, y, z(x, y) + (noise > 0.0 ? nz(rng) : 0.0));
  }
  return out;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("patchqc_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing
