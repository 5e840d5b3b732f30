#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "patchqc/core/geometry.hpp"

namespace patchqc {

struct PixelIndex {
  std::size_t col = 0;
  std::size_t row = 0;
};

/// North-up grid. Pixel (col, row) has its center at
/// origin + ((col + 0.5) * cell, -(row + 0.5) * cell); bands are row-major.
class Raster {
 public:
  Raster() = default;
  Raster(double origin_x, double origin_y, double cell_size, std::size_t width, std::size_t height,
         std::size_t band_count, double fill = 0.0, std::optional<double> nodata = std::nullopt);

  double origin_x() const { return origin_x_; }
  double origin_y() const { return origin_y_; }
  double cell_size() const { return cell_; }
  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t band_count() const { return bands_.size(); }
  const std::optional<double>& nodata() const { return nodata_; }

  double at(std::size_t band, std::size_t col, std::size_t row) const { return bands_[band][row * width_ + col]; }
  double& at(std::size_t band, std::size_t col, std::size_t row) { return bands_[band][row * width_ + col]; }
  const std::vector<double>& band(std::size_t b) const { return bands_[b]; }
  std::vector<double>& band(std::size_t b) { return bands_[b]; }

  bool is_nodata(double v) const { return nodata_.has_value() && v == *nodata_; }

  double center_x(std::size_t col) const { return origin_x_ + (static_cast<double>(col) + 0.5) * cell_; }
  double center_y(std::size_t row) const { return origin_y_ - (static_cast<double>(row) + 0.5) * cell_; }

  /// Pixel containing (x, y), i.e. the pixel whose center is nearest.
  std::optional<PixelIndex> pixel_at(double x, double y) const;

  bool same_georeference(const Raster& other) const;

 private:
  double origin_x_ = 0.0;
  double origin_y_ = 0.0;
  double cell_ = 1.0;
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<std::vector<double>> bands_;
  std::optional<double> nodata_;
};

}  // namespace patchqc
