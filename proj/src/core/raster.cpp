#include "patchqc/core/raster.hpp"

#include <cmath>

#include "patchqc/error.hpp"

namespace patchqc {

Raster::Raster(double origin_x, double origin_y, double cell_size, std::size_t width, std::size_t height,
               std::size_t band_count, double fill, std::optional<double> nodata)
    : origin_x_(origin_x),
      origin_y_(origin_y),
      cell_(cell_size),
      width_(width),
      height_(height),
      bands_(band_count, std::vector<double>(width * height, fill)),
      nodata_(nodata) {
  if (!(cell_size > 0.0)) throw Error(ErrorKind::DataError, "raster cell size must be positive");
}

std::optional<PixelIndex> Raster::pixel_at(double x, double y) const {
  const double fc = std::floor((x - origin_x_) / cell_);
  const double fr = std::floor((origin_y_ - y) / cell_);
  if (fc < 0 || fr < 0 || fc >= static_cast<double>(width_) || fr >= static_cast<double>(height_))
    return std::nullopt;
  return PixelIndex{static_cast<std::size_t>(fc), static_cast<std::size_t>(fr)};
}

bool Raster::same_georeference(const Raster& other) const {
  return origin_x_ == other.origin_x_ && origin_y_ == other.origin_y_ && cell_ == other.cell_ &&
         width_ == other.width_ && height_ == other.height_;
}

}  // namespace patchqc
