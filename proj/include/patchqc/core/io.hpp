#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "patchqc/core/point_cloud.hpp"
#include "patchqc/core/raster.hpp"

namespace patchqc::io {

/// Plain-text XYZ: one point per line "x y z [class] [segment]"; '#' lines
/// are header comments and may carry "crs: <label>" and "units: m".
PointCloud read_xyz(const std::filesystem::path& path);
void write_xyz(const std::filesystem::path& path, const PointCloud& cloud);

/// LAS 1.2, point data format 0 (x, y, z, classification only).
PointCloud read_las(const std::filesystem::path& path);
void write_las(const std::filesystem::path& path, const PointCloud& cloud, double scale = 0.001);

/// Reads XYZ or LAS by file extension.
PointCloud read_point_cloud(const std::filesystem::path& path);

/// Flat band-sequential binary grid with a JSON sidecar (same stem, .json).
/// Sidecar keys: origin [x, y], cell_size, width, height, bands, nodata,
/// dtype ("uint8", "float32" or "float64").
Raster read_raster(const std::filesystem::path& path);
void write_raster(const std::filesystem::path& path, const Raster& raster, const std::string& dtype = "float32");

std::filesystem::path sidecar_path(const std::filesystem::path& raster_path);

struct WorldFile {
  double origin_x = 0.0;  // upper-left corner of the upper-left pixel
  double origin_y = 0.0;
  double cell_size = 0.0;
};

/// Six-line ASCII world file; rotation terms must be zero and pixels square.
WorldFile read_world_file(const std::filesystem::path& path);

/// Fails with DataError when two declared CRS labels differ.
void require_same_crs(const PointCloud& a, const PointCloud& b);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

/// FNV-1a 64-bit content hash, hex encoded.
std::string content_hash(const std::string& bytes);

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

}  // namespace patchqc::io
