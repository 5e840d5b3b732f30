#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "patchqc/core/plane.hpp"
#include "patchqc/core/point_cloud.hpp"
#include "patchqc/core/raster.hpp"
#include "patchqc/core/spatial_index.hpp"

namespace patchqc::patching {

struct PatchingParams {
  double cell = 0.5;               // occupancy cell size, meters
  std::size_t patch_cells = 4;     // patch side in cells
  std::size_t stride = 1;          // scan step in cells
  std::size_t min_als_points = 12; // ALS points needed for the patch plane

  void validate() const;
  double patch_size() const { return cell * static_cast<double>(patch_cells); }
};

/// Data-gap grid over the bounding box of one segment.
struct OccupancyGrid {
  double origin_x = 0.0;  // min corner of the segment bounding box
  double origin_y = 0.0;
  double cell = 0.5;
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<char> occupied;  // row-major, row 0 at origin_y

  bool at(std::size_t col, std::size_t row) const { return occupied[row * width + col] != 0; }
  Box2 cell_box(std::size_t col, std::size_t row, std::size_t span = 1) const;
};

/// Candidate patch position in cell coordinates of its grid.
struct CellOrigin {
  std::size_t col = 0;
  std::size_t row = 0;
  bool operator==(const CellOrigin&) const = default;
};

enum class PatchStatus { Valid, Rejected };
enum class RejectReason { None, TooFewDimPoints, MeanDevExceeds, Shaded, Vegetation };

const char* to_string(RejectReason reason);
RejectReason reject_reason_from_string(std::string_view s);

struct Patch {
  std::int64_t id = -1;
  Box2 bounds;
  std::int32_t segment_id = kNoSegment;
  std::vector<Point3> als_points;
  std::size_t als_count = 0;
  Planed als_plane;
  std::vector<Point3> dim_points;
  bool shaded = false;
  bool vegetation = false;
  PatchStatus status = PatchStatus::Valid;
  RejectReason reason = RejectReason::None;
};

OccupancyGrid build_grid(std::span<const Point3> points, double cell);

/// Origins, in row-major scan order, whose patch_cells x patch_cells block
/// fits in the grid and is fully occupied.
std::vector<CellOrigin> select_patches(const OccupancyGrid& grid, std::size_t patch_cells, std::size_t stride = 1);

/// Greedy scan-order acceptance of footprints that share no cell with an
/// earlier accepted one.
std::vector<CellOrigin> dedupe_patches(std::span<const CellOrigin> candidates, std::size_t patch_cells);

/// Same rule for arbitrary footprints: accepted iff no positive-area overlap
/// with an earlier accepted box. Returns indices into `boxes`.
std::vector<std::size_t> dedupe_boxes(std::span<const Box2> boxes);

/// Patches over every segment of a segmented cloud, ids assigned in
/// (segment_id, row, col) order.
std::vector<Patch> make_patches(const PointCloud& segmented, const PatchingParams& params, unsigned threads = 1);

void extract_dim_points(Patch& patch, const SpatialIndex& dim);

/// DSM cells whose centers lie in `bounds`, as 3D samples; nodata skipped.
std::vector<Point3> extract_dsm_cells(const Box2& bounds, const Raster& dsm);

}  // namespace patchqc::patching
