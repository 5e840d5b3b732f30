#pragma once

#include <cstddef>

#include "patchqc/core/point_cloud.hpp"

namespace patchqc::ground {

/// Progressive TIN densification parameters (lengths in meters, angles in degrees).
struct GroundParams {
  double initial_cell = 20.0;  // seed grid: lowest point per cell
  double max_angle = 6.0;      // max angle between facet and point-to-vertex lines
  double max_dist = 0.3;       // max vertical offset from the facet
  double snap_dist = 0.1;      // offsets at or below this pass regardless of angle
  std::size_t iterations = 100;

  void validate() const;
};

/// Labels every point ground or non-ground.
PointCloud classify_ground(const PointCloud& cloud, const GroundParams& params = {});

/// Pass-through for clouds that already carry a ground classification.
PointCloud accept_ground_labels(const PointCloud& cloud);

}  // namespace patchqc::ground
