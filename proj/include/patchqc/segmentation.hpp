#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "patchqc/core/plane.hpp"
#include "patchqc/core/point_cloud.hpp"

namespace patchqc::segmentation {

struct SegParams {
  double grow_radius = 1.0;       // neighborhood radius for growing, meters
  double max_plane_dist = 0.2;    // point-to-plane acceptance, meters
  double hough_slope_step = 3.0;  // angular bin size of the normal accumulator, degrees
  double hough_max_slope = 45.0;  // steepest normal voted for, degrees
  double hough_offset_step = 0.0; // offset bin size; 0 means max_plane_dist
  std::size_t min_seed_support = 50;
  std::size_t knn = 10;           // neighbors for local normals

  void validate() const;
  double offset_step() const { return hough_offset_step > 0.0 ? hough_offset_step : max_plane_dist; }
};

struct Seed {
  Planed plane;
  std::vector<std::size_t> support;  // point indices, ascending
};

struct SegmentFeatures {
  std::size_t size = 0;
  double linearity = 0.0;
  double normal_slope = 0.0;   // degrees from vertical
  double average_angle = 0.0;  // degrees, mean local-normal deviation
  double rpf = 0.0;            // meters
};

struct ScreenThresholds {
  std::size_t min_size = 100;
  double max_linearity = 0.99;
  double max_slope = 45.0;
  double max_avg_angle = 5.0;
  double max_rpf = 0.1;

  void validate() const;
};

struct Segment {
  std::int32_t id = kNoSegment;
  std::vector<std::size_t> members;  // point indices, ascending
  Planed plane;
  SegmentFeatures features;
};

/// Greedy Hough seeding over ground points (all points when unlabelled).
/// Seeds are returned strongest first and have pairwise disjoint supports.
std::vector<Seed> hough_seeds(const PointCloud& cloud, const SegParams& params);

/// Grows one segment per connected seed region, refitting the plane after
/// every accepted point. Unassigned points get kNoSegment.
PointCloud surface_grow(const PointCloud& cloud, std::span<const Seed> seeds, const SegParams& params);

SegmentFeatures segment_features(std::span<const Point3> points, std::size_t knn = 10);

/// Segments of a labelled cloud with plane and features, ordered by id.
std::vector<Segment> collect_segments(const PointCloud& cloud, std::size_t knn = 10, unsigned threads = 1);

bool passes_screen(const SegmentFeatures& f, const ScreenThresholds& t);
std::vector<Segment> screen_segments(std::span<const Segment> segments, const ScreenThresholds& thresholds);

/// Seeds, grows, screens; surviving segments keep their ids, all other
/// points are relabelled kNoSegment. Zero segments is a valid result.
PointCloud segment_cloud(const PointCloud& cloud, const SegParams& params, const ScreenThresholds& thresholds,
                         unsigned threads = 1);

}  // namespace patchqc::segmentation
