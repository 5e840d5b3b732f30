#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "patchqc/core/geometry.hpp"
#include "patchqc/core/point_cloud.hpp"
#include "patchqc/core/raster.hpp"
#include "patchqc/measures.hpp"

namespace patchqc::synth {

/// Portable generator: mt19937_64 with hand-written uniform and normal
/// transforms, so streams do not depend on the standard library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);
  double normal();                        // Box-Muller
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// SplitMix64 mix of a base seed with two stream tags.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

enum class BiasKind { Constant, Linear, Quadrant, Radial };

struct BiasField {
  BiasKind kind = BiasKind::Constant;
  double value = 0.0;        // constant value, quadrant value or radial amplitude
  double base = 0.0;         // outside the quadrant; radial value at the center
  double from = 0.0, to = 0.0;  // linear ramp across the extent
  char axis = 'x';
  std::string quadrant = "SW";
  std::array<double, 2> center{0.0, 0.0};  // radial; defaults to the extent center
  double radius = 0.0;                      // radial; defaults to half the diagonal
};

struct Polygon {
  std::vector<std::array<double, 2>> ring;
  bool contains(double x, double y) const;  // even-odd rule
};

struct Step {
  Box2 footprint;
  double height = 0.0;  // added to the true surface of both clouds
};

struct Hole {
  Box2 footprint;
  bool als = true;
  bool dim = true;
};

struct RandomHoles {
  std::size_t count = 0;
  double min_size = 1.0;
  double max_size = 3.0;
  bool als = true;
  bool dim = true;
};

/// DIM-only raised disc (a parked object, i.e. a change between epochs).
struct ChangeDisc {
  double x = 0.0, y = 0.0, radius = 0.0, height = 0.0;
};

struct TargetSpec {
  std::size_t count = 0;
  double mean = 0.013;
  double stddev = 0.031;
  std::vector<double> outliers;  // appended after the normal residuals
};

struct SceneSpec {
  double x0 = 0.0, y0 = 0.0, width = 100.0, height = 100.0;
  double z0 = 0.0, tilt_x = 0.0, tilt_y = 0.0;
  double als_density = 8.0, als_noise = 0.02;
  double dim_density = 100.0, dim_noise = 0.09;
  BiasField bias;
  std::vector<Step> steps;
  std::vector<Hole> holes;
  RandomHoles random_holes;
  std::vector<Polygon> vegetation;
  std::vector<Polygon> shadows;
  std::vector<ChangeDisc> changes;
  double ortho_cell = 0.2;
  TargetSpec targets;
  std::uint64_t seed = 1;
  double tile = 10.0;

  void validate() const;
  Box2 extent() const { return Box2{x0, y0, x0 + width, y0 + height}; }
};

SceneSpec spec_from_json(const std::string& text);
std::string to_json(const SceneSpec& spec);

/// Ground truth of a generated scene, queryable anywhere in the extent.
class SceneTruth {
 public:
  SceneTruth() = default;
  explicit SceneTruth(SceneSpec spec);  // expects random holes already expanded

  const SceneSpec& spec() const { return spec_; }
  double surface(double x, double y) const;      // true ALS surface
  double bias(double x, double y) const;         // bias field only
  double dim_offset(double x, double y) const;   // bias plus change discs
  double dim_surface(double x, double y) const { return surface(x, y) + dim_offset(x, y); }
  bool in_hole(double x, double y, bool als) const;
  bool in_vegetation(double x, double y) const;
  bool in_shadow(double x, double y) const;

 private:
  SceneSpec spec_;
};

struct Scene {
  PointCloud als;
  PointCloud dim;
  Raster ortho;
  SceneTruth truth;
  std::vector<measures::ReferenceTarget> targets;
};

inline constexpr std::array<double, 3> kGroundColor{210.0, 200.0, 190.0};
inline constexpr std::array<double, 3> kGrassColor{130.0, 255.0, 120.0};
inline constexpr std::array<double, 3> kShadowColor{40.0, 40.0, 40.0};

/// Bit-identical for a given spec whatever the thread count.
Scene generate_scene(const SceneSpec& spec, unsigned threads = 1);

/// Writes als.xyz, dim.xyz, ortho.bin (+ sidecar), truth.json and, when
/// targets were requested, targets.csv. Returns the written paths.
std::vector<std::filesystem::path> write_scene(const std::filesystem::path& out_dir, const Scene& scene);

std::vector<measures::ReferenceTarget> read_targets_csv(const std::filesystem::path& path);
std::string targets_csv(std::span<const measures::ReferenceTarget> targets);

/// Inverse distance weighting onto a north-up grid covering the cloud.
/// radius <= 0 selects 3 x the mean point spacing. Empty cells are nodata.
Raster idw_dsm(const PointCloud& cloud, double cell, double power = 2.0, double radius = 0.0, unsigned threads = 1);

inline constexpr double kDsmNodata = -9999.0;

struct OracleResult {
  std::size_t m = 0;
  double m_md = 0.0;
  double m_md_tol = 0.0;  // 3 standard errors
  double std_md = 0.0;
  double a_std = 0.0;
  double a_std_tol = 0.0;  // 3 standard errors of the simulation
};

/// Expected block measures for `patches` under the scene truth. M_MD is the
/// mean of the area-averaged DIM offset; A_STD is simulated (`replicas` per
/// patch) with ordinary least-squares patch planes.
OracleResult oracle_measures(const SceneTruth& truth, std::span<const Box2> patches, std::size_t replicas = 10,
                             std::uint64_t seed = 0x5eed);

}  // namespace patchqc::synth
