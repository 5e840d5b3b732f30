#include "patchqc/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <utility>

#include <Eigen/Eigenvalues>

#include "patchqc/core/parallel.hpp"
#include "patchqc/core/spatial_index.hpp"
#include "patchqc/error.hpp"

namespace patchqc::segmentation {

void SegParams::validate() const {
  if (!(grow_radius > 0.0)) throw Error(ErrorKind::ConfigError, "segment.radius must be > 0");
  if (!(max_plane_dist > 0.0)) throw Error(ErrorKind::ConfigError, "segment.max_dist must be > 0");
  if (!(hough_slope_step > 0.0 && hough_slope_step <= 90.0))
    throw Error(ErrorKind::ConfigError, "segment.hough_slope_step must be in (0, 90]");
  if (!(hough_max_slope >= 0.0 && hough_max_slope < 90.0))
    throw Error(ErrorKind::ConfigError, "segment.hough_max_slope must be in [0, 90)");
  if (hough_offset_step < 0.0) throw Error(ErrorKind::ConfigError, "segment.hough_offset_step must be >= 0");
  if (min_seed_support < 3) throw Error(ErrorKind::ConfigError, "segment.min_seed_support must be >= 3");
  if (knn < 3) throw Error(ErrorKind::ConfigError, "segment.knn must be >= 3");
}

void ScreenThresholds::validate() const {
  if (min_size == 0 || !(max_linearity > 0.0) || !(max_slope > 0.0) || !(max_avg_angle > 0.0) || !(max_rpf > 0.0))
    throw Error(ErrorKind::ConfigError, "segment_screen thresholds must all be positive");
}

namespace {

std::vector<std::size_t> eligible_points(const PointCloud& cloud) {
  if (cloud.has_classes()) return cloud.indices_of(PointClass::Ground);
  std::vector<std::size_t> all(cloud.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return all;
}

// Upper hemisphere directions up to max_slope, about `step` degrees apart.
std::vector<Point3> hough_normals(double step, double max_slope) {
  std::vector<Point3> normals{Point3::UnitZ()};
  for (int k = 1; k * step <= max_slope + 1e-9; ++k) {
    const double theta = deg2rad(k * step);
    const int count = std::max(1, static_cast<int>(std::lround(360.0 * std::sin(theta) / step)));
    for (int a = 0; a < count; ++a) {
      const double phi = 2.0 * kPi * a / count;
      normals.emplace_back(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta));
    }
  }
  return normals;
}

}  // namespace

std::vector<Seed> hough_seeds(const PointCloud& cloud, const SegParams& params) {
  params.validate();
  const auto pts = cloud.points();
  const std::vector<std::size_t> cand = eligible_points(cloud);
  if (cand.size() < params.min_seed_support)
    throw Error(ErrorKind::NoSeeds, "fewer eligible points than min_seed_support");

  const Point3 ref = cloud.bounds().min();
  const double step = params.offset_step();
  const std::vector<Point3> normals = hough_normals(params.hough_slope_step, params.hough_max_slope);
  const std::size_t nn = normals.size();

  // Per-normal offset ranges; accumulator laid out normal-major.
  std::vector<double> dmin(nn, std::numeric_limits<double>::infinity());
  std::vector<double> dmax(nn, -std::numeric_limits<double>::infinity());
  for (std::size_t i : cand) {
    const Point3 q = pts[i] - ref;
    for (std::size_t k = 0; k < nn; ++k) {
      const double d = normals[k].dot(q);
      dmin[k] = std::min(dmin[k], d);
      dmax[k] = std::max(dmax[k], d);
    }
  }
  std::vector<std::size_t> base(nn + 1, 0);
  for (std::size_t k = 0; k < nn; ++k)
    base[k + 1] = base[k] + static_cast<std::size_t>(std::floor((dmax[k] - dmin[k]) / step)) + 1;
  const auto bin_of = [&](std::size_t k, const Point3& q) {
    return base[k] + static_cast<std::size_t>(std::floor((normals[k].dot(q) - dmin[k]) / step));
  };

  std::vector<long long> acc(base[nn], 0);
  for (std::size_t i : cand) {
    const Point3 q = pts[i] - ref;
    for (std::size_t k = 0; k < nn; ++k) ++acc[bin_of(k, q)];
  }
  std::vector<char> disabled(acc.size(), 0);
  std::vector<char> claimed(pts.size(), 0);
  std::vector<Seed> seeds;

  for (;;) {
    std::size_t best = acc.size();
    for (std::size_t b = 0; b < acc.size(); ++b)
      if (!disabled[b] && (best == acc.size() || acc[b] > acc[best])) best = b;
    if (best == acc.size() || acc[best] < static_cast<long long>(params.min_seed_support)) break;

    const auto k = static_cast<std::size_t>(std::upper_bound(base.begin(), base.end(), best) - base.begin()) - 1;
    std::vector<std::size_t> in_bin;
    for (std::size_t i : cand)
      if (!claimed[i] && bin_of(k, pts[i] - ref) == best) in_bin.push_back(i);

    Seed seed;
    try {
      seed.plane = fit_plane(pts, in_bin);
    } catch (const Error&) {
      disabled[best] = 1;
      continue;
    }
    for (std::size_t i : cand)
      if (!claimed[i] && std::abs(seed.plane.signed_distance(pts[i])) <= 0.5 * params.max_plane_dist)
        seed.support.push_back(i);
    if (seed.support.size() < params.min_seed_support) {
      disabled[best] = 1;
      continue;
    }
    seed.plane = fit_plane(pts, seed.support);
    for (std::size_t i : seed.support) {
      claimed[i] = 1;
      const Point3 q = pts[i] - ref;
      for (std::size_t kk = 0; kk < nn; ++kk) --acc[bin_of(kk, q)];
    }
    seeds.push_back(std::move(seed));
  }

  if (seeds.empty()) throw Error(ErrorKind::NoSeeds, "no Hough bin reached min_seed_support");
  std::stable_sort(seeds.begin(), seeds.end(),
                   [](const Seed& a, const Seed& b) { return a.support.size() > b.support.size(); });
  return seeds;
}

PointCloud surface_grow(const PointCloud& cloud, std::span<const Seed> seeds, const SegParams& params) {
  params.validate();
  const auto pts = cloud.points();
  const std::size_t n = pts.size();
  std::vector<char> eligible(n, 0);
  for (std::size_t i : eligible_points(cloud)) eligible[i] = 1;

  constexpr std::size_t kFree = static_cast<std::size_t>(-1);
  std::vector<std::size_t> owner(n, kFree);
  for (std::size_t s = 0; s < seeds.size(); ++s)
    for (std::size_t i : seeds[s].support) owner[i] = s;

  std::vector<std::int32_t> seg(n, kNoSegment);
  std::vector<char> processed(seeds.size(), 0);
  std::vector<std::uint32_t> stamp(n, 0);
  std::uint32_t region = 0;
  std::int32_t next_id = 0;
  const SpatialIndex index(pts);

  for (std::size_t s = 0; s < seeds.size(); ++s) {
    const auto admissible = [&](std::size_t i) {
      return eligible[i] && seg[i] == kNoSegment && (owner[i] == kFree || owner[i] == s || processed[owner[i]]);
    };

    // Region starts: support points nearest the support centroid first.
    Point3 centroid = Point3::Zero();
    for (std::size_t i : seeds[s].support) centroid += pts[i];
    centroid /= static_cast<double>(std::max<std::size_t>(1, seeds[s].support.size()));
    std::vector<std::pair<double, std::size_t>> starts;
    for (std::size_t i : seeds[s].support) starts.emplace_back((pts[i] - centroid).squaredNorm(), i);
    std::sort(starts.begin(), starts.end());

    for (const auto& [unused, start] : starts) {
      if (!admissible(start)) continue;
      ++region;
      const std::int32_t id = next_id;
      std::vector<std::size_t> members{start};
      seg[start] = id;
      PlaneAccumulator<double> acc;
      acc.add(pts[start]);
      Planed plane = seeds[s].plane;

      using Entry = std::pair<double, std::size_t>;
      std::priority_queue<Entry, std::vector<Entry>, std::greater<>> frontier;
      const Point3 origin = pts[start];
      const auto enqueue_neighbours = [&](std::size_t i) {
        for (std::size_t q : index.radius_query(pts[i], params.grow_radius)) {
          if (stamp[q] == region || !admissible(q)) continue;
          stamp[q] = region;
          frontier.emplace((pts[q] - origin).squaredNorm(), q);
        }
      };
      stamp[start] = region;
      enqueue_neighbours(start);

      while (!frontier.empty()) {
        const std::size_t q = frontier.top().second;
        frontier.pop();
        if (!admissible(q)) continue;
        if (std::abs(plane.signed_distance(pts[q])) > params.max_plane_dist) continue;
        seg[q] = id;
        members.push_back(q);
        acc.add(pts[q]);
        if (acc.size() >= 3) {
          try {
            plane = acc.fit();
          } catch (const Error&) {
            // collinear start; keep the previous plane
          }
        }
        enqueue_neighbours(q);
      }

      // Drop members the final plane no longer supports.
      for (;;) {
        if (members.size() < 3) break;
        Planed final_plane;
        std::sort(members.begin(), members.end());
        try {
          final_plane = fit_plane(pts, members);
        } catch (const Error&) {
          for (std::size_t i : members) seg[i] = kNoSegment;
          members.clear();
          break;
        }
        const auto before = members.size();
        std::erase_if(members, [&](std::size_t i) {
          if (std::abs(final_plane.signed_distance(pts[i])) <= params.max_plane_dist) return false;
          seg[i] = kNoSegment;
          return true;
        });
        if (members.size() == before) break;
      }
      if (members.size() < 3) {
        for (std::size_t i : members) seg[i] = kNoSegment;
        continue;
      }
      ++next_id;
    }
    processed[s] = 1;
  }
  return cloud.with_segments(std::move(seg));
}

SegmentFeatures segment_features(std::span<const Point3> points, std::size_t knn) {
  if (points.size() < 3) throw Error(ErrorKind::DegenerateGeometry, "segment features need at least 3 points");
  SegmentFeatures f;
  f.size = points.size();
  f.linearity = eigen_features(points).linearity;
  const Planed plane = fit_plane(points);
  f.normal_slope = plane.slope_degrees();
  f.rpf = plane.rpf;

  const SpatialIndex index(points);
  double angle_sum = 0.0;
  std::size_t counted = 0;
  std::vector<Point3> local;
  for (const auto& p : points) {
    const auto nb = index.knn(p, knn);
    if (nb.size() < 3) continue;
    local.clear();
    for (std::size_t i : nb) local.push_back(points[i]);
    const auto m = detail::centred_moments<double>(local.size(), [&](std::size_t i) -> const Point3& { return local[i]; });
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(m.covariance);
    const auto& ev = solver.eigenvalues();
    if (!(ev(2) > 0.0) || ev(1) <= detail::rank_tolerance<double>() * ev(2)) continue;
    const double c = std::min(1.0, std::abs(solver.eigenvectors().col(0).normalized().dot(plane.normal)));
    angle_sum += rad2deg(std::acos(c));
    ++counted;
  }
  f.average_angle = counted > 0 ? angle_sum / static_cast<double>(counted) : 0.0;
  return f;
}

std::vector<Segment> collect_segments(const PointCloud& cloud, std::size_t knn, unsigned threads) {
  const auto labels = cloud.segments();
  std::int32_t max_id = -1;
  for (auto id : labels) max_id = std::max(max_id, id);
  std::vector<Segment> segments(static_cast<std::size_t>(max_id + 1));
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= 0) segments[static_cast<std::size_t>(labels[i])].members.push_back(i);
  for (std::size_t k = 0; k < segments.size(); ++k) segments[k].id = static_cast<std::int32_t>(k);
  std::erase_if(segments, [](const Segment& s) { return s.members.size() < 3; });

  const auto pts = cloud.points();
  parallel_for(segments.size(), threads, [&](std::size_t k) {
    Segment& s = segments[k];
    std::vector<Point3> local;
    local.reserve(s.members.size());
    for (std::size_t i : s.members) local.push_back(pts[i]);
    try {
      s.plane = fit_plane(local);
      s.features = segment_features(local, knn);
    } catch (const Error&) {
      s.features = SegmentFeatures{};
      s.features.size = s.members.size();
      s.features.rpf = std::numeric_limits<double>::infinity();
    }
  });
  return segments;
}

bool passes_screen(const SegmentFeatures& f, const ScreenThresholds& t) {
  return f.size >= t.min_size && f.linearity <= t.max_linearity && f.normal_slope <= t.max_slope &&
         f.average_angle <= t.max_avg_angle && f.rpf <= t.max_rpf;
}

std::vector<Segment> screen_segments(std::span<const Segment> segments, const ScreenThresholds& thresholds) {
  std::vector<Segment> kept;
  for (const auto& s : segments)
    if (passes_screen(s.features, thresholds)) kept.push_back(s);
  return kept;
}

PointCloud segment_cloud(const PointCloud& cloud, const SegParams& params, const ScreenThresholds& thresholds,
                         unsigned threads) {
  params.validate();
  thresholds.validate();
  std::vector<Seed> seeds;
  try {
    seeds = hough_seeds(cloud, params);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NoSeeds) throw;
    return cloud.with_segments(std::vector<std::int32_t>(cloud.size(), kNoSegment));
  }
  const PointCloud grown = surface_grow(cloud, seeds, params);
  const auto kept = screen_segments(collect_segments(grown, params.knn, threads), thresholds);
  std::vector<std::int32_t> labels(cloud.size(), kNoSegment);
  for (const auto& s : kept)
    for (std::size_t i : s.members) labels[i] = s.id;
  return grown.with_segments(std::move(labels));
}

}  // namespace patchqc::segmentation
