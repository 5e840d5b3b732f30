#include "patchqc/measures.hpp"

#include <algorithm>
#include <cmath>

#include "patchqc/core/spatial_index.hpp"
#include "patchqc/core/stats.hpp"
#include "patchqc/error.hpp"

namespace patchqc::measures {

double point_deviation(const Point3& p, const Planed& plane) {
  static const double min_normal_z = std::cos(deg2rad(45.0));
  if (!(plane.normal.z() > min_normal_z))
    throw Error(ErrorKind::NearVerticalPlane, "reference plane is steeper than 45 degrees");
  return p.z() - plane.height_at(p.x(), p.y());
}

PatchMeasure measure_deviations(std::int64_t patch_id, std::span<const double> deviations) {
  if (deviations.size() < 2) throw Error(ErrorKind::TooFewPoints, "patch measure needs at least 2 samples");
  PatchMeasure m;
  m.patch_id = patch_id;
  m.n = deviations.size();
  m.mu = stats::mean(deviations);
  m.sigma = stats::sample_stddev(deviations);
  return m;
}

PatchMeasure patch_measure(std::int64_t patch_id, std::span<const Point3> dim_points, const Planed& plane) {
  std::vector<double> dh;
  dh.reserve(dim_points.size());
  for (const auto& p : dim_points) dh.push_back(point_deviation(p, plane));
  return measure_deviations(patch_id, dh);
}

BlockReport block_measures(std::span<const PatchMeasure> measures) {
  if (measures.size() < 2) throw Error(ErrorKind::TooFewPatches, "block measures need at least 2 patches");
  BlockReport r;
  r.patches.assign(measures.begin(), measures.end());
  std::sort(r.patches.begin(), r.patches.end(),
            [](const PatchMeasure& a, const PatchMeasure& b) { return a.patch_id < b.patch_id; });
  r.m = r.patches.size();
  const double m = static_cast<double>(r.m);

  std::vector<double> mus;
  mus.reserve(r.m);
  for (const auto& p : r.patches) mus.push_back(p.mu);
  r.m_md = stats::mean(mus);

  double ss_mu = 0.0;
  double sum_var = 0.0;
  for (const auto& p : r.patches) {
    ss_mu += (p.mu - r.m_md) * (p.mu - r.m_md);
    sum_var += p.sigma * p.sigma;
  }
  r.std_md = std::sqrt(ss_mu / (m - 1.0));
  r.a_std = std::sqrt(sum_var / m);
  return r;
}

TargetVerification crossverify_targets(std::span<const ReferenceTarget> targets, const PointCloud& als,
                                       double radius) {
  if (!(radius > 0.0)) throw Error(ErrorKind::ConfigError, "target radius must be > 0");
  TargetVerification out;
  out.targets.assign(targets.begin(), targets.end());
  const SpatialIndex index(als.points());

  std::vector<double> residuals;
  for (auto& t : out.targets) {
    const auto nb = index.radius_query_2d(t.x, t.y, radius);
    t.neighbours = nb.size();
    t.has_residual = false;
    t.accepted = false;
    if (nb.size() < 3) {
      out.insufficient.push_back(t.id);
      continue;
    }
    try {
      const Planed plane = fit_plane(als.points(), nb);
      if (!(plane.normal.z() > 0.0)) throw Error(ErrorKind::NearVerticalPlane, "vertical ALS plane");
      t.residual = plane.height_at(t.x, t.y) - t.z;
      t.has_residual = true;
      residuals.push_back(t.residual);
    } catch (const Error&) {
      out.insufficient.push_back(t.id);
    }
  }
  if (residuals.empty()) return out;

  out.mu_all = stats::mean(residuals);
  out.sigma_all = stats::sample_stddev(residuals);
  std::vector<double> kept;
  for (auto& t : out.targets) {
    if (!t.has_residual) continue;
    t.accepted = std::abs(t.residual - out.mu_all) <= 3.0 * out.sigma_all;
    if (t.accepted) kept.push_back(t.residual);
  }
  out.accepted = kept.size();
  if (!kept.empty()) {
    out.mu = stats::mean(kept);
    out.sigma = stats::sample_stddev(kept);
  }
  return out;
}

}  // namespace patchqc::measures
