#include "patchqc/core/point_cloud.hpp"

#include "patchqc/error.hpp"

namespace patchqc {

PointCloud::PointCloud(std::vector<Point3> points, std::optional<std::vector<PointClass>> classes,
                       std::optional<std::vector<std::int32_t>> segments)
    : points_(std::move(points)), classes_(std::move(classes)), segments_(std::move(segments)) {
  if (classes_ && classes_->size() != points_.size())
    throw Error(ErrorKind::DataError, "class label count does not match point count");
  if (segments_ && segments_->size() != points_.size())
    throw Error(ErrorKind::DataError, "segment label count does not match point count");
  bounds_.setEmpty();
  for (const auto& p : points_) {
    if (!all_finite(p)) throw Error(ErrorKind::DataError, "point cloud contains a non-finite coordinate");
    bounds_.extend(p);
  }
}

std::span<const PointClass> PointCloud::classes() const {
  if (!classes_) throw Error(ErrorKind::MissingLabels, "point cloud carries no class labels");
  return *classes_;
}

std::span<const std::int32_t> PointCloud::segments() const {
  if (!segments_) throw Error(ErrorKind::MissingLabels, "point cloud carries no segment labels");
  return *segments_;
}

PointCloud PointCloud::with_classes(std::vector<PointClass> classes) const {
  PointCloud out(points_, std::move(classes), segments_);
  out.crs_ = crs_;
  return out;
}

PointCloud PointCloud::with_segments(std::vector<std::int32_t> segments) const {
  PointCloud out(points_, classes_, std::move(segments));
  out.crs_ = crs_;
  return out;
}

PointCloud PointCloud::with_crs(std::string crs) const {
  PointCloud out = *this;
  out.crs_ = std::move(crs);
  return out;
}

PointCloud PointCloud::translated(const Point3& offset) const {
  std::vector<Point3> moved(points_);
  for (auto& p : moved) p += offset;
  PointCloud out(std::move(moved), classes_, segments_);
  out.crs_ = crs_;
  return out;
}

std::vector<std::size_t> PointCloud::indices_of(PointClass c) const {
  std::vector<std::size_t> out;
  const auto labels = classes();
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == c) out.push_back(i);
  return out;
}

}  // namespace patchqc
