#include "weldcell/seamgeom.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/LU>
#include <fmt/core.h>

#include "weldcell/error.hpp"

namespace weldcell::seamgeom {

OrientationClass classify(const Vec3& direction) {
  return std::abs(direction.z()) < 0.5 ? OrientationClass::Horizontal : OrientationClass::Vertical;
}

Line3 intersect_two_planes(const Plane& a, const Plane& b) {
  const Vec3 cross = a.normal.cross(b.normal);
  const double norm = cross.norm();
  if (norm <= 1e-6) throw Error(ErrorCode::ParallelPlanes, "planes are parallel");

  // Minimum-norm point lies in span{n_a, n_b}: p = alpha n_a + beta n_b.
  const double aa = a.normal.dot(a.normal);
  const double ab = a.normal.dot(b.normal);
  const double bb = b.normal.dot(b.normal);
  const double det = aa * bb - ab * ab;
  const double alpha = (a.d * bb - b.d * ab) / det;
  const double beta = (b.d * aa - a.d * ab) / det;
  return Line3{alpha * a.normal + beta * b.normal, cross / norm};
}

Point3 intersect_three_planes(const Plane& a, const Plane& b, const Plane& c) {
  Mat3 m;
  m.row(0) = a.normal.transpose();
  m.row(1) = b.normal.transpose();
  m.row(2) = c.normal.transpose();
  const double det = m.determinant();
  if (std::abs(det) <= 1e-9) {
    throw Error(ErrorCode::DegenerateCorner, fmt::format("plane normals are dependent (det={:g})", det));
  }
  return m.fullPivLu().solve(Vec3(a.d, b.d, c.d));
}

Extent seam_extent(const Line3& line, std::span<const Point3> plate_a,
                   std::span<const Point3> plate_b, double band, double max_gap) {
  if (!(band > 0.0)) throw Error(ErrorCode::InvalidArgument, "band must be > 0");
  if (max_gap <= 0.0) max_gap = 4.0 * band;

  std::vector<double> ts;
  for (auto plate : {plate_a, plate_b}) {
    for (const auto& p : plate) {
      const double t = line.parameter(p);
      if ((p - line.at(t)).squaredNorm() <= band * band) ts.push_back(t);
    }
  }
  if (ts.empty()) throw Error(ErrorCode::EmptySeam, "no plate points within the seam band");
  std::sort(ts.begin(), ts.end());

  auto nearest = std::min_element(ts.begin(), ts.end(),
                                  [](double x, double y) { return std::abs(x) < std::abs(y); });
  auto lo = nearest;
  while (lo != ts.begin() && *lo - *(lo - 1) <= max_gap) --lo;
  auto hi = nearest;
  while (hi + 1 != ts.end() && *(hi + 1) - *hi <= max_gap) ++hi;
  return Extent{*lo, *hi, static_cast<std::size_t>(hi - lo) + 1};
}

double corner_length(const Extent& extent) {
  double far = extent.t_max;
  if (extent.samples >= 2) far += extent.length() / static_cast<double>(extent.samples - 1);
  return far;
}

Point3 point_along_seam(const Point3& corner, const Vec3& direction, double distance) {
  if (distance < 0.0) throw Error(ErrorCode::InvalidArgument, "distance along seam must be >= 0");
  return corner + distance * direction;
}

Plane orient_toward(const Plane& plane, const Point3& torch_side) {
  return plane.signed_distance(torch_side) >= 0.0 ? plane : plane.flipped();
}

double dihedral_angle_deg(const Vec3& n_a, const Vec3& n_b) {
  return 180.0 - angle_between_deg(n_a, n_b);
}

TorchPose torch_pose_at(const Point3& point, const SeamSegment& seam,
                        const std::pair<Plane, Plane>& planes, int travel_sign,
                        double travel_angle_deg) {
  if (travel_sign != 1 && travel_sign != -1) {
    throw Error(ErrorCode::InvalidArgument, "travel_sign must be +1 or -1");
  }
  const Vec3 n_a = planes.first.normal.normalized();
  const Vec3 n_b = planes.second.normal.normalized();
  const Vec3 sum = n_a + n_b;
  if (sum.norm() < 1e-9) throw Error(ErrorCode::UndefinedBisector, "plate normals are antiparallel");

  const Vec3 approach0 = -sum.normalized();
  // Travel must be orthogonal to the approach axis; the seam direction of two
  // plates already is, but fitted data may drift slightly.
  Vec3 travel0 = static_cast<double>(travel_sign) * seam.direction;
  travel0 = (travel0 - travel0.dot(approach0) * approach0).normalized();
  const Vec3 lateral = approach0.cross(travel0);

  const Eigen::AngleAxisd tilt(deg2rad(travel_angle_deg), lateral);
  TorchPose pose;
  pose.position = point;
  pose.rotation.col(0) = tilt * travel0;
  pose.rotation.col(1) = lateral;
  pose.rotation.col(2) = tilt * approach0;
  pose.work_angle = 0.5 * dihedral_angle_deg(n_a, n_b);
  pose.travel_angle = travel_angle_deg;
  return pose;
}

}  // namespace weldcell::seamgeom
