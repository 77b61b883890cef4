#pragma once

#include <array>
#include <span>
#include <utility>

#include "weldcell/geometry.hpp"

namespace weldcell::seamgeom {

struct Line3 {
  Point3 origin;
  Vec3 direction;  // unit

  [[nodiscard]] Point3 at(double t) const { return origin + t * direction; }
  [[nodiscard]] double parameter(const Point3& p) const { return direction.dot(p - origin); }
  [[nodiscard]] double distance(const Point3& p) const {
    return (p - at(parameter(p))).norm();
  }
};

enum class OrientationClass { Horizontal, Vertical };

/// Horizontal iff |direction . z| < 0.5.
OrientationClass classify(const Vec3& direction);

struct SeamSegment {
  Point3 corner;
  Vec3 direction;  // unit, pointing along the weldable material
  double length_max{0.0};
  std::pair<int, int> plane_pair{0, 1};
  OrientationClass orientation_class{OrientationClass::Horizontal};
};

/// Columns of `rotation`: travel axis, lateral axis, approach axis.
struct TorchPose {
  Point3 position;
  Mat3 rotation;
  double work_angle{0.0};    // degrees
  double travel_angle{0.0};  // degrees

  [[nodiscard]] Vec3 travel_axis() const { return rotation.col(0); }
  [[nodiscard]] Vec3 lateral_axis() const { return rotation.col(1); }
  [[nodiscard]] Vec3 approach_axis() const { return rotation.col(2); }
};

inline constexpr double kDefaultBand = 5.0;         // mm
inline constexpr double kDefaultTravelAngle = 10.0;  // degrees

/// Line through the minimum-norm point satisfying both plane equations.
/// Throws ParallelPlanes when |n_a x n_b| <= 1e-6.
Line3 intersect_two_planes(const Plane& a, const Plane& b);

/// Throws DegenerateCorner when |det [n_a n_b n_c]| <= 1e-9.
Point3 intersect_three_planes(const Plane& a, const Plane& b, const Plane& c);

struct Extent {
  double t_min;
  double t_max;
  std::size_t samples{0};  // in-band points inside [t_min, t_max]
  [[nodiscard]] double length() const { return t_max - t_min; }
};

/// Weldable length measured from the corner at t = 0, which the plane
/// intersection fixes far more tightly than any sample does. The far end is
/// the largest of m roughly uniform samples and falls short of the true end
/// by range/(m+1) on average, so it is pushed out by one mean spacing.
double corner_length(const Extent& extent);

/// Projects the points of both plates lying within `band` of the line onto
/// the line parameter and returns the contiguous covered range around t=0.
/// Gaps wider than `max_gap` (default 4*band) end the range. Throws
/// EmptySeam when no point is inside the band.
Extent seam_extent(const Line3& line, std::span<const Point3> plate_a,
                   std::span<const Point3> plate_b, double band, double max_gap = 0.0);

/// corner + distance * direction.
Point3 point_along_seam(const Point3& corner, const Vec3& direction, double distance);

/// Flips `plane` so its normal points toward `torch_side` (a point on the open
/// side of the joint, e.g. the centroid of the other plates).
Plane orient_toward(const Plane& plane, const Point3& torch_side);

/// Torch frame at `point`: approach = -bisector of the outward normals,
/// tilted by `travel_angle` about the lateral axis; travel = travel_sign *
/// seam direction. Normals must point away from the material. Throws
/// UndefinedBisector for antiparallel normals.
TorchPose torch_pose_at(const Point3& point, const SeamSegment& seam,
                        const std::pair<Plane, Plane>& planes, int travel_sign,
                        double travel_angle_deg = kDefaultTravelAngle);

/// Interior angle between two plates given outward normals, in degrees.
double dihedral_angle_deg(const Vec3& n_a, const Vec3& n_b);

}  // namespace weldcell::seamgeom
