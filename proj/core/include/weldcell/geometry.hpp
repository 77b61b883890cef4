#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace weldcell {

// All lengths are millimeters, all angles in the public API are degrees
// unless a name says otherwise.
using Point3 = Eigen::Vector3d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Pose = Eigen::Isometry3d;

inline constexpr double kPi = 3.14159265358979323846;

constexpr double deg2rad(double deg) noexcept { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) noexcept { return rad * 180.0 / kPi; }

/// Unsigned angle between two vectors in degrees; robust near 0 and 180.
inline double angle_between_deg(const Vec3& a, const Vec3& b) {
  return rad2deg(std::atan2(a.cross(b).norm(), a.dot(b)));
}

/// Plane n.p = d with unit normal. Planes produced by planefind carry the
/// canonical sign (first nonzero normal component positive); see canonical().
struct Plane {
  Vec3 normal{0.0, 0.0, 1.0};
  double d{0.0};

  [[nodiscard]] double signed_distance(const Point3& p) const { return normal.dot(p) - d; }
  [[nodiscard]] double distance(const Point3& p) const { return std::abs(signed_distance(p)); }

  [[nodiscard]] Plane flipped() const { return {-normal, -d}; }

  [[nodiscard]] Plane canonical() const {
    constexpr double kTieEps = 1e-12;
    for (int i = 0; i < 3; ++i) {
      if (std::abs(normal[i]) > kTieEps) return normal[i] > 0.0 ? *this : flipped();
    }
    return *this;
  }

  [[nodiscard]] Plane transformed(const Pose& pose) const {
    Vec3 n = pose.linear() * normal;
    return {n, d + n.dot(pose.translation())};
  }
};

}  // namespace weldcell
