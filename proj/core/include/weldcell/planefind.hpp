#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "weldcell/geometry.hpp"
#include "weldcell/scene.hpp"

namespace weldcell::planefind {

struct RansacConfig {
  std::size_t max_iterations{500};
  double inlier_threshold{1.0};  // mm
  std::size_t min_inliers{1000};
  std::uint64_t rng_seed{1};
  bool refine{true};

  void validate() const;
};

struct PlaneFit {
  Plane plane;
  std::vector<std::size_t> inliers;  // ascending indices into the cloud
};

/// Total least-squares plane through the centroid: the normal is the
/// eigenvector of the smallest eigenvalue of the centered scatter matrix.
/// Throws DegenerateFit for fewer than three or collinear points.
Plane fit_plane_lsq(std::span<const Point3> points);

/// Number of points within `threshold` of `plane`.
std::size_t count_inliers(std::span<const Point3> points, const Plane& plane, double threshold);

/// Single-plane RANSAC over the whole cloud. The returned inlier set is every
/// point within the threshold of the returned (refined) plane.
PlaneFit ransac_plane(const scene::PointCloud& cloud, const RansacConfig& cfg);

/// Minimum angle between any two of the three extracted planes.
inline constexpr double kMinPlaneSeparationDeg = 10.0;

/// Sequential RANSAC: fit, remove inliers, repeat until three pairwise
/// non-parallel planes are found. Output order: the most horizontal plane
/// first, the others by descending inlier count. Inlier sets are disjoint.
/// Throws NoThreePlanes when the scene does not contain three planes.
std::vector<PlaneFit> extract_planes(const scene::PointCloud& cloud, const RansacConfig& cfg);

}  // namespace weldcell::planefind
