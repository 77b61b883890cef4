#include "weldcell/planefind.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>
#include <fmt/core.h>

#include "weldcell/error.hpp"

namespace weldcell::planefind {

void RansacConfig::validate() const {
  if (max_iterations < 1) throw Error(ErrorCode::InvalidArgument, "max_iterations must be >= 1");
  if (!(inlier_threshold > 0.0)) throw Error(ErrorCode::InvalidArgument, "inlier_threshold must be > 0");
  if (min_inliers < 3) throw Error(ErrorCode::InvalidArgument, "min_inliers must be >= 3");
}

Plane fit_plane_lsq(std::span<const Point3> points) {
  if (points.size() < 3) throw Error(ErrorCode::DegenerateFit, "plane fit needs at least 3 points");

  Point3 centroid = Point3::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());

  Mat3 scatter = Mat3::Zero();
  for (const auto& p : points) {
    const Vec3 q = p - centroid;
    scatter.noalias() += q * q.transpose();
  }

  Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
  if (eig.info() != Eigen::Success) throw Error(ErrorCode::DegenerateFit, "eigen decomposition failed");

  // Eigenvalues ascending. Collinear (or coincident) input leaves the two
  // smallest eigenvalues indistinguishable, so the normal is undefined.
  const auto& ev = eig.eigenvalues();
  const double scale = std::max(ev(2), 1e-300);
  if (ev(1) <= 1e-12 * scale) {
    throw Error(ErrorCode::DegenerateFit, "points are collinear or coincident");
  }

  Vec3 n = eig.eigenvectors().col(0).normalized();
  return Plane{n, n.dot(centroid)}.canonical();
}

std::size_t count_inliers(std::span<const Point3> points, const Plane& plane, double threshold) {
  return static_cast<std::size_t>(std::count_if(points.begin(), points.end(), [&](const Point3& p) {
    return plane.distance(p) <= threshold;
  }));
}

namespace {

std::vector<std::size_t> collect_inliers(const std::vector<Point3>& pts,
                                         const std::vector<std::size_t>& active, const Plane& plane,
                                         double threshold) {
  std::vector<std::size_t> out;
  for (auto i : active) {
    if (plane.distance(pts[i]) <= threshold) out.push_back(i);
  }
  return out;
}

bool too_close_to(const Vec3& n, const std::vector<Vec3>& excluded) {
  for (const auto& e : excluded) {
    double a = angle_between_deg(n, e);
    if (std::min(a, 180.0 - a) <= kMinPlaneSeparationDeg) return true;
  }
  return false;
}

/// RANSAC restricted to `active` indices; candidates near-parallel to any of
/// `excluded` normals are skipped.
PlaneFit ransac_subset(const scene::PointCloud& cloud, const std::vector<std::size_t>& active,
                       const RansacConfig& cfg, std::uint64_t seed,
                       const std::vector<Vec3>& excluded) {
  const auto& pts = cloud.points;
  if (active.size() < cfg.min_inliers || active.size() < 3) {
    throw Error(ErrorCode::NoPlaneFound,
                fmt::format("{} points left, need at least {}", active.size(), cfg.min_inliers));
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, active.size() - 1);

  Plane best;
  std::size_t best_count = 0;
  bool found = false;

  for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
    const std::size_t a = pick(rng);
    std::size_t b = pick(rng);
    std::size_t c = pick(rng);
    if (a == b || a == c || b == c) continue;

    const Point3& p0 = pts[active[a]];
    const Vec3 cross = (pts[active[b]] - p0).cross(pts[active[c]] - p0);
    const double norm = cross.norm();
    if (norm < 1e-9) continue;

    const Vec3 n = cross / norm;
    if (!excluded.empty() && too_close_to(n, excluded)) continue;

    const Plane candidate{n, n.dot(p0)};
    std::size_t count = 0;
    for (auto i : active) {
      if (candidate.distance(pts[i]) <= cfg.inlier_threshold) ++count;
    }
    if (count > best_count) {
      best_count = count;
      best = candidate;
      found = true;
    }
  }

  if (!found || best_count < cfg.min_inliers) {
    throw Error(ErrorCode::NoPlaneFound,
                fmt::format("best consensus {} below min_inliers {}", best_count, cfg.min_inliers));
  }

  PlaneFit fit;
  fit.plane = best.canonical();
  fit.inliers = collect_inliers(pts, active, fit.plane, cfg.inlier_threshold);

  if (cfg.refine) {
    std::vector<Point3> support;
    support.reserve(fit.inliers.size());
    for (auto i : fit.inliers) support.push_back(pts[i]);
    Plane refined = fit_plane_lsq(support);
    if (excluded.empty() || !too_close_to(refined.normal, excluded)) {
      auto refit = collect_inliers(pts, active, refined, cfg.inlier_threshold);
      if (refit.size() >= cfg.min_inliers) {
        fit.plane = refined;
        fit.inliers = std::move(refit);
      }
    }
  }
  return fit;
}

}  // namespace

PlaneFit ransac_plane(const scene::PointCloud& cloud, const RansacConfig& cfg) {
  cfg.validate();
  if (cloud.size() < cfg.min_inliers || cloud.size() < 3) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("cloud has {} points, ransac needs at least {}", cloud.size(),
                            std::max<std::size_t>(cfg.min_inliers, 3)));
  }
  std::vector<std::size_t> all(cloud.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return ransac_subset(cloud, all, cfg, cfg.rng_seed, {});
}

std::vector<PlaneFit> extract_planes(const scene::PointCloud& cloud, const RansacConfig& cfg) {
  cfg.validate();
  if (cloud.empty()) throw Error(ErrorCode::InvalidArgument, "cloud is empty");

  std::vector<std::size_t> active(cloud.size());
  std::iota(active.begin(), active.end(), std::size_t{0});

  std::vector<PlaneFit> fits;
  std::vector<Vec3> normals;
  for (std::uint64_t k = 0; k < 3; ++k) {
    PlaneFit fit;
    try {
      fit = ransac_subset(cloud, active, cfg, cfg.rng_seed + k, normals);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoPlaneFound) throw;
      throw Error(ErrorCode::NoThreePlanes,
                  fmt::format("found {} of 3 planes: {}", fits.size(), e.what()));
    }
    normals.push_back(fit.plane.normal);

    std::vector<std::size_t> rest;
    rest.reserve(active.size() - fit.inliers.size());
    std::set_difference(active.begin(), active.end(), fit.inliers.begin(), fit.inliers.end(),
                        std::back_inserter(rest));
    active = std::move(rest);
    fits.push_back(std::move(fit));
  }

  auto horizontal = std::max_element(fits.begin(), fits.end(), [](const PlaneFit& a, const PlaneFit& b) {
    return std::abs(a.plane.normal.z()) < std::abs(b.plane.normal.z());
  });
  std::iter_swap(fits.begin(), horizontal);
  std::stable_sort(fits.begin() + 1, fits.end(), [](const PlaneFit& a, const PlaneFit& b) {
    return a.inliers.size() > b.inliers.size();
  });
  return fits;
}

}  // namespace weldcell::planefind
