#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "weldcell/geometry.hpp"

namespace weldcell::scene {

/// Ordered point list with optional ground-truth plane labels
/// (0 base, 1 back wall, 2 side wall, -1 outlier).
struct PointCloud {
  std::vector<Point3> points;
  std::vector<int> labels;  // empty, or same length as points

  [[nodiscard]] std::size_t size() const noexcept { return points.size(); }
  [[nodiscard]] bool empty() const noexcept { return points.empty(); }
  [[nodiscard]] bool has_labels() const noexcept { return !labels.empty(); }

  bool operator==(const PointCloud&) const = default;
};

enum class StructureKind { L, U };

char to_char(StructureKind kind) noexcept;
StructureKind structure_from_char(char c);

/// Workspace reach of the fixed-base arm: 900 mm horizontal, 700 mm vertical.
inline constexpr double kWorkspaceHorizontal = 900.0;
inline constexpr double kWorkspaceVertical = 700.0;

/// Three plates meeting at one corner. In the structure frame the corner is
/// the origin, the base plate lies in z=0 over [0,H]x[0,D], the back wall in
/// y=0 over [0,H]x[0,V] and the side wall in x=0 over [0,D]x[0,V]. The
/// horizontal seam runs along +x, the vertical seam along +z.
struct StructureSpec {
  StructureKind kind{StructureKind::U};
  double horizontal_extent{600.0};
  double vertical_extent{400.0};
  double plate_depth{300.0};
  Pose pose{Pose::Identity()};  // structure frame -> camera frame

  void validate() const;
};

struct SamplingSpec {
  std::size_t points_per_plane{15000};
  double noise_sigma{0.3};
  double outlier_fraction{0.10};
  std::uint64_t rng_seed{7};

  void validate() const;
};

struct GroundTruth {
  std::array<Plane, 3> planes;       // base, back wall, side wall (canonical sign)
  Point3 corner;
  std::array<Vec3, 2> seam_dirs;     // horizontal, vertical
  std::array<double, 2> seam_lengths;
};

struct Capture {
  PointCloud cloud;
  GroundTruth truth;
};

/// Default spec for the given kind placed at the canonical cell pose.
StructureSpec default_structure(StructureKind kind);

/// 600 mm / 400 mm U structure, 50k points, sigma 0.3 mm, 10% outliers, seed 7.
StructureSpec canonical_structure();
SamplingSpec canonical_sampling();

/// Samples the three patches with normal-direction Gaussian noise (truncated
/// at 4 sigma) and appends uniform outliers from a box 20% larger than the
/// structure. Output is bit-reproducible for a fixed seed.
Capture generate_structure(const StructureSpec& spec, const SamplingSpec& sampling);

/// Number of outliers n such that n == round(fraction * (inliers + n)).
std::size_t outlier_count(std::size_t inliers, double fraction);

// -- file I/O ---------------------------------------------------------------

enum class CloudFormat { PlyAscii, Csv };

void save_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format);

/// Format is detected from the content: files starting with "ply" are PLY,
/// everything else is CSV with an `x,y,z[,label]` header.
PointCloud load_cloud(const std::filesystem::path& path);

}  // namespace weldcell::scene
