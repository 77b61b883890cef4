#include "weldcell/scene.hpp"

#include <cmath>
#include <random>

#include <fmt/core.h>

#include "weldcell/error.hpp"

namespace weldcell::scene {

char to_char(StructureKind kind) noexcept { return kind == StructureKind::L ? 'L' : 'U'; }

StructureKind structure_from_char(char c) {
  switch (c) {
    case 'L': case 'l': return StructureKind::L;
    case 'U': case 'u': return StructureKind::U;
    default: throw Error(ErrorCode::InvalidArgument, fmt::format("unknown structure kind '{}'", c));
  }
}

void StructureSpec::validate() const {
  if (!(horizontal_extent > 0.0) || !(vertical_extent > 0.0) || !(plate_depth > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "structure extents must be positive");
  }
  if (horizontal_extent > kWorkspaceHorizontal || vertical_extent > kWorkspaceVertical) {
    throw Error(ErrorCode::WorkspaceViolation,
                fmt::format("structure {}x{} mm exceeds the {}x{} mm workspace",
                            horizontal_extent, vertical_extent, kWorkspaceHorizontal,
                            kWorkspaceVertical));
  }
}

void SamplingSpec::validate() const {
  if (points_per_plane < 3) throw Error(ErrorCode::InvalidArgument, "points_per_plane must be >= 3");
  if (!(noise_sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise_sigma must be >= 0");
  if (!(outlier_fraction >= 0.0 && outlier_fraction < 0.5)) {
    throw Error(ErrorCode::InvalidArgument, "outlier_fraction must be in [0, 0.5)");
  }
}

StructureSpec default_structure(StructureKind kind) {
  StructureSpec spec;
  spec.kind = kind;
  spec.plate_depth = kind == StructureKind::L ? 150.0 : 300.0;
  spec.pose = Pose::Identity();
  spec.pose.translation() = Vec3(150.0, 150.0, 100.0);
  return spec;
}

StructureSpec canonical_structure() { return default_structure(StructureKind::U); }

SamplingSpec canonical_sampling() { return SamplingSpec{}; }

std::size_t outlier_count(std::size_t inliers, double fraction) {
  // round(f*(N+n)) - n is non-increasing in n with unit steps, so the first
  // zero is reached by a linear scan from 0.
  for (std::size_t n = 0;; ++n) {
    auto target = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(inliers + n)));
    if (target == n) return n;
  }
}

namespace {

struct Patch {
  Vec3 origin;
  Vec3 u;  // full-length edge vectors
  Vec3 v;
  Vec3 normal;
};

}  // namespace

Capture generate_structure(const StructureSpec& spec, const SamplingSpec& sampling) {
  spec.validate();
  sampling.validate();

  const double H = spec.horizontal_extent;
  const double V = spec.vertical_extent;
  const double D = spec.plate_depth;

  const std::array<Patch, 3> patches{{
      {Vec3::Zero(), Vec3(H, 0, 0), Vec3(0, D, 0), Vec3::UnitZ()},
      {Vec3::Zero(), Vec3(H, 0, 0), Vec3(0, 0, V), Vec3::UnitY()},
      {Vec3::Zero(), Vec3(0, D, 0), Vec3(0, 0, V), Vec3::UnitX()},
  }};

  std::mt19937_64 rng(sampling.rng_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const std::size_t n_in = 3 * sampling.points_per_plane;
  const std::size_t n_out = outlier_count(n_in, sampling.outlier_fraction);

  Capture out;
  out.cloud.points.reserve(n_in + n_out);
  out.cloud.labels.reserve(n_in + n_out);

  for (int label = 0; label < 3; ++label) {
    const Patch& patch = patches[static_cast<std::size_t>(label)];
    for (std::size_t i = 0; i < sampling.points_per_plane; ++i) {
      Point3 p = patch.origin + unit(rng) * patch.u + unit(rng) * patch.v;
      if (sampling.noise_sigma > 0.0) {
        double z = gauss(rng);
        while (std::abs(z) > 4.0) z = gauss(rng);
        p += z * sampling.noise_sigma * patch.normal;
      }
      out.cloud.points.push_back(spec.pose * p);
      out.cloud.labels.push_back(label);
    }
  }

  const Vec3 lo(0, 0, 0);
  const Vec3 hi(H, D, V);
  const Vec3 centre = 0.5 * (lo + hi);
  const Vec3 half = 0.6 * (hi - lo);  // 1.2 x extent
  for (std::size_t i = 0; i < n_out; ++i) {
    Point3 p(centre.x() + (2.0 * unit(rng) - 1.0) * half.x(),
             centre.y() + (2.0 * unit(rng) - 1.0) * half.y(),
             centre.z() + (2.0 * unit(rng) - 1.0) * half.z());
    out.cloud.points.push_back(spec.pose * p);
    out.cloud.labels.push_back(-1);
  }

  for (std::size_t k = 0; k < 3; ++k) {
    out.truth.planes[k] = Plane{patches[k].normal, 0.0}.transformed(spec.pose).canonical();
  }
  out.truth.corner = spec.pose.translation();
  out.truth.seam_dirs = {spec.pose.linear() * Vec3::UnitX(), spec.pose.linear() * Vec3::UnitZ()};
  out.truth.seam_lengths = {H, V};
  return out;
}

}  // namespace weldcell::scene
