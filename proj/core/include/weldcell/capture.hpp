#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "weldcell/planefind.hpp"
#include "weldcell/scene.hpp"
#include "weldcell/seamgeom.hpp"
#include "weldcell/weldprog.hpp"

namespace weldcell::handler {

inline constexpr std::size_t kMaxPayloadPoints = 5000;

/// Geometry recovered from one cloud. Plane 0 is the base plate; normals
/// point to the open side of the corner, where the torch works.
struct CaptureAnalysis {
  std::array<Plane, 3> planes;
  std::array<std::vector<std::size_t>, 3> inliers;
  Point3 corner;
  seamgeom::SeamSegment horizontal;
  seamgeom::SeamSegment vertical;
};

CaptureAnalysis analyze(const scene::PointCloud& cloud, const planefind::RansacConfig& cfg,
                        double band = seamgeom::kDefaultBand);

/// Body of AnswerCapture.
struct CapturePayload {
  char structure{'U'};
  std::array<Plane, 3> planes;
  Point3 corner{Point3::Zero()};
  seamgeom::SeamSegment horizontal;
  seamgeom::SeamSegment vertical;
  std::vector<Point3> cloud;  // at most kMaxPayloadPoints
  std::size_t cloud_points{0};  // size of the full server-side cloud
  double capture_time_s{0.0};
};

CapturePayload make_payload(const CaptureAnalysis& analysis, const scene::PointCloud& cloud,
                            char structure, double capture_time_s);

nlohmann::json to_json(const CapturePayload& payload);
/// Throws DecodeError on a missing or mistyped field.
CapturePayload payload_from_json(const nlohmann::json& j);

/// Every k-th point so that at most `limit` remain.
std::vector<Point3> downsample(const std::vector<Point3>& points, std::size_t limit);

/// Seam selections for codegen: a zero length leaves that seam out.
std::vector<weldprog::SeamSelection> select_seams(const CapturePayload& payload, double length_h,
                                                  double length_v);

struct SyntheticSource {
  scene::SamplingSpec sampling{scene::canonical_sampling()};
  /// Overrides default_structure(kind) when set.
  std::optional<scene::StructureSpec> structure;
};
struct FileSource {
  std::filesystem::path path;
};
struct CloudSource {
  scene::PointCloud cloud;
};
using SceneSource = std::variant<SyntheticSource, FileSource, CloudSource>;

struct CaptureResult {
  scene::PointCloud cloud;
  CaptureAnalysis analysis;
  CapturePayload payload;
};

/// Acquires one cloud and runs the geometry. `kind` picks the synthetic
/// structure and is only reported for file and in-memory sources.
CaptureResult capture_once(const SceneSource& source, scene::StructureKind kind,
                           const planefind::RansacConfig& cfg);

}  // namespace weldcell::handler
