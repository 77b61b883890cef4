#include "weldcell/capture.hpp"

#include <algorithm>
#include <chrono>

#include <fmt/core.h>

#include "weldcell/error.hpp"

namespace weldcell::handler {

namespace {

std::vector<Point3> gather(const scene::PointCloud& cloud, const std::vector<std::size_t>& idx) {
  std::vector<Point3> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(cloud.points[i]);
  return out;
}

Point3 centroid(const std::vector<Point3>& a, const std::vector<Point3>& b) {
  Point3 sum = Point3::Zero();
  for (const auto& p : a) sum += p;
  for (const auto& p : b) sum += p;
  return sum / static_cast<double>(a.size() + b.size());
}

struct SeamFit {
  seamgeom::SeamSegment seam;
  seamgeom::Extent extent;
};

SeamFit fit_seam(const CaptureAnalysis& a, const std::array<std::vector<Point3>, 3>& plate, int i, int j,
                 double band, seamgeom::OrientationClass role) {
  seamgeom::Line3 line = seamgeom::intersect_two_planes(a.planes[i], a.planes[j]);
  line.origin = a.corner;

  // Point the seam along the material: the plate points near the line lie on
  // one side of the corner.
  std::vector<double> ts;
  for (int k : {i, j}) {
    for (const auto& p : plate[k]) {
      if (line.distance(p) <= band) ts.push_back(line.parameter(p));
    }
  }
  if (ts.empty()) throw Error(ErrorCode::EmptySeam, "no plate points within the seam band");
  auto mid = ts.begin() + static_cast<std::ptrdiff_t>(ts.size() / 2);
  std::nth_element(ts.begin(), mid, ts.end());
  if (*mid < 0.0) line.direction = -line.direction;

  const auto extent = seamgeom::seam_extent(line, plate[i], plate[j], band);
  if (!(extent.t_max > 0.0)) throw Error(ErrorCode::EmptySeam, "seam has no extent beyond the corner");

  SeamFit fit;
  fit.extent = extent;
  fit.seam.corner = a.corner;
  fit.seam.direction = line.direction;
  fit.seam.length_max = seamgeom::corner_length(extent);
  fit.seam.plane_pair = {i, j};
  fit.seam.orientation_class = role;
  return fit;
}

}  // namespace

CaptureAnalysis analyze(const scene::PointCloud& cloud, const planefind::RansacConfig& cfg, double band) {
  auto fits = planefind::extract_planes(cloud, cfg);

  CaptureAnalysis a;
  std::array<std::vector<Point3>, 3> plate;
  for (int k = 0; k < 3; ++k) {
    a.inliers[k] = std::move(fits[k].inliers);
    plate[k] = gather(cloud, a.inliers[k]);
  }
  for (int k = 0; k < 3; ++k) {
    const Point3 others = centroid(plate[(k + 1) % 3], plate[(k + 2) % 3]);
    a.planes[k] = seamgeom::orient_toward(fits[k].plane, others);
  }
  a.corner = seamgeom::intersect_three_planes(a.planes[0], a.planes[1], a.planes[2]);

  using seamgeom::OrientationClass;
  a.vertical = fit_seam(a, plate, 1, 2, band, OrientationClass::Vertical).seam;
  auto h1 = fit_seam(a, plate, 0, 1, band, OrientationClass::Horizontal);
  auto h2 = fit_seam(a, plate, 0, 2, band, OrientationClass::Horizontal);
  a.horizontal = h1.seam.length_max >= h2.seam.length_max ? h1.seam : h2.seam;
  return a;
}

std::vector<Point3> downsample(const std::vector<Point3>& points, std::size_t limit) {
  if (limit == 0) return {};
  const std::size_t stride = (points.size() + limit - 1) / limit;
  if (stride <= 1) return points;
  std::vector<Point3> out;
  out.reserve(points.size() / stride + 1);
  for (std::size_t i = 0; i < points.size(); i += stride) out.push_back(points[i]);
  return out;
}

CapturePayload make_payload(const CaptureAnalysis& analysis, const scene::PointCloud& cloud,
                            char structure, double capture_time_s) {
  CapturePayload p;
  p.structure = structure;
  p.planes = analysis.planes;
  p.corner = analysis.corner;
  p.horizontal = analysis.horizontal;
  p.vertical = analysis.vertical;
  p.cloud = downsample(cloud.points, kMaxPayloadPoints);
  p.cloud_points = cloud.size();
  p.capture_time_s = capture_time_s;
  return p;
}

namespace {

using nlohmann::json;

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::DecodeError, "expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json seam_json(const seamgeom::SeamSegment& s) {
  return {
      {"corner", vec(s.corner)},
      {"direction", vec(s.direction)},
      {"length_max", s.length_max},
      {"plane_pair", json::array({s.plane_pair.first, s.plane_pair.second})},
      {"orientation_class", s.orientation_class == seamgeom::OrientationClass::Horizontal ? "horizontal" : "vertical"},
  };
}

seamgeom::SeamSegment seam_from(const json& j) {
  seamgeom::SeamSegment s;
  s.corner = vec_from(j.at("corner"));
  s.direction = vec_from(j.at("direction"));
  s.length_max = j.at("length_max").get<double>();
  const auto& pair = j.at("plane_pair");
  s.plane_pair = {pair.at(0).get<int>(), pair.at(1).get<int>()};
  const auto cls = j.at("orientation_class").get<std::string>();
  if (cls == "horizontal") {
    s.orientation_class = seamgeom::OrientationClass::Horizontal;
  } else if (cls == "vertical") {
    s.orientation_class = seamgeom::OrientationClass::Vertical;
  } else {
    throw Error(ErrorCode::DecodeError, fmt::format("unknown orientation_class '{}'", cls));
  }
  for (int k : {s.plane_pair.first, s.plane_pair.second}) {
    if (k < 0 || k > 2) throw Error(ErrorCode::DecodeError, "plane_pair index out of range");
  }
  return s;
}

}  // namespace

json to_json(const CapturePayload& p) {
  json planes = json::array();
  for (const auto& pl : p.planes) planes.push_back({{"normal", vec(pl.normal)}, {"d", pl.d}});
  json cloud = json::array();
  for (const auto& pt : p.cloud) cloud.push_back(vec(pt));
  return {
      {"structure", std::string(1, p.structure)},
      {"planes", std::move(planes)},
      {"corner", vec(p.corner)},
      {"seams", {{"horizontal", seam_json(p.horizontal)}, {"vertical", seam_json(p.vertical)}}},
      {"cloud", std::move(cloud)},
      {"cloud_points", p.cloud_points},
      {"capture_time_s", p.capture_time_s},
  };
}

CapturePayload payload_from_json(const json& j) {
  try {
    CapturePayload p;
    const auto s = j.at("structure").get<std::string>();
    if (s.size() != 1) throw Error(ErrorCode::DecodeError, "structure must be one character");
    p.structure = s[0];
    const auto& planes = j.at("planes");
    if (!planes.is_array() || planes.size() != 3) throw Error(ErrorCode::DecodeError, "expected 3 planes");
    for (std::size_t k = 0; k < 3; ++k) {
      p.planes[k].normal = vec_from(planes[k].at("normal"));
      p.planes[k].d = planes[k].at("d").get<double>();
    }
    p.corner = vec_from(j.at("corner"));
    p.horizontal = seam_from(j.at("seams").at("horizontal"));
    p.vertical = seam_from(j.at("seams").at("vertical"));
    for (const auto& pt : j.at("cloud")) p.cloud.push_back(vec_from(pt));
    p.cloud_points = j.at("cloud_points").get<std::size_t>();
    p.capture_time_s = j.at("capture_time_s").get<double>();
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::DecodeError, fmt::format("invalid capture payload: {}", e.what()));
  }
}

std::vector<weldprog::SeamSelection> select_seams(const CapturePayload& payload, double length_h,
                                                  double length_v) {
  std::vector<weldprog::SeamSelection> out;
  auto add = [&](const seamgeom::SeamSegment& seam, double length) {
    if (length == 0.0) return;
    weldprog::SeamSelection sel;
    sel.seam = seam;
    sel.selected_length = length;
    sel.planes = {payload.planes[seam.plane_pair.first], payload.planes[seam.plane_pair.second]};
    out.push_back(sel);
  };
  add(payload.horizontal, length_h);
  add(payload.vertical, length_v);
  return out;
}

CaptureResult capture_once(const SceneSource& source, scene::StructureKind kind,
                           const planefind::RansacConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  CaptureResult r;
  if (const auto* syn = std::get_if<SyntheticSource>(&source)) {
    const auto spec = syn->structure ? *syn->structure : scene::default_structure(kind);
    r.cloud = scene::generate_structure(spec, syn->sampling).cloud;
    kind = spec.kind;
  } else if (const auto* file = std::get_if<FileSource>(&source)) {
    r.cloud = scene::load_cloud(file->path);
  } else {
    r.cloud = std::get<CloudSource>(source).cloud;
  }
  r.analysis = analyze(r.cloud, cfg);
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.payload = make_payload(r.analysis, r.cloud, scene::to_char(kind), elapsed);
  return r;
}

}  // namespace weldcell::handler
