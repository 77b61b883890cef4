#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/core.h>
#include <fmt/os.h>

#include "weldcell/error.hpp"
#include "weldcell/scene.hpp"

namespace weldcell::scene {

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

double parse_double(std::string_view tok, std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
    throw ParseError(line, 0, fmt::format("invalid number '{}'", tok));
  }
  return v;
}

int parse_label(std::string_view tok, std::size_t line) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size() || v < -1 || v > 2) {
    throw ParseError(line, 0, fmt::format("invalid label '{}'", tok));
  }
  return v;
}

void append_row(PointCloud& cloud, const std::vector<std::string_view>& fields, bool labelled,
                std::size_t line) {
  const std::size_t expected = labelled ? 4 : 3;
  if (fields.size() != expected) {
    throw ParseError(line, 0, fmt::format("expected {} fields, got {}", expected, fields.size()));
  }
  cloud.points.emplace_back(parse_double(fields[0], line), parse_double(fields[1], line),
                            parse_double(fields[2], line));
  if (labelled) cloud.labels.push_back(parse_label(fields[3], line));
}

PointCloud read_csv(std::istream& in) {
  PointCloud cloud;
  std::string raw;
  std::size_t line = 0;
  bool labelled = false;
  bool header_seen = false;
  while (std::getline(in, raw)) {
    ++line;
    auto text = trim(raw);
    if (!header_seen) {
      if (text == "x,y,z") {
        labelled = false;
      } else if (text == "x,y,z,label") {
        labelled = true;
      } else {
        throw ParseError(line, 0, "expected header 'x,y,z' or 'x,y,z,label'");
      }
      header_seen = true;
      continue;
    }
    if (text.empty()) continue;
    append_row(cloud, split(text, ','), labelled, line);
  }
  if (!header_seen) throw ParseError(1, 0, "empty cloud file");
  return cloud;
}

PointCloud read_ply(std::istream& in) {
  std::string raw;
  std::size_t line = 0;
  std::size_t declared = 0;
  bool have_count = false;
  std::vector<std::string> props;
  bool in_vertex = false;

  auto next = [&]() -> bool {
    if (!std::getline(in, raw)) return false;
    ++line;
    return true;
  };

  if (!next() || trim(raw) != "ply") throw ParseError(1, 0, "missing 'ply' magic");
  bool ended = false;
  while (next()) {
    auto toks = split_ws(trim(raw));
    if (toks.empty()) continue;
    if (toks[0] == "format") {
      if (toks.size() < 2 || toks[1] != "ascii") throw ParseError(line, 0, "only ascii PLY is supported");
    } else if (toks[0] == "comment" || toks[0] == "obj_info") {
    } else if (toks[0] == "element") {
      if (toks.size() != 3) throw ParseError(line, 0, "malformed element line");
      in_vertex = toks[1] == "vertex";
      if (in_vertex) {
        std::size_t n = 0;
        auto [ptr, ec] = std::from_chars(toks[2].data(), toks[2].data() + toks[2].size(), n);
        if (ec != std::errc{} || ptr != toks[2].data() + toks[2].size()) {
          throw ParseError(line, 0, "invalid vertex count");
        }
        declared = n;
        have_count = true;
      } else {
        throw ParseError(line, 0, fmt::format("unsupported element '{}'", toks[1]));
      }
    } else if (toks[0] == "property") {
      if (!in_vertex || toks.size() != 3) throw ParseError(line, 0, "malformed property line");
      props.emplace_back(toks[2]);
    } else if (toks[0] == "end_header") {
      ended = true;
      break;
    } else {
      throw ParseError(line, 0, fmt::format("unknown header keyword '{}'", toks[0]));
    }
  }
  if (!ended) throw ParseError(line, 0, "missing end_header");
  if (!have_count) throw ParseError(line, 0, "missing 'element vertex'");

  bool labelled = false;
  if (props == std::vector<std::string>{"x", "y", "z"}) {
    labelled = false;
  } else if (props == std::vector<std::string>{"x", "y", "z", "label"}) {
    labelled = true;
  } else {
    throw ParseError(line, 0, "vertex properties must be x y z [label]");
  }

  PointCloud cloud;
  cloud.points.reserve(declared);
  while (next()) {
    auto text = trim(raw);
    if (text.empty()) continue;
    if (cloud.points.size() == declared) {
      throw ParseError(line, 0, fmt::format("more vertex rows than the declared {}", declared));
    }
    append_row(cloud, split_ws(text), labelled, line);
  }
  if (cloud.points.size() != declared) {
    throw ParseError(line, 0,
                     fmt::format("declared {} vertices but found {}", declared, cloud.points.size()));
  }
  return cloud;
}

}  // namespace

void save_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format) {
  if (cloud.has_labels() && cloud.labels.size() != cloud.points.size()) {
    throw Error(ErrorCode::InvalidArgument, "label count does not match point count");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, fmt::format("cannot write '{}'", path.string()));

  const bool labelled = cloud.has_labels();
  std::string buf;
  if (format == CloudFormat::PlyAscii) {
    buf += fmt::format("ply\nformat ascii 1.0\nelement vertex {}\n", cloud.size());
    buf += "property float x\nproperty float y\nproperty float z\n";
    if (labelled) buf += "property int label\n";
    buf += "end_header\n";
  } else {
    buf += labelled ? "x,y,z,label\n" : "x,y,z\n";
  }
  const char* sep = format == CloudFormat::PlyAscii ? " " : ",";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    buf += fmt::format("{}{}{}{}{}", p.x(), sep, p.y(), sep, p.z());
    if (labelled) buf += fmt::format("{}{}", sep, cloud.labels[i]);
    buf += '\n';
  }
  out << buf;
  if (!out) throw Error(ErrorCode::IoError, fmt::format("write failed for '{}'", path.string()));
}

PointCloud load_cloud(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, fmt::format("cannot read '{}'", path.string()));
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::istringstream stream(content);
  if (content.rfind("ply", 0) == 0) return read_ply(stream);
  return read_csv(stream);
}

}  // namespace weldcell::scene
