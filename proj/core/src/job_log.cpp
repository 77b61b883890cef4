#include "weldcell/job_log.hpp"

#include <charconv>
#include <chrono>
#include <ctime>
#include <fstream>

#include <fmt/core.h>

#include "weldcell/error.hpp"

namespace weldcell::operator_cli {

std::string format_row(const JobRecord& r) {
  if (r.structure_type.find_first_of(",\n\"") != std::string::npos) {
    throw Error(ErrorCode::InvalidArgument, "structure_type may not contain CSV metacharacters");
  }
  return fmt::format("{},{},{},{},{},{},{},{},{},{}", r.timestamp, r.vertical_welded_distance_cm,
                     r.horizontal_welded_distance_cm, r.vertical_max_size_cm, r.horizontal_max_size_cm,
                     r.process_time_s, r.capture_time_s, r.structure_type, r.welding_scheme,
                     r.weave_sine_scheme);
}

namespace {

template <typename T>
T field(std::string_view text, std::size_t line_no, std::size_t column) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ParseError(line_no, column, fmt::format("invalid number '{}'", text));
  }
  return value;
}

}  // namespace

JobRecord parse_row(std::string_view line, std::size_t line_no) {
  std::vector<std::string_view> cols;
  std::vector<std::size_t> starts;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    starts.push_back(pos + 1);
    cols.push_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  if (cols.size() != 10) {
    throw ParseError(line_no, 1, fmt::format("expected 10 fields, found {}", cols.size()));
  }
  JobRecord r;
  r.timestamp = std::string(cols[0]);
  r.vertical_welded_distance_cm = field<double>(cols[1], line_no, starts[1]);
  r.horizontal_welded_distance_cm = field<double>(cols[2], line_no, starts[2]);
  r.vertical_max_size_cm = field<double>(cols[3], line_no, starts[3]);
  r.horizontal_max_size_cm = field<double>(cols[4], line_no, starts[4]);
  r.process_time_s = field<double>(cols[5], line_no, starts[5]);
  r.capture_time_s = field<double>(cols[6], line_no, starts[6]);
  r.structure_type = std::string(cols[7]);
  r.welding_scheme = field<int>(cols[8], line_no, starts[8]);
  r.weave_sine_scheme = field<int>(cols[9], line_no, starts[9]);
  return r;
}

void append_job_record(const JobRecord& record, const std::filesystem::path& path) {
  const std::string row = format_row(record);
  std::error_code ec;
  const bool fresh = !std::filesystem::exists(path, ec) || std::filesystem::file_size(path, ec) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error(ErrorCode::IoError, fmt::format("cannot open {}", path.string()));
  if (fresh) out << kJobLogHeader << '\n';
  out << row << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, fmt::format("write to {} failed", path.string()));
}

std::vector<JobRecord> read_job_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, fmt::format("cannot open {}", path.string()));
  std::string line;
  if (!std::getline(in, line) || line != kJobLogHeader) {
    throw ParseError(1, 1, "job log header does not match");
  }
  std::vector<JobRecord> rows;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    rows.push_back(parse_row(line, n));
  }
  return rows;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace weldcell::operator_cli
