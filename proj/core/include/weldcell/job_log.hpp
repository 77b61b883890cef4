#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace weldcell::operator_cli {

/// One welded job, distances in centimeters.
struct JobRecord {
  std::string timestamp;  // ISO 8601, UTC
  double vertical_welded_distance_cm{0.0};
  double horizontal_welded_distance_cm{0.0};
  double vertical_max_size_cm{0.0};
  double horizontal_max_size_cm{0.0};
  double process_time_s{0.0};
  double capture_time_s{0.0};
  std::string structure_type;
  int welding_scheme{0};
  int weave_sine_scheme{0};

  bool operator==(const JobRecord&) const = default;
};

inline constexpr std::string_view kJobLogHeader =
    "timestamp,vertical_welded_distance_cm,horizontal_welded_distance_cm,vertical_max_size_cm,"
    "horizontal_max_size_cm,process_time_s,capture_time_s,structure_type,welding_scheme,"
    "weave_sine_scheme";

inline double mm_to_cm(double mm) { return mm / 10.0; }

std::string format_row(const JobRecord& record);
JobRecord parse_row(std::string_view line, std::size_t line_no = 0);

/// Writes the header first when the file is new or empty, then one row.
void append_job_record(const JobRecord& record, const std::filesystem::path& path);

/// Throws ParseError when the header differs or a row is malformed.
std::vector<JobRecord> read_job_log(const std::filesystem::path& path);

std::string utc_timestamp();

}  // namespace weldcell::operator_cli
