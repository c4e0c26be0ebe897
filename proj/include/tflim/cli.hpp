#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace tflim::cli {

// Parameters of one invocation. Only the fields of `command` are
// meaningful; the others keep their defaults.
struct RunConfig {
  std::string command;
  std::string f;  // domain literals in canonical form
  std::string s;
  int d = 1;
  int n = 0;  // Nystrom nodes per axis; 0 picks a size from the band
  std::vector<double> c;
  std::vector<double> r;
  std::vector<double> eps;
  double tol = 0.0;
  int j_max = 0;  // 0 asks for the suggested truncation
  int k_max = 0;
  int k_count = 8;
  double reach = 50.0;
  std::string bump = "3/2";
  bool energy = false;
  bool partition_csv = false;
  double delta = 0.5;
  double width_scale = 1.0;
  int trials = 100;
  std::uint64_t seed = 1;
  std::string out;  // output directory; empty writes nothing
  bool svg = false;
  bool error_json = false;

  bool operator==(const RunConfig&) const = default;
};

// Parses arguments without the program name, fills defaults, canonicalizes
// domain literals and validates ranges. Throws ValidationError, including
// for unknown flags. `--help` yields an empty command and, if `help` is
// given, the help text.
RunConfig parse_args(const std::vector<std::string>& args, std::string* help = nullptr);

// Arguments that parse back to the same config.
std::vector<std::string> to_args(const RunConfig& cfg);

// The config as a JSON object with the fields of its command, in a fixed order.
std::string config_json(const RunConfig& cfg);

// Exit codes: 0 success, 2 validation error, 3 non-convergence, 1 anything
// else. Results go to `out` as JSON and, with --out, to files written by
// rename so no partial artifact is ever visible.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Worker count for grid scans from TFLIM_WORKERS (default 1 per hardware
// thread, at least 1).
int worker_count();

// Runs task(0..count-1) on at most `workers` threads. Results are consumed
// in index order by the caller, so output does not depend on scheduling.
// The first exception by index is rethrown.
void parallel_for(int count, int workers, const std::function<void(int)>& task);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

// Minimal polyline chart.
std::string svg_line_chart(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<Series>& series);

// Writes through a temporary file in the same directory and renames it.
void write_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace tflim::cli
