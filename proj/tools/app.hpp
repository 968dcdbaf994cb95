#pragma once

#include "bicsep/formfactor.hpp"
#include "bicsep/grid.hpp"
#include "bicsep/local_potential.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace bicsep::app {

using json = nlohmann::ordered_json;

inline constexpr int schema_version = 1;

enum ExitCode { exit_ok = 0, exit_spec = 2, exit_numerical = 3, exit_ambiguous = 4 };

struct Numerics {
  double r_max = 40.0;
  Index nodes = 2000;
  double k_max = 40.0;
  Index momenta = 401;  // samples for transform and Jost series
  double kernel_R = 20.0;
  double jitter = 0.0;  // relative log-spacing jitter, drawn from --seed
  std::vector<double> box_lengths{40.0, 60.0, 80.0};
  double box_step = 0.0125;
  std::map<std::string, double> tolerances;
};

// Validated potential description. The raw document is kept for the report echo.
struct PotentialSpec {
  json raw;
  int epsilon = 1;
  std::optional<json> local;
  json formfactor;
  std::optional<json> source;
  Numerics numerics;
};

// Throws SpecParseError for malformed text and ValidationError for bad content.
PotentialSpec parse_spec(const std::string& text);
PotentialSpec load_spec(const std::filesystem::path& path);

// Everything a command needs, sampled on the spec grid.
struct Problem {
  RadialGrid grid;
  std::optional<LocalPotential> local;
  std::optional<SourceFunction> source;
  FormFactor u;
  int epsilon = 1;
  std::optional<double> design_k0;  // exp-times-poly root of U~
  std::optional<double> amplitude;  // engineered amplitude when requested
};

Problem materialize(const PotentialSpec& spec, std::uint64_t seed);

struct Series {
  std::string name;
  std::vector<std::string> columns;
  std::vector<Eigen::VectorXd> data;
};

struct Request {
  std::string command;
  std::string kind = "sine";  // transform
  double order = 0.0;         // hankel
  std::string theorem = "A";  // certify
  std::optional<double> k0;   // oracle
  std::uint64_t seed = 0;
  std::map<std::string, double> tolerances;  // command-line overrides
};

struct RunReport {
  json document;
  std::vector<Series> series;
  int exit_code = exit_ok;
};

RunReport run(const PotentialSpec& spec, const Request& request);

json request_to_json(const Request& r);
Request request_from_json(const json& j);

// Writes report.json and, for csv, one file per series.
void write_outputs(const RunReport& report, const std::filesystem::path& dir, bool csv);
std::string series_csv(const Series& s);

// Re-runs the request echoed in a report and compares verdicts.
struct ReplayResult {
  bool identical = false;
  json expected;
  json actual;
};
ReplayResult replay(const json& report);

}  // namespace bicsep::app
