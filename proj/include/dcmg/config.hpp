#pragma once

// Scenario files (JSON, version 1) and the trace/metrics serializations.

#include "dcmg/sim.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcmg {

/// Schema violation in a scenario document. The message carries the file
/// line where the offending key or value starts, when known.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File-system failure (missing file, unwritable output, malformed CSV).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kScenarioVersion = 1;

struct ScenarioFile {
  Scenario scenario;
  std::string output_prefix;  // empty: caller decides
};

/// Parses and schema-checks a document. `origin` prefixes error messages.
ScenarioFile parse_scenario(const std::string& text, const std::string& origin = "<input>");
ScenarioFile load_scenario(const std::filesystem::path& path);

/// Fully materialized document: every field present, defaults included.
nlohmann::ordered_json scenario_to_json(const ScenarioFile& file);
ScenarioFile scenario_from_json(const nlohmann::json& doc);

/// Replaces the value at a dotted path such as "controller.adaptation_gain.0"
/// or "attack.channels.1.exp_rate". The path must exist in the
/// materialized document.
ScenarioFile with_parameter(const ScenarioFile& file, const std::string& path, double value);

/// Resolves a scenario path: as given if it exists, else relative to
/// $DCMG_CONFIG_DIR, else relative to the bundled scenario directory.
std::filesystem::path resolve_config_path(const std::filesystem::path& path);

nlohmann::ordered_json equilibrium_to_json(const Equilibrium& eq);
nlohmann::ordered_json metrics_to_json(const Metrics& m);

std::vector<std::string> trace_header(std::size_t n_sources);
void write_trace_csv(std::ostream& os, const Trace& trace);
void write_trace_csv(const std::filesystem::path& path, const Trace& trace);

/// Column-oriented view of a trace CSV.
struct TraceTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
  /// Index of a column, or -1.
  int find(const std::string& name) const;
};

TraceTable read_trace_csv(std::istream& is);
TraceTable read_trace_csv(const std::filesystem::path& path);

struct PlotOptions {
  double clip = 1e6;  // |y| beyond this is clipped to the axis edge
  int width = 900;
  int panel_height = 220;
};

/// Four stacked panels: voltages, currents, adaptive gains, H. Throws
/// IoError("no samples") for a header-only table.
std::string render_svg(const TraceTable& table, const PlotOptions& options = {});

}  // namespace dcmg
