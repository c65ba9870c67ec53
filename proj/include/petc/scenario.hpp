#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "petc/netsim.hpp"
#include "petc/synthesis.hpp"

namespace petc::scenario {

inline constexpr const char* kToolVersion = "1.0.0";

/// One scenario file, validated but not yet synthesized.  Agent ids and edge
/// endpoints are 1-based on disk and 0-based here.
struct ScenarioConfig {
  std::string name;
  synthesis::Mode mode = synthesis::Mode::kNoDelay;
  Matrix A;
  Matrix B;
  int num_agents = 0;
  std::vector<std::pair<int, int>> edges;
  std::vector<Vector> initial_states;
  double h = 0;
  double duration = 20.0;
  int substeps = 1;
  double d = 0;
  std::vector<double> delay_values;
  bool per_recipient_delays = false;
  double sigma = 0.5;
  double b = 1.0;
  std::optional<double> alpha;
  std::optional<double> coupling;
  std::optional<double> eps;
  std::optional<double> eta;
  std::optional<Matrix> P;
  std::uint64_t seed = 0;
  double metrics_window = 1.0;
};

ScenarioConfig parse_scenario(const std::string& json_text);
ScenarioConfig load_scenario(const std::string& path);
std::string read_text_file(const std::string& path);

Vector stacked_x0(const ScenarioConfig& cfg);
synthesis::Design synthesize_scenario(const ScenarioConfig& cfg);
netsim::RunOptions run_options(const ScenarioConfig& cfg);

/// 17-significant-digit decimal form; parses back to the identical double.
std::string format_full(double v);

std::uint64_t fnv1a64(const std::string& text);
std::string utc_timestamp();

void write_trajectory_csv(std::ostream& out, const synthesis::Design& design,
                          const netsim::TrajectoryLog& log);
void write_events_csv(std::ostream& out, const std::vector<netsim::Event>& events,
                      double h);
void write_metrics_csv(std::ostream& out, const netsim::MetricsReport& metrics);

std::string synth_report(const ScenarioConfig& cfg, const synthesis::Design& design);
std::string run_manifest(const std::string& config_text, std::uint64_t seed,
                         const std::string& started, const std::string& finished,
                         const std::vector<std::string>& output_paths);

}  // namespace petc::scenario
