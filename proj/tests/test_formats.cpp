#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <sstream>
#include <string>

#include <json.hpp>

#include "petc/errors.hpp"
#include "petc/netsim.hpp"
#include "petc/scenario.hpp"

using petc::Vector;
namespace scenario = petc::scenario;

#ifndef PETC_CONFIG_DIR
#error "PETC_CONFIG_DIR must point at the shipped scenario files"
#endif

namespace {

std::string config_path(const char* name) {
  return std::string(PETC_CONFIG_DIR) + "/" + name;
}

std::string minimal_config(const std::string& tweak) {
  std::string base = R"({
    "mode": "no_delay",
    "plant": {"A": [[0.0]], "B": [[1.0]]},
    "graph": {"edges": [[1, 2]]},
    "initial_states": [[1.0], [-1.0]],
    "timing": {"h": 0.01, "duration": 1.0},
    "design": {"alpha": 0.5, "eta": 1.0}
  })";
  if (!tweak.empty()) {
    base.insert(base.rfind('}'), "," + tweak);
  }
  return base;
}

}  // namespace

TEST_CASE("the shipped four-agent delay scenario parses with its literal values") {
  const scenario::ScenarioConfig cfg =
      scenario::load_scenario(config_path("path4_delay.json"));
  CHECK(cfg.mode == petc::synthesis::Mode::kDelay);
  CHECK(cfg.num_agents == 4);
  CHECK(cfg.A(0, 1) == -0.8);
  CHECK(cfg.B(1, 0) == -1.1);
  REQUIRE(cfg.edges.size() == 3);
  CHECK(cfg.edges[0] == std::pair<int, int>{0, 1});
  CHECK(cfg.h == 0.002);
  CHECK(cfg.d == 0.014);
  REQUIRE(cfg.delay_values.size() == 3);
  CHECK(cfg.delay_values[2] == 0.014);
  CHECK(cfg.eta.value() == 10.85);
  REQUIRE(cfg.P.has_value());
  CHECK((*cfg.P)(0, 0) == 0.5859);
  CHECK(cfg.initial_states[3](1) == 15.1);
  CHECK(cfg.seed == 2027);
}

TEST_CASE("config validation points at the offending field") {
  CHECK_THROWS_AS(scenario::parse_scenario("{"), petc::ConfigError);
  CHECK_THROWS_AS(scenario::parse_scenario("[]"), petc::ConfigError);

  std::string no_mode = minimal_config("");
  no_mode.replace(no_mode.find("\"mode\""), 6, "\"mood\"");
  CHECK_THROWS_AS(scenario::parse_scenario(no_mode), petc::ConfigError);

  std::string bad_edge = minimal_config("");
  bad_edge.replace(bad_edge.find("[[1, 2]]"), 8, "[[1, 3]]");
  CHECK_THROWS_AS(scenario::parse_scenario(bad_edge), petc::ConfigError);

  std::string wide_a = minimal_config("");
  wide_a.replace(wide_a.find("[[0.0]]"), 7, "[[0.0, 1.0]]");
  CHECK_THROWS_AS(scenario::parse_scenario(wide_a), petc::ConfigError);

  std::string ragged = minimal_config("");
  ragged.replace(ragged.find("[[1.0]]"), 7, "[[1.0], [2.0, 3.0]]");
  CHECK_THROWS_AS(scenario::parse_scenario(ragged), petc::ConfigError);

  // A delay value beyond the stated bound is rejected at parse time.
  std::string base = scenario::read_text_file(config_path("path4_delay.json"));
  const std::string needle = "0.014]";
  base.replace(base.find(needle), needle.size(), "0.016]");
  CHECK_THROWS_AS(scenario::parse_scenario(base), petc::ConfigError);
}

TEST_CASE("full-precision serialization round-trips exactly") {
  const double cases[] = {0.1,      1.0 / 3.0, -2.5e17, 3.141592653589793,
                          1e-300,   -0.0,      42.0,    6.02214076e23};
  for (double v : cases) {
    const std::string text = scenario::format_full(v);
    const double back = std::strtod(text.c_str(), nullptr);
    CHECK(back == v);
  }
}

TEST_CASE("csv writers emit fixed headers and one row per agent instant") {
  const scenario::ScenarioConfig cfg =
      scenario::load_scenario(config_path("path4_no_delay.json"));
  const petc::synthesis::Design design = scenario::synthesize_scenario(cfg);
  petc::netsim::RunOptions opts = scenario::run_options(cfg);
  opts.duration = 0.01;  // five grid steps
  const petc::netsim::RunResult result =
      petc::netsim::simulate(design, scenario::stacked_x0(cfg), opts);

  std::ostringstream tio;
  scenario::write_trajectory_csv(tio, design, result.trajectory);
  std::istringstream lines(tio.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == "t,agent,x1,x2,u1");
  long rows = 0;
  while (std::getline(lines, line)) ++rows;
  CHECK(rows == 6 * 4);

  std::ostringstream mio;
  scenario::write_metrics_csv(mio, result.metrics);
  CHECK(mio.str().rfind("t,V,envelope,max_disagreement\n", 0) == 0);

  std::ostringstream eio;
  scenario::write_events_csv(eio, result.events, design.event.h);
  CHECK(eio.str().rfind("t,agent\n", 0) == 0);

  // First trajectory row carries the exact initial state of agent 1.
  std::istringstream again(tio.str());
  std::getline(again, line);
  std::getline(again, line);
  std::istringstream fields(line);
  std::string cell;
  std::getline(fields, cell, ',');
  CHECK(std::strtod(cell.c_str(), nullptr) == 0.0);
  std::getline(fields, cell, ',');
  CHECK(cell == "1");
  std::getline(fields, cell, ',');
  CHECK(std::strtod(cell.c_str(), nullptr) == -5.5);
}

TEST_CASE("the synthesis report carries the delay-step count and margins") {
  const scenario::ScenarioConfig cfg =
      scenario::load_scenario(config_path("path4_delay.json"));
  const petc::synthesis::Design design = scenario::synthesize_scenario(cfg);
  const std::string text = scenario::synth_report(cfg, design);
  const nlohmann::json report = nlohmann::json::parse(text);
  CHECK(report["event"]["p"] == 7);
  CHECK(report["event"]["feasibility_margin"].get<double>() > 0.0);
  CHECK(report["event"]["eta_source"] == "config");
  CHECK(report["gains"]["c1"].get<double>() ==
        doctest::Approx(2.0 / (2.0 - std::sqrt(2.0))));
  CHECK(report["eta_floor_by_b"].is_array());
}

TEST_CASE("manifests hash the config text stably") {
  CHECK(scenario::fnv1a64("") == 14695981039346656037ULL);
  CHECK(scenario::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);

  const std::string manifest = scenario::run_manifest(
      "{}", 7, "2026-01-01T00:00:00Z", "2026-01-01T00:00:01Z",
      {"trajectory.csv", "events.csv"});
  const nlohmann::json j = nlohmann::json::parse(manifest);
  CHECK(j["seed"] == 7);
  CHECK(j["tool_version"] == scenario::kToolVersion);
  CHECK(j["outputs"].size() == 2);
  const std::string hash = j["config_hash"].get<std::string>();
  CHECK(hash.size() == 16);
}
