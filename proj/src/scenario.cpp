#include "petc/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "petc/errors.hpp"
#include "petc/graph.hpp"

namespace petc::scenario {

using nlohmann::json;

namespace {

const json& require_field(const json& j, const char* key, const char* where) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw ConfigError(std::string("config: missing \"") + key + "\" in " + where);
  }
  return *it;
}

double require_number(const json& j, const char* key, const char* where) {
  const json& v = require_field(j, key, where);
  if (!v.is_number()) {
    throw ConfigError(std::string("config: \"") + key + "\" in " + where +
                      " must be a number");
  }
  return v.get<double>();
}

Matrix parse_matrix(const json& node, const std::string& label) {
  if (!node.is_array() || node.empty()) {
    throw ConfigError("config: " + label + " must be a non-empty array");
  }
  if (node.front().is_number()) {
    Matrix column(node.size(), 1);
    for (std::size_t r = 0; r < node.size(); ++r) {
      if (!node[r].is_number()) {
        throw ConfigError("config: " + label + " has a non-numeric entry");
      }
      column(static_cast<long>(r), 0) = node[r].get<double>();
    }
    return column;
  }
  const std::size_t cols = node.front().size();
  Matrix out(node.size(), cols);
  for (std::size_t r = 0; r < node.size(); ++r) {
    const json& row = node[r];
    if (!row.is_array() || row.size() != cols) {
      throw ConfigError("config: " + label + " rows must all have length " +
                        std::to_string(cols));
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (!row[c].is_number()) {
        throw ConfigError("config: " + label + " has a non-numeric entry");
      }
      out(static_cast<long>(r), static_cast<long>(c)) = row[c].get<double>();
    }
  }
  return out;
}

synthesis::Mode parse_mode(const std::string& text) {
  if (text == "no_delay") return synthesis::Mode::kNoDelay;
  if (text == "delay") return synthesis::Mode::kDelay;
  if (text == "continuous") return synthesis::Mode::kContinuous;
  throw ConfigError("config: mode must be one of no_delay, delay, continuous");
}

std::string mode_name(synthesis::Mode mode) {
  switch (mode) {
    case synthesis::Mode::kNoDelay: return "no_delay";
    case synthesis::Mode::kDelay: return "delay";
    case synthesis::Mode::kContinuous: return "continuous";
  }
  return "unknown";
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (long r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (long c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json finite_or_null(double v) {
  if (std::isfinite(v)) return json(v);
  return json(nullptr);
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");

  ScenarioConfig cfg;
  try {
    cfg.name = j.value("name", std::string("scenario"));
    cfg.mode = parse_mode(require_field(j, "mode", "top level").get<std::string>());

    const json& plant = require_field(j, "plant", "top level");
    cfg.A = parse_matrix(require_field(plant, "A", "plant"), "plant.A");
    cfg.B = parse_matrix(require_field(plant, "B", "plant"), "plant.B");
    if (cfg.A.rows() != cfg.A.cols()) {
      throw ConfigError("config: plant.A must be square");
    }
    if (cfg.B.rows() != cfg.A.rows()) {
      throw ConfigError("config: plant.B must have one row per plant state");
    }

    const json& states = require_field(j, "initial_states", "top level");
    if (!states.is_array() || states.empty()) {
      throw ConfigError("config: initial_states must be a non-empty array");
    }
    for (const json& entry : states) {
      Matrix column = parse_matrix(entry, "initial_states entry");
      if (column.cols() != 1) {
        throw ConfigError("config: initial_states entries must be flat arrays");
      }
      cfg.initial_states.push_back(column.col(0));
    }

    const json& graph_node = require_field(j, "graph", "top level");
    cfg.num_agents = graph_node.contains("agents")
                         ? graph_node["agents"].get<int>()
                         : static_cast<int>(cfg.initial_states.size());
    if (cfg.num_agents != static_cast<int>(cfg.initial_states.size())) {
      throw ConfigError("config: graph.agents disagrees with initial_states length");
    }
    if (graph_node.contains("edges")) {
      for (const json& e : graph_node["edges"]) {
        if (!e.is_array() || e.size() != 2) {
          throw ConfigError("config: graph.edges entries must be [i, j] pairs");
        }
        const int a = e[0].get<int>();
        const int b = e[1].get<int>();
        if (a < 1 || a > cfg.num_agents || b < 1 || b > cfg.num_agents) {
          throw ConfigError("config: edge endpoint outside 1.." +
                            std::to_string(cfg.num_agents));
        }
        cfg.edges.emplace_back(a - 1, b - 1);
      }
    }

    const json& timing = require_field(j, "timing", "top level");
    cfg.h = require_number(timing, "h", "timing");
    cfg.duration = timing.contains("duration")
                       ? require_number(timing, "duration", "timing")
                       : cfg.duration;
    cfg.substeps = timing.value("substeps", 1);

    if (cfg.mode == synthesis::Mode::kDelay) {
      const json& delays = require_field(j, "delays", "top level");
      cfg.d = require_number(delays, "bound", "delays");
      const json& values = require_field(delays, "values", "delays");
      if (!values.is_array() || values.empty()) {
        throw ConfigError("config: delays.values must be a non-empty array");
      }
      for (const json& v : values) {
        if (!v.is_number()) throw ConfigError("config: delays.values entries must be numbers");
        const double raw = v.get<double>();
        if (!(raw > 0) || raw > cfg.d * (1 + 1e-12)) {
          throw ConfigError("config: delay value " + std::to_string(raw) +
                            " is outside (0, bound]");
        }
        cfg.delay_values.push_back(raw);
      }
      cfg.per_recipient_delays = delays.value("per_recipient", false);
    }

    if (j.contains("design")) {
      const json& design = j["design"];
      cfg.sigma = design.value("sigma", cfg.sigma);
      cfg.b = design.value("b", cfg.b);
      if (design.contains("alpha")) cfg.alpha = design["alpha"].get<double>();
      if (design.contains("coupling")) cfg.coupling = design["coupling"].get<double>();
      if (design.contains("eps")) cfg.eps = design["eps"].get<double>();
      if (design.contains("eta")) cfg.eta = design["eta"].get<double>();
      if (design.contains("P")) cfg.P = parse_matrix(design["P"], "design.P");
    }

    cfg.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("metrics")) {
      cfg.metrics_window = j["metrics"].value("window", cfg.metrics_window);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  const long n = cfg.A.rows();
  for (const Vector& x0 : cfg.initial_states) {
    if (x0.size() != n) {
      throw ConfigError("config: initial state length does not match the plant order");
    }
  }
  return cfg;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

ScenarioConfig load_scenario(const std::string& path) {
  return parse_scenario(read_text_file(path));
}

Vector stacked_x0(const ScenarioConfig& cfg) {
  const long n = cfg.A.rows();
  Vector stacked(n * cfg.num_agents);
  for (int i = 0; i < cfg.num_agents; ++i) {
    stacked.segment(static_cast<long>(i) * n, n) = cfg.initial_states[static_cast<std::size_t>(i)];
  }
  return stacked;
}

synthesis::Design synthesize_scenario(const ScenarioConfig& cfg) {
  const synthesis::PlantModel plant = synthesis::make_plant(cfg.A, cfg.B);
  const graph::Topology topo = graph::make_topology(cfg.num_agents, cfg.edges);
  synthesis::SynthOptions opts;
  opts.mode = cfg.mode;
  opts.sigma = cfg.sigma;
  opts.b = cfg.b;
  opts.h = cfg.h;
  opts.d = cfg.d;
  opts.alpha = cfg.alpha;
  opts.c = cfg.coupling;
  opts.eps = cfg.eps;
  opts.eta_override = cfg.eta;
  opts.P_witness = cfg.P;
  return synthesis::synthesize(plant, topo, opts, stacked_x0(cfg));
}

netsim::RunOptions run_options(const ScenarioConfig& cfg) {
  netsim::RunOptions opts;
  opts.duration = cfg.duration;
  opts.seed = cfg.seed;
  opts.substeps = cfg.substeps;
  opts.per_recipient_delays = cfg.per_recipient_delays;
  opts.delay_values = cfg.delay_values;
  opts.metrics_window = cfg.metrics_window;
  return opts;
}

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t hash = 14695981039346656037ULL;
  for (unsigned char ch : text) {
    hash ^= ch;
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm parts{};
  gmtime_r(&now, &parts);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &parts);
  return buf;
}

void write_trajectory_csv(std::ostream& out, const synthesis::Design& design,
                          const netsim::TrajectoryLog& log) {
  out << "t,agent";
  for (int k = 1; k <= design.plant.n; ++k) out << ",x" << k;
  for (int k = 1; k <= design.plant.m; ++k) out << ",u" << k;
  out << "\n";
  for (std::size_t row = 0; row < log.t.size(); ++row) {
    for (std::size_t a = 0; a < log.x[row].size(); ++a) {
      out << format_full(log.t[row]) << ',' << (a + 1);
      const Vector& x = log.x[row][a];
      for (long k = 0; k < x.size(); ++k) out << ',' << format_full(x(k));
      const Vector& u = log.u[row][a];
      for (long k = 0; k < u.size(); ++k) out << ',' << format_full(u(k));
      out << "\n";
    }
  }
}

void write_events_csv(std::ostream& out, const std::vector<netsim::Event>& events,
                      double h) {
  out << "t,agent\n";
  for (const netsim::Event& e : events) {
    out << format_full(e.step * h) << ',' << (e.agent + 1) << "\n";
  }
}

void write_metrics_csv(std::ostream& out, const netsim::MetricsReport& metrics) {
  out << "t,V,envelope,max_disagreement\n";
  for (std::size_t r = 0; r < metrics.t.size(); ++r) {
    out << format_full(metrics.t[r]) << ',' << format_full(metrics.V[r]) << ','
        << format_full(metrics.envelope[r]) << ','
        << format_full(metrics.max_disagreement[r]) << "\n";
  }
}

std::string synth_report(const ScenarioConfig& cfg, const synthesis::Design& design) {
  const synthesis::EventDesign& ev = design.event;
  json report;
  report["name"] = cfg.name;
  report["mode"] = mode_name(ev.mode);
  report["gains"] = {
      {"P", matrix_json(design.gains.P)},   {"F", matrix_json(design.gains.F)},
      {"c", design.gains.c},                {"c1", design.gains.c1},
      {"alpha", design.gains.alpha},        {"eps", design.gains.eps},
  };
  report["analysis"] = {
      {"beta", design.analysis.beta},
      {"lambda2", design.analysis.lambda2_L},
      {"lambda_max_laplacian", design.analysis.lambda_max_L},
      {"lambda_min_P", design.analysis.lambda_min_P},
      {"lambda_max_P", design.analysis.lambda_max_P},
      {"zero_eigenvalues", design.analysis.kernel_dim},
  };
  json event = {
      {"h", ev.h},
      {"sigma", ev.sigma},
      {"b", ev.b},
      {"eta", ev.eta},
      {"eta_source", ev.eta_is_override ? "config" : "synthesized"},
      {"eta_lower_bound", finite_or_null(ev.eta_lower_bound)},
      {"eta_meets_bound", ev.eta_meets_bound},
      {"input_map_norm", ev.E_norm},
      {"disagreement_bound", ev.disagreement_bound},
      {"expected_lyapunov_limit",
       design.analysis.beta > 0
           ? json(design.topo.num_agents * ev.eta / design.analysis.beta)
           : json(nullptr)},
  };
  if (ev.mode == synthesis::Mode::kDelay) {
    event["d"] = ev.d;
    event["p"] = ev.p;
    event["upsilon"] = ev.upsilon;
    event["upsilon_h"] = ev.upsilon_h;
    event["lambda_bar"] = ev.lambda_bar;
    event["feasibility_margin"] = ev.feasibility_margin;
  }
  if (ev.mode != synthesis::Mode::kContinuous) {
    json be = json::array();
    for (double v : ev.b_e) be.push_back(v);
    json zb = json::array();
    for (double v : ev.z_bar) zb.push_back(v);
    event["error_stack_gain"] = be;
    event["z_bar"] = zb;
  }
  report["event"] = std::move(event);

  if (ev.mode != synthesis::Mode::kContinuous) {
    json triggers = json::array();
    for (std::size_t i = 0; i < design.trigger.size(); ++i) {
      const synthesis::TriggerCoefficients& tc = design.trigger[i];
      json t = {{"agent", static_cast<int>(i) + 1}};
      if (ev.mode == synthesis::Mode::kNoDelay) {
        t["model_error"] = tc.err;
        t["z_increment"] = tc.zcheck;
        t["model_increment"] = tc.disc;
      } else {
        t["z_increment"] = tc.zcheck_d;
        t["propagated_error"] = tc.prop;
        t["propagated_increment"] = tc.prop_disc;
      }
      triggers.push_back(std::move(t));
    }
    report["trigger"] = std::move(triggers);

    json sweep = json::array();
    for (double bval : {0.25, 0.5, 1.0, 2.0, 4.0}) {
      ScenarioConfig alt = cfg;
      alt.b = bval;
      json entry = {{"b", bval}, {"eta_floor", nullptr}};
      try {
        const synthesis::Design alt_design = synthesize_scenario(alt);
        const double floor_value = alt_design.event.eta_is_override
                                       ? alt_design.event.eta_lower_bound
                                       : alt_design.event.eta;
        entry["eta_floor"] = finite_or_null(floor_value);
      } catch (const std::exception&) {
      }
      sweep.push_back(std::move(entry));
    }
    report["eta_floor_by_b"] = std::move(sweep);
  }
  return report.dump(2) + "\n";
}

std::string run_manifest(const std::string& config_text, std::uint64_t seed,
                         const std::string& started, const std::string& finished,
                         const std::vector<std::string>& output_paths) {
  char hash_buf[24];
  std::snprintf(hash_buf, sizeof(hash_buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(config_text)));
  json manifest = {
      {"config_hash", std::string(hash_buf)},
      {"seed", seed},
      {"tool_version", kToolVersion},
      {"started_utc", started},
      {"finished_utc", finished},
      {"outputs", output_paths},
  };
  return manifest.dump(2) + "\n";
}

}  // namespace petc::scenario
