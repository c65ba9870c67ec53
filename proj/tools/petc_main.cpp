#include <CLI11.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "petc/errors.hpp"
#include "petc/netsim.hpp"
#include "petc/scenario.hpp"
#include "petc/verify.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitGuarantee = 4;
constexpr int kExitDivergence = 5;

struct RunOverrides {
  std::optional<unsigned long long> seed;
  std::optional<double> duration;
};

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const petc::ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const petc::InfeasibleError& e) {
    err << "infeasible design: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const petc::DivergenceError& e) {
    err << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw petc::ConfigError("cannot write " + path.string());
  out << content;
  if (!out) throw petc::ConfigError("write failed for " + path.string());
}

int cmd_synth(const std::string& config_path, const std::optional<std::string>& out_path) {
  const petc::scenario::ScenarioConfig cfg =
      petc::scenario::load_scenario(config_path);
  const petc::synthesis::Design design = petc::scenario::synthesize_scenario(cfg);
  const std::string report = petc::scenario::synth_report(cfg, design);
  if (out_path) {
    write_file(*out_path, report);
  } else {
    std::cout << report;
  }
  return kExitOk;
}

int run_one(const std::string& config_path, const RunOverrides& overrides,
            const fs::path& out_dir, std::ostream& log) {
  const std::string config_text = petc::scenario::read_text_file(config_path);
  petc::scenario::ScenarioConfig cfg = petc::scenario::parse_scenario(config_text);
  if (overrides.seed) cfg.seed = *overrides.seed;
  if (overrides.duration) cfg.duration = *overrides.duration;

  const std::string started = petc::scenario::utc_timestamp();
  const petc::synthesis::Design design = petc::scenario::synthesize_scenario(cfg);
  const petc::netsim::RunResult result = petc::netsim::simulate(
      design, petc::scenario::stacked_x0(cfg), petc::scenario::run_options(cfg));

  fs::create_directories(out_dir);
  {
    std::ofstream out(out_dir / "trajectory.csv", std::ios::binary);
    if (!out) throw petc::ConfigError("cannot write " + (out_dir / "trajectory.csv").string());
    petc::scenario::write_trajectory_csv(out, design, result.trajectory);
  }
  {
    std::ofstream out(out_dir / "events.csv", std::ios::binary);
    if (!out) throw petc::ConfigError("cannot write " + (out_dir / "events.csv").string());
    petc::scenario::write_events_csv(out, result.events, design.event.h);
  }
  {
    std::ofstream out(out_dir / "metrics.csv", std::ios::binary);
    if (!out) throw petc::ConfigError("cannot write " + (out_dir / "metrics.csv").string());
    petc::scenario::write_metrics_csv(out, result.metrics);
  }
  const std::string finished = petc::scenario::utc_timestamp();
  write_file(out_dir / "manifest.json",
             petc::scenario::run_manifest(
                 config_text, cfg.seed, started, finished,
                 {"trajectory.csv", "events.csv", "metrics.csv", "manifest.json"}));

  const petc::netsim::MetricsReport& m = result.metrics;
  log << cfg.name << ": " << result.events.size() << " events over "
      << cfg.duration << " s";
  if (!m.V.empty()) {
    log << ", final V " << petc::scenario::format_full(m.V.back());
  }
  if (std::isfinite(m.min_inter_event_overall)) {
    log << ", min inter-event " << m.min_inter_event_overall << " s";
  }
  log << (m.guarantees_ok ? "" : "  [guarantee violated]") << "\n";
  return m.guarantees_ok ? kExitOk : kExitGuarantee;
}

int run_batch(const fs::path& batch_dir, const RunOverrides& overrides,
              const fs::path& out_root) {
  std::vector<fs::path> configs;
  if (!fs::is_directory(batch_dir)) {
    throw petc::ConfigError("batch path is not a directory: " + batch_dir.string());
  }
  for (const auto& entry : fs::directory_iterator(batch_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      configs.push_back(entry.path());
    }
  }
  std::sort(configs.begin(), configs.end());
  if (configs.empty()) {
    throw petc::ConfigError("no .json scenarios in " + batch_dir.string());
  }

  std::vector<int> codes(configs.size(), 0);
  std::vector<std::string> notes(configs.size());
  std::atomic<std::size_t> cursor{0};
  const unsigned workers = std::max(
      1u, std::min({static_cast<unsigned>(configs.size()),
                    std::thread::hardware_concurrency(), 8u}));

  auto worker = [&] {
    for (;;) {
      const std::size_t idx = cursor.fetch_add(1);
      if (idx >= configs.size()) return;
      std::ostringstream log;
      codes[idx] = guarded(log, [&] {
        return run_one(configs[idx].string(), overrides,
                       out_root / configs[idx].stem(), log);
      });
      notes[idx] = log.str();
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  int worst = kExitOk;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    std::cout << configs[i].filename().string() << " -> exit " << codes[i] << "\n";
    if (!notes[i].empty()) std::cout << "  " << notes[i];
    worst = std::max(worst, codes[i]);
  }
  return worst;
}

int cmd_verify(const std::string& suite, unsigned long long seed) {
  const std::vector<petc::verify::SuiteResult> results =
      petc::verify::run_suites(suite, seed);
  bool ok = true;
  for (const petc::verify::SuiteResult& r : results) {
    std::cout << "[" << r.name << "] checks=" << r.checks
              << " worst_residual=" << petc::scenario::format_full(r.worst_residual)
              << (r.passed() ? "  PASS" : "  FAIL") << "\n";
    for (const std::string& f : r.failures) std::cout << "  failed: " << f << "\n";
    ok = ok && r.passed();
  }
  return ok ? kExitOk : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthesis and simulation of event-triggered consensus controllers"};
  app.require_subcommand(1);

  std::string synth_config;
  std::optional<std::string> synth_out;
  CLI::App* synth = app.add_subcommand("synth", "Design gains and report the constants");
  synth->add_option("config", synth_config, "scenario JSON file")->required();
  synth->add_option("--out", synth_out, "write the report here instead of stdout");

  std::string run_config;
  RunOverrides overrides;
  std::string out_dir_flag;
  std::optional<std::string> batch_dir;
  const char* env_out = std::getenv("PETC_OUT_DIR");
  out_dir_flag = env_out ? env_out : ".";
  CLI::App* run = app.add_subcommand("run", "Simulate a scenario and write CSV logs");
  run->add_option("config", run_config, "scenario JSON file");
  run->add_option("--seed", overrides.seed, "override the config seed");
  run->add_option("--duration", overrides.duration, "override the run length in seconds");
  run->add_option("--out-dir", out_dir_flag, "output directory (default $PETC_OUT_DIR or .)");
  run->add_option("--batch", batch_dir, "run every .json scenario in this directory");

  std::string suite = "all";
  unsigned long long verify_seed = 12345;
  CLI::App* verify = app.add_subcommand("verify", "Run the randomized property suites");
  verify->add_option("--suite", suite, "spectral, errors, delays, bounds, or all");
  verify->add_option("--seed", verify_seed, "base seed for the property draws");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (*synth) {
    return guarded(std::cerr, [&] { return cmd_synth(synth_config, synth_out); });
  }
  if (*run) {
    return guarded(std::cerr, [&] {
      if (batch_dir) {
        if (!run_config.empty()) {
          throw petc::ConfigError("give either a config file or --batch, not both");
        }
        return run_batch(*batch_dir, overrides, out_dir_flag);
      }
      if (run_config.empty()) {
        throw petc::ConfigError("run needs a config file or --batch");
      }
      return run_one(run_config, overrides, out_dir_flag, std::cout);
    });
  }
  return guarded(std::cerr, [&] { return cmd_verify(suite, verify_seed); });
}
