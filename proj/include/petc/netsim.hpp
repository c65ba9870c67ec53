#pragma once

#include <cstdint>
#include <vector>

#include "petc/agents.hpp"
#include "petc/synthesis.hpp"

namespace petc::netsim {

/// splitmix64 finalizer; the only RNG primitive used anywhere.
std::uint64_t mix64(std::uint64_t z);

/// Index into the delay value set for one broadcast leg.  The stream is keyed
/// by (seed, sender, per-sender broadcast counter, recipient slot), so runs
/// are reproducible regardless of evaluation order.  Shared-delay broadcasts
/// use slot 0 for every recipient.
std::size_t draw_delay_index(std::uint64_t seed, int sender, long long broadcast_index,
                             int slot, std::size_t set_size);

/// Smallest step count whose duration covers the raw delay, with a nudge so
/// values sitting on the grid stay there instead of rounding up.
int round_delay(double raw_seconds, double h);

struct ChannelMessage {
  int sender = 0;
  int recipient = 0;
  long long send_step = 0;
  long long deliver_step = 0;
  Vector payload;
};

struct DeliveryRecord {
  int sender = 0;
  int recipient = 0;
  long long send_step = 0;
  long long deliver_step = 0;
  bool applied = true;  // false when superseded by a newer broadcast in flight
};

struct Event {
  long long step = 0;
  int agent = 0;
};

struct TrajectoryLog {
  std::vector<double> t;
  std::vector<std::vector<Vector>> x;  // row-major: x[row][agent]
  std::vector<std::vector<Vector>> u;
};

struct BankSnapshot {
  std::vector<int> ids;
  std::vector<Vector> y;
  std::vector<Vector> y_prev;
};

/// Per-agent capture of one grid instant, after the whole instant settled.
struct StepRecord {
  Vector x;
  Vector u;
  Vector z;
  Vector model_error_pre;  // self model error at trigger evaluation, before any reset
  Vector zcheck;
  Vector echeck;
  agents::TriggerDecision decision;
  BankSnapshot bank;
};

struct MetricsReport {
  std::vector<double> t;
  std::vector<double> V;
  std::vector<double> envelope;
  std::vector<double> max_disagreement;

  std::vector<long long> event_counts;       // per agent, initial exchange included
  std::vector<double> min_inter_event;       // per agent, seconds; inf with <2 events
  std::vector<std::vector<long long>> window_counts;
  double window_seconds = 1.0;

  long long envelope_violations = 0;
  long long first_envelope_violation = -1;
  long long monotone_violations = 0;  // decrease check used by the reference mode
  double tail_max_disagreement = 0;
  double disagreement_limit = 0;
  bool tail_ok = true;
  double min_inter_event_overall = 0;
  bool inter_event_ok = true;
  bool guarantees_ok = true;
};

struct RunOptions {
  double duration = 0;
  std::uint64_t seed = 0;
  int substeps = 1;
  bool per_recipient_delays = false;
  std::vector<double> delay_values;  // seconds, delay mode only
  double metrics_window = 1.0;
  bool record_debug = false;
};

struct RunResult {
  TrajectoryLog trajectory;
  std::vector<Event> events;
  std::vector<DeliveryRecord> deliveries;
  long long undelivered = 0;
  MetricsReport metrics;
  std::vector<std::vector<StepRecord>> debug;  // [instant][agent] when recorded
};

/// Executes a design on the synchronized grid.  Every instant runs the same
/// phase order for all agents: propagate models, deliver due messages, sample,
/// form increment errors, evaluate triggers, commit the instant's broadcasts,
/// compute inputs, then advance the plants to the next instant.  Agents never
/// read each other's runtime state; everything crosses through the channel.
class SimWorld {
 public:
  SimWorld(const synthesis::Design& design, const Vector& x0_stacked, RunOptions options);

  RunResult run();

 private:
  void initial_exchange(RunResult& result);
  void step_pipeline(long long mu, RunResult& result);
  void deliver_due(long long mu, RunResult& result);
  void commit_broadcasts(long long mu, const std::vector<int>& fired, RunResult& result);
  void advance_plants(long long mu, RunResult& result);
  void log_instant(long long mu, RunResult& result,
                   const std::vector<Vector>& error_pre);
  double lyapunov_now() const;

  const synthesis::Design* design_;
  RunOptions options_;
  long long steps_ = 0;
  std::vector<agents::AgentRuntime> agents_;
  std::vector<Vector> x_world_;
  Matrix G_sub_;
  Matrix H_sub_;
  std::vector<int> delay_steps_;
  std::vector<ChannelMessage> pending_;
  std::vector<Vector> error_pre_scratch_;
  std::vector<long long> broadcast_counter_;
  std::vector<std::vector<long long>> last_applied_send_;  // [recipient][sender]
  double v0_ = 0;
};

/// Full pipeline: run the world and fold the trajectory into the report.
RunResult simulate(const synthesis::Design& design, const Vector& x0_stacked,
                   const RunOptions& options);

}  // namespace petc::netsim
