#include "petc/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "petc/constants.hpp"
#include "petc/errors.hpp"
#include "petc/matlib.hpp"

namespace petc::netsim {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t z) {
  z += kGolden;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::size_t draw_delay_index(std::uint64_t seed, int sender, long long broadcast_index,
                             int slot, std::size_t set_size) {
  std::uint64_t s = mix64(seed + kGolden * (static_cast<std::uint64_t>(sender) + 1));
  s = mix64(s + kGolden * (static_cast<std::uint64_t>(broadcast_index) + 1));
  s = mix64(s + kGolden * (static_cast<std::uint64_t>(slot) + 1));
  return static_cast<std::size_t>(s % set_size);
}

int round_delay(double raw_seconds, double h) {
  if (!(h > 0)) throw ConfigError("sampling period must be positive");
  const double ratio = raw_seconds / h - tol::kDelayRoundNudge;
  return static_cast<int>(std::ceil(ratio));
}

SimWorld::SimWorld(const synthesis::Design& design, const Vector& x0_stacked,
                   RunOptions options) {
  design_ = &design;
  options_ = std::move(options);
  const synthesis::EventDesign& ev = design.event;
  const int N = design.topo.num_agents;
  const int n = design.plant.n;

  if (!(options_.duration >= 0) || !std::isfinite(options_.duration)) {
    throw ConfigError("run duration must be a finite nonnegative number");
  }
  if (options_.substeps < 1) throw ConfigError("substeps must be at least 1");
  if (!(options_.metrics_window > 0)) throw ConfigError("metrics window must be positive");
  if (x0_stacked.size() != static_cast<long>(N) * n) {
    throw ConfigError("initial state stack has the wrong length");
  }
  steps_ = static_cast<long long>(std::ceil(options_.duration / ev.h - tol::kGridRel));
  if (steps_ < 0) steps_ = 0;

  if (ev.mode == synthesis::Mode::kDelay) {
    if (options_.delay_values.empty()) {
      throw ConfigError("delay mode needs at least one channel delay value");
    }
    for (double raw : options_.delay_values) {
      const int p = round_delay(raw, ev.h);
      if (p < 1 || p > ev.p) {
        throw ConfigError("channel delay " + std::to_string(raw) +
                          " s rounds to " + std::to_string(p) +
                          " steps, outside [1, " + std::to_string(ev.p) + "]");
      }
      delay_steps_.push_back(p);
    }
  }

  for (int i = 0; i < N; ++i) {
    agents_.emplace_back(i, design, x0_stacked);
    x_world_.push_back(x0_stacked.segment(static_cast<long>(i) * n, n));
  }
  broadcast_counter_.assign(static_cast<std::size_t>(N), 0);
  last_applied_send_.assign(static_cast<std::size_t>(N),
                            std::vector<long long>(static_cast<std::size_t>(N), -1));

  if (options_.substeps == 1) {
    G_sub_ = ev.G;
    H_sub_ = ev.H;
  } else {
    auto gh = matlib::zoh_pair(design.plant.A, design.plant.B, ev.h / options_.substeps);
    G_sub_ = gh.first;
    H_sub_ = gh.second;
  }
}

double SimWorld::lyapunov_now() const {
  const int N = design_->topo.num_agents;
  const int n = design_->plant.n;
  Vector stacked(static_cast<long>(N) * n);
  for (int i = 0; i < N; ++i) stacked.segment(static_cast<long>(i) * n, n) = x_world_[i];
  return stacked.dot(design_->analysis.L_hat * stacked);
}

void SimWorld::initial_exchange(RunResult& result) {
  if (design_->event.mode == synthesis::Mode::kContinuous) return;
  for (auto& agent : agents_) {
    agent.fire();
    result.events.push_back({0, agent.id()});
  }
}

void SimWorld::deliver_due(long long mu, RunResult& result) {
  std::vector<ChannelMessage> due;
  auto keep = pending_.begin();
  for (auto& msg : pending_) {
    if (msg.deliver_step == mu) {
      due.push_back(std::move(msg));
    } else {
      *keep++ = std::move(msg);
    }
  }
  pending_.erase(keep, pending_.end());

  std::sort(due.begin(), due.end(), [](const ChannelMessage& a, const ChannelMessage& b) {
    if (a.send_step != b.send_step) return a.send_step < b.send_step;
    if (a.sender != b.sender) return a.sender < b.sender;
    return a.recipient < b.recipient;
  });
  for (const ChannelMessage& msg : due) {
    auto& last = last_applied_send_[static_cast<std::size_t>(msg.recipient)]
                                   [static_cast<std::size_t>(msg.sender)];
    const bool applied = msg.send_step > last;
    if (applied) {
      agents_[static_cast<std::size_t>(msg.recipient)].apply_update(
          msg.sender, msg.payload, static_cast<int>(mu - msg.send_step));
      last = msg.send_step;
    }
    result.deliveries.push_back({msg.sender, msg.recipient, msg.send_step, mu, applied});
  }
}

void SimWorld::commit_broadcasts(long long mu, const std::vector<int>& fired,
                                 RunResult& result) {
  const auto& neighbors = design_->topo.neighbors;
  for (int i : fired) {
    const Vector payload = agents_[static_cast<std::size_t>(i)].sample();
    if (design_->event.mode == synthesis::Mode::kNoDelay) {
      for (int j : neighbors[static_cast<std::size_t>(i)]) {
        agents_[static_cast<std::size_t>(j)].apply_update(i, payload, 0);
        last_applied_send_[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = mu;
        result.deliveries.push_back({i, j, mu, mu, true});
      }
      continue;
    }
    const long long bidx = broadcast_counter_[static_cast<std::size_t>(i)]++;
    int shared_steps = 0;
    if (!options_.per_recipient_delays) {
      const std::size_t idx = draw_delay_index(options_.seed, i, bidx, 0, delay_steps_.size());
      shared_steps = delay_steps_[idx];
    }
    int slot = 0;
    for (int j : neighbors[static_cast<std::size_t>(i)]) {
      int p = shared_steps;
      if (options_.per_recipient_delays) {
        const std::size_t idx =
            draw_delay_index(options_.seed, i, bidx, slot + 1, delay_steps_.size());
        p = delay_steps_[idx];
      }
      pending_.push_back({i, j, mu, mu + p, payload});
      ++slot;
    }
  }
}

void SimWorld::step_pipeline(long long mu, RunResult& result) {
  const synthesis::Mode mode = design_->event.mode;
  const auto& neighbors = design_->topo.neighbors;

  if (mode == synthesis::Mode::kContinuous) {
    for (std::size_t i = 0; i < agents_.size(); ++i) agents_[i].read_sample(x_world_[i]);
    for (std::size_t i = 0; i < agents_.size(); ++i) {
      for (int j : neighbors[i]) {
        agents_[static_cast<std::size_t>(j)].apply_update(static_cast<int>(i), x_world_[i], 0);
      }
    }
    return;
  }

  for (auto& agent : agents_) agent.propagate_models();
  if (mode == synthesis::Mode::kDelay) deliver_due(mu, result);

  std::vector<int> fired;
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    agents_[i].read_sample(x_world_[i]);
    agents_[i].compute_disc_errors();
    error_pre_scratch_[i] = agents_[i].model_error();
    const agents::TriggerDecision dec = agents_[i].evaluate_trigger();
    if (dec.fired) {
      agents_[i].fire();
      fired.push_back(static_cast<int>(i));
      result.events.push_back({mu, static_cast<int>(i)});
    }
  }
  commit_broadcasts(mu, fired, result);
}

void SimWorld::log_instant(long long mu, RunResult& result,
                           const std::vector<Vector>& error_pre) {
  const double t = static_cast<double>(mu) * design_->event.h;
  std::vector<Vector> us;
  us.reserve(agents_.size());
  for (const auto& agent : agents_) us.push_back(agent.control());
  result.trajectory.t.push_back(t);
  result.trajectory.x.push_back(x_world_);
  result.trajectory.u.push_back(us);

  MetricsReport& m = result.metrics;
  m.t.push_back(t);
  m.V.push_back(lyapunov_now());
  double worst = 0;
  for (std::size_t i = 0; i < x_world_.size(); ++i) {
    for (std::size_t j = i + 1; j < x_world_.size(); ++j) {
      worst = std::max(worst, (x_world_[i] - x_world_[j]).squaredNorm());
    }
  }
  m.max_disagreement.push_back(worst);

  const double beta = design_->analysis.beta;
  const double eta = design_->event.mode == synthesis::Mode::kContinuous
                         ? 0.0
                         : design_->event.eta;
  double env = std::numeric_limits<double>::quiet_NaN();
  if (beta > 0) {
    const double steady = design_->topo.num_agents * eta / beta;
    env = (v0_ - steady) * std::exp(-beta * t) + steady;
  }
  m.envelope.push_back(env);

  if (options_.record_debug) {
    std::vector<StepRecord> row;
    for (std::size_t i = 0; i < agents_.size(); ++i) {
      const auto& agent = agents_[i];
      StepRecord rec;
      rec.x = x_world_[i];
      rec.u = agent.control();
      rec.z = agent.z();
      rec.model_error_pre = error_pre[i];
      rec.zcheck = agent.zcheck();
      rec.echeck = agent.echeck();
      rec.decision = agent.last_decision();
      for (int id : agent.tracked()) {
        rec.bank.ids.push_back(id);
        rec.bank.y.push_back(agent.model_of(id));
        rec.bank.y_prev.push_back(agent.model_prev_of(id));
      }
      row.push_back(std::move(rec));
    }
    result.debug.push_back(std::move(row));
  }
}

void SimWorld::advance_plants(long long mu, RunResult& result) {
  const double h = design_->event.h;
  const int k = options_.substeps;
  for (int s = 1; s <= k; ++s) {
    for (std::size_t i = 0; i < x_world_.size(); ++i) {
      x_world_[i] = G_sub_ * x_world_[i] + H_sub_ * agents_[i].control();
      const double t_sub = (static_cast<double>(mu) + static_cast<double>(s) / k) * h;
      if (!x_world_[i].allFinite() ||
          x_world_[i].cwiseAbs().maxCoeff() > tol::kDivergenceNorm) {
        throw DivergenceError("state diverged: agent " + std::to_string(i + 1) +
                              " at t=" + std::to_string(t_sub) + " s");
      }
    }
    if (s < k) {
      std::vector<Vector> us;
      us.reserve(agents_.size());
      for (const auto& agent : agents_) us.push_back(agent.control());
      result.trajectory.t.push_back((static_cast<double>(mu) + static_cast<double>(s) / k) * h);
      result.trajectory.x.push_back(x_world_);
      result.trajectory.u.push_back(us);
    }
  }
}

RunResult SimWorld::run() {
  RunResult result;
  MetricsReport& m = result.metrics;
  const int N = design_->topo.num_agents;
  m.window_seconds = options_.metrics_window;
  m.event_counts.assign(static_cast<std::size_t>(N), 0);
  m.min_inter_event.assign(static_cast<std::size_t>(N),
                           std::numeric_limits<double>::infinity());
  m.min_inter_event_overall = std::numeric_limits<double>::infinity();
  m.disagreement_limit = design_->event.disagreement_bound;
  if (steps_ == 0) return result;

  error_pre_scratch_.assign(static_cast<std::size_t>(N),
                            Vector::Zero(design_->plant.n));
  v0_ = lyapunov_now();

  for (long long mu = 0; mu <= steps_; ++mu) {
    if (mu == 0) {
      initial_exchange(result);
    } else {
      step_pipeline(mu, result);
    }
    for (auto& agent : agents_) agent.compute_control();
    log_instant(mu, result, error_pre_scratch_);
    if (mu < steps_) advance_plants(mu, result);
  }
  result.undelivered = static_cast<long long>(pending_.size());

  // Event statistics.
  const double h = design_->event.h;
  std::vector<long long> last_step(static_cast<std::size_t>(N), -1);
  const int windows =
      static_cast<int>(std::floor(steps_ * h / m.window_seconds + tol::kGridRel)) + 1;
  m.window_counts.assign(static_cast<std::size_t>(N),
                         std::vector<long long>(static_cast<std::size_t>(windows), 0));
  for (const Event& evn : result.events) {
    const auto a = static_cast<std::size_t>(evn.agent);
    ++m.event_counts[a];
    int w = static_cast<int>(std::floor(evn.step * h / m.window_seconds));
    w = std::min(w, windows - 1);
    ++m.window_counts[a][static_cast<std::size_t>(w)];
    if (last_step[a] >= 0) {
      const double gap = (evn.step - last_step[a]) * h;
      m.min_inter_event[a] = std::min(m.min_inter_event[a], gap);
      m.min_inter_event_overall = std::min(m.min_inter_event_overall, gap);
    }
    last_step[a] = evn.step;
  }

  // Guarantee flags.
  const synthesis::Mode mode = design_->event.mode;
  for (std::size_t r = 0; r < m.V.size(); ++r) {
    if (mode == synthesis::Mode::kContinuous) {
      if (r > 0 && m.V[r - 1] > 1e-9 && m.V[r] >= m.V[r - 1]) ++m.monotone_violations;
      continue;
    }
    if (std::isnan(m.envelope[r])) continue;
    if (m.V[r] > m.envelope[r] * (1 + tol::kEnvelopeRelSlack)) {
      ++m.envelope_violations;
      if (m.first_envelope_violation < 0) m.first_envelope_violation = static_cast<long long>(r);
    }
  }
  if (mode != synthesis::Mode::kContinuous) {
    const std::size_t rows = m.max_disagreement.size();
    const auto tail_start = static_cast<std::size_t>(std::ceil(0.9 * (rows - 1)));
    for (std::size_t r = tail_start; r < rows; ++r) {
      m.tail_max_disagreement = std::max(m.tail_max_disagreement, m.max_disagreement[r]);
    }
    m.tail_ok =
        m.tail_max_disagreement <= m.disagreement_limit * (1 + tol::kEnvelopeRelSlack);
    if (mode == synthesis::Mode::kDelay && !design_->event.eta_is_override) {
      m.inter_event_ok =
          m.min_inter_event_overall >= design_->event.d - h * 0.5;
    }
  }
  m.guarantees_ok = mode == synthesis::Mode::kContinuous
                        ? m.monotone_violations == 0
                        : m.envelope_violations == 0 && m.tail_ok && m.inter_event_ok;
  return result;
}

RunResult simulate(const synthesis::Design& design, const Vector& x0_stacked,
                   const RunOptions& options) {
  SimWorld world(design, x0_stacked, options);
  return world.run();
}

}  // namespace petc::netsim
