#pragma once

#include <vector>

#include "petc/synthesis.hpp"

namespace petc::agents {

/// Outcome of one trigger evaluation, kept for logs and replay checks.
struct TriggerDecision {
  double delta = 0;
  double threshold = 0;
  bool fired = false;
  // Quadratic-form pieces of delta in evaluation order (each clamped >= 0):
  // sampled mode: model error, sampled z difference, sampled increment error;
  // delay mode: sampled z difference, propagated error, propagated increment.
  double components[3] = {0, 0, 0};
};

/// One agent's runtime: its model bank (self plus neighbors), the plant
/// samples it has read, and the trigger state.  All data here is local to
/// the agent; nothing reads another agent's bank or plant state.
class AgentRuntime {
 public:
  AgentRuntime(int id, const synthesis::Design& design, const Vector& x0_stacked);

  /// Step 1: y_prev <- y, y <- G y for every tracked model.
  void propagate_models();

  /// Step 2 / 5b: replace the sender's model with G^p_elapsed * x_sent.
  /// y_prev is left alone; the replaced y was already propagated this step.
  void apply_update(int sender, const Vector& x_sent, int p_elapsed);

  /// Step 3: shift in the new plant sample.
  void read_sample(const Vector& x);

  /// Step 4: sampled-increment errors from the stored previous values.
  void compute_disc_errors();

  /// Step 5: evaluate the mode's trigger law on pre-reset quantities.
  TriggerDecision evaluate_trigger();

  /// Step 5, on firing: reset the self model to the current sample.
  /// Returns the broadcast payload.
  Vector fire();

  /// Step 6: z from the current bank and the held input value.
  void compute_control();

  int id() const { return id_; }
  const std::vector<int>& tracked() const { return tracked_; }
  const Vector& control() const { return u_; }
  const Vector& z() const { return z_; }
  const Vector& sample() const { return x_now_; }
  const Vector& zcheck() const { return zcheck_; }
  const Vector& echeck() const { return echeck_; }
  const TriggerDecision& last_decision() const { return decision_; }
  Vector model_error() const;  // e = y_self - x_now, pre-reset if read in step 5
  const Vector& model_of(int agent) const;
  const Vector& model_prev_of(int agent) const;
  long long event_count() const { return events_; }

 private:
  int slot_of(int agent) const;
  Vector bank_z() const;

  int id_;
  const synthesis::Design* design_;
  std::vector<int> tracked_;  // self first, then sorted neighbors
  std::vector<Vector> y_;
  std::vector<Vector> y_prev_;
  Vector x_now_;
  Vector x_prev_;
  Vector zcheck_;  // sum over neighbors of (x_inc - y_inc), at t_mu^-
  Vector echeck_;  // self model increment minus state increment, at t_mu^-
  Vector z_;
  Vector u_;
  TriggerDecision decision_;
  long long events_ = 0;
};

}  // namespace petc::agents
