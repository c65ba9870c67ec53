#include "petc/agents.hpp"

#include <algorithm>
#include <stdexcept>

#include "petc/errors.hpp"

namespace petc::agents {

namespace {

double clamped_quad(const Matrix& M, const Vector& v) {
  const double q = v.dot(M * v);
  return q > 0 ? q : 0.0;
}

}  // namespace

AgentRuntime::AgentRuntime(int id, const synthesis::Design& design,
                           const Vector& x0_stacked) {
  id_ = id;
  design_ = &design;
  const int n = design.plant.n;
  if (x0_stacked.size() != static_cast<long>(n) * design.topo.num_agents) {
    throw ConfigError("initial state stack has the wrong length");
  }
  tracked_.push_back(id);
  for (int j : design.topo.neighbors[id]) tracked_.push_back(j);

  // The run starts from a full exchange: every model holds the true state.
  for (int j : tracked_) {
    Vector xj = x0_stacked.segment(static_cast<long>(j) * n, n);
    y_.push_back(xj);
    y_prev_.push_back(xj);
  }
  x_now_ = x0_stacked.segment(static_cast<long>(id) * n, n);
  x_prev_ = x_now_;
  zcheck_ = Vector::Zero(n);
  echeck_ = Vector::Zero(n);
  z_ = Vector::Zero(n);
  u_ = Vector::Zero(design.plant.m);
}

int AgentRuntime::slot_of(int agent) const {
  for (std::size_t s = 0; s < tracked_.size(); ++s) {
    if (tracked_[s] == agent) return static_cast<int>(s);
  }
  throw NumericalError("agent " + std::to_string(id_) + " tracks no model for " +
                       std::to_string(agent));
}

void AgentRuntime::propagate_models() {
  const Matrix& G = design_->event.G;
  for (std::size_t s = 0; s < y_.size(); ++s) {
    y_prev_[s] = y_[s];
    y_[s] = G * y_[s];
  }
}

void AgentRuntime::apply_update(int sender, const Vector& x_sent, int p_elapsed) {
  Vector value = x_sent;
  for (int k = 0; k < p_elapsed; ++k) value = design_->event.G * value;
  y_[static_cast<std::size_t>(slot_of(sender))] = value;
}

void AgentRuntime::read_sample(const Vector& x) {
  x_prev_ = x_now_;
  x_now_ = x;
}

void AgentRuntime::compute_disc_errors() {
  const Vector x_inc = x_prev_ - x_now_;
  zcheck_.setZero();
  for (std::size_t s = 1; s < tracked_.size(); ++s) {
    zcheck_ += x_inc - (y_prev_[s] - y_[s]);
  }
  echeck_ = (y_prev_[0] - y_[0]) - x_inc;
}

Vector AgentRuntime::bank_z() const {
  Vector z = Vector::Zero(design_->plant.n);
  for (std::size_t s = 1; s < tracked_.size(); ++s) {
    z += x_now_ - y_[s];
  }
  return z;
}

Vector AgentRuntime::model_error() const { return y_[0] - x_now_; }

TriggerDecision AgentRuntime::evaluate_trigger() {
  const synthesis::EventDesign& ev = design_->event;
  const synthesis::TriggerCoefficients& tc = design_->trigger[static_cast<std::size_t>(id_)];
  TriggerDecision dec;

  if (ev.mode == synthesis::Mode::kContinuous) {
    dec.fired = true;
    decision_ = dec;
    return dec;
  }

  const Matrix& M = ev.M;
  const Vector e = model_error();
  if (ev.mode == synthesis::Mode::kNoDelay) {
    dec.components[0] = tc.err * clamped_quad(M, e);
    dec.components[1] = tc.zcheck * clamped_quad(M, zcheck_);
    dec.components[2] = tc.disc * clamped_quad(M, echeck_);
  } else {
    dec.components[0] = tc.zcheck_d * clamped_quad(M, zcheck_);
    dec.components[1] = tc.prop * (ev.Gp * e).squaredNorm();
    dec.components[2] = tc.prop_disc * (ev.W * e).squaredNorm();
  }
  dec.delta = dec.components[0] + dec.components[1] + dec.components[2];

  const Vector z = bank_z();
  dec.threshold = ev.sigma * design_->gains.c1 * clamped_quad(M, z) + ev.eta;
  dec.fired = dec.delta > dec.threshold;
  decision_ = dec;
  return dec;
}

Vector AgentRuntime::fire() {
  y_[0] = x_now_;
  ++events_;
  return x_now_;
}

void AgentRuntime::compute_control() {
  z_ = bank_z();
  const double coupling = design_->event.mode == synthesis::Mode::kContinuous
                              ? design_->gains.c
                              : design_->gains.c1;
  u_ = coupling * (design_->gains.F * z_);
}

const Vector& AgentRuntime::model_of(int agent) const {
  return y_[static_cast<std::size_t>(slot_of(agent))];
}

const Vector& AgentRuntime::model_prev_of(int agent) const {
  return y_prev_[static_cast<std::size_t>(slot_of(agent))];
}

}  // namespace petc::agents
