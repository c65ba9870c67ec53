#pragma once

#include <optional>
#include <vector>

#include "petc/graph.hpp"
#include "petc/matlib.hpp"

namespace petc::synthesis {

enum class Mode { kNoDelay, kDelay, kContinuous };

struct PlantModel {
  Matrix A;  // n x n
  Matrix B;  // n x m
  int n = 0;
  int m = 0;
};

PlantModel make_plant(const Matrix& A, const Matrix& B);

/// Consensus gains: P from the shifted Riccati inequality, F = -B'P,
/// coupling c >= 1/lambda_2 and its event-triggered double c1 = 2c.
struct GainSet {
  Matrix P;
  Matrix F;
  double c = 0;
  double c1 = 0;
  double alpha = 0;
  double eps = 0;
};

/// Spectral analysis of the ideal coupled closed loop.
struct ClosedLoopAnalysis {
  Matrix L_hat;      // L (x) P
  Matrix A_c;        // I (x) A + c L (x) BF
  Matrix L_bar;      // L_hat A_c + A_c' L_hat, symmetrized
  Vector L_bar_spectrum;    // ascending
  int kernel_dim = 0;       // must equal n
  double beta = 0;          // min nonzero of -L_bar over max of L_hat
  double lambda_min_P = 0;
  double lambda_max_P = 0;
  double lambda_max_Lhat = 0;
  double lambda_min_nz_Lhat = 0;  // smallest eigenvalue off the consensus kernel
  double lambda2_L = 0;
  double lambda_max_L = 0;
};

/// Per-agent quadratic-form weights for the online trigger test.
struct TriggerCoefficients {
  // sampled-error mode: coef * (v' M v) with M = P B B' P
  double err = 0;        // on the model error e_i
  double zcheck = 0;     // on the sampled difference of z_i
  double disc = 0;       // on the sampled model-vs-state increment error
  // delay mode
  double zcheck_d = 0;   // on the sampled difference of z_i
  double prop = 0;       // on || G^p e_ii ||^2, worst-case-propagated error
  double prop_disc = 0;  // on || (G-I) G^(p-1) e_ii ||^2
};

/// Trigger-offset design output.
struct EtaResult {
  double eta = 0;
  double v_max = 0;             // max{V(0), N eta / beta}, self-consistent
  std::vector<double> z_bar;    // per-agent worst-case input magnitude
  double coefficient = 0;       // max_i K_i where the bound reads eta > K_i * v_max
  double q = 0;                 // kEtaSafety * K * N / beta, contraction ratio
  int iterations = 0;
};

/// Everything the runtime needs that depends on (mode, h, d).
struct EventDesign {
  Mode mode = Mode::kNoDelay;
  double sigma = 0.5;
  double b = 1.0;
  double h = 0;
  double d = 0;
  int p = 0;              // d / h in delay mode
  Matrix G;               // exp(A h)
  Matrix H;               // held-input response over one period
  Matrix E;               // held-input error integral with the active coupling c1
  Matrix M;               // P B B' P
  Matrix Gp;              // G^p (delay mode, else identity)
  Matrix W;               // (G - I) G^(p-1) (delay mode, else zero)
  double E_norm = 0;
  double M_norm = 0;
  double Gp_norm = 0;
  double W_norm = 0;
  double GmI_norm = 0;
  double upsilon = 0;     // integral_0^d || exp(A(d-s)) c1 B F || ds
  double upsilon_h = 0;   // same over d - h
  double lambda_bar = 0;  // lambda_max(Adj^2) * lambda_max(M)
  std::vector<double> b_e;
  std::vector<double> z_bar;
  double v0 = 0;
  double v_max = 0;
  double eta = 0;
  bool eta_is_override = false;
  bool eta_meets_bound = false;
  double eta_lower_bound = 0;  // max_i K_i * v_max at the returned v_max
  double eta_q = 0;
  double feasibility_margin = 1.0;  // 1 - max_i b_e(i) * upsilon in delay mode
  double disagreement_bound = 0;    // N eta / (beta lambda_min(P))
};

struct SynthOptions {
  Mode mode = Mode::kNoDelay;
  double sigma = 0.5;
  double b = 1.0;
  double h = 0;
  double d = 0;                       // delay mode only; must sit on the h-grid
  std::optional<double> alpha;        // default 0.1 * ||A||_2
  std::optional<double> c;            // default 1 / lambda_2
  std::optional<double> eps;          // default tol::kCareDefaultEpsScale * ||A||_2
  std::optional<double> eta_override;
  std::optional<Matrix> P_witness;    // skip the Riccati solve, validate instead
};

struct Design {
  PlantModel plant;
  graph::Topology topo;
  GainSet gains;
  ClosedLoopAnalysis analysis;
  EventDesign event;
  std::vector<TriggerCoefficients> trigger;
};

GainSet design_gains(const PlantModel& plant, const graph::Topology& topo,
                     double alpha, double eps, std::optional<double> c_override = {},
                     const std::optional<Matrix>& P_witness = {});

/// Builds the coupled-loop matrices, verifies the kernel structure
/// (exactly n zero eigenvalues, all others strictly negative after
/// normalization) and extracts the decay ratio beta.
ClosedLoopAnalysis closed_loop_analysis(const PlantModel& plant, const GainSet& gains,
                                        const graph::Topology& topo);

/// lambda_max(Adjacency^2 (x) M) computed through the Kronecker eigenvalue
/// product rule.
double lambda_bar(const graph::Topology& topo, const Matrix& M);

/// b_e(i) = sqrt(N_i N (N-1) (b/2 + 1/(2b))).
double error_stack_gain(int degree, int num_agents, double b);

/// Smallest admissible trigger offset (times tol::kEtaSafety) for the
/// sampled-error mode, with the v_max coupling resolved by fixed-point
/// iteration from v_max = V0.  Throws InfeasibleError when no finite value
/// exists (contraction ratio >= 1, i.e. h too large for this design).
EtaResult eta_no_delay(const PlantModel& plant, const GainSet& gains,
                       const graph::Topology& topo, const ClosedLoopAnalysis& analysis,
                       double b, double h, double V0);

/// Delay-mode counterpart.  Additionally requires b_e(i)*upsilon < 1 for
/// every agent; a violation throws InfeasibleError whose message carries the
/// maximal feasible worst-case delay found by bisection on the h-grid.
EtaResult eta_delay(const PlantModel& plant, const GainSet& gains,
                    const graph::Topology& topo, const ClosedLoopAnalysis& analysis,
                    double b, double h, double d, double V0);

/// Steady-state bound on max pairwise ||x_i - x_j||^2.
double disagreement_bound(int num_agents, double eta, double beta, double lambda_min_P);

/// V0 = x' (L (x) P) x for the stacked initial state.
double initial_lyapunov(const ClosedLoopAnalysis& analysis, const Vector& x_stacked);

/// Full pipeline: gains, analysis, discretization, trigger coefficients and
/// (unless overridden) the trigger offset for the configured mode.
Design synthesize(const PlantModel& plant, const graph::Topology& topo,
                  const SynthOptions& opts, const Vector& x0_stacked);

}  // namespace petc::synthesis
