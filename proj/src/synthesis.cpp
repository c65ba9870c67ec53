#include "petc/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "petc/constants.hpp"
#include "petc/errors.hpp"

namespace petc::synthesis {

namespace {

// Shared state for the trigger-offset lower bound eta > K_i * v_max.
// Both modes reduce to a per-agent coefficient K_i that is linear in v_max
// because every worst-case input magnitude enters squared through
// z_bar_i^2 = gain_i^2 * v_max.
struct EtaProblem {
  double K = 0;                    // max_i K_i
  std::vector<double> z_gain;      // z_bar_i = z_gain_i * sqrt(v_max)
};

EtaResult trivial_eta(const EtaProblem& problem, double V0) {
  EtaResult result;
  result.eta = tol::kEtaFloor;
  result.v_max = V0;
  result.z_bar.assign(problem.z_gain.size(), 0.0);
  return result;
}

EtaResult solve_eta_fixed_point(const EtaProblem& problem, int num_agents,
                                double beta, double V0) {
  if (num_agents < 2 || !(beta > 0.0)) {
    return trivial_eta(problem, V0);
  }
  EtaResult result;
  result.coefficient = problem.K;
  result.q = tol::kEtaSafety * problem.K * num_agents / beta;

  double eta = 0.0;
  double v_max = V0;
  double prev_delta = 0.0;
  bool converged = false;
  int it = 0;
  for (; it < tol::kFixedPointMaxIter; ++it) {
    double eta_next = tol::kEtaSafety * problem.K * v_max;
    double delta = eta_next - eta;
    if (it > 0 && delta * prev_delta < 0.0) {
      eta_next = eta + 0.5 * delta;  // damp oscillation
      delta = eta_next - eta;
    }
    prev_delta = delta;
    eta = eta_next;
    v_max = std::max(V0, num_agents * eta / beta);
    if (std::abs(delta) <= tol::kFixedPointRel * std::max(eta, tol::kEtaFloor)) {
      converged = true;
      ++it;
      break;
    }
    if (!std::isfinite(eta) || eta > 1e200) {
      break;
    }
  }
  if (!converged) {
    throw InfeasibleError(
        "no finite trigger offset: the bound eta > K * max{V0, N eta / beta} has "
        "contraction ratio q = " + std::to_string(result.q) +
        " >= 1; shorten the sampling period or weaken the coupling");
  }
  if (eta <= 0.0) {
    eta = tol::kEtaFloor;
    v_max = std::max(V0, num_agents * eta / beta);
  }
  result.eta = eta;
  result.v_max = v_max;
  result.iterations = it;
  result.z_bar.resize(problem.z_gain.size());
  for (size_t i = 0; i < problem.z_gain.size(); ++i) {
    result.z_bar[i] = problem.z_gain[i] * std::sqrt(v_max);
  }
  return result;
}

double max_feasible_delay(const PlantModel& plant, const GainSet& gains,
                          double b_e_max, double h, double d_request) {
  const Matrix cBF = gains.c1 * plant.B * gains.F;
  auto margin = [&](double d) {
    return 1.0 - b_e_max * matlib::norm_integral(plant.A, cBF, d);
  };
  if (margin(h) <= 0.0) {
    return 0.0;
  }
  double lo = h;
  double hi = d_request;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    (margin(mid) > 0.0 ? lo : hi) = mid;
  }
  // Snap down onto the sampling grid and back off while infeasible.
  double d = std::floor(lo / h + tol::kGridRel) * h;
  while (d >= h && margin(d) <= 0.0) {
    d -= h;
  }
  return std::max(d, 0.0);
}

}  // namespace

PlantModel make_plant(const Matrix& A, const Matrix& B) {
  if (A.rows() != A.cols() || A.rows() < 1) {
    throw ConfigError("plant: A must be square and non-empty");
  }
  if (B.rows() != A.rows() || B.cols() < 1) {
    throw ConfigError("plant: B must have the same row count as A");
  }
  if (!A.allFinite() || !B.allFinite()) {
    throw ConfigError("plant: non-finite entries");
  }
  return {A, B, static_cast<int>(A.rows()), static_cast<int>(B.cols())};
}

GainSet design_gains(const PlantModel& plant, const graph::Topology& topo,
                     double alpha, double eps, std::optional<double> c_override,
                     const std::optional<Matrix>& P_witness) {
  if (!graph::is_connected(topo)) {
    throw ConfigError("graph not connected");
  }
  if (!(alpha > 0.0)) {
    throw ConfigError("design_gains: alpha must be positive (set it explicitly "
                      "when ||A|| = 0 leaves no usable default)");
  }
  GainSet gains;
  gains.alpha = alpha;
  gains.eps = eps;
  if (P_witness.has_value()) {
    const Matrix& P = *P_witness;
    if (P.rows() != plant.n || P.cols() != plant.n) {
      throw ConfigError("design_gains: certificate P has the wrong dimensions");
    }
    const Matrix shifted = plant.A + alpha * Matrix::Identity(plant.n, plant.n);
    Matrix residual = shifted.transpose() * P + P * shifted -
                      2.0 * P * plant.B * plant.B.transpose() * P;
    // A certificate that nearly solves the equality leaves a residual close
    // to zero, where accumulation order alone breaks bitwise symmetry.
    residual = 0.5 * (residual + residual.transpose()).eval();
    const auto p_spec = matlib::sym_eig(P);
    const auto r_spec = matlib::sym_eig(residual);
    if (!(p_spec.eigenvalues(0) > 0.0)) {
      throw InfeasibleError("design_gains: certificate P is not positive definite");
    }
    if (!(r_spec.eigenvalues(r_spec.eigenvalues.size() - 1) < 0.0)) {
      throw InfeasibleError(
          "design_gains: certificate P does not satisfy the strict design "
          "inequality at the given alpha");
    }
    gains.P = 0.5 * (P + P.transpose());
  } else {
    gains.P = matlib::care_solve(plant.A, plant.B, alpha, eps);
  }
  gains.F = -plant.B.transpose() * gains.P;

  const double lambda2 =
      topo.num_agents > 1 ? graph::laplacian_spectrum(topo)(1) : 0.0;
  if (topo.num_agents > 1 && lambda2 <= tol::kConnectivityLambda2) {
    throw InfeasibleError("design_gains: lambda_2 is numerically zero");
  }
  const double c_min = topo.num_agents > 1 ? 1.0 / lambda2 : 0.0;
  gains.c = c_override.value_or(c_min);
  if (gains.c < c_min * (1.0 - tol::kGridRel)) {
    throw ConfigError("design_gains: coupling override " + std::to_string(gains.c) +
                      " is below the admissible minimum 1/lambda_2 = " +
                      std::to_string(c_min));
  }
  gains.c1 = 2.0 * gains.c;
  return gains;
}

ClosedLoopAnalysis closed_loop_analysis(const PlantModel& plant, const GainSet& gains,
                                        const graph::Topology& topo) {
  ClosedLoopAnalysis out;
  const int N = topo.num_agents;
  const int n = plant.n;
  out.L_hat = graph::kron(topo.laplacian, gains.P);
  out.A_c = graph::kron(Matrix::Identity(N, N), plant.A) +
            gains.c * graph::kron(topo.laplacian, plant.B * gains.F);
  Matrix L_bar = out.L_hat * out.A_c + out.A_c.transpose() * out.L_hat;
  out.L_bar = 0.5 * (L_bar + L_bar.transpose());

  const Vector spec = matlib::sym_eig(out.L_bar).eigenvalues;
  out.L_bar_spectrum = spec;
  const double scale = std::max(std::abs(spec(0)), std::abs(spec(spec.size() - 1)));
  int kernel = 0;
  int positive = 0;
  for (Eigen::Index i = 0; i < spec.size(); ++i) {
    if (std::abs(spec(i)) <= tol::kZeroEigNormalized * scale) {
      ++kernel;
    } else if (spec(i) > 0.0) {
      ++positive;
    }
  }
  out.kernel_dim = kernel;
  if (kernel != n || positive != 0) {
    throw NumericalError(
        "closed_loop_analysis: coupled-loop spectrum lacks the required structure "
        "(kernel dimension " + std::to_string(kernel) + ", expected " +
        std::to_string(n) + "; " + std::to_string(positive) + " positive eigenvalues)");
  }

  const Vector lhat_spec = matlib::sym_eig(out.L_hat).eigenvalues;
  out.lambda_max_Lhat = lhat_spec(lhat_spec.size() - 1);
  out.lambda_min_nz_Lhat = N > 1 ? lhat_spec(n) : 0.0;

  const Vector p_spec = matlib::sym_eig(gains.P).eigenvalues;
  out.lambda_min_P = p_spec(0);
  out.lambda_max_P = p_spec(p_spec.size() - 1);

  const Vector l_spec = graph::laplacian_spectrum(topo);
  out.lambda2_L = N > 1 ? l_spec(1) : 0.0;
  out.lambda_max_L = l_spec(l_spec.size() - 1);

  if (N > 1) {
    // Largest eigenvalue of -L_bar off the kernel sits just below the
    // trailing n (numerically zero) entries of the ascending spectrum.
    const double min_nz_neg = -spec(spec.size() - n - 1);
    out.beta = min_nz_neg / out.lambda_max_Lhat;
    if (!(out.beta > 0.0)) {
      throw NumericalError("closed_loop_analysis: nonpositive decay ratio");
    }
  }
  return out;
}

double lambda_bar(const graph::Topology& topo, const Matrix& M) {
  const Vector adj_spec = matlib::sym_eig(topo.adjacency).eigenvalues;
  const double adj_sq_max = std::max(adj_spec(0) * adj_spec(0),
                                     adj_spec(adj_spec.size() - 1) * adj_spec(adj_spec.size() - 1));
  const Vector m_spec = matlib::sym_eig(M).eigenvalues;
  return adj_sq_max * m_spec(m_spec.size() - 1);
}

double error_stack_gain(int degree, int num_agents, double b) {
  return std::sqrt(degree * num_agents * (num_agents - 1.0) * (0.5 * b + 0.5 / b));
}

EtaResult eta_no_delay(const PlantModel& plant, const GainSet& gains,
                       const graph::Topology& topo, const ClosedLoopAnalysis& analysis,
                       double b, double h, double V0) {
  const int N = topo.num_agents;
  if (N < 2) {
    return trivial_eta({0.0, {0.0}}, V0);
  }
  const Matrix E = matlib::input_integral(plant.A, plant.B, gains.c1, gains.F, h);
  const double E_norm = matlib::spectral_norm(E);
  const Matrix M = gains.P * plant.B * plant.B.transpose() * gains.P;
  const double M_norm = matlib::spectral_norm(M);
  const double base = analysis.lambda_max_L * analysis.lambda_max_L /
                      analysis.lambda_min_nz_Lhat;

  EtaProblem problem;
  problem.z_gain.resize(N);
  for (int i = 0; i < N; ++i) {
    const int Ni = topo.degree_of(i);
    const double b_e = error_stack_gain(Ni, N, b);
    const double growth = 2.0 * gains.c1 * Ni * (b * (N - 1) + N / b) * E_norm * E_norm;
    const double sampled = gains.c1 * (1.0 + 2.0 * b * Ni) *
                           (2.0 + b_e * E_norm) * (2.0 + b_e * E_norm);
    const double K_i = (growth + sampled) * M_norm * base;
    problem.K = std::max(problem.K, K_i);
    problem.z_gain[i] = analysis.lambda_max_L / std::sqrt(analysis.lambda_min_nz_Lhat);
  }
  return solve_eta_fixed_point(problem, N, analysis.beta, V0);
}

EtaResult eta_delay(const PlantModel& plant, const GainSet& gains,
                    const graph::Topology& topo, const ClosedLoopAnalysis& analysis,
                    double b, double h, double d, double V0) {
  const int N = topo.num_agents;
  if (N < 2) {
    return trivial_eta({0.0, {0.0}}, V0);
  }
  const int p = static_cast<int>(std::llround(d / h));
  const Matrix cBF = gains.c1 * plant.B * gains.F;
  const double upsilon = matlib::norm_integral(plant.A, cBF, d);
  const double upsilon_h = matlib::norm_integral(plant.A, cBF, d - h);
  const Matrix E = matlib::input_integral(plant.A, plant.B, gains.c1, gains.F, h);
  const double E_norm = matlib::spectral_norm(E);
  const Matrix G = matlib::mat_exp(plant.A, h);
  Matrix Gp = Matrix::Identity(plant.n, plant.n);
  for (int k = 0; k < p; ++k) {
    Gp = Gp * G;
  }
  Matrix Gpm1 = Matrix::Identity(plant.n, plant.n);
  for (int k = 0; k < p - 1; ++k) {
    Gpm1 = Gpm1 * G;
  }
  const Matrix W = (G - Matrix::Identity(plant.n, plant.n)) * Gpm1;
  const double Gp_norm = matlib::spectral_norm(Gp);
  const double W_norm = matlib::spectral_norm(W);
  const double GmI_norm =
      matlib::spectral_norm(G - Matrix::Identity(plant.n, plant.n));
  const Matrix M = gains.P * plant.B * plant.B.transpose() * gains.P;
  const double M_norm = matlib::spectral_norm(M);
  const double lbar = lambda_bar(topo, M);
  const double base = analysis.lambda_max_L * analysis.lambda_max_L /
                      analysis.lambda_min_nz_Lhat;

  double worst_be = 0.0;
  for (int i = 0; i < N; ++i) {
    worst_be = std::max(worst_be, error_stack_gain(topo.degree_of(i), N, b));
  }
  if (worst_be * upsilon >= 1.0) {
    const double d_ok = max_feasible_delay(plant, gains, worst_be, h, d);
    throw InfeasibleError(
        "eta_delay: worst-case delay " + std::to_string(d) +
        " is infeasible (b_e * upsilon = " + std::to_string(worst_be * upsilon) +
        " >= 1); maximal feasible delay on this grid is " + std::to_string(d_ok));
  }

  EtaProblem problem;
  problem.z_gain.resize(N);
  for (int i = 0; i < N; ++i) {
    const double b_e = error_stack_gain(topo.degree_of(i), N, b);
    const double den_d = 1.0 - b_e * upsilon;
    const double den_h = 1.0 - b_e * upsilon_h;
    const double sum_inv = 1.0 / den_d + 1.0 / den_h;
    const double zbar_sq_gain = base / (den_d * den_d);
    // The propagated-error terms keep the lambda_bar weight they carry in
    // the online test, so the bound majorizes what the trigger evaluates.
    const double prop = gains.c1 * (1.0 + 1.0 / b) * lbar *
                        (Gp_norm + 1.0) * (Gp_norm + 1.0) * upsilon * upsilon;
    const double prop_disc_root = W_norm * upsilon + GmI_norm * upsilon_h + E_norm;
    const double prop_disc = gains.c1 * (1.0 + b) * (1.0 + 1.0 / b) * lbar *
                             prop_disc_root * prop_disc_root;
    const double K_i = gains.c1 * (1.0 + b) * (1.0 + b) * M_norm * base * sum_inv * sum_inv +
                       (prop + prop_disc) * zbar_sq_gain;
    problem.K = std::max(problem.K, K_i);
    problem.z_gain[i] =
        analysis.lambda_max_L / (den_d * std::sqrt(analysis.lambda_min_nz_Lhat));
  }
  return solve_eta_fixed_point(problem, N, analysis.beta, V0);
}

double disagreement_bound(int num_agents, double eta, double beta, double lambda_min_P) {
  return num_agents * eta / (beta * lambda_min_P);
}

double initial_lyapunov(const ClosedLoopAnalysis& analysis, const Vector& x_stacked) {
  return x_stacked.dot(analysis.L_hat * x_stacked);
}

Design synthesize(const PlantModel& plant, const graph::Topology& topo,
                  const SynthOptions& opts, const Vector& x0_stacked) {
  if (!(opts.h > 0.0)) {
    throw ConfigError("synthesize: sampling period must be positive");
  }
  if (!(opts.sigma > 0.0) || opts.sigma >= 1.0) {
    throw ConfigError("synthesize: sigma must lie in (0, 1)");
  }
  if (!(opts.b > 0.0)) {
    throw ConfigError("synthesize: b must be positive");
  }
  if (x0_stacked.size() != static_cast<Eigen::Index>(plant.n) * topo.num_agents) {
    throw ConfigError("synthesize: initial state has wrong dimension");
  }

  Design design;
  design.plant = plant;
  design.topo = topo;

  const double A_norm = matlib::spectral_norm(plant.A);
  const double alpha = opts.alpha.value_or(0.1 * A_norm);
  const double eps = opts.eps.value_or(tol::kCareDefaultEpsScale * A_norm);
  design.gains = design_gains(plant, topo, alpha, eps, opts.c, opts.P_witness);
  design.analysis = closed_loop_analysis(plant, design.gains, topo);

  EventDesign& ev = design.event;
  ev.mode = opts.mode;
  ev.sigma = opts.sigma;
  ev.b = opts.b;
  ev.h = opts.h;
  ev.v0 = initial_lyapunov(design.analysis, x0_stacked);
  ev.M = design.gains.P * plant.B * plant.B.transpose() * design.gains.P;
  ev.M_norm = matlib::spectral_norm(ev.M);

  auto [G, H] = matlib::zoh_pair(plant.A, plant.B, opts.h);
  ev.G = G;
  ev.H = H;
  ev.Gp = Matrix::Identity(plant.n, plant.n);
  ev.W = Matrix::Zero(plant.n, plant.n);
  ev.GmI_norm = matlib::spectral_norm(G - Matrix::Identity(plant.n, plant.n));

  const int N = topo.num_agents;
  ev.b_e.resize(N);
  for (int i = 0; i < N; ++i) {
    ev.b_e[i] = error_stack_gain(topo.degree_of(i), N, opts.b);
  }

  if (opts.mode == Mode::kContinuous) {
    // The reference loop broadcasts every step with coupling c; none of the
    // event machinery applies.
    ev.E = Matrix::Zero(plant.n, plant.n);
    design.trigger.assign(N, {});
    return design;
  }

  ev.E = matlib::input_integral(plant.A, plant.B, design.gains.c1, design.gains.F, opts.h);
  ev.E_norm = matlib::spectral_norm(ev.E);

  if (opts.mode == Mode::kDelay) {
    if (!(opts.d > 0.0)) {
      throw ConfigError("synthesize: delay mode requires d > 0");
    }
    const double ratio = opts.d / opts.h;
    ev.p = static_cast<int>(std::llround(ratio));
    if (ev.p < 1 || std::abs(ratio - ev.p) > tol::kGridRel * std::max(1.0, ratio)) {
      throw ConfigError("synthesize: worst-case delay must be a positive multiple "
                        "of the sampling period");
    }
    ev.d = opts.d;
    const Matrix cBF = design.gains.c1 * plant.B * design.gains.F;
    ev.upsilon = matlib::norm_integral(plant.A, cBF, ev.d);
    ev.upsilon_h = matlib::norm_integral(plant.A, cBF, ev.d - opts.h);
    for (int k = 0; k < ev.p; ++k) {
      ev.Gp = ev.Gp * G;
    }
    Matrix Gpm1 = Matrix::Identity(plant.n, plant.n);
    for (int k = 0; k < ev.p - 1; ++k) {
      Gpm1 = Gpm1 * G;
    }
    ev.W = (G - Matrix::Identity(plant.n, plant.n)) * Gpm1;
    ev.Gp_norm = matlib::spectral_norm(ev.Gp);
    ev.W_norm = matlib::spectral_norm(ev.W);
    ev.lambda_bar = lambda_bar(topo, ev.M);

    double worst = 0.0;
    for (int i = 0; i < N; ++i) {
      worst = std::max(worst, ev.b_e[i] * ev.upsilon);
    }
    ev.feasibility_margin = 1.0 - worst;
  }

  // Trigger offset: explicit override wins, otherwise run the design bound.
  EtaResult eta;
  bool eta_solved = false;
  std::string eta_failure;
  try {
    eta = opts.mode == Mode::kDelay
              ? eta_delay(plant, design.gains, topo, design.analysis, opts.b, opts.h,
                          opts.d, ev.v0)
              : eta_no_delay(plant, design.gains, topo, design.analysis, opts.b,
                             opts.h, ev.v0);
    eta_solved = true;
  } catch (const InfeasibleError& err) {
    if (!opts.eta_override) {
      throw;
    }
    eta_failure = err.what();
  }

  if (opts.eta_override) {
    ev.eta = *opts.eta_override;
    if (!(ev.eta > 0.0)) {
      throw ConfigError("synthesize: trigger offset override must be positive");
    }
    ev.eta_is_override = true;
    ev.v_max = design.analysis.beta > 0.0
                   ? std::max(ev.v0, N * ev.eta / design.analysis.beta)
                   : ev.v0;
    if (eta_solved) {
      ev.eta_lower_bound = eta.coefficient * ev.v_max;
      ev.eta_q = eta.q;
      ev.eta_meets_bound = ev.eta > ev.eta_lower_bound;
    } else {
      ev.eta_lower_bound = std::numeric_limits<double>::infinity();
      ev.eta_q = std::numeric_limits<double>::infinity();
      ev.eta_meets_bound = false;
    }
    ev.z_bar.assign(N, 0.0);
    for (int i = 0; i < N && N > 1; ++i) {
      const double den_i = opts.mode == Mode::kDelay
                               ? 1.0 - ev.b_e[i] * ev.upsilon
                               : 1.0;
      ev.z_bar[i] = design.analysis.lambda_max_L /
                    std::max(den_i, 1e-12) *
                    std::sqrt(ev.v_max / design.analysis.lambda_min_nz_Lhat);
    }
  } else {
    ev.eta = eta.eta;
    ev.v_max = eta.v_max;
    ev.z_bar = eta.z_bar;
    ev.eta_lower_bound = eta.coefficient * eta.v_max;
    ev.eta_q = eta.q;
    ev.eta_meets_bound = true;
  }

  ev.disagreement_bound =
      disagreement_bound(N, ev.eta, design.analysis.beta, design.analysis.lambda_min_P);

  design.trigger.resize(N);
  for (int i = 0; i < N; ++i) {
    TriggerCoefficients& tc = design.trigger[i];
    const int Ni = topo.degree_of(i);
    if (opts.mode == Mode::kDelay) {
      tc.zcheck_d = design.gains.c1 * (1.0 + opts.b) * (1.0 + opts.b);
      tc.prop = design.gains.c1 * (1.0 + 1.0 / opts.b) * ev.lambda_bar;
      tc.prop_disc = design.gains.c1 * (1.0 + opts.b) * (1.0 + 1.0 / opts.b) * ev.lambda_bar;
    } else {
      tc.err = design.gains.c * Ni * (opts.b * (N - 1) + (3.0 * N - 1.0) / opts.b);
      tc.zcheck = design.gains.c1 * (1.0 + 2.0 * opts.b * Ni);
      tc.disc = design.gains.c * Ni * ((N + 1.0) / opts.b + 3.0 * opts.b * (N - 1));
    }
  }
  return design;
}

}  // namespace petc::synthesis
