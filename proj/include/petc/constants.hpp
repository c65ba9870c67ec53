#pragma once

// Central record of every numeric tolerance and iteration cap used by the
// library.  Nothing else in the codebase hard-codes a tolerance; tests that
// need a different bound state their own.

namespace petc::tol {

// matlib
inline constexpr double kMatExpRel = 1e-12;        // mat_exp vs. reference series
inline constexpr double kSymCheckRel = 1e-10;      // allowed relative asymmetry in sym_eig input
inline constexpr double kCareNewtonRel = 1e-13;    // Newton-Kleinman relative update stop
inline constexpr int kCareMaxIter = 100;
inline constexpr double kCareResidualRel = 1e-12;  // plateau acceptance, residual vs summand norms
inline constexpr double kCareDefaultEpsScale = 1e-6;  // eps = scale * ||A||_2
inline constexpr double kRankRel = 1e-10;          // SVD rank threshold (relative to sigma_max)
inline constexpr int kNormIntegralMinPanels = 200; // composite Simpson panel floor

// graph
inline constexpr double kConnectivityLambda2 = 1e-9;  // lambda_2 > this  <=>  connected

// synthesis
inline constexpr double kZeroEigNormalized = 1e-8;   // |eig|/||Lbar|| below this counts as kernel
inline constexpr double kFixedPointRel = 1e-10;      // eta fixed-point convergence
inline constexpr int kFixedPointMaxIter = 1000;
inline constexpr double kEtaSafety = 1.01;           // multiplier applied to the eta lower bound
inline constexpr double kEtaFloor = 1e-12;           // returned when the lower bound is exactly 0

// netsim
inline constexpr double kEnvelopeRelSlack = 1e-6;    // V <= envelope * (1 + slack)
inline constexpr double kDivergenceNorm = 1e12;      // abort when any |x_i| exceeds this
inline constexpr double kGridRel = 1e-9;             // d/h, duration/h grid-alignment check
inline constexpr double kDelayRoundNudge = 1e-12;    // p = ceil(raw/h - nudge)

}  // namespace petc::tol
