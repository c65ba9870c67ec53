#pragma once

#include <Eigen/Dense>
#include <utility>

namespace petc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace matlib {

/// Eigendecomposition of a symmetric matrix, eigenvalues ascending,
/// eigenvectors orthonormal in matching column order.
struct SpectralResult {
  Vector eigenvalues;
  Matrix eigenvectors;
};

/// exp(A*t) by scaling-and-squaring with a fixed order-13 diagonal Pade
/// approximant.  Deterministic: no norm-dependent order switching.
/// Throws std::invalid_argument on non-square or non-finite input.
Matrix mat_exp(const Matrix& A, double t);

/// Exact zero-order-hold discretization over one period:
///   G = exp(A*h),  H = (integral_0^h exp(A*s) ds) * B.
/// Computed from one block-augmented exponential so G and H share error
/// behaviour.  h >= 0 required.
std::pair<Matrix, Matrix> zoh_pair(const Matrix& A, const Matrix& B, double h);

/// Held-input response integral  E = integral_0^h exp(A*(h-s)) * (c*B*F) ds.
Matrix input_integral(const Matrix& A, const Matrix& B, double c,
                      const Matrix& F, double h);

/// integral_0^T || exp(A*(T-s)) * M ||_2 ds by composite Simpson quadrature
/// with a fixed panel count (>= 200, even).  T >= 0 required.
double norm_integral(const Matrix& A, const Matrix& M, double T);

/// Spectral norm (largest singular value).
double spectral_norm(const Matrix& M);

/// Symmetric eigensolver.  Rejects input whose asymmetry exceeds
/// tol::kSymCheckRel relative to its norm.
SpectralResult sym_eig(const Matrix& M);

/// Solves  (A+alpha*I)' P + P (A+alpha*I) - 2 P B B' P = -eps*I  for the
/// unique symmetric positive definite P, by Newton-Kleinman iteration with
/// Lyapunov inner solves.  The initial stabilizing gain comes from a
/// Lyapunov shift (no pole placement).  Requires (A, B) controllable.
Matrix care_solve(const Matrix& A, const Matrix& B, double alpha, double eps);

/// Controllability rank test for the pair (A, B).
bool is_controllable(const Matrix& A, const Matrix& B);

/// Solves M' X + X M = -Q for symmetric Q via the Kronecker-vectorized
/// linear system.  Unique solution requires eig(M) + eig(M) != 0 pairwise;
/// callers guarantee M Hurwitz or anti-Hurwitz.
Matrix lyap_solve(const Matrix& M, const Matrix& Q);

}  // namespace matlib
}  // namespace petc
