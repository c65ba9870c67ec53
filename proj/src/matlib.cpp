#include "petc/matlib.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <cstdio>
#include <string>

#include "petc/constants.hpp"
#include "petc/errors.hpp"

namespace petc::matlib {

namespace {

void require_square_finite(const Matrix& A, const char* who) {
  if (A.rows() != A.cols()) {
    throw std::invalid_argument(std::string(who) + ": matrix must be square, got " +
                                std::to_string(A.rows()) + "x" + std::to_string(A.cols()));
  }
  if (!A.allFinite()) {
    throw std::invalid_argument(std::string(who) + ": matrix has non-finite entries");
  }
}

// Order-13 diagonal Pade coefficients for exp, b[0..13].
constexpr double kPade13[] = {
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0,  129060195264000.0,   10559470521600.0,
    670442572800.0,      33522128640.0,       1323241920.0,
    40840800.0,          960960.0,            16380.0,
    182.0,               1.0};

// Largest scaled 1-norm for which the order-13 approximant is accurate to
// double precision (Higham's theta_13).
constexpr double kPadeTheta13 = 5.371920351148152;

Matrix pade13(const Matrix& A) {
  const auto n = A.rows();
  const Matrix I = Matrix::Identity(n, n);
  const Matrix A2 = A * A;
  const Matrix A4 = A2 * A2;
  const Matrix A6 = A4 * A2;
  const Matrix U =
      A * (A6 * (kPade13[13] * A6 + kPade13[11] * A4 + kPade13[9] * A2) +
           kPade13[7] * A6 + kPade13[5] * A4 + kPade13[3] * A2 + kPade13[1] * I);
  const Matrix V =
      A6 * (kPade13[12] * A6 + kPade13[10] * A4 + kPade13[8] * A2) +
      kPade13[6] * A6 + kPade13[4] * A4 + kPade13[2] * A2 + kPade13[0] * I;
  return (V - U).partialPivLu().solve(V + U);
}

}  // namespace

Matrix mat_exp(const Matrix& A, double t) {
  require_square_finite(A, "mat_exp");
  if (!std::isfinite(t)) {
    throw std::invalid_argument("mat_exp: non-finite time");
  }
  const auto n = A.rows();
  if (n == 0) {
    return Matrix(0, 0);
  }
  Matrix At = A * t;
  const double norm1 = At.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > kPadeTheta13) {
    squarings = static_cast<int>(std::ceil(std::log2(norm1 / kPadeTheta13)));
    At /= std::pow(2.0, squarings);
  }
  Matrix R = pade13(At);
  for (int i = 0; i < squarings; ++i) {
    R = R * R;
  }
  return R;
}

std::pair<Matrix, Matrix> zoh_pair(const Matrix& A, const Matrix& B, double h) {
  require_square_finite(A, "zoh_pair");
  if (B.rows() != A.rows()) {
    throw std::invalid_argument("zoh_pair: B row count must match A");
  }
  if (!B.allFinite()) {
    throw std::invalid_argument("zoh_pair: B has non-finite entries");
  }
  if (!(h >= 0.0)) {
    throw std::invalid_argument("zoh_pair: negative step");
  }
  const auto n = A.rows();
  const auto m = B.cols();
  // exp of [[A, B], [0, 0]] * h carries G in the top-left block and
  // integral_0^h exp(A s) ds * B in the top-right one.
  Matrix aug = Matrix::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = A;
  aug.topRightCorner(n, m) = B;
  const Matrix big = mat_exp(aug, h);
  return {big.topLeftCorner(n, n), big.topRightCorner(n, m)};
}

Matrix input_integral(const Matrix& A, const Matrix& B, double c,
                      const Matrix& F, double h) {
  if (F.rows() != B.cols() || F.cols() != A.cols()) {
    throw std::invalid_argument("input_integral: F must be m x n for B n x m");
  }
  // integral_0^h exp(A(h-s)) cBF ds == (integral_0^h exp(A s) ds) cBF.
  const Matrix cBF = c * B * F;
  return zoh_pair(A, cBF, h).second;
}

double spectral_norm(const Matrix& M) {
  if (M.size() == 0) {
    return 0.0;
  }
  return M.jacobiSvd().singularValues()(0);
}

double norm_integral(const Matrix& A, const Matrix& M, double T) {
  require_square_finite(A, "norm_integral");
  if (M.rows() != A.rows()) {
    throw std::invalid_argument("norm_integral: M row count must match A");
  }
  if (!(T >= 0.0)) {
    throw std::invalid_argument("norm_integral: negative horizon");
  }
  if (T == 0.0) {
    return 0.0;
  }
  // Composite Simpson over f(s) = ||exp(A(T-s)) M||_2.  The integrand is
  // evaluated on a uniform grid walked with one precomputed step exponential;
  // panel count fixed and even so results are reproducible bit-for-bit.
  const int panels = tol::kNormIntegralMinPanels + (tol::kNormIntegralMinPanels % 2);
  const int nodes = panels + 1;
  const double step = T / panels;
  const Matrix Estep = mat_exp(A, step);
  // Node k holds exp(A * k * step) * M == value of the integrand at
  // s = T - k*step; Simpson weights are symmetric so orientation is free.
  Matrix X = M;
  double sum = spectral_norm(X);  // k = 0
  for (int k = 1; k < nodes; ++k) {
    X = Estep * X;
    const double w = (k == panels) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    sum += w * spectral_norm(X);
  }
  return sum * step / 3.0;
}

SpectralResult sym_eig(const Matrix& M) {
  require_square_finite(M, "sym_eig");
  const double scale = M.norm();
  const double asym = (M - M.transpose()).norm();
  if (asym > tol::kSymCheckRel * std::max(scale, 1e-300)) {
    char rel[32];
    std::snprintf(rel, sizeof(rel), "%.3g", asym / std::max(scale, 1e-300));
    throw NumericalError(std::string("sym_eig: input is not symmetric (relative asymmetry ") +
                         rel + ")");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (M + M.transpose()));
  if (solver.info() != Eigen::Success) {
    throw NumericalError("sym_eig: eigensolver failed to converge");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

bool is_controllable(const Matrix& A, const Matrix& B) {
  require_square_finite(A, "is_controllable");
  const auto n = A.rows();
  const auto m = B.cols();
  Matrix ctrb(n, n * m);
  Matrix block = B;
  for (Eigen::Index k = 0; k < n; ++k) {
    ctrb.middleCols(k * m, m) = block;
    block = A * block;
  }
  Eigen::JacobiSVD<Matrix> svd(ctrb);
  const double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  if (smax == 0.0) {
    return n == 0;
  }
  const auto rank = (svd.singularValues().array() > tol::kRankRel * smax).count();
  return rank == n;
}

Matrix lyap_solve(const Matrix& M, const Matrix& Q) {
  require_square_finite(M, "lyap_solve");
  const auto n = M.rows();
  // vec(M'X + XM) = (I (x) M' + M' (x) I) vec(X)
  Matrix K = Matrix::Zero(n * n, n * n);
  const Matrix Mt = M.transpose();
  for (Eigen::Index i = 0; i < n; ++i) {
    K.block(i * n, i * n, n, n) += Mt;
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index k = 0; k < n; ++k) {
        K(j * n + i, k * n + i) += Mt(j, k);
      }
    }
  }
  Vector rhs(n * n);
  for (Eigen::Index col = 0; col < n; ++col) {
    rhs.segment(col * n, n) = -Q.col(col);
  }
  Eigen::PartialPivLU<Matrix> lu(K);
  const Vector x = lu.solve(rhs);
  if (!x.allFinite()) {
    throw NumericalError("lyap_solve: singular Lyapunov operator");
  }
  Matrix X(n, n);
  for (Eigen::Index col = 0; col < n; ++col) {
    X.col(col) = x.segment(col * n, n);
  }
  return 0.5 * (X + X.transpose());
}

Matrix care_solve(const Matrix& A, const Matrix& B, double alpha, double eps) {
  require_square_finite(A, "care_solve");
  if (B.rows() != A.rows() || !B.allFinite()) {
    throw std::invalid_argument("care_solve: bad B");
  }
  if (!(eps >= 0.0)) {
    throw std::invalid_argument("care_solve: eps must be >= 0");
  }
  if (!is_controllable(A, B)) {
    throw InfeasibleError("care_solve: (A, B) is not controllable");
  }
  const auto n = A.rows();
  const Matrix I = Matrix::Identity(n, n);
  const Matrix As = A + alpha * I;

  // Initial stabilizing gain by Lyapunov shift: with gamma > ||As|| the
  // matrix -(As + gamma I) is Hurwitz, so
  //   (As + gamma I) Z + Z (As + gamma I)' = 2 B B'
  // has a unique solution, positive definite under controllability, and
  // K0 = B' Z^-1 places As - B K0 in the open left half plane.
  const double gamma = As.norm() + 1.0;
  const Matrix Z =
      lyap_solve((As + gamma * I).transpose(), -2.0 * B * B.transpose());
  Matrix K = B.transpose() * Z.partialPivLu().solve(I);

  // Newton-Kleinman on  As'P + P As - 2 P B B' P = -eps I,
  // i.e. R = I/2, so K_j = 2 B' P_j and the Lyapunov right side gains
  // K'K/2.  Quadratic convergence from any stabilizing K.
  Matrix P = Matrix::Zero(n, n);
  for (int it = 0; it < tol::kCareMaxIter; ++it) {
    const Matrix Acl = As - B * K;
    const Matrix P_next =
        lyap_solve(Acl, eps * I + 0.5 * K.transpose() * K);
    const double delta = (P_next - P).norm();
    P = P_next;
    K = 2.0 * B.transpose() * P;
    if (delta <= tol::kCareNewtonRel * std::max(1.0, P.norm())) {
      if (!P.allFinite()) {
        throw NumericalError("care_solve: diverged");
      }
      return 0.5 * (P + P.transpose());
    }
  }

  // The update size cannot shrink below the rounding floor of the Lyapunov
  // solves, which grows with ||K||^2 rather than ||P||, so for stiff shifts
  // the step test above is unreachable.  Accept the plateau when the
  // algebraic residual is at rounding level relative to the equation terms.
  const Matrix cross = P * B * B.transpose() * P;
  const Matrix residual = As.transpose() * P + P * As - 2.0 * cross + eps * I;
  const double scale = std::max(1.0, 2.0 * (As.transpose() * P).norm() +
                                         2.0 * cross.norm() + eps * std::sqrt(n));
  if (P.allFinite() && residual.norm() <= tol::kCareResidualRel * scale) {
    return 0.5 * (P + P.transpose());
  }
  throw NumericalError("care_solve: Newton iteration did not converge in " +
                       std::to_string(tol::kCareMaxIter) + " steps");
}

}  // namespace petc::matlib
