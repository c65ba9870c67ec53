#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "petc/errors.hpp"
#include "petc/matlib.hpp"

using petc::Matrix;
using petc::Vector;
namespace matlib = petc::matlib;

namespace {

Matrix vi_plant_A() {
  Matrix A(2, 2);
  A << 0.2, -0.8, 0.26, 0.05;
  return A;
}

Matrix vi_witness_P() {
  Matrix P(2, 2);
  P << 0.5859, -0.1575, -0.1575, 0.4274;
  return P;
}

Matrix shear3() {
  Matrix A(3, 3);
  A << 0.3, -0.5, 0.1, 0.2, 0.05, -0.4, -0.1, 0.6, 0.25;
  return A;
}

double rel_err(const Matrix& got, const Matrix& want) {
  return (got - want).norm() / std::max(1.0, want.norm());
}

}  // namespace

TEST_CASE("matrix exponential matches the series oracle") {
  const Matrix cases[] = {vi_plant_A(), shear3(),
                          (Matrix(2, 2) << 0, -1, 1, 0).finished(),
                          (Matrix(2, 2) << 0, 1, 0, 0).finished()};
  for (const Matrix& A : cases) {
    for (double t : {0.002, 0.1, 1.0}) {
      const Matrix got = matlib::mat_exp(A, t);
      const Matrix want = oracles::expm_series(A, t);
      CHECK(rel_err(got, want) < 1e-12);
    }
  }
}

TEST_CASE("matrix exponential is a semigroup and differentiable at zero") {
  const Matrix A = shear3();
  const Matrix both = matlib::mat_exp(A, 0.7);
  const Matrix split = matlib::mat_exp(A, 0.3) * matlib::mat_exp(A, 0.4);
  CHECK(rel_err(split, both) < 1e-12);

  const double delta = 1e-6;
  const Matrix fd = (matlib::mat_exp(A, delta) - Matrix::Identity(3, 3)) / delta;
  CHECK((fd - A).norm() < 10 * delta * A.norm() * A.norm());
}

TEST_CASE("zero-order hold of the double integrator is exact") {
  const double h = 0.25;
  Matrix A(2, 2);
  A << 0, 1, 0, 0;
  Matrix B(2, 1);
  B << 0, 1;
  const auto [G, H] = matlib::zoh_pair(A, B, h);
  Matrix G_want(2, 2);
  G_want << 1, h, 0, 1;
  Matrix H_want(2, 1);
  H_want << h * h / 2, h;
  CHECK(rel_err(G, G_want) < 1e-14);
  CHECK(rel_err(H, H_want) < 1e-14);
}

TEST_CASE("zero-order hold covers the scalar closed forms") {
  const double h = 0.1;
  {
    Matrix A(1, 1), B(1, 1);
    A << -2.0;
    B << 3.0;
    const auto [G, H] = matlib::zoh_pair(A, B, h);
    CHECK(G(0, 0) == doctest::Approx(std::exp(-2.0 * h)).epsilon(1e-13));
    CHECK(H(0, 0) ==
          doctest::Approx((std::exp(-2.0 * h) - 1.0) / -2.0 * 3.0).epsilon(1e-13));
  }
  {
    Matrix A(1, 1), B(1, 1);
    A << 0.0;
    B << 3.0;
    const auto [G, H] = matlib::zoh_pair(A, B, h);
    CHECK(G(0, 0) == doctest::Approx(1.0));
    CHECK(H(0, 0) == doctest::Approx(3.0 * h).epsilon(1e-14));
  }
}

TEST_CASE("held-input response map equals the hold integral of the gain") {
  const Matrix A = vi_plant_A();
  Matrix B(2, 1);
  B << 0.7, -1.1;
  const Matrix F = -B.transpose() * vi_witness_P();
  const double c = 1.7;
  const double h = 0.002;
  const Matrix E = matlib::input_integral(A, B, c, F, h);
  const Matrix via_hold = matlib::zoh_pair(A, B, h).second * (c * F);
  CHECK(rel_err(E, via_hold) < 1e-13);
}

TEST_CASE("norm integral agrees with a from-scratch Simpson oracle") {
  const Matrix A = vi_plant_A();
  Matrix C(2, 1);
  C << 0.7, -1.1;
  for (double T : {0.002, 0.014, 0.5}) {
    const double got = matlib::norm_integral(A, C, T);
    const double want = oracles::norm_integral_series(A, C, T, 200);
    CHECK(std::abs(got - want) < 1e-10 * std::max(1.0, want));
    const double refined = oracles::norm_integral_series(A, C, T, 400);
    CHECK(std::abs(got - refined) < 1e-8 * std::max(1.0, refined));
  }
}

TEST_CASE("spectral norm on closed-form cases") {
  Matrix D(2, 2);
  D << 3, 0, 0, -4;
  CHECK(matlib::spectral_norm(D) == doctest::Approx(4.0).epsilon(1e-14));

  Vector u(2), v(3);
  u << 1, 2;
  v << -2, 1, 2;
  const Matrix rank1 = u * v.transpose();
  CHECK(matlib::spectral_norm(rank1) ==
        doctest::Approx(u.norm() * v.norm()).epsilon(1e-13));
}

TEST_CASE("symmetric eigensolver orders values and rejects asymmetry") {
  Matrix S(2, 2);
  S << 2, 1, 1, 2;
  const auto spec = matlib::sym_eig(S);
  CHECK(spec.eigenvalues(0) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(spec.eigenvalues(1) == doctest::Approx(3.0).epsilon(1e-13));
  for (int k = 0; k < 2; ++k) {
    const Vector v = spec.eigenvectors.col(k);
    CHECK((S * v - spec.eigenvalues(k) * v).norm() < 1e-13);
  }

  Matrix bad(2, 2);
  bad << 0, 1, -1, 0;
  CHECK_THROWS_AS(matlib::sym_eig(bad), petc::NumericalError);
}

TEST_CASE("Lyapunov solve on closed forms and residuals") {
  {
    Matrix M(1, 1), Q(1, 1);
    M << -1.0;
    Q << 2.0;
    const Matrix X = matlib::lyap_solve(M, Q);
    CHECK(X(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  }
  {
    const Matrix M = shear3() - 2.0 * Matrix::Identity(3, 3);
    const Matrix Q = Matrix::Identity(3, 3);
    const Matrix X = matlib::lyap_solve(M, Q);
    CHECK((M.transpose() * X + X * M + Q).norm() < 1e-12);
    CHECK((X - X.transpose()).norm() < 1e-13);
  }
}

TEST_CASE("controllability detects the rank defect") {
  Matrix A(2, 2);
  A << 0, 1, 0, 0;
  Matrix B(2, 1);
  B << 0, 1;
  CHECK(matlib::is_controllable(A, B));

  Matrix B_bad(2, 1);
  B_bad << 1, 0;
  CHECK(matlib::is_controllable(Matrix::Identity(2, 2), B_bad) == false);
}

TEST_CASE("Riccati solve reproduces the scalar closed form") {
  Matrix A(1, 1), B(1, 1);
  A << 0.0;
  B << 1.0;
  const Matrix P = matlib::care_solve(A, B, 0.5, 0.0);
  CHECK(P(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("Riccati residuals vanish and solutions are positive definite") {
  struct Case {
    Matrix A;
    Matrix B;
    double alpha;
    double eps;
  };
  std::vector<Case> cases;
  {
    Matrix B(2, 1);
    B << 0.7, -1.1;
    cases.push_back({vi_plant_A(), B, 0.01, 1e-6});
  }
  {
    Matrix A(1, 1), B(1, 1);
    A << 2.0;
    B << 1.0;
    cases.push_back({A, B, 1.0, 1e-3});
  }
  {
    Matrix B(3, 1);
    B << 1.0, 0.3, -0.2;
    cases.push_back({shear3(), B, 0.2, 1e-6});
  }
  for (const Case& cs : cases) {
    const long n = cs.A.rows();
    const Matrix P = matlib::care_solve(cs.A, cs.B, cs.alpha, cs.eps);
    const auto spec = matlib::sym_eig(P);
    CHECK(spec.eigenvalues(0) > 1e-10);

    const Matrix shifted = cs.A + cs.alpha * Matrix::Identity(n, n);
    const Matrix residual = shifted.transpose() * P + P * shifted -
                            2.0 * P * cs.B * cs.B.transpose() * P +
                            cs.eps * Matrix::Identity(n, n);
    CHECK(residual.norm() < 1e-9 * std::max(1.0, P.norm()));

    // The design inequality in its stated form; symmetrized because the
    // result is within float error of -eps I while the summands are O(1).
    Matrix lhs = P * cs.A + cs.A.transpose() * P -
                 2.0 * P * cs.B * cs.B.transpose() * P + 2.0 * cs.alpha * P;
    lhs = 0.5 * (lhs + lhs.transpose()).eval();
    const auto lhs_spec = matlib::sym_eig(lhs);
    CHECK(lhs_spec.eigenvalues(lhs_spec.eigenvalues.size() - 1) < -1e-10);
  }
}

TEST_CASE("published certificate satisfies the design inequality at alpha 0.01") {
  const Matrix A = vi_plant_A();
  Matrix B(2, 1);
  B << 0.7, -1.1;
  const Matrix P = vi_witness_P();
  const Matrix lhs = P * A + A.transpose() * P - 2.0 * P * B * B.transpose() * P +
                     2.0 * 0.01 * P;
  const auto spec = matlib::sym_eig(lhs);
  CHECK(spec.eigenvalues(spec.eigenvalues.size() - 1) < -0.1);
}

TEST_CASE("uncontrollable pairs are rejected") {
  Matrix A(2, 2);
  A << 0, 1, 0, 0;
  Matrix B = Matrix::Zero(2, 1);
  CHECK_THROWS_AS(matlib::care_solve(A, B, 0.5, 0.0), petc::InfeasibleError);
}
