#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "petc/errors.hpp"
#include "petc/graph.hpp"

using petc::Matrix;
using petc::Vector;
namespace graph = petc::graph;

namespace {

graph::Topology path4() {
  return graph::make_topology(4, {{0, 1}, {1, 2}, {2, 3}});
}

}  // namespace

TEST_CASE("topology normalizes edges and builds the Laplacian") {
  const graph::Topology topo =
      graph::make_topology(4, {{1, 0}, {0, 1}, {1, 2}, {3, 2}});
  CHECK(topo.edges.size() == 3);
  CHECK(topo.degree_of(0) == 1);
  CHECK(topo.degree_of(1) == 2);
  CHECK(topo.neighbors[1] == std::vector<int>{0, 2});

  Matrix L_want(4, 4);
  L_want << 1, -1, 0, 0, -1, 2, -1, 0, 0, -1, 2, -1, 0, 0, -1, 1;
  CHECK((topo.laplacian - L_want).norm() < 1e-15);
  CHECK((topo.laplacian - topo.laplacian.transpose()).norm() == 0.0);
  CHECK((topo.laplacian.rowwise().sum()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("invalid edges are rejected") {
  CHECK_THROWS_AS(graph::make_topology(3, {{0, 0}}), petc::ConfigError);
  CHECK_THROWS_AS(graph::make_topology(3, {{0, 3}}), petc::ConfigError);
  CHECK_THROWS_AS(graph::make_topology(0, {}), petc::ConfigError);
}

TEST_CASE("path-4 spectrum matches the closed form") {
  const Vector spec = graph::laplacian_spectrum(path4());
  const std::vector<double> want = oracles::path4_spectrum();
  REQUIRE(spec.size() == 4);
  for (int k = 0; k < 4; ++k) {
    CHECK(spec(k) == doctest::Approx(want[static_cast<std::size_t>(k)]).epsilon(1e-12));
  }
}

TEST_CASE("complete graph spectrum is {0, N, ..., N}") {
  const graph::Topology k4 = graph::make_topology(
      4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});
  const Vector spec = graph::laplacian_spectrum(k4);
  CHECK(std::abs(spec(0)) < 1e-12);
  for (int k = 1; k < 4; ++k) CHECK(spec(k) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("connectivity check agrees with components") {
  CHECK(graph::is_connected(path4()));
  const graph::Topology split = graph::make_topology(4, {{0, 1}, {2, 3}});
  CHECK(graph::is_connected(split) == false);
  const graph::Topology lonely = graph::make_topology(1, {});
  CHECK(graph::is_connected(lonely));
}

TEST_CASE("Kronecker product entries and mixed-product rule") {
  Matrix A(2, 2), B(2, 2);
  A << 1, 2, 3, 4;
  B << 0, 5, 6, 7;
  const Matrix K = graph::kron(A, B);
  REQUIRE(K.rows() == 4);
  CHECK(K(0, 1) == 5.0);
  CHECK(K(0, 3) == 10.0);
  CHECK(K(3, 0) == 18.0);
  CHECK(K(3, 3) == 28.0);

  Matrix C(2, 2), D(2, 2);
  C << 2, -1, 0, 1;
  D << 1, 1, -1, 2;
  const Matrix lhs = graph::kron(A, B) * graph::kron(C, D);
  const Matrix rhs = graph::kron(Matrix(A * C), Matrix(B * D));
  CHECK((lhs - rhs).norm() < 1e-12);
}
