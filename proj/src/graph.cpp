#include "petc/graph.hpp"

#include <algorithm>
#include <queue>
#include <set>
#include <string>

#include "petc/constants.hpp"
#include "petc/errors.hpp"

namespace petc::graph {

Topology make_topology(int num_agents, const std::vector<std::pair<int, int>>& edges) {
  if (num_agents < 1) {
    throw ConfigError("topology: need at least one agent");
  }
  Topology topo;
  topo.num_agents = num_agents;
  std::set<std::pair<int, int>> unique;
  for (auto [a, b] : edges) {
    if (a == b) {
      throw ConfigError("topology: self-loop on agent " + std::to_string(a));
    }
    if (a < 0 || b < 0 || a >= num_agents || b >= num_agents) {
      throw ConfigError("topology: edge (" + std::to_string(a) + ", " +
                        std::to_string(b) + ") references a missing agent");
    }
    unique.insert({std::min(a, b), std::max(a, b)});
  }
  topo.edges.assign(unique.begin(), unique.end());
  topo.neighbors.resize(num_agents);
  topo.adjacency = Matrix::Zero(num_agents, num_agents);
  for (auto [a, b] : topo.edges) {
    topo.neighbors[a].push_back(b);
    topo.neighbors[b].push_back(a);
    topo.adjacency(a, b) = 1.0;
    topo.adjacency(b, a) = 1.0;
  }
  for (auto& list : topo.neighbors) {
    std::sort(list.begin(), list.end());
  }
  topo.degree = topo.adjacency.rowwise().sum().asDiagonal();
  topo.laplacian = topo.degree - topo.adjacency;
  return topo;
}

Vector laplacian_spectrum(const Topology& topo) {
  return matlib::sym_eig(topo.laplacian).eigenvalues;
}

bool is_connected(const Topology& topo) {
  const int n = topo.num_agents;
  std::vector<char> seen(n, 0);
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = 1;
  int reached = 1;
  while (!frontier.empty()) {
    const int v = frontier.front();
    frontier.pop();
    for (int w : topo.neighbors[v]) {
      if (!seen[w]) {
        seen[w] = 1;
        ++reached;
        frontier.push(w);
      }
    }
  }
  const bool bfs_connected = reached == n;
  const bool spectral_connected =
      n == 1 || laplacian_spectrum(topo)(1) > tol::kConnectivityLambda2;
  if (bfs_connected != spectral_connected) {
    throw NumericalError("is_connected: traversal and spectral routes disagree");
  }
  return bfs_connected;
}

Matrix kron(const Matrix& A, const Matrix& B) {
  Matrix out(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    }
  }
  return out;
}

}  // namespace petc::graph
