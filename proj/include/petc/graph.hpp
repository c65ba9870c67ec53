#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "petc/matlib.hpp"

namespace petc::graph {

/// Undirected, unweighted communication graph on agents 0..N-1.
struct Topology {
  int num_agents = 0;
  std::vector<std::pair<int, int>> edges;          // normalized i < j, deduplicated
  std::vector<std::vector<int>> neighbors;         // sorted per agent
  Matrix adjacency;                                 // N x N, 0/1 symmetric
  Matrix degree;                                    // N x N diagonal
  Matrix laplacian;                                 // degree - adjacency

  int degree_of(int agent) const { return static_cast<int>(neighbors[agent].size()); }
};

/// Builds a topology from an edge list on agents 0..num_agents-1.
/// Rejects self-loops, out-of-range endpoints and num_agents < 1.
/// Duplicate edges collapse to one.
Topology make_topology(int num_agents, const std::vector<std::pair<int, int>>& edges);

/// Laplacian eigenvalues ascending (first is 0 up to rounding).
Vector laplacian_spectrum(const Topology& topo);

/// True when the graph is connected.  Decided by breadth-first search and
/// cross-checked against lambda_2 > tol::kConnectivityLambda2; disagreement
/// between the two routes throws NumericalError.
bool is_connected(const Topology& topo);

/// Kronecker product, any rectangular operands.
Matrix kron(const Matrix& A, const Matrix& B);

}  // namespace petc::graph
