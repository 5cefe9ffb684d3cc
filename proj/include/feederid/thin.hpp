#pragma once

#include <vector>

#include <Eigen/Dense>

#include "feederid/common.hpp"

namespace feederid {

// Sparse similarity over candidate rows: each row keeps its K nearest
// neighbors with weight (max pairwise distance - distance); everything
// outside the neighborhood contributes zero. Self-similarity is maximal.
struct SimilarityGraph {
  std::vector<std::vector<int>> neighbors;   // per row, ascending distance
  std::vector<std::vector<double>> weights;  // aligned with neighbors
  double max_distance = 0.0;                 // global shift = self weight

  int size() const { return static_cast<int>(neighbors.size()); }
};

// Exact brute-force Euclidean KNN (blocked, no full distance matrix held).
SimilarityGraph knn_graph(const Eigen::MatrixXd& C, int K);

// Greedy maximization of F(S) = sum_h max_{s in S} w(h, s) with lazy
// marginal-gain evaluation; identical to the naive greedy, ties to the
// lowest index. Returns exactly m_prime row indices.
std::vector<int> facility_location_select(const SimilarityGraph& graph,
                                          int m_prime);

}  // namespace feederid
