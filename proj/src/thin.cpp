#include "feederid/thin.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <tuple>

namespace feederid {

SimilarityGraph knn_graph(const Eigen::MatrixXd& C, int K) {
  const int m = static_cast<int>(C.rows());
  require(m >= 2, ErrorCode::InvalidArgument, "need at least two candidates");
  require(K >= 1 && K < m, ErrorCode::InvalidArgument,
          "K must satisfy 1 <= K < m");

  const Eigen::VectorXd sq = C.rowwise().squaredNorm();
  SimilarityGraph g;
  g.neighbors.resize(static_cast<size_t>(m));
  g.weights.resize(static_cast<size_t>(m));

  // squared distances blockwise: |x|^2 + |y|^2 - 2 x.y
  constexpr int kBlock = 256;
  std::vector<std::vector<double>> neighbor_d2(static_cast<size_t>(m));
  double max_d2 = 0.0;
  std::vector<std::pair<double, int>> cand;
  for (int i0 = 0; i0 < m; i0 += kBlock) {
    const int rows = std::min(kBlock, m - i0);
    Eigen::MatrixXd d2 = (-2.0 * C.middleRows(i0, rows) * C.transpose());
    d2.colwise() += sq.segment(i0, rows);
    d2.rowwise() += sq.transpose();
    max_d2 = std::max(max_d2, d2.maxCoeff());
    for (int i = 0; i < rows; ++i) {
      const int row = i0 + i;
      cand.clear();
      cand.reserve(static_cast<size_t>(m - 1));
      for (int j = 0; j < m; ++j) {
        if (j == row) continue;
        cand.emplace_back(std::max(d2(i, j), 0.0), j);
      }
      std::partial_sort(cand.begin(), cand.begin() + K, cand.end());
      auto& nb = g.neighbors[static_cast<size_t>(row)];
      auto& dist2 = neighbor_d2[static_cast<size_t>(row)];
      for (int k = 0; k < K; ++k) {
        nb.push_back(cand[static_cast<size_t>(k)].second);
        dist2.push_back(cand[static_cast<size_t>(k)].first);
      }
    }
  }
  require(max_d2 > 0.0, ErrorCode::DegenerateInput,
          "all candidate rows identical: nothing to select between");

  g.max_distance = std::sqrt(max_d2);
  for (int i = 0; i < m; ++i) {
    auto& w = g.weights[static_cast<size_t>(i)];
    for (double d2v : neighbor_d2[static_cast<size_t>(i)]) {
      w.push_back(g.max_distance - std::sqrt(d2v));
    }
  }
  return g;
}

std::vector<int> facility_location_select(const SimilarityGraph& graph,
                                          int m_prime) {
  const int m = graph.size();
  require(m >= 1, ErrorCode::InvalidArgument, "empty graph");
  require(m_prime >= 1 && m_prime <= m, ErrorCode::InvalidArgument,
          "need 1 <= m_prime <= m");
  if (m_prime == m) {
    std::vector<int> all(static_cast<size_t>(m));
    std::iota(all.begin(), all.end(), 0);
    return all;
  }

  // reverse adjacency: which rows does candidate j cover, at what weight
  std::vector<std::vector<std::pair<int, double>>> covers(
      static_cast<size_t>(m));
  for (int h = 0; h < m; ++h) {
    covers[static_cast<size_t>(h)].emplace_back(h, graph.max_distance);
    const auto& nb = graph.neighbors[static_cast<size_t>(h)];
    const auto& w = graph.weights[static_cast<size_t>(h)];
    for (size_t k = 0; k < nb.size(); ++k) {
      covers[static_cast<size_t>(nb[k])].emplace_back(h, w[k]);
    }
  }

  std::vector<double> current(static_cast<size_t>(m), 0.0);
  std::vector<bool> selected(static_cast<size_t>(m), false);
  auto gain_of = [&](int j) {
    double gain = 0.0;
    for (const auto& [h, w] : covers[static_cast<size_t>(j)]) {
      gain += std::max(0.0, w - current[static_cast<size_t>(h)]);
    }
    return gain;
  };

  // lazy greedy: heap keys are stale upper bounds (submodularity); an entry
  // recomputed in the current round is exact and safe to take
  using Entry = std::tuple<double, int, int>;  // (gain, -index, stamp)
  auto cmp = [](const Entry& a, const Entry& b) { return a < b; };
  std::priority_queue<Entry, std::vector<Entry>, decltype(cmp)> heap(cmp);
  for (int j = 0; j < m; ++j) heap.emplace(gain_of(j), -j, 0);

  std::vector<int> picked;
  int round = 0;
  while (static_cast<int>(picked.size()) < m_prime) {
    auto [gain, neg_j, stamp] = heap.top();
    heap.pop();
    const int j = -neg_j;
    if (selected[static_cast<size_t>(j)]) continue;
    if (stamp != round) {
      heap.emplace(gain_of(j), neg_j, round);
      continue;
    }
    picked.push_back(j);
    selected[static_cast<size_t>(j)] = true;
    for (const auto& [h, w] : covers[static_cast<size_t>(j)]) {
      current[static_cast<size_t>(h)] =
          std::max(current[static_cast<size_t>(h)], w);
    }
    ++round;
  }
  return picked;  // in selection order: greedy ranking
}

}  // namespace feederid
