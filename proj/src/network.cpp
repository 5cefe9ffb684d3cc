#include "feederid/network.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace feederid {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::DisconnectedNode: return "DisconnectedNode";
    case ErrorCode::NonPositiveLength: return "NonPositiveLength";
    case ErrorCode::DuplicateEdge: return "DuplicateEdge";
    case ErrorCode::MissingRoot: return "MissingRoot";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::LpUnbounded: return "LpUnbounded";
    case ErrorCode::SolverFailure: return "SolverFailure";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::Unbounded: return "Unbounded";
    case ErrorCode::InfeasibleFixedPoint: return "InfeasibleFixedPoint";
    case ErrorCode::NumericalDegeneracy: return "NumericalDegeneracy";
    case ErrorCode::StartInfeasible: return "StartInfeasible";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::ZeroTruthComponent: return "ZeroTruthComponent";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidData: return "InvalidData";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

FeederTopology::FeederTopology(int node_count, std::vector<Edge> edges_preorder)
    : node_count_(node_count), edges_(std::move(edges_preorder)) {
  parent_edge_.assign(static_cast<size_t>(node_count_), -1);
  child_edges_.assign(static_cast<size_t>(node_count_), {});
  for (int e = 0; e < edge_count(); ++e) {
    const Edge& ed = edges_[static_cast<size_t>(e)];
    parent_edge_[static_cast<size_t>(ed.child)] = e;
    child_edges_[static_cast<size_t>(ed.parent)].push_back(e);
  }
  for (int n = 1; n < node_count_; ++n) {
    if (degree(n) == 1) leaves_.push_back(n);
  }
}

Eigen::VectorXd FeederTopology::lengths() const {
  Eigen::VectorXd out(edge_count());
  for (int e = 0; e < edge_count(); ++e) out(e) = edges_[static_cast<size_t>(e)].length_m;
  return out;
}

int MeterDataset::v2_column(int node) const {
  for (size_t i = 0; i < v2_nodes.size(); ++i) {
    if (v2_nodes[i] == node) return static_cast<int>(i);
  }
  return -1;
}

bool MeterDataset::has_v2(int node) const { return v2_column(node) >= 0; }

void MeterDataset::check_consistent(const FeederTopology& topology) const {
  const int n = topology.node_count();
  require(P.rows() == T && Q.rows() == T && v2.rows() == T,
          ErrorCode::DimensionMismatch, "snapshot counts disagree across P/Q/v2");
  require(P.cols() == n && Q.cols() == n, ErrorCode::DimensionMismatch,
          "P/Q column count does not match node count");
  require(v2.cols() == static_cast<Eigen::Index>(v2_nodes.size()),
          ErrorCode::DimensionMismatch, "v2 column map does not match v2");
  require(!v2_nodes.empty() && v2_nodes[0] == 0, ErrorCode::InvalidData,
          "root voltage column missing or not first");
  for (size_t k = 1; k < v2_nodes.size(); ++k) {
    require(v2_nodes[k] > v2_nodes[k - 1] && v2_nodes[k] < n,
            ErrorCode::InvalidData,
            "metered node ids must be ascending and in range");
  }
  require((v2.array() > 0.0).all(), ErrorCode::InvalidData,
          "squared voltages must be strictly positive");
}

FeederTopology validate_topology(const std::vector<RawEdge>& raw_edges) {
  require(!raw_edges.empty(), ErrorCode::InvalidArgument, "empty edge list");

  std::set<int> node_ids;
  std::map<std::pair<int, int>, double> directed;
  for (const auto& [a, b, len] : raw_edges) {
    require(len > 0.0, ErrorCode::NonPositiveLength,
            "edge (" + std::to_string(a) + "," + std::to_string(b) +
                ") has non-positive length");
    require(a != b, ErrorCode::CycleDetected,
            "self-loop at node " + std::to_string(a));
    if (directed.count({a, b})) {
      fail(ErrorCode::DuplicateEdge, "edge (" + std::to_string(a) + "," +
                                         std::to_string(b) + ") repeated");
    }
    if (directed.count({b, a})) {
      fail(ErrorCode::DuplicateEdge,
           "edge (" + std::to_string(a) + "," + std::to_string(b) +
               ") repeats (" + std::to_string(b) + "," + std::to_string(a) +
               ") reversed");
    }
    directed[{a, b}] = len;
    node_ids.insert(a);
    node_ids.insert(b);
  }
  require(node_ids.count(0) > 0, ErrorCode::MissingRoot, "node 0 not present");

  const int n = static_cast<int>(node_ids.size());
  for (int i = 0; i < n; ++i) {
    require(node_ids.count(i) > 0, ErrorCode::DisconnectedNode,
            "node ids are not contiguous: id " + std::to_string(i) + " missing");
  }
  require(static_cast<int>(raw_edges.size()) == n - 1, ErrorCode::CycleDetected,
          "edge count " + std::to_string(raw_edges.size()) +
              " does not match node count " + std::to_string(n) + " minus one");

  // undirected adjacency, neighbors sorted for deterministic DFS preorder
  std::vector<std::vector<std::pair<int, double>>> adj(static_cast<size_t>(n));
  for (const auto& [ab, len] : directed) {
    adj[static_cast<size_t>(ab.first)].push_back({ab.second, len});
    adj[static_cast<size_t>(ab.second)].push_back({ab.first, len});
  }
  for (auto& nb : adj) std::sort(nb.begin(), nb.end());

  std::vector<Edge> edges;
  edges.reserve(raw_edges.size());
  std::vector<bool> visited(static_cast<size_t>(n), false);
  std::vector<std::pair<int, int>> stack;  // (node, parent)
  stack.push_back({0, -1});
  visited[0] = true;
  while (!stack.empty()) {
    auto [node, parent] = stack.back();
    stack.pop_back();
    // push children in reverse so preorder visits ascending neighbor ids
    std::vector<std::pair<int, double>> next;
    for (const auto& [nbr, len] : adj[static_cast<size_t>(node)]) {
      if (nbr == parent) continue;
      if (visited[static_cast<size_t>(nbr)]) {
        fail(ErrorCode::CycleDetected, "cycle through node " + std::to_string(nbr));
      }
      next.push_back({nbr, len});
    }
    for (auto it = next.rbegin(); it != next.rend(); ++it) {
      stack.push_back({it->first, node});
    }
    // record edges in the order children will be visited
    for (const auto& [nbr, len] : next) {
      visited[static_cast<size_t>(nbr)] = true;
      edges.push_back({node, nbr, len});
    }
  }
  for (int i = 0; i < n; ++i) {
    require(visited[static_cast<size_t>(i)], ErrorCode::DisconnectedNode,
            "node " + std::to_string(i) + " unreachable from root");
  }

  // reorder to DFS preorder: an edge is listed when its child is first entered,
  // children visited in ascending node id
  std::vector<Edge> result;
  result.reserve(edges.size());
  std::vector<std::vector<Edge>> children(static_cast<size_t>(n));
  for (const Edge& e : edges) children[static_cast<size_t>(e.parent)].push_back(e);
  for (auto& ch : children) {
    std::sort(ch.begin(), ch.end(),
              [](const Edge& a, const Edge& b) { return a.child < b.child; });
  }
  std::vector<std::pair<int, size_t>> frames;  // (node, next child idx)
  frames.push_back({0, 0});
  while (!frames.empty()) {
    auto& [node, idx] = frames.back();
    const auto& ch = children[static_cast<size_t>(node)];
    if (idx >= ch.size()) {
      frames.pop_back();
      continue;
    }
    const Edge& e = ch[idx];
    ++idx;
    result.push_back(e);
    frames.push_back({e.child, 0});
  }

  return FeederTopology(n, std::move(result));
}

Eigen::MatrixXd incidence(const FeederTopology& topology) {
  const int n = topology.node_count();
  const int m = topology.edge_count();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, m);
  for (int e = 0; e < m; ++e) {
    // DFS preorder guarantees the parent edge of edge(e).parent has index < e
    const Edge& ed = topology.edge(e);
    if (ed.parent != 0) {
      A.row(ed.child) = A.row(ed.parent);
    }
    A(ed.child, e) = 1.0;
  }
  return A;
}

AggregatedFlows aggregate_flows(const FeederTopology& topology,
                                const Eigen::MatrixXd& P,
                                const Eigen::MatrixXd& Q) {
  const int m = topology.edge_count();
  require(P.cols() == topology.node_count() && Q.cols() == topology.node_count(),
          ErrorCode::DimensionMismatch, "injection node count mismatch");
  require(P.rows() == Q.rows(), ErrorCode::DimensionMismatch,
          "P and Q snapshot counts differ");
  AggregatedFlows flows;
  flows.Pbr.resize(P.rows(), m);
  flows.Qbr.resize(P.rows(), m);
  // DFS preorder: iterating edges in reverse visits children before parents
  for (int e = m - 1; e >= 0; --e) {
    const Edge& ed = topology.edge(e);
    flows.Pbr.col(e) = P.col(ed.child);
    flows.Qbr.col(e) = Q.col(ed.child);
    for (int ce : topology.child_edges(ed.child)) {
      flows.Pbr.col(e) += flows.Pbr.col(ce);
      flows.Qbr.col(e) += flows.Qbr.col(ce);
    }
  }
  return flows;
}

AggregatedFlows aggregate_flows(const FeederTopology& topology,
                                const MeterDataset& data) {
  data.check_consistent(topology);
  return aggregate_flows(topology, data.P, data.Q);
}

std::vector<std::vector<int>> degree2_chains(const FeederTopology& topology) {
  const int m = topology.edge_count();
  // Union edges sharing a degree-2 non-root joint.
  std::vector<int> parent(static_cast<size_t>(m));
  for (int e = 0; e < m; ++e) parent[static_cast<size_t>(e)] = e;
  auto find = [&](int a) {
    while (parent[static_cast<size_t>(a)] != a) {
      parent[static_cast<size_t>(a)] = parent[static_cast<size_t>(parent[static_cast<size_t>(a)])];
      a = parent[static_cast<size_t>(a)];
    }
    return a;
  };
  auto unite = [&](int a, int b) { parent[static_cast<size_t>(find(a))] = find(b); };

  for (int n = 1; n < topology.node_count(); ++n) {
    if (topology.degree(n) != 2) continue;
    const int up = topology.parent_edge(n);
    const int down = topology.child_edges(n).front();
    unite(up, down);
  }

  std::map<int, std::vector<int>> groups;
  for (int e = 0; e < m; ++e) groups[find(e)].push_back(e);
  std::vector<std::vector<int>> chains;
  for (auto& [root, members] : groups) {
    if (members.size() >= 2) {
      std::sort(members.begin(), members.end());
      chains.push_back(members);
    }
  }
  std::sort(chains.begin(), chains.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return chains;
}

CollapsedNetwork collapse_chains(const FeederTopology& topology,
                                 const Eigen::VectorXd& z) {
  const int m = topology.edge_count();
  require(z.size() == 2 * m, ErrorCode::DimensionMismatch,
          "impedance vector must have length 2|E|");

  const auto chains = degree2_chains(topology);
  std::vector<int> chain_of(static_cast<size_t>(m), -1);
  for (size_t c = 0; c < chains.size(); ++c) {
    for (int e : chains[c]) chain_of[static_cast<size_t>(e)] = static_cast<int>(c);
  }

  // Chain interior nodes (degree 2) vanish; everything else is kept.
  std::vector<bool> keep(static_cast<size_t>(topology.node_count()), true);
  for (int n = 1; n < topology.node_count(); ++n) {
    if (topology.degree(n) == 2) keep[static_cast<size_t>(n)] = false;
  }
  std::vector<int> new_id(static_cast<size_t>(topology.node_count()), -1);
  int next_id = 0;
  for (int n = 0; n < topology.node_count(); ++n) {
    if (keep[static_cast<size_t>(n)]) new_id[static_cast<size_t>(n)] = next_id++;
  }

  // Walk up from each kept node to its nearest kept ancestor, accumulating
  // lengths; each such hop is one collapsed edge. Old-edge membership maps to
  // the collapsed edge of its own chain (or of itself when unchained).
  std::vector<RawEdge> new_edges;
  std::vector<std::vector<int>> old_members;
  for (int n = 1; n < topology.node_count(); ++n) {
    if (!keep[static_cast<size_t>(n)]) continue;
    double len = 0.0;
    std::vector<int> members;
    int cur = n;
    while (true) {
      const int pe = topology.parent_edge(cur);
      const Edge& ed = topology.edge(pe);
      len += ed.length_m;
      members.push_back(pe);
      cur = ed.parent;
      if (keep[static_cast<size_t>(cur)]) break;
    }
    new_edges.push_back({new_id[static_cast<size_t>(cur)], new_id[static_cast<size_t>(n)], len});
    old_members.push_back(std::move(members));
  }

  CollapsedNetwork out;
  out.topology = validate_topology(new_edges);
  const int mc = out.topology.edge_count();
  out.z = Eigen::VectorXd::Zero(2 * mc);
  out.edge_of_old.assign(static_cast<size_t>(m), -1);

  // match each collapsed edge (identified by its child node) to the member set
  for (size_t g = 0; g < new_edges.size(); ++g) {
    const int child = std::get<1>(new_edges[g]);
    int ce = -1;
    for (int e = 0; e < mc; ++e) {
      if (out.topology.edge(e).child == child) {
        ce = e;
        break;
      }
    }
    for (int old_e : old_members[g]) {
      out.edge_of_old[static_cast<size_t>(old_e)] = ce;
      out.z(ce) += z(old_e);
      out.z(mc + ce) += z(m + old_e);
    }
  }
  return out;
}

}  // namespace feederid
