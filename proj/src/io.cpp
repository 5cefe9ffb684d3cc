#include "feederid/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

namespace feederid {

using nlohmann::json;

namespace {

json parse_json(const std::string& text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidData, where + ": " + e.what());
  }
}

void check_keys(const json& j, const std::set<std::string>& allowed,
                const std::string& where) {
  require(j.is_object(), ErrorCode::InvalidData, where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    require(allowed.count(it.key()) > 0, ErrorCode::InvalidData,
            where + ": unknown key \"" + it.key() + "\"");
  }
}

double get_num(const json& j, const std::string& key, const std::string& where) {
  require(j.contains(key) && j[key].is_number(), ErrorCode::InvalidData,
          where + ": missing or non-numeric \"" + key + "\"");
  return j[key].get<double>();
}

double opt_num(const json& j, const std::string& key, double def) {
  if (!j.contains(key) || j[key].is_null()) return def;
  require(j[key].is_number(), ErrorCode::InvalidData,
          "non-numeric \"" + key + "\"");
  return j[key].get<double>();
}

int opt_int(const json& j, const std::string& key, int def) {
  if (!j.contains(key) || j[key].is_null()) return def;
  require(j[key].is_number_integer() || j[key].is_number_unsigned(),
          ErrorCode::InvalidData, "non-integer \"" + key + "\"");
  return j[key].get<int>();
}

std::uint64_t opt_u64(const json& j, const std::string& key, std::uint64_t def) {
  if (!j.contains(key) || j[key].is_null()) return def;
  require((j[key].is_number_integer() && j[key].get<long long>() >= 0) ||
              j[key].is_number_unsigned(),
          ErrorCode::InvalidData, "\"" + key + "\" must be a non-negative integer");
  return j[key].get<std::uint64_t>();
}

std::string opt_str(const json& j, const std::string& key, std::string def) {
  if (!j.contains(key) || j[key].is_null()) return def;
  require(j[key].is_string(), ErrorCode::InvalidData,
          "non-string \"" + key + "\"");
  return j[key].get<std::string>();
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    const auto a = s.find_first_not_of(" \t");
    if (a == std::string::npos) {
      s.clear();
      continue;
    }
    const auto b = s.find_last_not_of(" \t");
    s = s.substr(a, b - a + 1);
  }
  return out;
}

bool parse_int(const std::string& s, long long& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtoll(s.c_str(), &end, 10);
  return end && *end == '\0';
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end && *end == '\0';
}

}  // namespace

int FeederFile::label_to_id(int label) const {
  for (size_t i = 0; i < node_labels.size(); ++i) {
    if (node_labels[i] == label) return static_cast<int>(i);
  }
  return -1;
}

FeederFile load_feeder(const std::string& path) {
  const json j = parse_json(read_text_file(path), path);
  check_keys(j, {"nodes", "edges", "name", "root", "s_base_va", "v_base_v"},
             path);
  require(j.contains("edges") && j["edges"].is_array() && !j["edges"].empty(),
          ErrorCode::InvalidData, path + ": \"edges\" array required");

  FeederFile out;
  out.name = opt_str(j, "name", "");
  out.s_base_va = opt_num(j, "s_base_va", 1.0);
  out.v_base_v = opt_num(j, "v_base_v", 1.0);
  require(out.s_base_va > 0 && out.v_base_v > 0, ErrorCode::InvalidData,
          path + ": bases must be positive");

  struct RawRow {
    int from, to;
    double len;
  };
  std::vector<RawRow> rows;
  std::set<int> labels;
  for (const auto& e : j["edges"]) {
    check_keys(e, {"from", "to", "length_m"}, path + " edge");
    RawRow r;
    r.from = static_cast<int>(get_num(e, "from", path + " edge"));
    r.to = static_cast<int>(get_num(e, "to", path + " edge"));
    r.len = get_num(e, "length_m", path + " edge");
    rows.push_back(r);
    labels.insert(r.from);
    labels.insert(r.to);
  }
  const int root_label = opt_int(j, "root", 0);
  require(labels.count(root_label) > 0, ErrorCode::MissingRoot,
          path + ": root label " + std::to_string(root_label) +
              " not found among edge endpoints");

  if (j.contains("nodes")) {
    require(j["nodes"].is_array(), ErrorCode::InvalidData,
            path + ": \"nodes\" must be an array");
    std::set<int> declared;
    for (const auto& n : j["nodes"]) {
      require(n.is_number(), ErrorCode::InvalidData,
              path + ": node labels must be numbers");
      declared.insert(n.get<int>());
    }
    for (int lbl : declared) {
      require(labels.count(lbl) > 0, ErrorCode::DisconnectedNode,
              path + ": declared node " + std::to_string(lbl) +
                  " touches no edge");
    }
    for (int lbl : labels) {
      require(declared.count(lbl) > 0, ErrorCode::InvalidData,
              path + ": edge endpoint " + std::to_string(lbl) +
                  " missing from \"nodes\"");
    }
  }

  // root label -> 0, remaining labels ascending -> 1..N-1
  out.node_labels.push_back(root_label);
  for (int lbl : labels) {
    if (lbl != root_label) out.node_labels.push_back(lbl);
  }
  std::unordered_map<int, int> to_id;
  for (size_t i = 0; i < out.node_labels.size(); ++i) {
    to_id[out.node_labels[i]] = static_cast<int>(i);
  }

  std::vector<RawEdge> raw;
  raw.reserve(rows.size());
  for (const RawRow& r : rows) {
    raw.emplace_back(to_id[r.from], to_id[r.to], r.len);
  }
  out.topology = validate_topology(raw);
  return out;
}

RawMeterData load_meter_csv(const std::string& path, const FeederFile& feeder) {
  const std::string text = read_text_file(path);
  std::unordered_map<int, int> to_id;
  for (size_t i = 0; i < feeder.node_labels.size(); ++i) {
    to_id[feeder.node_labels[i]] = static_cast<int>(i);
  }

  struct Cell {
    double p, q, v;
    bool has_v;
  };
  std::map<long long, std::map<int, Cell>> table;  // t -> node id -> cell

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool header_allowed = true;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string at = path + ":" + std::to_string(lineno);
    if (line.empty() || line[0] == '#') continue;
    auto f = split_csv_line(line);
    if (f.size() == 1 && f[0].empty()) continue;
    long long t;
    if (header_allowed && !parse_int(f[0], t)) {
      header_allowed = false;  // header row like "t,node,P,Q,v"
      continue;
    }
    header_allowed = false;
    require(f.size() == 4 || f.size() == 5, ErrorCode::InvalidData,
            at + ": expected t,node,P,Q[,v]");
    long long node_label;
    require(parse_int(f[0], t) && parse_int(f[1], node_label),
            ErrorCode::InvalidData, at + ": t and node must be integers");
    const auto it = to_id.find(static_cast<int>(node_label));
    require(it != to_id.end(), ErrorCode::InvalidData,
            at + ": unknown node label " + f[1]);
    Cell c{0, 0, 0, false};
    require(parse_double(f[2], c.p) && parse_double(f[3], c.q),
            ErrorCode::InvalidData, at + ": P and Q must be numeric");
    if (f.size() == 5 && !f[4].empty()) {
      require(parse_double(f[4], c.v), ErrorCode::InvalidData,
              at + ": v must be numeric or blank");
      require(c.v > 0, ErrorCode::InvalidData, at + ": v must be positive");
      c.has_v = true;
    }
    auto& row = table[t];
    require(row.find(it->second) == row.end(), ErrorCode::InvalidData,
            at + ": duplicate reading for (t,node)");
    row[it->second] = c;
  }
  require(!table.empty(), ErrorCode::InvalidData, path + ": no data rows");

  const int n = feeder.topology.node_count();
  const int T = static_cast<int>(table.size());

  // which nodes carry voltage (must be every t or never)
  std::set<int> metered;
  for (const auto& [t, row] : table) {
    for (const auto& [node, cell] : row) {
      if (cell.has_v) metered.insert(node);
    }
  }
  require(metered.count(0) > 0, ErrorCode::InvalidData,
          path + ": root voltage missing (node label " +
              std::to_string(feeder.node_labels[0]) + ")");

  RawMeterData out;
  out.T = T;
  out.P = Eigen::MatrixXd::Zero(T, n);
  out.Q = Eigen::MatrixXd::Zero(T, n);
  out.v2_nodes.assign(metered.begin(), metered.end());  // ascending, so root first
  out.v2 = Eigen::MatrixXd::Zero(T, static_cast<Eigen::Index>(metered.size()));

  std::unordered_map<int, int> v2_col;
  for (size_t i = 0; i < out.v2_nodes.size(); ++i) {
    v2_col[out.v2_nodes[i]] = static_cast<int>(i);
  }

  int ti = 0;
  for (const auto& [t, row] : table) {
    for (const auto& [node, cell] : row) {
      out.P(ti, node) = cell.p / feeder.s_base_va;
      out.Q(ti, node) = cell.q / feeder.s_base_va;
      if (metered.count(node)) {
        require(cell.has_v, ErrorCode::InvalidData,
                path + ": node label " +
                    std::to_string(feeder.node_labels[static_cast<size_t>(node)]) +
                    " has a voltage at some snapshots but not all");
        const double vpu = cell.v / feeder.v_base_v;
        out.v2(ti, v2_col[node]) = vpu * vpu;
      }
    }
    for (int m : out.v2_nodes) {
      require(row.count(m) > 0, ErrorCode::InvalidData,
              path + ": metered node label " +
                  std::to_string(feeder.node_labels[static_cast<size_t>(m)]) +
                  " missing at snapshot " + std::to_string(t));
    }
    ++ti;
  }
  return out;
}

void write_meter_csv(const std::string& path, const FeederFile& feeder,
                     const MeterDataset& data) {
  data.check_consistent(feeder.topology);
  std::ostringstream out;
  out << "t,node,P,Q,v\n";
  const int n = feeder.topology.node_count();
  for (int t = 0; t < data.T; ++t) {
    for (int node = 0; node < n; ++node) {
      out << t << ',' << feeder.node_labels[static_cast<size_t>(node)] << ','
          << fmt_double(data.P(t, node) * feeder.s_base_va) << ','
          << fmt_double(data.Q(t, node) * feeder.s_base_va) << ',';
      if (data.has_v2(node)) {
        out << fmt_double(std::sqrt(data.v2(t, data.v2_column(node))) *
                          feeder.v_base_v);
      }
      out << '\n';
    }
  }
  write_text_file(path, out.str());
}

std::vector<SubFeeder> split_at_metered_nodes(const FeederFile& feeder,
                                              const RawMeterData& raw) {
  const FeederTopology& full = feeder.topology;
  const int n = full.node_count();
  const int ne = full.edge_count();
  require(raw.P.rows() == raw.T && raw.P.cols() == n && raw.Q.rows() == raw.T &&
              raw.Q.cols() == n,
          ErrorCode::DimensionMismatch, "meter data does not match feeder size");

  std::vector<bool> metered(static_cast<size_t>(n), false);
  for (int m : raw.v2_nodes) metered[static_cast<size_t>(m)] = true;
  for (int leaf : full.leaf_set()) {
    require(metered[static_cast<size_t>(leaf)], ErrorCode::InvalidData,
            "leaf node label " +
                std::to_string(feeder.node_labels[static_cast<size_t>(leaf)]) +
                " has no voltage readings");
  }

  std::vector<bool> is_region_root(static_cast<size_t>(n), false);
  is_region_root[0] = true;
  for (int m : raw.v2_nodes) {
    if (m != 0 && !full.is_leaf(m)) is_region_root[static_cast<size_t>(m)] = true;
  }

  // owner[e] = region root upstream of edge e
  std::vector<int> owner(static_cast<size_t>(ne), 0);
  {
    std::vector<int> region_at(static_cast<size_t>(n), 0);
    for (int e = 0; e < ne; ++e) {  // preorder: parents settled first
      const Edge& ed = full.edges()[static_cast<size_t>(e)];
      owner[static_cast<size_t>(e)] = region_at[static_cast<size_t>(ed.parent)];
      region_at[static_cast<size_t>(ed.child)] =
          is_region_root[static_cast<size_t>(ed.child)]
              ? ed.child
              : owner[static_cast<size_t>(e)];
    }
  }

  // total injection of each node's subtree (itself included)
  Eigen::MatrixXd SP = raw.P, SQ = raw.Q;
  for (int e = ne - 1; e >= 0; --e) {
    const Edge& ed = full.edges()[static_cast<size_t>(e)];
    SP.col(ed.parent) += SP.col(ed.child);
    SQ.col(ed.parent) += SQ.col(ed.child);
  }

  std::unordered_map<int, int> v2_col;
  for (size_t i = 0; i < raw.v2_nodes.size(); ++i) {
    v2_col[raw.v2_nodes[i]] = static_cast<int>(i);
  }
  std::map<std::pair<int, int>, int> full_edge_of;
  for (int e = 0; e < ne; ++e) {
    const Edge& ed = full.edges()[static_cast<size_t>(e)];
    full_edge_of[{ed.parent, ed.child}] = e;
  }

  std::vector<int> roots;
  for (int v = 0; v < n; ++v) {
    if (is_region_root[static_cast<size_t>(v)]) roots.push_back(v);
  }

  std::vector<SubFeeder> parts;
  for (int r : roots) {
    std::set<int> members;  // full ids
    members.insert(r);
    std::vector<int> region_edges;
    for (int e = 0; e < ne; ++e) {
      if (owner[static_cast<size_t>(e)] != r) continue;
      region_edges.push_back(e);
      members.insert(full.edges()[static_cast<size_t>(e)].child);
    }
    require(!region_edges.empty(), ErrorCode::InvalidData,
            "metered node has no downstream edges to identify");

    SubFeeder part;
    part.node_to_full.push_back(r);
    for (int v : members) {
      if (v != r) part.node_to_full.push_back(v);
    }
    std::unordered_map<int, int> local_of;
    for (size_t i = 0; i < part.node_to_full.size(); ++i) {
      local_of[part.node_to_full[i]] = static_cast<int>(i);
    }

    std::vector<RawEdge> raw_edges;
    for (int e : region_edges) {
      const Edge& ed = full.edges()[static_cast<size_t>(e)];
      raw_edges.emplace_back(local_of[ed.parent], local_of[ed.child],
                             ed.length_m);
    }
    part.topology = validate_topology(raw_edges);

    part.edge_to_full.resize(part.topology.edge_count());
    for (int e = 0; e < part.topology.edge_count(); ++e) {
      const Edge& ed = part.topology.edges()[static_cast<size_t>(e)];
      part.edge_to_full[static_cast<size_t>(e)] =
          full_edge_of[{part.node_to_full[static_cast<size_t>(ed.parent)],
                        part.node_to_full[static_cast<size_t>(ed.child)]}];
    }

    const int k = part.topology.node_count();
    MeterDataset ds;
    ds.T = raw.T;
    ds.P = Eigen::MatrixXd::Zero(raw.T, k);
    ds.Q = Eigen::MatrixXd::Zero(raw.T, k);
    for (int j = 1; j < k; ++j) {
      const int f = part.node_to_full[static_cast<size_t>(j)];
      if (is_region_root[static_cast<size_t>(f)]) {
        // downstream sub-feeder root re-enters here as a pseudo-leaf whose
        // consumption is its whole subtree's total
        ds.P.col(j) = SP.col(f);
        ds.Q.col(j) = SQ.col(f);
      } else {
        ds.P.col(j) = raw.P.col(f);
        ds.Q.col(j) = raw.Q.col(f);
      }
    }

    std::vector<int> vcols;
    vcols.push_back(0);
    for (int leaf : part.topology.leaf_set()) vcols.push_back(leaf);
    ds.v2_nodes = vcols;
    ds.v2 = Eigen::MatrixXd::Zero(raw.T, static_cast<Eigen::Index>(vcols.size()));
    for (size_t c = 0; c < vcols.size(); ++c) {
      const int f = part.node_to_full[static_cast<size_t>(vcols[c])];
      const auto it = v2_col.find(f);
      require(it != v2_col.end(), ErrorCode::InvalidData,
              "node label " +
                  std::to_string(feeder.node_labels[static_cast<size_t>(f)]) +
                  " needs voltage readings after the split");
      ds.v2.col(static_cast<Eigen::Index>(c)) = raw.v2.col(it->second);
    }
    ds.check_consistent(part.topology);
    part.data = std::move(ds);
    parts.push_back(std::move(part));
  }
  return parts;
}

namespace {

EnvelopeSpec envelope_from_json(const json& j, const std::string& where) {
  check_keys(j, {"r_lo", "r_hi", "x_lo", "x_hi", "m_hi", "b_hi", "m_lo", "b_lo"},
             where);
  EnvelopeSpec s;
  s.r_lo = get_num(j, "r_lo", where);
  s.r_hi = get_num(j, "r_hi", where);
  s.x_lo = get_num(j, "x_lo", where);
  s.x_hi = get_num(j, "x_hi", where);
  s.m_hi = opt_num(j, "m_hi", s.m_hi);
  s.b_hi = opt_num(j, "b_hi", s.b_hi);
  s.m_lo = opt_num(j, "m_lo", s.m_lo);
  s.b_lo = opt_num(j, "b_lo", s.b_lo);
  return s;
}

json envelope_to_json(const EnvelopeSpec& s) {
  json j;
  j["r_lo"] = s.r_lo;
  j["r_hi"] = s.r_hi;
  j["x_lo"] = s.x_lo;
  j["x_hi"] = s.x_hi;
  j["m_hi"] = s.m_hi;
  j["b_hi"] = s.b_hi;
  j["m_lo"] = s.m_lo;
  j["b_lo"] = s.b_lo;
  return j;
}

LibraryBounds bounds_from_envelope(const EnvelopeSpec& s, double scale) {
  LibraryBounds b;
  b.r_lo = s.r_lo * scale;
  b.r_hi = s.r_hi * scale;
  b.x_lo = s.x_lo * scale;
  b.x_hi = s.x_hi * scale;
  b.m_hi = s.m_hi;
  b.b_hi = s.b_hi * scale;
  b.m_lo = s.m_lo;
  b.b_lo = s.b_lo * scale;
  return b;
}

}  // namespace

CableLibrary load_library(const std::string& path, int edge_count, double z_base,
                          const std::optional<EnvelopeSpec>& envelope_override) {
  require(z_base > 0, ErrorCode::InvalidArgument, "z_base must be positive");
  const json j = parse_json(read_text_file(path), path);
  check_keys(j, {"cables", "per_edge", "bounds", "min_separation"}, path);
  require(j.contains("cables") && j["cables"].is_array() && !j["cables"].empty(),
          ErrorCode::InvalidData, path + ": \"cables\" array required");

  const double scale = 1e-3 / z_base;  // ohm/km -> per-unit per meter

  std::vector<Eigen::Vector2d> cables;
  for (const auto& c : j["cables"]) {
    check_keys(c, {"name", "r_ohm_per_km", "x_ohm_per_km"}, path + " cable");
    const double r = get_num(c, "r_ohm_per_km", path + " cable");
    const double x = get_num(c, "x_ohm_per_km", path + " cable");
    cables.emplace_back(r * scale, x * scale);
  }

  std::vector<std::vector<Eigen::Vector2d>> per_edge;
  if (j.contains("per_edge") && !j["per_edge"].is_null()) {
    require(j["per_edge"].is_array() &&
                static_cast<int>(j["per_edge"].size()) == edge_count,
            ErrorCode::InvalidData,
            path + ": \"per_edge\" must list one candidate set per edge (" +
                std::to_string(edge_count) + ")");
    for (const auto& lst : j["per_edge"]) {
      require(lst.is_array() && !lst.empty(), ErrorCode::InvalidData,
              path + ": empty per-edge candidate list");
      std::vector<Eigen::Vector2d> one;
      for (const auto& idx : lst) {
        require(idx.is_number_integer() && idx.get<int>() >= 0 &&
                    idx.get<int>() < static_cast<int>(cables.size()),
                ErrorCode::InvalidData, path + ": cable index out of range");
        one.push_back(cables[static_cast<size_t>(idx.get<int>())]);
      }
      per_edge.push_back(std::move(one));
    }
  } else {
    per_edge.assign(static_cast<size_t>(edge_count), cables);
  }

  std::optional<EnvelopeSpec> spec = envelope_override;
  if (!spec && j.contains("bounds") && !j["bounds"].is_null()) {
    spec = envelope_from_json(j["bounds"], path + " bounds");
  }
  const LibraryBounds bounds =
      spec ? bounds_from_envelope(*spec, scale)
           : default_bounds(per_edge, 0.030, 0.068, 0.017, 0.061, scale);

  const double min_sep = opt_num(j, "min_separation", 1e-3);
  return CableLibrary(std::move(per_edge), bounds, min_sep);
}

std::vector<int> load_ground_truth(const std::string& path, int edge_count) {
  const json j = parse_json(read_text_file(path), path);
  check_keys(j, {"assignment"}, path);
  require(j.contains("assignment") && j["assignment"].is_array(),
          ErrorCode::InvalidData, path + ": \"assignment\" array required");
  require(static_cast<int>(j["assignment"].size()) == edge_count,
          ErrorCode::DimensionMismatch,
          path + ": assignment length != edge count");
  std::vector<int> out;
  for (const auto& v : j["assignment"]) {
    require(v.is_number_integer() && v.get<int>() >= 0, ErrorCode::InvalidData,
            path + ": assignment entries must be non-negative integers");
    out.push_back(v.get<int>());
  }
  return out;
}

void write_ground_truth(const std::string& path,
                        const std::vector<int>& assignment) {
  json j;
  j["assignment"] = assignment;
  write_text_file(path, j.dump(2) + "\n");
}

void RunConfig::validate() const {
  require(kappa > 1.0, ErrorCode::InvalidArgument, "kappa must exceed 1");
  require(lambda > 0.0, ErrorCode::InvalidArgument, "lambda must be positive");
  require(m >= 1, ErrorCode::InvalidArgument, "m must be at least 1");
  require(m_prime < 0 || (m_prime >= 1 && m_prime <= m),
          ErrorCode::InvalidArgument, "m_prime must lie in [1, m]");
  require(K >= 1, ErrorCode::InvalidArgument, "K must be at least 1");
  require(chains >= 1, ErrorCode::InvalidArgument, "chains must be at least 1");
  require(walk == "char" || walk == "dikin", ErrorCode::InvalidArgument,
          "walk must be \"char\" or \"dikin\"");
  require(dikin_step > 0.0, ErrorCode::InvalidArgument,
          "dikin_step must be positive");
  require(refine_max_iters >= 0, ErrorCode::InvalidArgument,
          "refine_max_iters must be non-negative");
  require(snapshot_subset != 0, ErrorCode::InvalidArgument,
          "snapshot subset must be at least 1 when given");
  require(noise_length >= 0 && noise_injection >= 0 && noise_voltage >= 0,
          ErrorCode::InvalidArgument, "noise levels must be non-negative");
  for (int f : free_indices) {
    require(f >= 0, ErrorCode::InvalidArgument,
            "free indices must be non-negative");
  }
  require(synth_T >= 1, ErrorCode::InvalidArgument, "synth T must be at least 1");
  require(synth_p_lo <= synth_p_hi && synth_q_lo <= synth_q_hi,
          ErrorCode::InvalidArgument, "synthesis ranges must be ordered");
  require(synth_model == "ac" || synth_model == "ldf",
          ErrorCode::InvalidArgument, "synth model must be \"ac\" or \"ldf\"");
  require(sweep_parameter == "length" || sweep_parameter == "injection" ||
              sweep_parameter == "voltage",
          ErrorCode::InvalidArgument,
          "sweep parameter must be length, injection or voltage");
  require(sweep_seeds >= 1, ErrorCode::InvalidArgument,
          "sweep needs at least one seed");
}

RunConfig config_from_json_text(const std::string& text) {
  const json j = parse_json(text, "config");
  check_keys(j,
             {"feeder", "meter", "library", "truth", "out_dir", "kappa",
              "lambda", "rho", "m", "m_prime", "K", "seed", "snapshots", "free",
              "walk", "envelope", "noise", "synth", "sweep", "verbose",
              "refine_max_iters"},
             "config");
  RunConfig c;
  c.feeder = opt_str(j, "feeder", "");
  c.meter = opt_str(j, "meter", "");
  c.library = opt_str(j, "library", "");
  c.truth = opt_str(j, "truth", "");
  c.out_dir = opt_str(j, "out_dir", c.out_dir);
  c.kappa = opt_num(j, "kappa", c.kappa);
  c.lambda = opt_num(j, "lambda", c.lambda);
  c.rho = opt_num(j, "rho", -1.0);
  c.m = opt_int(j, "m", c.m);
  c.m_prime = opt_int(j, "m_prime", -1);
  c.K = opt_int(j, "K", c.K);
  c.seed = opt_u64(j, "seed", c.seed);
  c.refine_max_iters = opt_int(j, "refine_max_iters", c.refine_max_iters);
  if (j.contains("snapshots") && !j["snapshots"].is_null()) {
    check_keys(j["snapshots"], {"subset", "seed"}, "config snapshots");
    c.snapshot_subset = opt_int(j["snapshots"], "subset", -1);
    c.snapshot_seed = opt_u64(j["snapshots"], "seed", 0);
  }
  if (j.contains("free") && !j["free"].is_null()) {
    require(j["free"].is_array(), ErrorCode::InvalidData,
            "config: \"free\" must be an array");
    for (const auto& v : j["free"]) {
      require(v.is_number_integer(), ErrorCode::InvalidData,
              "config: free indices must be integers");
      c.free_indices.push_back(v.get<int>());
    }
  }
  if (j.contains("walk") && !j["walk"].is_null()) {
    check_keys(j["walk"], {"kind", "chains", "dikin_step"}, "config walk");
    c.walk = opt_str(j["walk"], "kind", c.walk);
    c.chains = opt_int(j["walk"], "chains", c.chains);
    c.dikin_step = opt_num(j["walk"], "dikin_step", c.dikin_step);
  }
  if (j.contains("envelope") && !j["envelope"].is_null()) {
    c.envelope = envelope_from_json(j["envelope"], "config envelope");
  }
  if (j.contains("noise") && !j["noise"].is_null()) {
    check_keys(j["noise"], {"length", "injection", "voltage", "seed"},
               "config noise");
    c.noise_length = opt_num(j["noise"], "length", 0.0);
    c.noise_injection = opt_num(j["noise"], "injection", 0.0);
    c.noise_voltage = opt_num(j["noise"], "voltage", 0.0);
    c.noise_seed = opt_u64(j["noise"], "seed", 0);
  }
  if (j.contains("synth") && !j["synth"].is_null()) {
    check_keys(j["synth"],
               {"T", "p_lo", "p_hi", "pf", "q_lo", "q_hi", "seed", "model"},
               "config synth");
    c.synth_T = opt_int(j["synth"], "T", c.synth_T);
    c.synth_p_lo = opt_num(j["synth"], "p_lo", c.synth_p_lo);
    c.synth_p_hi = opt_num(j["synth"], "p_hi", c.synth_p_hi);
    c.synth_pf = opt_num(j["synth"], "pf", c.synth_pf);
    c.synth_q_lo = opt_num(j["synth"], "q_lo", c.synth_q_lo);
    c.synth_q_hi = opt_num(j["synth"], "q_hi", c.synth_q_hi);
    c.synth_seed = opt_u64(j["synth"], "seed", c.synth_seed);
    c.synth_model = opt_str(j["synth"], "model", c.synth_model);
  }
  if (j.contains("sweep") && !j["sweep"].is_null()) {
    check_keys(j["sweep"], {"parameter", "levels", "seeds"}, "config sweep");
    c.sweep_parameter = opt_str(j["sweep"], "parameter", c.sweep_parameter);
    if (j["sweep"].contains("levels") && !j["sweep"]["levels"].is_null()) {
      require(j["sweep"]["levels"].is_array(), ErrorCode::InvalidData,
              "config: sweep levels must be an array");
      for (const auto& v : j["sweep"]["levels"]) {
        require(v.is_number(), ErrorCode::InvalidData,
                "config: sweep levels must be numbers");
        c.sweep_levels.push_back(v.get<double>());
      }
    }
    c.sweep_seeds = opt_int(j["sweep"], "seeds", c.sweep_seeds);
  }
  if (j.contains("verbose") && !j["verbose"].is_null()) {
    require(j["verbose"].is_boolean(), ErrorCode::InvalidData,
            "config: \"verbose\" must be boolean");
    c.verbose = j["verbose"].get<bool>();
  }
  c.validate();
  return c;
}

RunConfig config_from_json_file(const std::string& path) {
  return config_from_json_text(read_text_file(path));
}

std::string config_to_json_text(const RunConfig& c) {
  json j;
  j["feeder"] = c.feeder;
  j["meter"] = c.meter;
  j["library"] = c.library;
  j["truth"] = c.truth;
  j["out_dir"] = c.out_dir;
  j["kappa"] = c.kappa;
  j["lambda"] = c.lambda;
  if (c.rho >= 0)
    j["rho"] = c.rho;
  else
    j["rho"] = nullptr;
  j["m"] = c.m;
  if (c.m_prime >= 0)
    j["m_prime"] = c.m_prime;
  else
    j["m_prime"] = nullptr;
  j["K"] = c.K;
  j["seed"] = c.seed;
  j["refine_max_iters"] = c.refine_max_iters;
  j["snapshots"]["subset"] =
      c.snapshot_subset >= 0 ? json(c.snapshot_subset) : json(nullptr);
  j["snapshots"]["seed"] = c.snapshot_seed;
  j["free"] = c.free_indices;
  j["walk"]["kind"] = c.walk;
  j["walk"]["chains"] = c.chains;
  j["walk"]["dikin_step"] = c.dikin_step;
  j["envelope"] = c.envelope ? envelope_to_json(*c.envelope) : json(nullptr);
  j["noise"]["length"] = c.noise_length;
  j["noise"]["injection"] = c.noise_injection;
  j["noise"]["voltage"] = c.noise_voltage;
  j["noise"]["seed"] = c.noise_seed;
  j["synth"]["T"] = c.synth_T;
  j["synth"]["p_lo"] = c.synth_p_lo;
  j["synth"]["p_hi"] = c.synth_p_hi;
  j["synth"]["pf"] = c.synth_pf;
  j["synth"]["q_lo"] = c.synth_q_lo;
  j["synth"]["q_hi"] = c.synth_q_hi;
  j["synth"]["seed"] = c.synth_seed;
  j["synth"]["model"] = c.synth_model;
  j["sweep"]["parameter"] = c.sweep_parameter;
  j["sweep"]["levels"] = c.sweep_levels;
  j["sweep"]["seeds"] = c.sweep_seeds;
  j["verbose"] = c.verbose;
  return j.dump(2) + "\n";
}

std::string config_hash(const RunConfig& cfg) {
  return fnv1a_hex(config_to_json_text(cfg));
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf);
}

std::string fmt_double(double v) {
  char buf[64];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    double back = 0;
    if (std::sscanf(buf, "%lf", &back) == 1 && back == v) break;
  }
  return std::string(buf);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  require(!in.bad(), ErrorCode::IoError, "failed reading " + path);
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::IoError, "cannot open " + path + " for writing");
  out << text;
  out.flush();
  require(out.good(), ErrorCode::IoError, "failed writing " + path);
}

void write_candidates_csv(const std::string& path, const Eigen::MatrixXd& C,
                          const std::vector<std::string>& col_names,
                          const std::string& hash) {
  require(C.cols() == static_cast<Eigen::Index>(col_names.size()),
          ErrorCode::DimensionMismatch, "column name count != matrix width");
  std::ostringstream out;
  out << "# config_hash=" << hash << '\n';
  for (size_t i = 0; i < col_names.size(); ++i) {
    if (i) out << ',';
    out << col_names[i];
  }
  out << '\n';
  for (Eigen::Index i = 0; i < C.rows(); ++i) {
    for (Eigen::Index k = 0; k < C.cols(); ++k) {
      if (k) out << ',';
      out << fmt_double(C(i, k));
    }
    out << '\n';
  }
  write_text_file(path, out.str());
}

Eigen::MatrixXd read_candidates_csv(const std::string& path) {
  const std::string text = read_text_file(path);
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<double>> rows;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;  // column names
      continue;
    }
    auto f = split_csv_line(line);
    std::vector<double> row;
    for (const auto& s : f) {
      double v;
      require(parse_double(s, v), ErrorCode::InvalidData,
              path + ": non-numeric cell \"" + s + "\"");
      row.push_back(v);
    }
    if (!rows.empty()) {
      require(row.size() == rows.front().size(), ErrorCode::InvalidData,
              path + ": ragged rows");
    }
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd M(static_cast<Eigen::Index>(rows.size()),
                    rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t k = 0; k < rows[i].size(); ++k) {
      M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
  }
  return M;
}

std::vector<std::string> impedance_column_names(int edge_count) {
  std::vector<std::string> names;
  names.reserve(static_cast<size_t>(2 * edge_count));
  for (int e = 0; e < edge_count; ++e) names.push_back("r_e" + std::to_string(e));
  for (int e = 0; e < edge_count; ++e) names.push_back("x_e" + std::to_string(e));
  return names;
}

std::string make_run_dir(const std::string& out_dir, const std::string& hash) {
  const std::filesystem::path dir = std::filesystem::path(out_dir) / hash;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorCode::IoError, "cannot create " + dir.string());
  return dir.string();
}

}  // namespace feederid
