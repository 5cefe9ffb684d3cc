#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "feederid/library.hpp"
#include "feederid/network.hpp"

namespace feederid {

// Feeder file: JSON with `nodes`, `edges: [{from,to,length_m}]`, optional
// `name`, `root` (default label 0), `s_base_va`, `v_base_v` (default 1.0 —
// i.e. the file is already per-unit). Labels are remapped to contiguous
// internal ids: root -> 0, the rest ascending by original label.
struct FeederFile {
  FeederTopology topology;
  std::vector<int> node_labels;  // internal id -> original label
  double s_base_va = 1.0;
  double v_base_v = 1.0;
  std::string name;

  double z_base() const { return v_base_v * v_base_v / s_base_va; }
  int label_to_id(int label) const;  // -1 when unknown
};

FeederFile load_feeder(const std::string& path);

// Meter CSV columns: t, node, P, Q, v — node in original labels, P/Q in
// watts/vars and v in volts at the file's bases (so plain per-unit when the
// bases are 1). v may be blank on unmetered nodes; it is squared on load.
// Rows may arrive in any order; missing (t,node) cells default to zero
// injection. Snapshot keys are remapped to 0..T-1 by ascending value.
struct RawMeterData {
  int T = 0;
  Eigen::MatrixXd P, Q;       // T x N, per-unit, internal node order
  Eigen::MatrixXd v2;         // T x |metered|
  std::vector<int> v2_nodes;  // internal ids, root first then ascending
};

RawMeterData load_meter_csv(const std::string& path, const FeederFile& feeder);
void write_meter_csv(const std::string& path, const FeederFile& feeder,
                     const MeterDataset& data);

// A voltage reading at an interior node splits the feeder there: the node
// becomes the root of its own sub-feeder (using its measured voltage as the
// reference) and is kept upstream as a pseudo-leaf whose injection is the
// whole subtree's total. Every returned part satisfies the pipeline's
// assumption that exactly the root and the leaves are metered.
struct SubFeeder {
  FeederTopology topology;
  MeterDataset data;
  std::vector<int> node_to_full;  // part node id -> full internal id
  std::vector<int> edge_to_full;  // part edge -> full edge index
};

std::vector<SubFeeder> split_at_metered_nodes(const FeederFile& feeder,
                                              const RawMeterData& raw);

// Envelope numbers at ohm/km scale, as written in library or config files.
struct EnvelopeSpec {
  double r_lo = 0, r_hi = 0, x_lo = 0, x_hi = 0;
  double m_hi = 0.030, b_hi = 0.068;
  double m_lo = 0.017, b_lo = 0.061;
};

// Library file: JSON with `cables: [{name?, r_ohm_per_km, x_ohm_per_km}]`,
// optional `per_edge: [[cable indices]...]` (default: all cables everywhere),
// optional `bounds` (EnvelopeSpec fields; default: 0.90/1.10 box around the
// entries with the default line constants) and `min_separation`.
// Entries are converted to per-unit per meter against z_base.
CableLibrary load_library(const std::string& path, int edge_count,
                          double z_base,
                          const std::optional<EnvelopeSpec>& envelope_override =
                              std::nullopt);

// Ground truth file: JSON {"assignment": [library index per edge]}.
std::vector<int> load_ground_truth(const std::string& path, int edge_count);
void write_ground_truth(const std::string& path,
                        const std::vector<int>& assignment);

struct RunConfig {
  std::string feeder, meter, library, truth;  // paths; "" = not given
  std::string out_dir = "runs";

  double kappa = 1.05;
  double lambda = 0.01;
  double rho = -1.0;  // <0: auto (0.05 when length noise declared, else 0)
  int m = 30000;
  int m_prime = -1;  // <0: skip thinning
  int K = 32;
  std::uint64_t seed = 0;

  int snapshot_subset = -1;  // <0: use every snapshot
  std::uint64_t snapshot_seed = 0;

  std::vector<int> free_indices;  // empty: automatic chain selection

  std::string walk = "char";  // "char" | "dikin"
  int chains = 4;
  double dikin_step = 0.5;
  int refine_max_iters = 5000;
  bool verbose = false;

  std::optional<EnvelopeSpec> envelope;

  double noise_length = 0.0;
  double noise_injection = 0.0;
  double noise_voltage = 0.0;
  std::uint64_t noise_seed = 0;

  // synthesis (simulate/sweep verbs)
  int synth_T = 10;
  double synth_p_lo = 0.05, synth_p_hi = 0.3;
  double synth_pf = 0.0;  // >0: fixed power factor, else uniform Q below
  double synth_q_lo = 0.0, synth_q_hi = 0.1;
  std::uint64_t synth_seed = 1;
  std::string synth_model = "ac";  // "ac" | "ldf"

  std::string sweep_parameter = "length";  // length | injection | voltage
  std::vector<double> sweep_levels;
  int sweep_seeds = 10;

  double effective_rho() const {
    if (rho >= 0.0) return rho;
    return noise_length > 0.0 ? 0.05 : 0.0;
  }
  void validate() const;
};

RunConfig config_from_json_text(const std::string& text);
RunConfig config_from_json_file(const std::string& path);
// Canonical serialization (sorted keys, every field present) used both for
// echoing into reports and as the hash preimage.
std::string config_to_json_text(const RunConfig& cfg);
std::string config_hash(const RunConfig& cfg);

// 64-bit FNV-1a, rendered as 16 hex chars.
std::string fnv1a_hex(const std::string& bytes);

// Shortest round-trip decimal for a double (printf %.17g trimmed).
std::string fmt_double(double v);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

// Candidate matrix CSV: `# config_hash=<hex>` line, header row, then one row
// per candidate, 17-significant-digit decimals.
void write_candidates_csv(const std::string& path, const Eigen::MatrixXd& C,
                          const std::vector<std::string>& col_names,
                          const std::string& hash);
Eigen::MatrixXd read_candidates_csv(const std::string& path);

std::vector<std::string> impedance_column_names(int edge_count);

// Creates out_dir/<hash> (parents included) and returns the path.
std::string make_run_dir(const std::string& out_dir, const std::string& hash);

}  // namespace feederid
