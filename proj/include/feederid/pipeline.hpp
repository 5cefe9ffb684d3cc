#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "feederid/io.hpp"
#include "feederid/library.hpp"
#include "feederid/metrics.hpp"
#include "feederid/network.hpp"
#include "feederid/polytope.hpp"

namespace feederid {

// process exit codes
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;            // config / io / internal
inline constexpr int kExitInfeasibleData = 2;   // empty constraint set
inline constexpr int kExitSamplerDegenerate = 3;

int exit_code_for(ErrorCode code);

struct PartOutcome {
  std::vector<int> edge_to_full;
  std::vector<int> node_to_full;
  double delta_star = 0.0;
  double duality_gap = 0.0;
  double cheb_radius = 0.0;
  Eigen::VectorXd cheb_center;  // part coords [r; x]
  IdentifiabilityReport diag;
  std::vector<int> free_indices;  // part coords
  int rows_data = 0;              // data rows before bounds
  int rows_bounded = 0;           // after envelope blocks appended
  int rows_reduced = 0;           // after redundancy removal (free dims only)
};

struct IdentifyOutcome {
  bool ok = false;
  int exit_code = kExitError;
  std::string failure_stage;    // empty when ok
  std::string failure_message;  // empty when ok

  double delta_star_max = 0.0;
  std::vector<PartOutcome> parts;

  Eigen::MatrixXd B;  // raw samples, m x 2|E_full|
  Eigen::MatrixXd C;  // refined
  Eigen::MatrixXd Z;  // thinned selection (empty when thinning skipped)
  std::vector<int> thin_ranking;  // rows of C in greedy selection order

  RangeReport report;          // final matrix (Z when present, else C)
  RangeReport report_raw;      // B
  RangeReport report_refined;  // C
  double mape_r_collapsed = 0.0;  // degree-simplified scores (truth runs)
  double mape_x_collapsed = 0.0;
  double q_before = 0.0;  // mean library distance per row, B vs C
  double q_after = 0.0;

  std::optional<Eigen::VectorXd> z_true;

  const Eigen::MatrixXd& final_matrix() const { return Z.rows() ? Z : C; }
};

// Identity wrapper for an unsplit feeder.
SubFeeder whole_feeder(const FeederTopology& topology, MeterDataset data);

// Core pipeline over already-loaded sub-feeders. Candidate matrices live in
// the full coordinate space; each part is sampled independently with the run
// seed mixed with its index and rows are combined coordinate-wise.
// Throws Error on config/input problems; data-driven failures (infeasible
// constraint set, degenerate sampling) come back in the outcome.
IdentifyOutcome identify_parts(const FeederTopology& full,
                               const std::vector<SubFeeder>& parts,
                               const CableLibrary& library,
                               const RunConfig& cfg,
                               const std::optional<Eigen::VectorXd>& z_true);

// File-driven run: load, subset snapshots, apply declared measurement noise,
// split at metered inner nodes, identify, write artifacts (config echo,
// report.json, diagnostics.json, candidate CSVs) under out_dir/<config hash>.
IdentifyOutcome run_identify(const RunConfig& cfg);

struct SynthesizedCase {
  MeterDataset data;             // noiseless, on the full topology
  std::vector<int> assignment;   // cable index per edge
  Eigen::VectorXd z;             // materialized truth, per-unit
  Eigen::VectorXd lengths_m;     // truth lengths (perturbed when asked)
};

// Ground-truth dataset per cfg.synth. assignment == nullptr draws one cable
// per edge from mix_seed(seed, ...). length_sigma perturbs the truth lengths
// (the nominal topology stays what the estimator sees).
SynthesizedCase synthesize_case(const FeederTopology& topology,
                                const CableLibrary& library,
                                const RunConfig& cfg,
                                const std::vector<int>* assignment,
                                double length_sigma, std::uint64_t seed);

struct SweepCell {
  double level = 0.0;
  std::uint64_t seed = 0;
  bool ok = false;
  int exit_code = kExitError;
  std::string message;
  double delta_star = 0.0;
  double mape_r = 0.0;  // valid when ok
  double mape_x = 0.0;
};

struct SweepLevelSummary {
  double level = 0.0;
  int survivors = 0;
  double median_r = 0.0, q25_r = 0.0, q75_r = 0.0;
  double median_x = 0.0, q25_x = 0.0, q75_x = 0.0;
};

struct SweepOutcome {
  std::vector<SweepCell> cells;  // level-major, seed-minor
  std::vector<SweepLevelSummary> levels;
};

// Per-(level, seed) synthetic runs over cfg.sweep_parameter; cells run in a
// worker pool (FEEDERID_WORKERS, default hardware concurrency) and individual
// failures are recorded without stopping the sweep.
SweepOutcome run_noise_sweep(const RunConfig& cfg);
// In-memory variant used by tests; artifacts written only by run_noise_sweep.
SweepOutcome sweep_cells(const FeederTopology& topology,
                         const CableLibrary& library, const RunConfig& cfg,
                         const std::vector<int>* assignment);

struct DiagnoseOutcome {
  std::vector<PartOutcome> parts;
  double delta_star_max = 0.0;
};

// Data-only diagnostics (no library needed): Delta* and identifiability per
// sub-feeder, written to diagnostics.json in the run directory.
DiagnoseOutcome run_diagnose(const RunConfig& cfg);

// interpolated percentile of an unsorted copy, p in [0, 1]
double percentile(std::vector<double> v, double p);

}  // namespace feederid
