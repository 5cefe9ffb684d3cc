#pragma once

#include <vector>

#include <Eigen/Dense>

#include "feederid/library.hpp"
#include "feederid/lp.hpp"
#include "feederid/network.hpp"

namespace feederid {

// Where a halfspace row came from.
enum class RowKind {
  DataUpper,   // predicted v2 <= measured + slack
  DataLower,   // predicted v2 >= measured - slack
  BoundRHi,
  BoundXHi,
  BoundRLo,
  BoundXLo,
  BoundLineHi,  // x <= m_hi r + l b_hi
  BoundLineLo,  // x >= m_lo r + l b_lo
  Generic,      // ad-hoc systems without provenance
};

struct RowTag {
  RowKind kind;
  int leaf = -1;  // data rows
  int t = -1;     // data rows
  int edge = -1;  // bound rows
};

// M z <= d with per-row provenance.
struct HalfSpaceSystem {
  Eigen::MatrixXd M;
  Eigen::VectorXd d;
  std::vector<RowTag> tags;

  int rows() const { return static_cast<int>(M.rows()); }
  int cols() const { return static_cast<int>(M.cols()); }
  void check() const;
};

struct DeltaSolution {
  Eigen::VectorXd z_star;  // [r; x]
  double delta_star = 0.0;
  double duality_gap = 0.0;
};

// Smallest uniform slack Delta making the terminal squared voltages
// consistent with some z >= 0 under the linearized model.
DeltaSolution solve_delta_lp(const FeederTopology& topology,
                             const MeterDataset& data,
                             const AggregatedFlows& flows,
                             const LpOptions& lp_opts = {});

// Stacks upper/lower voltage-consistency rows for every (snapshot, leaf)
// pair; slack is kappa*delta_star, floored at 1e-12 absolute to keep the set
// full-dimensional when the data is exactly linear (the floor is logged).
HalfSpaceSystem assemble_halfspaces(const FeederTopology& topology,
                                    const MeterDataset& data,
                                    const AggregatedFlows& flows,
                                    double delta_star, double kappa);

struct ChebyshevResult {
  Eigen::VectorXd center;
  double radius = 0.0;
};

// Largest inscribed ball; call on a bounded system.
ChebyshevResult chebyshev_center(const HalfSpaceSystem& system,
                                 const LpOptions& lp_opts = {});

// Appends the six per-edge envelope blocks (box + delimiting lines), RHS
// scaled by edge length.
HalfSpaceSystem apply_library_bounds(const HalfSpaceSystem& system,
                                     const Eigen::VectorXd& lengths,
                                     const LibraryBounds& bounds);

struct IdentifiabilityReport {
  Eigen::VectorXd singular_values;  // data block of M
  int numerical_rank = 0;           // at 1e-8 relative threshold
  std::vector<std::vector<int>> duplicate_column_groups;
  bool constant_pf_collapse = false;
  double tan_phi_estimate = 0.0;  // meaningful only when collapse detected
  double pinv_norm1 = 0.0;        // ||pseudoinverse||_1, conditioning proxy
};

IdentifiabilityReport diagnose_identifiability(const HalfSpaceSystem& system);

// Free/fixed coordinate split with the fixed part folded into the RHS.
struct DirectionSplit {
  std::vector<int> free_indices;
  std::vector<int> fixed_indices;
  Eigen::VectorXd z0_fixed;  // one entry per fixed index
  Eigen::VectorXd z0_full;
  HalfSpaceSystem reduced;  // columns = free indices, zero rows removed

  Eigen::VectorXd lift(const Eigen::VectorXd& z_free) const;
};

DirectionSplit split_directions(const HalfSpaceSystem& system,
                                const Eigen::VectorXd& z0,
                                const std::vector<int>& free_indices,
                                double feas_tol = 1e-9);

// Default policy: free exactly the r and x coordinates of edges lying in
// unmetered degree-2 chains. Data-driven deficiencies that the library prior
// resolves (e.g. constant power factor) are left fixed.
std::vector<int> auto_select_free(const IdentifiabilityReport& report,
                                  const FeederTopology& topology);

}  // namespace feederid
