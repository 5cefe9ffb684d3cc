#pragma once

#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "feederid/network.hpp"

namespace feederid {

struct EdgeEnvelope {
  double min = 0.0;
  double max = 0.0;
  double median = 0.0;
};

// Per-edge marginal ranges over a candidate set, with ground-truth
// containment when the truth is known.
struct RangeReport {
  std::vector<EdgeEnvelope> r;
  std::vector<EdgeEnvelope> x;
  std::vector<EdgeEnvelope> z_mag;
  bool has_truth = false;
  std::vector<bool> contained;        // truth r and x inside their envelopes
  std::vector<double> out_of_range;   // worst elementwise exceedance, 0 inside
  double mape_r = 0.0;                // percent, over the given candidates
  double mape_x = 0.0;
};

// Closest-in-range mean absolute percentage errors (percent): the minimum
// over candidate rows of the mean per-edge relative error, resistances and
// reactances scored independently.
std::pair<double, double> mape_star(const Eigen::MatrixXd& candidates,
                                    const Eigen::VectorXd& z_true);

// Candidates mapped onto the degree-simplified network: chain members are
// summed into their collapsed edge, per row.
Eigen::MatrixXd collapse_rows(const FeederTopology& topology,
                              const Eigen::MatrixXd& candidates);

RangeReport range_report(const Eigen::MatrixXd& candidates,
                         const std::optional<Eigen::VectorXd>& z_true,
                         const FeederTopology& topology);

}  // namespace feederid
