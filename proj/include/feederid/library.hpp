#pragma once

#include <vector>

#include <Eigen/Dense>

#include "feederid/common.hpp"

namespace feederid {

// r-x plane envelope around a cable library. Units are impedance per meter,
// same as the library entries (per-unit per meter once bases are applied).
// Box: r_lo <= r <= r_hi, x_lo <= x <= x_hi.
// Lines: m_lo*r + b_lo <= x <= m_hi*r + b_hi  (slopes dimensionless).
struct LibraryBounds {
  double r_lo = 0.0, r_hi = 0.0;
  double x_lo = 0.0, x_hi = 0.0;
  double m_hi = 0.0, b_hi = 0.0;
  double m_lo = 0.0, b_lo = 0.0;

  bool contains(double r, double x) const {
    return r >= r_lo && r <= r_hi && x >= x_lo && x <= x_hi &&
           x <= m_hi * r + b_hi && x >= m_lo * r + b_lo;
  }
  void validate() const;
};

// Per-edge lists of plausible cables as (r, x) per meter, plus the shared
// envelope. Entries within one edge list must be pairwise well-separated.
class CableLibrary {
 public:
  CableLibrary(std::vector<std::vector<Eigen::Vector2d>> per_edge,
               LibraryBounds bounds, double min_separation = 1e-3);

  // every edge offered the same cable list
  static CableLibrary shared(const std::vector<Eigen::Vector2d>& cables,
                             int edge_count, LibraryBounds bounds,
                             double min_separation = 1e-3);

  int edge_count() const { return static_cast<int>(per_edge_.size()); }
  const std::vector<Eigen::Vector2d>& candidates(int edge) const {
    return per_edge_[static_cast<size_t>(edge)];
  }
  const LibraryBounds& bounds() const { return bounds_; }
  double min_separation() const { return min_separation_; }

 private:
  std::vector<std::vector<Eigen::Vector2d>> per_edge_;
  LibraryBounds bounds_;
  double min_separation_;
};

// Envelope derived from the library itself: box at 0.90x the minima / 1.10x
// the maxima, delimiting lines from the given slope/intercept constants
// (defaults sized for typical LV cable data at ohm/km scale; pass unit_scale
// to convert the intercepts into the library's units).
LibraryBounds default_bounds(
    const std::vector<std::vector<Eigen::Vector2d>>& per_edge,
    double m_hi = 0.030, double b_hi = 0.068, double m_lo = 0.017,
    double b_lo = 0.061, double unit_scale = 1.0);

}  // namespace feederid
