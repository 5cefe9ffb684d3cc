#include "feederid/library.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace feederid {

void LibraryBounds::validate() const {
  require(r_lo < r_hi && x_lo < x_hi, ErrorCode::InvalidArgument,
          "library bounds: box must have positive extent");
  require(r_lo >= 0.0 && x_lo >= 0.0, ErrorCode::InvalidArgument,
          "library bounds: negative impedances");
  // upper line above lower line across the whole r interval
  for (double r : {r_lo, r_hi}) {
    require(m_hi * r + b_hi > m_lo * r + b_lo, ErrorCode::InvalidArgument,
            "library bounds: delimiting lines cross inside the box");
  }
}

CableLibrary::CableLibrary(std::vector<std::vector<Eigen::Vector2d>> per_edge,
                           LibraryBounds bounds, double min_separation)
    : per_edge_(std::move(per_edge)), bounds_(bounds),
      min_separation_(min_separation) {
  require(!per_edge_.empty(), ErrorCode::InvalidArgument, "empty library");
  bounds_.validate();
  for (size_t e = 0; e < per_edge_.size(); ++e) {
    const auto& list = per_edge_[e];
    require(!list.empty(), ErrorCode::InvalidArgument,
            "library: edge " + std::to_string(e) + " offers no cables");
    for (size_t i = 0; i < list.size(); ++i) {
      require(list[i].allFinite() && list[i].minCoeff() >= 0.0,
              ErrorCode::InvalidData, "library: bad cable entry");
      require(bounds_.contains(list[i](0), list[i](1)), ErrorCode::InvalidData,
              "library: cable outside the bounds envelope (edge " +
                  std::to_string(e) + ")");
      for (size_t j = i + 1; j < list.size(); ++j) {
        const double sep = (list[i] - list[j]).norm();
        const double scale = std::max(list[i].norm(), list[j].norm());
        require(sep >= min_separation_ * scale, ErrorCode::InvalidData,
                "library: cables not well-separated (edge " +
                    std::to_string(e) + ")");
      }
    }
  }
}

CableLibrary CableLibrary::shared(const std::vector<Eigen::Vector2d>& cables,
                                  int edge_count, LibraryBounds bounds,
                                  double min_separation) {
  require(edge_count >= 1, ErrorCode::InvalidArgument, "edge_count < 1");
  std::vector<std::vector<Eigen::Vector2d>> per_edge(
      static_cast<size_t>(edge_count), cables);
  return CableLibrary(std::move(per_edge), bounds, min_separation);
}

LibraryBounds default_bounds(
    const std::vector<std::vector<Eigen::Vector2d>>& per_edge, double m_hi,
    double b_hi, double m_lo, double b_lo, double unit_scale) {
  require(!per_edge.empty() && !per_edge.front().empty(),
          ErrorCode::InvalidArgument, "empty library");
  double r_min = std::numeric_limits<double>::infinity(), r_max = 0.0;
  double x_min = std::numeric_limits<double>::infinity(), x_max = 0.0;
  for (const auto& list : per_edge) {
    for (const auto& c : list) {
      r_min = std::min(r_min, c(0));
      r_max = std::max(r_max, c(0));
      x_min = std::min(x_min, c(1));
      x_max = std::max(x_max, c(1));
    }
  }
  LibraryBounds b;
  b.r_lo = 0.90 * r_min;
  b.r_hi = 1.10 * r_max;
  b.x_lo = 0.90 * x_min;
  b.x_hi = 1.10 * x_max;
  b.m_hi = m_hi;
  b.b_hi = b_hi * unit_scale;
  b.m_lo = m_lo;
  b.b_lo = b_lo * unit_scale;
  return b;
}

}  // namespace feederid
