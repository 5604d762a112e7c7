#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "mvbd/distribution.hpp"

namespace mvbd {

/// Uniform time grid t0, t0 + h, ..., T. (T - t0) / h must be an integer.
struct TimeGrid {
  double t0 = 0.0;
  double T = 1.0;
  double h = 1.0 / 256;

  std::size_t steps() const;
  double at(std::size_t k) const { return k == steps() ? T : t0 + static_cast<double>(k) * h; }
};

struct FlowMeta {
  State cap = 0;
  double clipped = 0.0;
  double tail_mass = 0.0;
  int cap_doublings = 0;
  std::string route;
  std::string config;
};

/// One Distribution per grid node, optionally with the time derivative at
/// each node so frozen-flow readers can interpolate between nodes.
class MeasureFlow {
 public:
  MeasureFlow() = default;
  MeasureFlow(std::vector<double> times, std::vector<Distribution> nodes,
              std::vector<std::vector<double>> slopes = {});
  /// Constant flow t -> mu on the grid.
  static MeasureFlow constant(const Distribution& mu, const TimeGrid& grid);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<double>& times() const { return times_; }
  const std::vector<Distribution>& nodes() const { return nodes_; }
  const Distribution& node(std::size_t k) const { return nodes_[k]; }
  const Distribution& back() const { return nodes_.back(); }
  bool has_slopes() const { return !slopes_.empty(); }
  const std::vector<double>& slope(std::size_t k) const { return slopes_[k]; }

  /// Index of the last node with time <= t (clamped to the grid).
  std::size_t left_index(double t) const;
  const Distribution& at_left(double t) const { return nodes_[left_index(t)]; }
  /// Value halfway between nodes k and k+1: cubic Hermite when slopes are
  /// present, the average otherwise.
  void midpoint(std::size_t k, std::vector<double>& out) const;

  /// max_k W1(node k, node k+1) / (t_{k+1} - t_k).
  double continuity_constant() const;
  bool same_grid(const MeasureFlow& other, double tol = 1e-12) const;

  FlowMeta meta;

 private:
  std::vector<double> times_;
  std::vector<Distribution> nodes_;
  std::vector<std::vector<double>> slopes_;
};

/// sup over shared grid nodes of e^{-lambda t} W1; lambda = 0 gives sup W1.
double rho_lambda(const MeasureFlow& a, const MeasureFlow& b, double lambda = 0.0);
inline double sup_w1(const MeasureFlow& a, const MeasureFlow& b) { return rho_lambda(a, b, 0.0); }

/// Rows `t,i,mass` for every entry above 1e-15.
void write_flow_csv(const MeasureFlow& flow, std::ostream& os);
/// key = value side-car record.
void write_flow_meta(const MeasureFlow& flow, std::ostream& os);

}  // namespace mvbd
