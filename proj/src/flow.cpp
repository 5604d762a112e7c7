#include "mvbd/flow.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "mvbd/error.hpp"
#include "mvbd/metrics.hpp"
#include "mvbd/report.hpp"

namespace mvbd {

std::size_t TimeGrid::steps() const {
  if (!(h > 0.0) || !std::isfinite(h)) throw InvalidArgument("time step h must be positive");
  if (!(T > t0)) throw InvalidArgument("horizon T must exceed t0");
  double n = (T - t0) / h;
  double r = std::round(n);
  if (std::abs(n - r) > 1e-9 * std::max(1.0, n))
    throw InvalidArgument("(T - t0) / h must be an integer");
  return static_cast<std::size_t>(r);
}

MeasureFlow::MeasureFlow(std::vector<double> times, std::vector<Distribution> nodes,
                         std::vector<std::vector<double>> slopes)
    : times_(std::move(times)), nodes_(std::move(nodes)), slopes_(std::move(slopes)) {
  if (times_.empty() || times_.size() != nodes_.size())
    throw SizeMismatch("flow needs one distribution per grid node");
  if (!slopes_.empty() && slopes_.size() != nodes_.size())
    throw SizeMismatch("flow slopes must match the nodes");
  for (std::size_t k = 1; k < times_.size(); ++k)
    if (!(times_[k] > times_[k - 1])) throw InvalidArgument("flow times must increase");
  for (const auto& n : nodes_) meta.cap = std::max(meta.cap, n.cap());
}

MeasureFlow MeasureFlow::constant(const Distribution& mu, const TimeGrid& grid) {
  const std::size_t n = grid.steps();
  std::vector<double> ts(n + 1);
  for (std::size_t k = 0; k <= n; ++k) ts[k] = grid.at(k);
  std::vector<std::vector<double>> zero(n + 1, std::vector<double>(mu.mass().size(), 0.0));
  MeasureFlow f(std::move(ts), std::vector<Distribution>(n + 1, mu), std::move(zero));
  f.meta.route = "constant";
  return f;
}

std::size_t MeasureFlow::left_index(double t) const {
  auto it = std::upper_bound(times_.begin(), times_.end(), t + 1e-12);
  if (it == times_.begin()) return 0;
  return static_cast<std::size_t>(it - times_.begin()) - 1;
}

void MeasureFlow::midpoint(std::size_t k, std::vector<double>& out) const {
  const auto a = nodes_[k].mass(), b = nodes_[k + 1].mass();
  const std::size_t n = std::max(a.size(), b.size());
  out.assign(n, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] += 0.5 * a[i];
  for (std::size_t i = 0; i < b.size(); ++i) out[i] += 0.5 * b[i];
  if (slopes_.empty()) return;
  const double c = (times_[k + 1] - times_[k]) / 8.0;
  const auto& sa = slopes_[k];
  const auto& sb = slopes_[k + 1];
  for (std::size_t i = 0; i < std::min(n, sa.size()); ++i) out[i] += c * sa[i];
  for (std::size_t i = 0; i < std::min(n, sb.size()); ++i) out[i] -= c * sb[i];
}

double MeasureFlow::continuity_constant() const {
  double c = 0.0;
  for (std::size_t k = 0; k + 1 < nodes_.size(); ++k)
    c = std::max(c, w1(nodes_[k], nodes_[k + 1]) / (times_[k + 1] - times_[k]));
  return c;
}

bool MeasureFlow::same_grid(const MeasureFlow& other, double tol) const {
  if (times_.size() != other.times_.size()) return false;
  for (std::size_t k = 0; k < times_.size(); ++k)
    if (std::abs(times_[k] - other.times_[k]) > tol) return false;
  return true;
}

double rho_lambda(const MeasureFlow& a, const MeasureFlow& b, double lambda) {
  if (!a.same_grid(b)) throw SizeMismatch("flows are not on the same grid");
  double s = 0.0;
  const double t0 = a.times().front();
  for (std::size_t k = 0; k < a.size(); ++k)
    s = std::max(s, std::exp(-lambda * (a.times()[k] - t0)) * w1(a.node(k), b.node(k)));
  return s;
}

void write_flow_csv(const MeasureFlow& flow, std::ostream& os) {
  os << "t,i,mass\n";
  for (std::size_t k = 0; k < flow.size(); ++k) {
    const auto m = flow.node(k).mass();
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m[i] > 1e-15) os << fmt(flow.times()[k]) << ',' << i << ',' << fmt(m[i]) << '\n';
  }
}

void write_flow_meta(const MeasureFlow& flow, std::ostream& os) {
  os << "route = " << flow.meta.route << "\ncap = " << flow.meta.cap << "\nclipped = "
     << fmt(flow.meta.clipped) << "\ntail_mass = " << fmt(flow.meta.tail_mass)
     << "\ncap_doublings = " << flow.meta.cap_doublings << "\ncontinuity = " << fmt(flow.continuity_constant())
     << "\nnodes = " << flow.size() << "\nconfig = " << flow.meta.config << '\n';
}

}  // namespace mvbd
