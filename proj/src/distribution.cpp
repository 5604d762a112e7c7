#include "mvbd/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mvbd/error.hpp"

namespace mvbd {

Distribution::Distribution(std::vector<double> mass, double tail_mass)
    : mass_(std::move(mass)), tail_mass_(tail_mass) {
  if (mass_.empty()) throw InvalidArgument("distribution needs at least one state");
  double total = 0.0;
  for (double m : mass_) {
    if (!std::isfinite(m) || m < 0.0)
      throw InvalidArgument("distribution entries must be finite and nonnegative");
    total += m;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw InvalidArgument("distribution must sum to 1, got " + std::to_string(total));
  if (!(tail_mass_ >= 0.0)) throw InvalidArgument("tail mass must be nonnegative");
}

Distribution Distribution::dirac(State i, State cap) {
  if (i < 0) throw InvalidArgument("dirac state must be nonnegative");
  if (cap < i) cap = i;
  std::vector<double> m(static_cast<std::size_t>(cap) + 1, 0.0);
  m[static_cast<std::size_t>(i)] = 1.0;
  return Distribution(std::move(m));
}

Distribution Distribution::poisson(double lambda, State cap) {
  if (!(lambda >= 0.0) || cap < 0) throw InvalidArgument("poisson needs lambda >= 0, cap >= 0");
  std::vector<double> w(static_cast<std::size_t>(cap) + 1);
  // log-space recursion keeps large lambda stable
  double logp = -lambda;
  for (State k = 0; k <= cap; ++k) {
    if (k > 0) logp += std::log(lambda) - std::log(static_cast<double>(k));
    w[static_cast<std::size_t>(k)] = lambda == 0.0 ? (k == 0 ? 1.0 : 0.0) : std::exp(logp);
  }
  return from_weights(std::move(w));
}

Distribution Distribution::geometric(double q, State cap) {
  if (!(q >= 0.0 && q < 1.0) || cap < 0) throw InvalidArgument("geometric needs q in [0,1)");
  std::vector<double> w(static_cast<std::size_t>(cap) + 1);
  double p = 1.0 - q;
  for (auto& x : w) {
    x = p;
    p *= q;
  }
  return from_weights(std::move(w));
}

Distribution Distribution::uniform(State lo, State hi) {
  if (lo < 0 || hi < lo) throw InvalidArgument("uniform needs 0 <= lo <= hi");
  std::vector<double> w(static_cast<std::size_t>(hi) + 1, 0.0);
  std::fill(w.begin() + lo, w.end(), 1.0);
  return from_weights(std::move(w));
}

Distribution Distribution::from_weights(std::vector<double> weights) {
  double total = 0.0;
  for (double x : weights) {
    if (!std::isfinite(x) || x < 0.0) throw InvalidArgument("weights must be finite and nonnegative");
    total += x;
  }
  if (!(total > 0.0)) throw InvalidArgument("weights sum to zero");
  for (auto& x : weights) x /= total;
  return DistributionBuilder::adopt(std::move(weights), 0.0);
}

double Distribution::mean() const {
  double s = 0.0;
  for (std::size_t i = 1; i < mass_.size(); ++i) s += static_cast<double>(i) * mass_[i];
  return s;
}

double Distribution::moment(double p) const {
  if (p == 1.0) return mean();
  double s = 0.0;
  for (std::size_t i = 1; i < mass_.size(); ++i)
    s += std::pow(static_cast<double>(i), p) * mass_[i];
  return s;
}

State Distribution::top() const {
  for (std::size_t i = mass_.size(); i-- > 0;)
    if (mass_[i] > 0.0) return static_cast<State>(i);
  return 0;
}

Distribution Distribution::padded(State cap) const {
  if (cap <= this->cap()) return *this;
  auto m = mass_;
  m.resize(static_cast<std::size_t>(cap) + 1, 0.0);
  return DistributionBuilder::adopt(std::move(m), tail_mass_);
}

double total_variation(const Distribution& p, const Distribution& q) {
  State cap = std::max(p.cap(), q.cap());
  double s = 0.0;
  for (State i = 0; i <= cap; ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

}  // namespace mvbd
