#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "mvbd/distribution.hpp"

namespace mvbd {

/// W1 on Z+ with |x - y| cost: sum_i |F_mu(i) - F_nu(i)|, compensated.
double w1(const Distribution& mu, const Distribution& nu);

/// Wp via the comonotone (quantile) coupling, computed by merging the two
/// cumulative staircases.
double wp(const Distribution& mu, const Distribution& nu, double p);

/// Exact optimal transport cost (sum pi_ij |i-j|^p)^(1/p) from a min-cost
/// flow on the bipartite support graph. Test oracle only; throws
/// SupportTooLarge when the union of the supports exceeds 64 states.
double transport_lp_oracle(const Distribution& mu, const Distribution& nu, double p);
inline double w1_lp_oracle(const Distribution& mu, const Distribution& nu) {
  return transport_lp_oracle(mu, nu, 1.0);
}

/// mu^N(x) = (1/N) sum_l delta_{x_l}.
class EmpiricalMeasure {
 public:
  explicit EmpiricalMeasure(std::vector<State> samples);
  std::span<const State> samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  Distribution distribution() const;

 private:
  std::vector<State> samples_;
};

/// W1 between the empirical law of `counts` (counts[i] samples at state i,
/// `total` samples overall) and `nu`.
double w1_counts(std::span<const std::int64_t> counts, std::int64_t total, const Distribution& nu);

/// Average rho_N cost sum_l |x_l - y_l| of the identity pairing between two
/// equal-size sample sets of N-vectors; an upper bound on W1 over Z+^N.
double product_w1_upper(const std::vector<std::vector<State>>& xs,
                        const std::vector<std::vector<State>>& ys);

/// Monte Carlo scale of W1(empirical, ref) for R i.i.d. draws from `ref`:
/// sum_i sqrt(F(i)(1-F(i)) / R), the summed standard errors of the
/// empirical CDF.
double w1_stderr(const Distribution& ref, std::int64_t replicas);
/// Two-sample analogue using the pooled CDF of `a` and `b`.
double w1_stderr_two_sample(const Distribution& a, std::int64_t ra, const Distribution& b,
                            std::int64_t rb);

/// Neumaier compensated accumulator.
class CompensatedSum {
 public:
  void add(double x) {
    double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0, comp_ = 0.0;
};

}  // namespace mvbd
