#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace mvbd {

using State = std::int64_t;

/// Probability vector on {0, ..., cap}. `tail_mass` is a diagnostic for
/// probability held back by truncation at the cap; it is not part of the
/// measure itself.
class Distribution {
 public:
  Distribution() : mass_(1, 1.0) {}
  /// Takes ownership of `mass`; throws InvalidArgument unless every entry is
  /// finite and nonnegative and the total is 1 within 1e-12.
  explicit Distribution(std::vector<double> mass, double tail_mass = 0.0);

  static Distribution dirac(State i, State cap = -1);
  /// Poisson(lambda) restricted to {0..cap} and renormalized.
  static Distribution poisson(double lambda, State cap);
  /// Geometric law P(k) ∝ (1-q) q^k on {0..cap}, renormalized.
  static Distribution geometric(double q, State cap);
  static Distribution uniform(State lo, State hi);
  /// Normalizes nonnegative weights; throws if they sum to zero.
  static Distribution from_weights(std::vector<double> weights);

  State cap() const { return static_cast<State>(mass_.size()) - 1; }
  std::span<const double> mass() const { return mass_; }
  double operator[](State i) const {
    return i >= 0 && i <= cap() ? mass_[static_cast<std::size_t>(i)] : 0.0;
  }
  double tail_mass() const { return tail_mass_; }
  void add_tail_mass(double m) { tail_mass_ += m; }

  double mean() const;
  /// p-th absolute moment sum_i i^p mu(i); p = 1 gives mean().
  double moment(double p) const;
  /// Largest state with positive mass.
  State top() const;

  /// Zero-pads to a larger cap (no-op when already at least that large).
  Distribution padded(State cap) const;

  friend bool operator==(const Distribution&, const Distribution&) = default;

 private:
  friend class DistributionBuilder;
  std::vector<double> mass_;
  double tail_mass_ = 0.0;
};

/// Cheap read-only view handed to rate models: the mass vector plus its
/// cached mean, so moment-based models evaluate in O(1).
struct MeasureView {
  std::span<const double> mass;
  double mean = 0.0;

  static MeasureView of(const Distribution& d) { return {d.mass(), d.mean()}; }
};

/// Unchecked construction used by the solvers, which maintain the
/// invariants themselves while stepping.
class DistributionBuilder {
 public:
  static Distribution adopt(std::vector<double> mass, double tail_mass) {
    Distribution d;
    d.mass_ = std::move(mass);
    d.tail_mass_ = tail_mass;
    return d;
  }
};

/// Sum of |p_i - q_i| / 2 over the padded common support.
double total_variation(const Distribution& p, const Distribution& q);

}  // namespace mvbd
