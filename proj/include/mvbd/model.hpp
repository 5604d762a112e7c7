#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mvbd/distribution.hpp"

namespace mvbd {

struct Rates {
  double death = 0.0;
  double birth = 0.0;
  double total() const { return death + birth; }
};

/// Continuous scalar function of time: a constant, a tabulated curve
/// (linear interpolation, flat extrapolation), or a product of curves.
class TimeCurve {
 public:
  TimeCurve() : TimeCurve(0.0) {}
  TimeCurve(double value);  // NOLINT: implicit on purpose, constants are the common case
  static TimeCurve tabulated(std::vector<std::pair<double, double>> points);

  double operator()(double t) const { return constant_ ? value_ : fn_(t); }
  bool is_constant() const { return constant_; }
  /// Pointwise product.
  TimeCurve operator*(const TimeCurve& other) const;
  /// Max / min over a sample of [t0, t1] that includes every tabulation knot.
  double max_on(double t0, double t1) const;
  double min_on(double t0, double t1) const;

 private:
  bool constant_ = true;
  double value_ = 0.0;
  std::function<double(double)> fn_;
  std::vector<double> knots_;
};

/// Analytic constants a family may declare for the monotone (K1, K2),
/// growth/Lyapunov (K3, theta, c0) and moment/Lipschitz (beta, beta1..3)
/// conditions. The drift betas refer to exponent `beta_p`.
struct DeclaredConstants {
  std::optional<TimeCurve> K1, K2, K3;
  std::optional<double> theta, c0;
  std::optional<TimeCurve> beta, beta1, beta2, beta3;
  double beta_p = 2.0;
};

/// Birth/death rate maps a_t(i, mu), b_t(i, mu). Implementations must be
/// pure: equal arguments give equal results, and calls may happen
/// concurrently from many threads.
class RateModel {
 public:
  virtual ~RateModel() = default;

  /// Unchecked evaluation. Implementations must return death = 0 at i = 0.
  virtual Rates rates(double t, State i, const MeasureView& mu) const = 0;
  virtual bool time_homogeneous() const = 0;
  /// False when the rates ignore mu entirely.
  virtual bool distribution_dependent() const { return true; }
  virtual const DeclaredConstants& declared() const { return declared_; }
  virtual std::string describe() const = 0;

 protected:
  DeclaredConstants declared_;
};

using ModelPtr = std::shared_ptr<const RateModel>;

/// Checked evaluation: throws NonFiniteRate on NaN/inf/negative rates or a
/// nonzero death rate at 0.
Rates eval_rates(const RateModel& model, double t, State i, const MeasureView& mu);
inline Rates eval_rates(const RateModel& model, double t, State i, const Distribution& mu) {
  return eval_rates(model, t, i, MeasureView::of(mu));
}

/// b(i, mu) = beta0 + beta1 * m1(mu), a(i, mu) = alpha * i.
class AffineMeanField final : public RateModel {
 public:
  AffineMeanField(double beta0, double beta1, double alpha);
  Rates rates(double, State i, const MeasureView& mu) const override {
    return {alpha_ * static_cast<double>(i), beta0_ + beta1_ * mu.mean};
  }
  bool time_homogeneous() const override { return true; }
  bool distribution_dependent() const override { return beta1_ != 0.0; }
  std::string describe() const override;

  double beta0() const { return beta0_; }
  double beta1() const { return beta1_; }
  double alpha() const { return alpha_; }

 private:
  double beta0_, beta1_, alpha_;
};

/// b(i, mu) = lambda + kappa * m1(mu), a(i, mu) = c2 * i^q. `epsilon` is the
/// extra exponent of the matching Lyapunov weight V(i) = (1+i)^(q+epsilon).
class LogisticMeanField final : public RateModel {
 public:
  LogisticMeanField(double lambda, double c2, double q, double epsilon, double kappa);
  Rates rates(double, State i, const MeasureView& mu) const override;
  bool time_homogeneous() const override { return true; }
  bool distribution_dependent() const override { return kappa_ != 0.0; }
  std::string describe() const override;

  double q() const { return q_; }
  double epsilon() const { return epsilon_; }

 private:
  double lambda_, c2_, q_, epsilon_, kappa_;
};

/// Both rates of `base` scaled by a nonnegative continuous multiplier m(t).
class TimeModulated final : public RateModel {
 public:
  TimeModulated(ModelPtr base, TimeCurve multiplier);
  Rates rates(double t, State i, const MeasureView& mu) const override {
    Rates r = base_->rates(t, i, mu);
    double m = multiplier_(t);
    return {m * r.death, m * r.birth};
  }
  bool time_homogeneous() const override {
    return multiplier_.is_constant() && base_->time_homogeneous();
  }
  bool distribution_dependent() const override { return base_->distribution_dependent(); }
  std::string describe() const override;

  const RateModel& base() const { return *base_; }
  const TimeCurve& multiplier() const { return multiplier_; }

 private:
  ModelPtr base_;
  TimeCurve multiplier_;
};

/// Rate model backed by an arbitrary callable; used for counterexamples,
/// tests and the Python bindings.
class FunctionModel final : public RateModel {
 public:
  using Fn = std::function<Rates(double, State, const MeasureView&)>;
  FunctionModel(Fn fn, bool time_homogeneous, bool distribution_dependent,
                std::string name, DeclaredConstants declared = {});
  Rates rates(double t, State i, const MeasureView& mu) const override { return fn_(t, i, mu); }
  bool time_homogeneous() const override { return homogeneous_; }
  bool distribution_dependent() const override { return dependent_; }
  std::string describe() const override { return name_; }

 private:
  Fn fn_;
  bool homogeneous_, dependent_;
  std::string name_;
};

/// Constant birth rate lambda, linear death rate delta * i.
ModelPtr make_immigration_death(double lambda, double delta);

}  // namespace mvbd
