#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mvbd/distribution.hpp"
#include "mvbd/model.hpp"

namespace mvbd {

/// Sampling plan shared by the assumption checkers. The conditions
/// quantify over infinite sets, so every checker scans this finite plan,
/// fits envelope constants, and compares the fit against the same plan at
/// half the range to detect constants that keep growing with the range.
struct SamplePlan {
  std::vector<double> times{0.0};
  State max_state = 64;
  int measures = 24;
  int trials = 4000;
  std::uint64_t seed = 1;
  unsigned workers = 1;

  SamplePlan halved() const;
};

/// Deterministic pool of test measures: Diracs, truncated geometric and
/// truncated Poisson laws, and two-component mixtures of those, with
/// parameters scaled to the plan's range.
std::vector<Distribution> sample_measures(const SamplePlan& plan);

struct Violation {
  std::string condition;
  double t = 0.0;
  State i = 0, j = 0;
  double lhs = 0.0, rhs = 0.0;
  std::string note;
};

struct H1Report {
  std::vector<double> times;
  std::vector<double> K1_hat, K2_hat;
  std::vector<Violation> violations;
  bool checked_declared = false;
  std::string note;
};

/// Fits K1, K2 of the monotone condition
///   [b(i,mu) - b(j,nu) + a(j,nu) - a(i,mu)] sgn(i-j)
///     + (|a(i,mu)-a(i,nu)| + |b(i,mu)-b(i,nu)|) 1{i=j}
///   <= K1 |i-j| + K2 W1(mu,nu).
/// Throws DeclaredConstantViolation when a declared pair is exceeded by
/// more than 1e-9 and `strict` is set.
H1Report check_H1(const RateModel& model, const SamplePlan& plan, bool strict = true);

/// Left side of the monotone condition for one tuple.
double monotone_lhs(const RateModel& model, double t, State i, State j, const MeasureView& mu,
                    const MeasureView& nu);

using Weight = std::function<double(State)>;

struct H2Report {
  std::vector<double> times;
  double c0_hat = 0.0;
  std::vector<double> K3_hat;
  std::vector<Violation> violations;
};

/// Growth/Lyapunov condition at delta_0 with weight V and exponent theta:
///   V(i+1) <= c0 V(i),  a+b <= K3 V,  drift of V^theta <= K3 V^theta.
/// Throws UnboundedGrowth when c0 or K3 keeps growing with the scanned range.
H2Report check_H2(const RateModel& model, const Weight& V, double theta, const SamplePlan& plan);

struct H3Report {
  double p = 2.0;
  std::vector<double> times;
  std::vector<double> beta_hat, beta1_hat, beta2_hat, beta3_hat;
  std::vector<Violation> violations;
};

/// p-th moment drift  p[(i+1)^(p-1) b - (i-1)^(p-1) a] <= b1 + b2 i^p + b3 m1^p
/// and joint Lipschitz |da| + |db| <= beta (|i-j| + W1). The drift triple
/// minimizes b1 + b2 + b3 over the plan.
H3Report check_H3(const RateModel& model, double p, const SamplePlan& plan, bool strict = true);

/// p-th moment drift left side; the death term is 0 at i = 0.
double drift_lhs(const RateModel& model, double p, double t, State i, const MeasureView& mu);

/// Constants needed downstream, declared where the model provides them and
/// otherwise fitted by the checkers over `plan`.
struct ModelConstants {
  TimeCurve K1, K2;
  /// Absent when no finite envelope exists (the moment/Lipschitz condition fails).
  std::optional<TimeCurve> beta, beta1, beta2, beta3;
  double beta_p = 2.0;
  bool K_fitted = false;
  bool beta_fitted = false;
};

/// `fit_beta` forces the betas to come from check_H3 even when declared.
/// Throws MissingConstants when no finite K1/K2 envelope exists.
ModelConstants resolve_constants(const RateModel& model, const SamplePlan& plan,
                                 bool fit_beta = false, double p = 2.0);

}  // namespace mvbd
