#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mvbd/checks.hpp"
#include "mvbd/distribution.hpp"
#include "mvbd/flow.hpp"
#include "mvbd/model.hpp"
#include "mvbd/report.hpp"
#include "mvbd/simulate.hpp"

namespace mvbd {

struct ExperimentOptions {
  double T = 4.0;
  double h = 1.0 / 256;
  /// Empty selects {T/8, T/4, T/2, T}. Every checkpoint must be a grid node.
  std::vector<double> checkpoints;
  std::int64_t replicas = 10000;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  double tol = 0.02;
  /// Plan used when constants have to be fitted.
  SamplePlan plan;
  SimOptions sim;
};

std::vector<double> default_checkpoints(double T);

/// exp(int_{t0}^{t} f) at each of `times` (trapezoid on a 16x refined grid).
std::vector<double> exp_integral(const std::function<double(double)>& f, const std::vector<double>& times);

/// Flow distance W1(P_t mu0, P_t nu0) and the coupled E|X_t - Y_t| (from a
/// comonotone start) against exp(int (K1+K2)) W1(mu0, nu0); when
/// K1 + K2 < 0 throughout, also the distance to the stationary law.
/// Excluded from the verdict when K1 + K2 >= 0 somewhere on [0, T].
ExperimentReport contraction_experiment(const RateModel& model, const Distribution& mu0, const Distribution& nu0,
                                        const ExperimentOptions& opt);

/// Wp(P_t mu0, P_t nu0) <= exp(2^p int beta) Wp(mu0, nu0), beta fitted by
/// check_H3 unless `declared_beta`.
ExperimentReport wp_lipschitz_experiment(const RateModel& model, const Distribution& mu0, const Distribution& nu0,
                                         double p, const ExperimentOptions& opt, bool declared_beta = false);

using TestFunction = std::function<double(State)>;

/// |grad f|(i) = sup_{j != i} |f(j) - f(i)| / |i - j|, scanning j in [0, scan].
std::vector<double> intrinsic_gradient(const TestFunction& f, State upto, State scan);

/// |P_t f(mu0) - P_t f(nu0)| / Wp(mu0, nu0) against
/// exp(2^p int beta) (P_t |grad f|^{p/(p-1)}(mu0))^{(p-1)/p}.
ExperimentReport intrinsic_gradient_experiment(const RateModel& model, const Distribution& mu0,
                                               const Distribution& nu0, double p, const TestFunction& f,
                                               const ExperimentOptions& opt, bool declared_beta = false);

struct ChaosConstants {
  std::vector<double> times, h, H;
  double mu0_norm2 = 0.0;
};

/// h_t and H_t for p = 2 on the nodes of `times` by the trapezoid rule on a
/// grid refined `refine` times. Throws MissingConstants without the betas.
ChaosConstants compute_chaos_constants(const ModelConstants& c, const Distribution& mu0,
                                       const std::vector<double>& times, int refine = 16);

struct ChaosOptions {
  std::vector<std::size_t> Ns{16, 32, 64, 128, 256, 512, 1024};
  double slope_tol = 0.15;
  /// Time at which the log-log slope is fitted; defaults to T.
  double slope_time = -1.0;
};

/// E W1(mu^N(X_t^N), mu_t) over N: log-log slope, the c/sqrt(N) H_t bound
/// with c calibrated at the smallest N, and the pooled particle-1 marginal.
ExperimentReport chaos_experiment(const RateModel& model, const Distribution& mu0, const ExperimentOptions& opt,
                                  const ChaosOptions& chaos = {});

/// Two N-particle systems from nu^{(x)N} and nu_tilde^{(x)N}, coupled
/// coordinatewise: E rho_N / N against exp(int (K1+K2)) W1(nu, nu_tilde).
ExperimentReport particle_stability_experiment(const RateModel& model, const Distribution& nu,
                                               const Distribution& nu_tilde, std::size_t N,
                                               const ExperimentOptions& opt);

/// Marginal property of the couplings: W1 between each marginal's pooled
/// law and its single-process law, against 3 standard errors.
ExperimentReport coupling_marginal_experiment(const RateModel& model, const Distribution& mu0,
                                              const Distribution& nu0, std::size_t N, const ExperimentOptions& opt);

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace mvbd
