#pragma once

#include <optional>
#include <vector>

#include "mvbd/checks.hpp"
#include "mvbd/distribution.hpp"
#include "mvbd/flow.hpp"
#include "mvbd/model.hpp"
#include "mvbd/report.hpp"

namespace mvbd {

struct SolverOptions {
  State min_cap = 8;
  State max_cap = 4096;
  /// Cap doubles whenever the mass at the top state exceeds this.
  double boundary_mass = 1e-12;
  double tail_budget = 1e-9;
  double clip_budget = 1e-8;
  /// Largest allowed h * (max total rate on {0..cap}).
  double stability = 0.5;
};

/// Forward equation with rates read from `frozen` (which must share the
/// grid), started at mu0. RK4 with absorbing-top truncation.
MeasureFlow linear_solve(const RateModel& model, const MeasureFlow& frozen, const Distribution& mu0,
                         const TimeGrid& grid, const SolverOptions& opt = {});

struct PicardConfig {
  /// Discount of rho_lambda; nullopt selects 2 sup K2 e^{int |K1|} + 1.
  std::optional<double> lambda;
  double tol = 1e-12;
  int max_iter = 100;
};

struct PicardResult {
  MeasureFlow flow;
  int iterations = 0;
  double final_gap = 0.0;
  double lambda = 0.0;
  /// rho_lambda gaps, and the undiscounted sup W1 gaps.
  std::vector<double> gaps, sup_gaps;
};

/// Default discount 2 sup_{[t0,T]} K2 e^{int_{t0}^T |K1|} + 1.
double default_lambda(const ModelConstants& c, double t0, double T);

/// Iterates gamma <- Phi(gamma) from the constant flow mu0 until both the
/// rho_lambda gap and the undiscounted sup W1 gap drop below tol. Throws
/// NoConvergence after max_iter.
PicardResult picard_fixed_point(const RateModel& model, const Distribution& mu0, const TimeGrid& grid,
                                const PicardConfig& cfg = {}, const SolverOptions& opt = {});

/// One pass of RK4 whose stage rates read the stage's own distribution.
MeasureFlow direct_nonlinear_solve(const RateModel& model, const Distribution& mu0, const TimeGrid& grid,
                                   const SolverOptions& opt = {});

/// Rates frozen on [k 2^-n, (k+1) 2^-n) at the cell's left time and at the
/// flow's value there; substeps never exceed grid.h.
MeasureFlow dyadic_approx_solve(const RateModel& model, const Distribution& mu0, const TimeGrid& grid,
                                int n, const SolverOptions& opt = {});

struct StationaryOptions {
  double omega = 0.5;
  double tol = 1e-13;
  int max_iter = 20000;
  State max_cap = 1 << 16;
  /// Extend the support until the top state carries less than this.
  double top_mass = 1e-20;
  bool verify = true;
};

struct StationaryResult {
  Distribution mu;
  /// TV(pi_mu, mu) at exit.
  double residual = 0.0;
  int iterations = 0;
  /// W1(P_1^* mu, mu) from a linear solve, NaN when not verified.
  double invariance_drift = 0.0;
};

/// Damped detailed-balance iteration mu <- (1-omega) mu + omega pi_mu with
/// pi_mu(i+1)/pi_mu(i) = b(i,mu)/a(i+1,mu).
StationaryResult stationary_solve(const RateModel& model, const StationaryOptions& opt = {});

/// First-moment (p = 1) or p-th moment Gronwall bounds at every node.
ExperimentReport moment_check(const MeasureFlow& flow, const RateModel& model, double p,
                              const ModelConstants& c, double tol = 1e-6);

/// Solution at t of B' = r(s) B + f(s), B(t0) = B0 on the grid nodes of
/// `times`, by RK4 with `refine` substeps per interval.
std::vector<double> linear_ode_curve(const std::vector<double>& times, double B0,
                                     const std::function<double(double)>& r,
                                     const std::function<double(double)>& f, int refine = 16);

}  // namespace mvbd
