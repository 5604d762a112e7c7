#include "mvbd/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mvbd/error.hpp"
#include "mvbd/metrics.hpp"
#include "mvbd/parallel.hpp"
#include "mvbd/solver.hpp"

namespace mvbd {

namespace {

constexpr std::uint64_t kCouplingSalt = 0xc0;
constexpr std::uint64_t kFrozenSalt = 0xf0;
constexpr std::uint64_t kChaosSalt = 0xca;
constexpr std::uint64_t kStabilitySalt = 0x57;
constexpr std::uint64_t kParticleCouplingSalt = 0xbc;
constexpr std::uint64_t kParticleSalt = 0xb0;

struct MeanSe {
  double mean = 0.0, se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
  MeanSe r;
  if (v.empty()) return r;
  const double n = static_cast<double>(v.size());
  CompensatedSum s;
  for (double x : v) s.add(x);
  r.mean = s.value() / n;
  if (v.size() > 1) {
    CompensatedSum q;
    for (double x : v) q.add((x - r.mean) * (x - r.mean));
    r.se = std::sqrt(q.value() / (n - 1.0) / n);
  }
  return r;
}

std::vector<double> checkpoints_of(const ExperimentOptions& opt) {
  auto cps = opt.checkpoints.empty() ? default_checkpoints(opt.T) : opt.checkpoints;
  for (double c : cps) {
    double k = c / opt.h;
    if (c < 0.0 || c > opt.T + 1e-12 || std::abs(k - std::round(k)) > 1e-9)
      throw InvalidArgument("checkpoint " + fmt(c) + " is not a node of the time grid");
  }
  return cps;
}

std::size_t node_of(const MeasureFlow& f, double t) {
  const std::size_t k = f.left_index(t);
  if (std::abs(f.times()[k] - t) > 1e-9) throw InvalidArgument("time " + fmt(t) + " is not a flow node");
  return k;
}

SamplePlan plan_for(const RateModel& model, const ExperimentOptions& opt) {
  SamplePlan plan = opt.plan;
  plan.workers = opt.workers;
  if (!model.time_homogeneous() && plan.times.size() < 2) {
    plan.times.clear();
    for (int k = 0; k <= 8; ++k) plan.times.push_back(opt.T * k / 8.0);
  }
  return plan;
}

MeasureFlow solve_flow(const RateModel& model, const Distribution& mu0, const ExperimentOptions& opt) {
  return picard_fixed_point(model, mu0, TimeGrid{0.0, opt.T, opt.h}).flow;
}

double sup_on(const std::function<double(double)>& f, double T) {
  double s = -std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 1024; ++k) s = std::max(s, f(T * k / 1024.0));
  return s;
}

std::string at(const char* what, double t) { return std::string(what) + "@" + fmt(t); }

}  // namespace

std::vector<double> default_checkpoints(double T) { return {T / 8, T / 4, T / 2, T}; }

std::vector<double> exp_integral(const std::function<double(double)>& f, const std::vector<double>& times) {
  constexpr int kRefine = 16;
  std::vector<double> out;
  double acc = 0.0, prev = 0.0;
  for (double t : times) {
    if (t < prev) throw InvalidArgument("exp_integral needs increasing nonnegative times");
    const double dt = (t - prev) / kRefine;
    for (int s = 0; s < kRefine && dt > 0.0; ++s) acc += 0.5 * dt * (f(prev + s * dt) + f(prev + (s + 1) * dt));
    out.push_back(std::exp(acc));
    prev = t;
  }
  return out;
}

ExperimentReport contraction_experiment(const RateModel& model, const Distribution& mu0, const Distribution& nu0,
                                        const ExperimentOptions& opt) {
  ExperimentReport rep("contraction", model.describe(), opt.seed);
  const auto cps = checkpoints_of(opt);
  const ModelConstants c = resolve_constants(model, plan_for(model, opt));
  auto rate = [&](double s) { return c.K1(s) + c.K2(s); };
  const bool ergodic = sup_on(rate, opt.T) < 0.0;
  if (!ergodic) rep.exclude("K1 + K2 >= 0 on [0, T]: outside the contraction regime");

  const MeasureFlow fx = solve_flow(model, mu0, opt), fy = solve_flow(model, nu0, opt);
  const double w0 = w1(mu0, nu0);
  const auto factor = exp_integral(rate, cps);
  for (std::size_t k = 0; k < cps.size(); ++k) {
    const double d = w1(fx.node(node_of(fx, cps[k])), fy.node(node_of(fy, cps[k])));
    rep.add_bound(at("flow_w1", cps[k]), cps[k], d, factor[k] * w0, opt.tol);
  }

  if (opt.replicas > 0) {
    const std::size_t R = static_cast<std::size_t>(opt.replicas);
    std::vector<std::vector<double>> dist(cps.size(), std::vector<double>(R));
    parallel_for(R, opt.workers, [&](std::size_t r) {
      Rng rng(stream_seed(opt.seed, r, kCouplingSalt));
      auto [x0, y0] = sample_comonotone(mu0, nu0, rng);
      CoupledRun run = run_coupled(model, Side::frozen(fx), Side::frozen(fy), {x0}, {y0}, opt.T, cps, rng, opt.sim);
      for (std::size_t k = 0; k < cps.size(); ++k)
        dist[k][r] = static_cast<double>(std::llabs(run.xs[k][0] - run.ys[k][0]));
    });
    for (std::size_t k = 0; k < cps.size(); ++k) {
      MeanSe m = mean_se(dist[k]);
      rep.add_bound(at("coupled_mean_abs", cps[k]), cps[k], m.mean, factor[k] * w0, opt.tol, m.se);
    }
  }

  if (ergodic && model.time_homogeneous()) {
    StationaryResult st = stationary_solve(model);
    const double s0 = w1(mu0, st.mu);
    rep.add_info("stationary_residual", 0.0, st.residual);
    for (std::size_t k = 0; k < cps.size(); ++k) {
      const double d = w1(fx.node(node_of(fx, cps[k])), st.mu);
      rep.add_bound(at("stationary_w1", cps[k]), cps[k], d, factor[k] * s0, opt.tol);
    }
  }
  rep.note("bound exp(int (K1+K2)) W1(mu0, nu0) with K " + std::string(c.K_fitted ? "fitted" : "declared"));
  rep.note("coupled paths start from the comonotone coupling of mu0 and nu0");
  return rep;
}

namespace {

// exp(2^p int_0^t beta) at the checkpoints.
std::vector<double> lipschitz_factor(const RateModel& model, double p, const ExperimentOptions& opt,
                                     const std::vector<double>& cps, bool declared_beta, ExperimentReport& rep) {
  ModelConstants c = resolve_constants(model, plan_for(model, opt), !declared_beta, p);
  if (!c.beta) throw MissingConstants(model.describe() + ": no finite joint Lipschitz constant");
  const TimeCurve beta = *c.beta;
  rep.note(std::string("beta ") + (c.beta_fitted ? "fitted" : "declared") + ", beta(0) = " + fmt(beta(0.0)));
  const double scale = std::pow(2.0, p);
  return exp_integral([&](double s) { return scale * beta(s); }, cps);
}

}  // namespace

ExperimentReport wp_lipschitz_experiment(const RateModel& model, const Distribution& mu0, const Distribution& nu0,
                                         double p, const ExperimentOptions& opt, bool declared_beta) {
  if (!(p > 1.0 && p <= 4.0)) throw InvalidArgument("wp_lipschitz_experiment needs p in (1, 4]");
  ExperimentReport rep("wp_lipschitz", model.describe(), opt.seed);
  const auto cps = checkpoints_of(opt);
  const auto factor = lipschitz_factor(model, p, opt, cps, declared_beta, rep);
  const MeasureFlow fx = solve_flow(model, mu0, opt), fy = solve_flow(model, nu0, opt);
  const double w0 = wp(mu0, nu0, p);
  for (std::size_t k = 0; k < cps.size(); ++k) {
    const double d = wp(fx.node(node_of(fx, cps[k])), fy.node(node_of(fy, cps[k])), p);
    rep.add_bound(at("flow_wp", cps[k]), cps[k], d, factor[k] * w0, opt.tol);
  }
  return rep;
}

std::vector<double> intrinsic_gradient(const TestFunction& f, State upto, State scan) {
  if (upto < 0 || scan < upto) throw InvalidArgument("gradient range must satisfy 0 <= upto <= scan");
  std::vector<double> fv(static_cast<std::size_t>(scan) + 1);
  for (State j = 0; j <= scan; ++j) {
    fv[static_cast<std::size_t>(j)] = f(j);
    if (!std::isfinite(fv[static_cast<std::size_t>(j)])) throw InvalidArgument("test function must be finite");
  }
  std::vector<double> g(static_cast<std::size_t>(upto) + 1, 0.0);
  for (State i = 0; i <= upto; ++i)
    for (State j = 0; j <= scan; ++j)
      if (j != i)
        g[static_cast<std::size_t>(i)] =
            std::max(g[static_cast<std::size_t>(i)], std::abs(fv[static_cast<std::size_t>(j)] - fv[static_cast<std::size_t>(i)]) /
                                                          static_cast<double>(std::llabs(j - i)));
  return g;
}

ExperimentReport intrinsic_gradient_experiment(const RateModel& model, const Distribution& mu0,
                                               const Distribution& nu0, double p, const TestFunction& f,
                                               const ExperimentOptions& opt, bool declared_beta) {
  if (!(p > 1.0 && p <= 4.0)) throw InvalidArgument("intrinsic_gradient_experiment needs p in (1, 4]");
  ExperimentReport rep("intrinsic_gradient", model.describe(), opt.seed);
  const auto cps = checkpoints_of(opt);
  const auto factor = lipschitz_factor(model, p, opt, cps, declared_beta, rep);
  const MeasureFlow fx = solve_flow(model, mu0, opt), fy = solve_flow(model, nu0, opt);
  const State upto = std::max(fx.meta.cap, fy.meta.cap);
  const auto grad = intrinsic_gradient(f, upto, 4 * upto + 64);
  const double w0 = wp(mu0, nu0, p);
  const double q = p / (p - 1.0);
  for (std::size_t k = 0; k < cps.size(); ++k) {
    const Distribution& a = fx.node(node_of(fx, cps[k]));
    const Distribution& b = fy.node(node_of(fy, cps[k]));
    CompensatedSum fa, fb, g;
    for (State i = 0; i <= std::max(a.cap(), b.cap()); ++i) {
      const double fi = f(i);
      fa.add(fi * a[i]);
      fb.add(fi * b[i]);
      g.add(std::pow(grad[static_cast<std::size_t>(i)], q) * a[i]);
    }
    const double lhs = w0 > 0.0 ? std::abs(fa.value() - fb.value()) / w0 : 0.0;
    const double rhs = factor[k] * std::pow(std::max(0.0, g.value()), 1.0 / q);
    rep.add_bound(at("gradient_ratio", cps[k]), cps[k], lhs, rhs, opt.tol);
  }
  return rep;
}

ChaosConstants compute_chaos_constants(const ModelConstants& c, const Distribution& mu0,
                                       const std::vector<double>& times, int refine) {
  if (!c.beta1 || !c.beta2 || !c.beta3 || c.beta_p != 2.0)
    throw MissingConstants("chaos constants need the p = 2 moment drift constants");
  if (times.empty() || refine < 1) throw InvalidArgument("chaos constants need times and refine >= 1");
  ChaosConstants out;
  out.times = times;
  out.mu0_norm2 = std::sqrt(mu0.moment(2.0));
  const auto& b1 = *c.beta1;
  const auto& b2 = *c.beta2;
  const auto& b3 = *c.beta3;

  // Fine grid from 0 through every requested time.
  std::vector<double> fine{0.0};
  std::vector<std::size_t> index;
  double prev = 0.0;
  for (double t : times) {
    if (t < prev) throw InvalidArgument("chaos constant times must be increasing and nonnegative");
    for (int s = 1; s <= refine; ++s) fine.push_back(prev + (t - prev) * s / refine);
    index.push_back(fine.size() - 1);
    prev = t;
  }
  const std::size_t n = fine.size();
  // R = int (b2 + b3), I = int b1 e^{-R}: h^2 = e^R (|mu0|_2^2 + I).
  std::vector<double> R(n, 0.0), I(n, 0.0), h(n), S(n, 0.0), J(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) {
    const double dt = fine[k] - fine[k - 1];
    R[k] = R[k - 1] + 0.5 * dt * (b2(fine[k - 1]) + b3(fine[k - 1]) + b2(fine[k]) + b3(fine[k]));
    I[k] = I[k - 1] + 0.5 * dt * (b1(fine[k - 1]) * std::exp(-R[k - 1]) + b1(fine[k]) * std::exp(-R[k]));
    S[k] = S[k - 1] + 0.5 * dt * (c.K1(fine[k - 1]) + c.K2(fine[k - 1]) + c.K1(fine[k]) + c.K2(fine[k]));
  }
  for (std::size_t k = 0; k < n; ++k) h[k] = std::sqrt(std::exp(R[k]) * (mu0.moment(2.0) + I[k]));
  // J = int (1 + h) K2 e^{-S}: H = 1 + h + e^S J.
  for (std::size_t k = 1; k < n; ++k) {
    const double dt = fine[k] - fine[k - 1];
    J[k] = J[k - 1] + 0.5 * dt * ((1.0 + h[k - 1]) * c.K2(fine[k - 1]) * std::exp(-S[k - 1]) +
                                  (1.0 + h[k]) * c.K2(fine[k]) * std::exp(-S[k]));
  }
  for (std::size_t k : index) {
    out.h.push_back(h[k]);
    out.H.push_back(1.0 + h[k] + std::exp(S[k]) * J[k]);
  }
  return out;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw SizeMismatch("slope fit needs two or more paired points");
  double mx = 0.0, my = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0.0) || !(y[k] > 0.0)) throw InvalidArgument("log-log fit needs positive values");
    mx += std::log(x[k]) / n;
    my += std::log(y[k]) / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double dx = std::log(x[k]) - mx;
    sxy += dx * (std::log(y[k]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

ExperimentReport chaos_experiment(const RateModel& model, const Distribution& mu0, const ExperimentOptions& opt,
                                  const ChaosOptions& chaos) {
  if (chaos.Ns.size() < 2) throw InvalidArgument("chaos experiment needs at least two particle counts");
  if (opt.replicas < 2) throw InvalidArgument("chaos experiment needs at least two replicas");
  ExperimentReport rep("chaos", model.describe(), opt.seed);
  const auto cps = checkpoints_of(opt);
  const double t_fit = chaos.slope_time < 0.0 ? opt.T : chaos.slope_time;
  const auto fit_it = std::find_if(cps.begin(), cps.end(), [&](double c) { return std::abs(c - t_fit) < 1e-12; });
  if (fit_it == cps.end()) throw InvalidArgument("slope time must be one of the checkpoints");
  const std::size_t kfit = static_cast<std::size_t>(fit_it - cps.begin());

  const ModelConstants c = resolve_constants(model, plan_for(model, opt), false, 2.0);
  const ChaosConstants cc = compute_chaos_constants(c, mu0, cps);
  const MeasureFlow flow = solve_flow(model, mu0, opt);
  std::vector<const Distribution*> law;
  for (double t : cps) law.push_back(&flow.node(node_of(flow, t)));

  const std::size_t nN = chaos.Ns.size(), R = static_cast<std::size_t>(opt.replicas), nc = cps.size();
  // w[n][k][r] and the particle-1 state first[n][k][r]
  std::vector<std::vector<std::vector<double>>> w(nN, std::vector<std::vector<double>>(nc, std::vector<double>(R)));
  std::vector<std::vector<std::vector<State>>> first(nN, std::vector<std::vector<State>>(nc, std::vector<State>(R)));
  parallel_for(nN * R, opt.workers, [&](std::size_t task) {
    const std::size_t n = task / R, r = task % R;
    const std::size_t N = chaos.Ns[n];
    ParticleRun run =
        simulate_particles(model, N, iid(mu0, N), opt.T, stream_seed(opt.seed, task, kChaosSalt), cps, opt.sim);
    for (std::size_t k = 0; k < nc; ++k) {
      w[n][k][r] = w1(empirical_law(run.snapshots[k]), *law[k]);
      first[n][k][r] = run.snapshots[k][0];
    }
  });

  std::vector<std::vector<MeanSe>> stats(nN, std::vector<MeanSe>(nc));
  for (std::size_t n = 0; n < nN; ++n)
    for (std::size_t k = 0; k < nc; ++k) stats[n][k] = mean_se(w[n][k]);

  std::vector<double> xs, ys;
  for (std::size_t n = 0; n < nN; ++n) {
    xs.push_back(static_cast<double>(chaos.Ns[n]));
    ys.push_back(stats[n][kfit].mean);
  }
  const double slope = loglog_slope(xs, ys);
  rep.add_equality(at("loglog_slope", t_fit), t_fit, slope, -0.5, chaos.slope_tol);

  const double sqrtN0 = std::sqrt(static_cast<double>(chaos.Ns[0]));
  double cal = 0.0, cal_se = 0.0;
  for (std::size_t k = 0; k < nc; ++k)
    if (stats[0][k].mean * sqrtN0 / cc.H[k] > cal) {
      cal = stats[0][k].mean * sqrtN0 / cc.H[k];
      cal_se = stats[0][k].se * sqrtN0 / cc.H[k];
    }
  rep.add_info("calibrated_c", 0.0, cal);
  rep.add_info("calibrated_c_stderr", 0.0, cal_se);
  for (std::size_t k = 0; k < nc; ++k) rep.add_info(at("H_t", cps[k]), cps[k], cc.H[k]);
  for (std::size_t n = 0; n < nN; ++n) {
    const double sqrtN = std::sqrt(static_cast<double>(chaos.Ns[n]));
    const std::string tag = "N=" + std::to_string(chaos.Ns[n]);
    for (std::size_t k = 0; k < nc; ++k) {
      const double bound = cal / sqrtN * cc.H[k];
      const double bound_se = cal_se / sqrtN * cc.H[k];
      if (n == 0)
        rep.add_info(at(("mean_w1_" + tag).c_str(), cps[k]), cps[k], stats[n][k].mean);
      else
        rep.add_bound(at(("mean_w1_" + tag).c_str(), cps[k]), cps[k], stats[n][k].mean, bound, 0.0,
                      std::hypot(stats[n][k].se, bound_se));
      const double marginal = w1(empirical_law(first[n][k]), *law[k]);
      const double se = w1_stderr(*law[k], opt.replicas);
      rep.add_bound(at(("particle1_w1_" + tag).c_str(), cps[k]), cps[k], marginal,
                    model.distribution_dependent() ? bound : 0.0, 0.0,
                    model.distribution_dependent() ? std::hypot(se, bound_se) : se);
    }
  }
  rep.note("c is calibrated at N=" + std::to_string(chaos.Ns[0]) +
           " as max_t E W1 sqrt(N) / H_t and frozen for larger N; theory does not supply its value");
  rep.note("initial law is the product of mu0, so only the 1/sqrt(N) term remains");
  return rep;
}

ExperimentReport particle_stability_experiment(const RateModel& model, const Distribution& nu,
                                               const Distribution& nu_tilde, std::size_t N,
                                               const ExperimentOptions& opt) {
  if (N < 1 || opt.replicas < 2) throw InvalidArgument("particle stability needs N >= 1 and replicas >= 2");
  ExperimentReport rep("particle_stability", model.describe(), opt.seed);
  const auto cps = checkpoints_of(opt);
  const ModelConstants c = resolve_constants(model, plan_for(model, opt));
  const auto factor = exp_integral([&](double s) { return c.K1(s) + c.K2(s); }, cps);
  const double w0 = w1(nu, nu_tilde);
  const std::size_t R = static_cast<std::size_t>(opt.replicas), nc = cps.size();
  std::vector<std::vector<double>> d(nc, std::vector<double>(R));
  std::vector<std::vector<std::vector<State>>> xs(nc, std::vector<std::vector<State>>(R)), ys = xs;
  parallel_for(R, opt.workers, [&](std::size_t r) {
    Rng rng(stream_seed(opt.seed, r, kStabilitySalt));
    std::vector<State> x0(N), y0(N);
    for (std::size_t l = 0; l < N; ++l) std::tie(x0[l], y0[l]) = sample_comonotone(nu, nu_tilde, rng);
    CoupledRun run = run_coupled(model, Side::empirical(), Side::empirical(), x0, y0, opt.T, cps, rng, opt.sim);
    for (std::size_t k = 0; k < nc; ++k) {
      std::int64_t s = 0;
      for (std::size_t l = 0; l < N; ++l) s += std::llabs(run.xs[k][l] - run.ys[k][l]);
      d[k][r] = static_cast<double>(s) / static_cast<double>(N);
      xs[k][r] = std::move(run.xs[k]);
      ys[k][r] = std::move(run.ys[k]);
    }
  });
  for (std::size_t k = 0; k < nc; ++k) {
    MeanSe m = mean_se(d[k]);
    rep.add_bound(at("mean_rho_over_N", cps[k]), cps[k], m.mean, factor[k] * w0, opt.tol, m.se);
    std::vector<State> x1(R), y1(R);
    for (std::size_t r = 0; r < R; ++r) x1[r] = xs[k][r][0], y1[r] = ys[k][r][0];
    const double upper = product_w1_upper(xs[k], ys[k]);
    rep.add_bound(at("coordinate1_w1_vs_product_upper", cps[k]), cps[k], w1(empirical_law(x1), empirical_law(y1)),
                  upper, 0.0);
  }
  rep.note("initial systems coupled coordinatewise by the comonotone coupling; N = " + std::to_string(N));
  return rep;
}

ExperimentReport coupling_marginal_experiment(const RateModel& model, const Distribution& mu0,
                                              const Distribution& nu0, std::size_t N, const ExperimentOptions& opt) {
  if (opt.replicas < 2) throw InvalidArgument("marginal experiment needs replicas >= 2");
  ExperimentReport rep("coupling_marginals", model.describe(), opt.seed);
  const auto cps = checkpoints_of(opt);
  const MeasureFlow fx = solve_flow(model, mu0, opt), fy = solve_flow(model, nu0, opt);
  const std::size_t R = static_cast<std::size_t>(opt.replicas), nc = cps.size();

  // Pair coupling against both flows and against uncoupled frozen paths.
  std::vector<std::vector<State>> cx(nc, std::vector<State>(R)), cy = cx, fr = cx;
  parallel_for(R, opt.workers, [&](std::size_t r) {
    Rng rng(stream_seed(opt.seed, r, kCouplingSalt));
    auto [x0, y0] = sample_comonotone(mu0, nu0, rng);
    CoupledRun run = run_coupled(model, Side::frozen(fx), Side::frozen(fy), {x0}, {y0}, opt.T, cps, rng, opt.sim);
    Rng rng2(stream_seed(opt.seed, r, kFrozenSalt));
    State z0 = sample(mu0, rng2);
    CoupledRun solo = run_coupled(model, Side::frozen(fx), Side::none(), {z0}, {}, opt.T, cps, rng2, opt.sim);
    for (std::size_t k = 0; k < nc; ++k) {
      cx[k][r] = run.xs[k][0];
      cy[k][r] = run.ys[k][0];
      fr[k][r] = solo.xs[k][0];
    }
  });
  for (std::size_t k = 0; k < nc; ++k) {
    const Distribution& lx = fx.node(node_of(fx, cps[k]));
    const Distribution& ly = fy.node(node_of(fy, cps[k]));
    const Distribution ex = empirical_law(cx[k]), ey = empirical_law(cy[k]), ef = empirical_law(fr[k]);
    rep.add_bound(at("pair_X_vs_flow", cps[k]), cps[k], w1(ex, lx), 0.0, 0.0, w1_stderr(lx, opt.replicas));
    rep.add_bound(at("pair_Y_vs_flow", cps[k]), cps[k], w1(ey, ly), 0.0, 0.0, w1_stderr(ly, opt.replicas));
    rep.add_bound(at("pair_X_vs_frozen_paths", cps[k]), cps[k], w1(ex, ef), 0.0, 0.0,
                  w1_stderr_two_sample(ex, opt.replicas, ef, opt.replicas));
  }

  // Particle coupling: Y copies against the flow, X particle 1 against an
  // uncoupled particle system.
  std::vector<std::vector<State>> px(nc, std::vector<State>(R)), solo_px = px;
  std::vector<std::vector<State>> py(nc, std::vector<State>(R * N));
  parallel_for(R, opt.workers, [&](std::size_t r) {
    ParticleCouplingRun run =
        simulate_particle_coupling(model, N, mu0, fx, opt.T, stream_seed(opt.seed, r, kParticleCouplingSalt), cps, opt.sim);
    ParticleRun solo = simulate_particles(model, N, iid(mu0, N), opt.T, stream_seed(opt.seed, r, kParticleSalt), cps, opt.sim);
    for (std::size_t k = 0; k < nc; ++k) {
      px[k][r] = run.xs[k][0];
      solo_px[k][r] = solo.snapshots[k][0];
      std::copy(run.ys[k].begin(), run.ys[k].end(), py[k].begin() + static_cast<std::ptrdiff_t>(r * N));
    }
  });
  for (std::size_t k = 0; k < nc; ++k) {
    const Distribution& lx = fx.node(node_of(fx, cps[k]));
    const Distribution ey = empirical_law(py[k]), ex = empirical_law(px[k]), es = empirical_law(solo_px[k]);
    rep.add_bound(at("particle_Y_vs_flow", cps[k]), cps[k], w1(ey, lx), 0.0, 0.0,
                  w1_stderr(lx, opt.replicas * static_cast<std::int64_t>(N)));
    rep.add_bound(at("particle_X1_vs_particle_system", cps[k]), cps[k], w1(ex, es), 0.0, 0.0,
                  w1_stderr_two_sample(ex, opt.replicas, es, opt.replicas));
  }
  rep.note("stderr is the summed CDF standard error; N = " + std::to_string(N) + " for the particle coupling");
  return rep;
}

}  // namespace mvbd
