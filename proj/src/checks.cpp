#include "mvbd/checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mvbd/error.hpp"
#include "mvbd/metrics.hpp"
#include "mvbd/parallel.hpp"
#include "mvbd/rng.hpp"

namespace mvbd {

namespace {

constexpr double kDeclaredTol = 1e-9;
// A fitted constant that grows by more than this fraction when the scanned
// range doubles is treated as having no finite value.
constexpr double kGrowthTol = 0.25;
constexpr std::uint64_t kMeasureSalt = 0x6d656173;
constexpr std::uint64_t kTupleSalt = 0x7475706c;

bool grows(double full, double half) {
  return full - half > kGrowthTol * std::max(1.0, std::abs(half)) + 1e-9;
}

TimeCurve as_curve(const std::vector<double>& times, const std::vector<double>& values) {
  if (times.size() == 1) return TimeCurve(values.front());
  std::vector<std::pair<double, double>> pts;
  for (std::size_t k = 0; k < times.size(); ++k) pts.emplace_back(times[k], values[k]);
  return TimeCurve::tabulated(std::move(pts));
}

struct Pool {
  std::vector<Distribution> measures;
  std::vector<MeasureView> views;
  std::vector<double> dist;  // pairwise W1, row-major

  explicit Pool(const SamplePlan& plan) : measures(sample_measures(plan)) {
    for (const auto& m : measures) views.push_back(MeasureView::of(m));
    const std::size_t n = measures.size();
    dist.resize(n * n);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) dist[a * n + b] = a == b ? 0.0 : w1(measures[a], measures[b]);
  }
  double w(std::size_t a, std::size_t b) const { return dist[a * measures.size() + b]; }
};

struct Tuple {
  State i, j;
  std::size_t mu, nu;
};

// Every neighbouring and diagonal pair once, then random (i, j, mu, nu)
// tuples for time index k; a quarter force i = j and a quarter force
// mu = nu so both degenerate branches are always exercised.
std::vector<Tuple> sample_tuples(const SamplePlan& plan, std::size_t k, std::size_t pool_size) {
  Rng rng(stream_seed(plan.seed, k, kTupleSalt));
  const auto range = static_cast<std::uint64_t>(plan.max_state) + 1;
  std::vector<Tuple> out;
  out.reserve(static_cast<std::size_t>(plan.trials) + 3 * range);
  for (State i = 0; i <= plan.max_state; ++i) {
    auto mu = static_cast<std::size_t>(rng.below(pool_size)), nu = static_cast<std::size_t>(rng.below(pool_size));
    out.push_back({i, i, mu, nu});
    if (i == plan.max_state) break;
    out.push_back({i + 1, i, mu, mu});
    out.push_back({i, i + 1, nu, mu});
  }
  for (int n = 0; n < plan.trials; ++n) {
    Tuple tp{static_cast<State>(rng.below(range)), static_cast<State>(rng.below(range)),
             static_cast<std::size_t>(rng.below(pool_size)),
             static_cast<std::size_t>(rng.below(pool_size))};
    if (rng.below(4) == 0) tp.j = tp.i;
    if (rng.below(4) == 0) tp.nu = tp.mu;
    out.push_back(tp);
  }
  return out;
}

struct H1Fit {
  double K1 = -std::numeric_limits<double>::infinity();
  double K2 = 0.0;
  std::vector<Violation> declared;
};

H1Fit fit_h1(const RateModel& model, const SamplePlan& plan, const Pool& pool, std::size_t k) {
  const double t = plan.times[k];
  const auto tuples = sample_tuples(plan, k, pool.measures.size());
  H1Fit fit;
  std::vector<double> lhs(tuples.size());
  for (std::size_t n = 0; n < tuples.size(); ++n) {
    const auto& tp = tuples[n];
    lhs[n] = monotone_lhs(model, t, tp.i, tp.j, pool.views[tp.mu], pool.views[tp.nu]);
    double w = pool.w(tp.mu, tp.nu);
    if (tp.i == tp.j && w > 0.0) fit.K2 = std::max(fit.K2, lhs[n] / w);
  }
  for (std::size_t n = 0; n < tuples.size(); ++n) {
    const auto& tp = tuples[n];
    if (tp.i == tp.j) continue;
    double d = static_cast<double>(std::llabs(tp.i - tp.j));
    fit.K1 = std::max(fit.K1, (lhs[n] - fit.K2 * pool.w(tp.mu, tp.nu)) / d);
  }
  const auto& dc = model.declared();
  if (dc.K1 && dc.K2) {
    const double K1 = (*dc.K1)(t), K2 = (*dc.K2)(t);
    for (std::size_t n = 0; n < tuples.size(); ++n) {
      const auto& tp = tuples[n];
      double rhs = K1 * static_cast<double>(std::llabs(tp.i - tp.j)) + K2 * pool.w(tp.mu, tp.nu);
      if (lhs[n] > rhs + kDeclaredTol * std::max(1.0, std::abs(rhs)))
        fit.declared.push_back({"H1:declared", t, tp.i, tp.j, lhs[n], rhs, "declared (K1, K2) exceeded"});
    }
  }
  return fit;
}

double sgn(State x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

}  // namespace

SamplePlan SamplePlan::halved() const {
  SamplePlan p = *this;
  p.max_state = std::max<State>(1, max_state / 2);
  return p;
}

std::vector<Distribution> sample_measures(const SamplePlan& plan) {
  Rng rng(stream_seed(plan.seed, 0, kMeasureSalt));
  const State cap = std::max<State>(plan.max_state, 1);
  const double max_mean = std::max(1.0, static_cast<double>(cap) / 4.0);
  auto one = [&](int kind) {
    switch (kind) {
      case 0:
        return Distribution::dirac(static_cast<State>(rng.below(static_cast<std::uint64_t>(cap / 2) + 1)), cap);
      case 1: {
        double m = max_mean * rng.uniform();
        return Distribution::geometric(m / (1.0 + m), cap);
      }
      default:
        return Distribution::poisson(max_mean * rng.uniform(), cap);
    }
  };
  std::vector<Distribution> out{Distribution::dirac(0, cap)};
  const int n = std::max(plan.measures, 4);
  for (int k = 1; k < n; ++k) {
    int kind = k % 4;
    if (kind < 3) {
      out.push_back(one(kind));
      continue;
    }
    Distribution a = one(static_cast<int>(rng.below(3))), b = one(static_cast<int>(rng.below(3)));
    double w = rng.uniform();
    std::vector<double> mix(static_cast<std::size_t>(cap) + 1);
    for (State i = 0; i <= cap; ++i) mix[static_cast<std::size_t>(i)] = w * a[i] + (1.0 - w) * b[i];
    out.push_back(Distribution::from_weights(std::move(mix)));
  }
  return out;
}

double monotone_lhs(const RateModel& model, double t, State i, State j, const MeasureView& mu,
                    const MeasureView& nu) {
  const Rates ri = model.rates(t, i, mu);
  const Rates rj = model.rates(t, j, nu);
  double v = (ri.birth - rj.birth + rj.death - ri.death) * sgn(i - j);
  if (i == j) v += std::abs(ri.death - rj.death) + std::abs(ri.birth - rj.birth);
  return v;
}

H1Report check_H1(const RateModel& model, const SamplePlan& plan, bool strict) {
  if (plan.times.empty() || plan.trials <= 0 || plan.max_state < 1)
    throw InvalidArgument("check_H1 needs a nonempty sample plan");
  const SamplePlan half = plan.halved();
  const Pool pool(plan), half_pool(half);
  const std::size_t nt = plan.times.size();
  std::vector<H1Fit> fits(nt), half_fits(nt);
  parallel_for(nt, plan.workers, [&](std::size_t k) {
    fits[k] = fit_h1(model, plan, pool, k);
    half_fits[k] = fit_h1(model, half, half_pool, k);
  });

  H1Report rep;
  rep.times = plan.times;
  rep.checked_declared = model.declared().K1 && model.declared().K2;
  rep.note = "time continuity is only probed on the supplied time grid";
  for (std::size_t k = 0; k < nt; ++k) {
    rep.K1_hat.push_back(fits[k].K1);
    rep.K2_hat.push_back(fits[k].K2);
    const double t = plan.times[k];
    if (grows(fits[k].K1, half_fits[k].K1))
      rep.violations.push_back({"H1:K1-unbounded", t, plan.max_state, 0, fits[k].K1, half_fits[k].K1,
                                "K1 envelope grows with the scanned range"});
    if (grows(fits[k].K2, half_fits[k].K2))
      rep.violations.push_back({"H1:K2-unbounded", t, plan.max_state, 0, fits[k].K2, half_fits[k].K2,
                                "K2 envelope grows with the scanned range"});
    for (auto& v : fits[k].declared) rep.violations.push_back(v);
  }
  if (strict) {
    for (const auto& v : rep.violations) {
      if (v.condition != "H1:declared") continue;
      std::ostringstream os;
      os << model.describe() << ": declared (K1, K2) violated at t=" << v.t << ", i=" << v.i
         << ", j=" << v.j << " (lhs " << v.lhs << " > " << v.rhs << ")";
      throw DeclaredConstantViolation(os.str());
    }
  }
  return rep;
}

H2Report check_H2(const RateModel& model, const Weight& V, double theta, const SamplePlan& plan) {
  if (!(theta > 1.0)) throw InvalidArgument("check_H2 needs theta > 1");
  if (plan.times.empty() || plan.max_state < 2) throw InvalidArgument("check_H2 needs a nonempty plan");
  const State R = plan.max_state, Rh = plan.halved().max_state;
  std::vector<double> v(static_cast<std::size_t>(R) + 2), vt(v.size());
  for (State i = 0; i <= R + 1; ++i) {
    v[static_cast<std::size_t>(i)] = V(i);
    if (!(v[static_cast<std::size_t>(i)] >= 1.0) || !std::isfinite(v[static_cast<std::size_t>(i)]))
      throw InvalidArgument("Lyapunov weight must be finite and >= 1");
    if (i > 0 && v[static_cast<std::size_t>(i)] < v[static_cast<std::size_t>(i) - 1])
      throw InvalidArgument("Lyapunov weight must be nondecreasing");
    vt[static_cast<std::size_t>(i)] = std::pow(v[static_cast<std::size_t>(i)], theta);
  }

  H2Report rep;
  rep.times = plan.times;
  double c0_half = 0.0;
  for (State i = 0; i < R; ++i) {
    double r = v[static_cast<std::size_t>(i) + 1] / v[static_cast<std::size_t>(i)];
    rep.c0_hat = std::max(rep.c0_hat, r);
    if (i < Rh) c0_half = std::max(c0_half, r);
  }
  if (grows(rep.c0_hat, c0_half))
    throw UnboundedGrowth(model.describe() + ": V(i+1)/V(i) keeps growing; no finite c0");

  const std::vector<double> dirac0{1.0};
  const MeasureView delta0{dirac0, 0.0};
  const auto& dc = model.declared();
  for (double t : plan.times) {
    double K3 = 0.0, K3_half = 0.0;
    for (State i = 0; i <= R; ++i) {
      const auto u = static_cast<std::size_t>(i);
      const Rates r = model.rates(t, i, delta0);
      double growth = r.total() / v[u];
      double drift = (r.birth - r.death) * (vt[u + 1] - vt[u]);
      if (i > 0) drift += r.death * (vt[u + 1] - 2.0 * vt[u] + vt[u - 1]);
      double ratio = std::max(growth, drift / vt[u]);
      K3 = std::max(K3, ratio);
      if (i <= Rh) K3_half = std::max(K3_half, ratio);
      if (dc.K3) {
        double k3 = (*dc.K3)(t);
        if (r.total() > k3 * v[u] * (1.0 + kDeclaredTol) || drift > k3 * vt[u] * (1.0 + kDeclaredTol))
          rep.violations.push_back({"H2:declared", t, i, i, std::max(growth, drift / vt[u]), k3,
                                    "declared K3 exceeded"});
      }
    }
    if (grows(K3, K3_half)) {
      std::ostringstream os;
      os << model.describe() << ": growth/Lyapunov envelope K3 keeps growing with the range at t=" << t
         << " (" << K3_half << " on [0," << Rh << "], " << K3 << " on [0," << R << "])";
      throw UnboundedGrowth(os.str());
    }
    rep.K3_hat.push_back(K3);
  }
  return rep;
}

double drift_lhs(const RateModel& model, double p, double t, State i, const MeasureView& mu) {
  const Rates r = model.rates(t, i, mu);
  const double x = static_cast<double>(i);
  double v = std::pow(x + 1.0, p - 1.0) * r.birth;
  if (i > 0) v -= std::pow(x - 1.0, p - 1.0) * r.death;
  return p * v;
}

namespace {

struct DriftSample {
  double lhs, x, y;
};

struct DriftFit {
  double b1 = 0.0, b2 = 0.0, b3 = 0.0;
  double objective() const { return b1 + b2 + b3; }
};

double residual(const std::vector<DriftSample>& s, double b2, double b3) {
  double worst = 0.0;
  for (const auto& d : s) worst = std::max(worst, d.lhs - b2 * d.x - b3 * d.y);
  return worst;
}

// Golden-section search of a convex function on [lo, hi].
template <class F>
double argmin_convex(F&& f, double lo, double hi) {
  constexpr double g = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 90 && b - a > 1e-13 * std::max(1.0, hi); ++it) {
    if (fc <= fd) {
      b = d, d = c, fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c, c = d, fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  double best = fc <= fd ? c : d;
  return f(lo) <= f(best) ? lo : best;
}

DriftFit fit_drift(const std::vector<DriftSample>& s) {
  double u2 = 0.0, u3 = 0.0;
  for (const auto& d : s) {
    if (d.x >= 1.0) u2 = std::max(u2, std::max(0.0, d.lhs) / d.x);
    if (d.y >= 1.0) u3 = std::max(u3, std::max(0.0, d.lhs) / d.y);
  }
  auto inner = [&](double b2) {
    auto g = [&](double b3) { return b3 + residual(s, b2, b3); };
    double b3 = u3 > 0.0 ? argmin_convex(g, 0.0, u3) : 0.0;
    return std::pair{b3, b2 + g(b3)};
  };
  double b2 = u2 > 0.0 ? argmin_convex([&](double x) { return inner(x).second; }, 0.0, u2) : 0.0;
  DriftFit fit;
  fit.b2 = b2;
  fit.b3 = inner(b2).first;
  fit.b1 = std::max(0.0, residual(s, fit.b2, fit.b3));
  return fit;
}

struct H3Fit {
  double beta = 0.0;
  DriftFit drift;
  std::vector<Violation> declared;
};

H3Fit fit_h3(const RateModel& model, double p, const SamplePlan& plan, const Pool& pool, std::size_t k) {
  const double t = plan.times[k];
  H3Fit fit;
  std::vector<DriftSample> drift;
  const auto& dc = model.declared();
  const bool check_drift = dc.beta1 && dc.beta2 && dc.beta3 && dc.beta_p == p;
  for (std::size_t m = 0; m < pool.views.size(); ++m) {
    const double mp = std::pow(pool.views[m].mean, p);
    for (State i = 0; i <= plan.max_state; ++i) {
      DriftSample d{drift_lhs(model, p, t, i, pool.views[m]), std::pow(static_cast<double>(i), p), mp};
      drift.push_back(d);
      if (check_drift) {
        double rhs = (*dc.beta1)(t) + (*dc.beta2)(t) * d.x + (*dc.beta3)(t) * d.y;
        if (d.lhs > rhs + kDeclaredTol * std::max(1.0, std::abs(rhs)))
          fit.declared.push_back({"H3:declared-drift", t, i, i, d.lhs, rhs, "declared beta1..3 exceeded"});
      }
    }
  }
  fit.drift = fit_drift(drift);

  for (const auto& tp : sample_tuples(plan, k, pool.measures.size())) {
    const Rates ri = model.rates(t, tp.i, pool.views[tp.mu]);
    const Rates rj = model.rates(t, tp.j, pool.views[tp.nu]);
    const double lhs = std::abs(ri.death - rj.death) + std::abs(ri.birth - rj.birth);
    const double den = static_cast<double>(std::llabs(tp.i - tp.j)) + pool.w(tp.mu, tp.nu);
    if (den > 0.0) fit.beta = std::max(fit.beta, lhs / den);
    if (dc.beta) {
      double rhs = (*dc.beta)(t) * den;
      if (lhs > rhs + kDeclaredTol * std::max(1.0, rhs))
        fit.declared.push_back({"H3:declared-lipschitz", t, tp.i, tp.j, lhs, rhs, "declared beta exceeded"});
    }
  }
  return fit;
}

}  // namespace

H3Report check_H3(const RateModel& model, double p, const SamplePlan& plan, bool strict) {
  if (!(p > 1.0)) throw InvalidArgument("check_H3 needs p > 1");
  if (plan.times.empty() || plan.trials <= 0 || plan.max_state < 1)
    throw InvalidArgument("check_H3 needs a nonempty sample plan");
  const SamplePlan half = plan.halved();
  const Pool pool(plan), half_pool(half);
  const std::size_t nt = plan.times.size();
  std::vector<H3Fit> fits(nt), half_fits(nt);
  parallel_for(nt, plan.workers, [&](std::size_t k) {
    fits[k] = fit_h3(model, p, plan, pool, k);
    half_fits[k] = fit_h3(model, p, half, half_pool, k);
  });

  H3Report rep;
  rep.p = p;
  rep.times = plan.times;
  for (std::size_t k = 0; k < nt; ++k) {
    const double t = plan.times[k];
    rep.beta_hat.push_back(fits[k].beta);
    rep.beta1_hat.push_back(fits[k].drift.b1);
    rep.beta2_hat.push_back(fits[k].drift.b2);
    rep.beta3_hat.push_back(fits[k].drift.b3);
    if (grows(fits[k].beta, half_fits[k].beta))
      rep.violations.push_back({"H3:beta-unbounded", t, plan.max_state, 0, fits[k].beta, half_fits[k].beta,
                                "joint Lipschitz constant grows with the scanned range"});
    if (grows(fits[k].drift.objective(), half_fits[k].drift.objective()))
      rep.violations.push_back({"H3:drift-unbounded", t, plan.max_state, 0, fits[k].drift.objective(),
                                half_fits[k].drift.objective(),
                                "moment drift envelope grows with the scanned range"});
    for (auto& v : fits[k].declared) rep.violations.push_back(v);
  }
  if (strict) {
    for (const auto& v : rep.violations) {
      if (v.condition.rfind("H3:declared", 0) != 0) continue;
      std::ostringstream os;
      os << model.describe() << ": " << v.note << " at t=" << v.t << ", i=" << v.i << ", j=" << v.j;
      throw DeclaredConstantViolation(os.str());
    }
  }
  return rep;
}

ModelConstants resolve_constants(const RateModel& model, const SamplePlan& plan, bool fit_beta, double p) {
  ModelConstants c;
  c.beta_p = p;
  const auto& dc = model.declared();
  if (dc.K1 && dc.K2) {
    c.K1 = *dc.K1;
    c.K2 = *dc.K2;
  } else {
    const H1Report h1 = check_H1(model, plan, false);
    for (const auto& v : h1.violations)
      if (v.condition.find("unbounded") != std::string::npos)
        throw MissingConstants(model.describe() + ": " + v.note);
    c.K1 = as_curve(h1.times, h1.K1_hat);
    c.K2 = as_curve(h1.times, h1.K2_hat);
    c.K_fitted = true;
  }
  if (!fit_beta && dc.beta && dc.beta1 && dc.beta2 && dc.beta3 && dc.beta_p == p) {
    c.beta = dc.beta;
    c.beta1 = dc.beta1;
    c.beta2 = dc.beta2;
    c.beta3 = dc.beta3;
    return c;
  }
  const H3Report h3 = check_H3(model, p, plan, false);
  bool lipschitz_ok = true, drift_ok = true;
  for (const auto& v : h3.violations) {
    if (v.condition == "H3:beta-unbounded") lipschitz_ok = false;
    if (v.condition == "H3:drift-unbounded") drift_ok = false;
  }
  if (lipschitz_ok) c.beta = as_curve(h3.times, h3.beta_hat);
  if (drift_ok) {
    c.beta1 = as_curve(h3.times, h3.beta1_hat);
    c.beta2 = as_curve(h3.times, h3.beta2_hat);
    c.beta3 = as_curve(h3.times, h3.beta3_hat);
  }
  c.beta_fitted = true;
  return c;
}

}  // namespace mvbd
