#include "mvbd/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mvbd/error.hpp"
#include "mvbd/metrics.hpp"

namespace mvbd {

namespace {

MeasureView view_of(const std::vector<double>& y) {
  double m = 0.0;
  for (std::size_t i = 1; i < y.size(); ++i) m += static_cast<double>(i) * y[i];
  return {y, m};
}

std::string grid_text(const TimeGrid& g) {
  std::ostringstream os;
  os << "t0=" << fmt(g.t0) << " T=" << fmt(g.T) << " h=" << fmt(g.h);
  return os.str();
}

// Forward-equation state on {0..M} with absorbing top: the birth rate at M
// is forced to 0 and the flux it would have carried is tallied in `tail`.
class Integrator {
 public:
  Integrator(const RateModel& model, const Distribution& mu0, const SolverOptions& opt)
      : model_(model), opt_(opt) {
    State sig = 0;
    for (State i = mu0.cap(); i >= 0; --i)
      if (mu0[i] > opt.boundary_mass) {
        sig = i;
        break;
      }
    State cap = std::max<State>(opt.min_cap, 1);
    while (cap < 2 * sig) cap *= 2;
    cap = std::min(cap, std::max(opt.max_cap, mu0.top()));
    y_.assign(static_cast<std::size_t>(cap) + 1, 0.0);
    for (State i = 0; i <= mu0.cap(); ++i) {
      if (i <= cap) {
        y_[static_cast<std::size_t>(i)] = mu0[i];
      } else {
        y_.back() += mu0[i];
        tail_ += mu0[i];
      }
    }
    tail_ += mu0.tail_mass();
  }

  State cap() const { return static_cast<State>(y_.size()) - 1; }
  const std::vector<double>& y() const { return y_; }

  Distribution snapshot() const { return DistributionBuilder::adopt(y_, tail_); }

  // Fills rates for the current cap at time t under `view`.
  void fill(double t, const MeasureView& view, double h, std::vector<double>& a, std::vector<double>& b) {
    const std::size_t n = y_.size();
    a.resize(n);
    b.resize(n);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      Rates r = eval_rates(model_, t, static_cast<State>(i), view);
      a[i] = r.death;
      b[i] = r.birth;
    }
    top_birth_ = b.back();
    b.back() = 0.0;
    for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, a[i] + b[i]);
    if (h * worst > opt_.stability) {
      std::ostringstream os;
      os << model_.describe() << ": h * max rate = " << h * worst << " exceeds " << opt_.stability
         << " on {0.." << n - 1 << "} at t=" << t;
      throw StepTooLarge(os.str());
    }
  }

  static void apply(const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& y,
                    std::vector<double>& out) {
    const std::size_t n = y.size();
    out.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      double v = -(a[j] + b[j]) * y[j];
      if (j > 0) v += b[j - 1] * y[j - 1];
      if (j + 1 < n) v += a[j + 1] * y[j + 1];
      out[j] = v;
    }
  }

  // One RK4 step. `rates(stage, t_stage, y_stage, a, b)` fills the stage
  // rates; stage 0 is at t, stages 1 and 2 at t + h/2, stage 3 at t + h.
  template <class RateFn>
  void step(double t, double h, RateFn&& rates, std::vector<double>* slope = nullptr) {
    const std::size_t n = y_.size();
    rates(0, t, y_, a_, b_);
    const double flux = h * top_birth_ * y_.back();
    apply(a_, b_, y_, k1_);
    if (slope) *slope = k1_;
    stage_.resize(n);
    for (std::size_t i = 0; i < n; ++i) stage_[i] = y_[i] + 0.5 * h * k1_[i];
    rates(1, t + 0.5 * h, stage_, a_, b_);
    apply(a_, b_, stage_, k2_);
    for (std::size_t i = 0; i < n; ++i) stage_[i] = y_[i] + 0.5 * h * k2_[i];
    rates(2, t + 0.5 * h, stage_, a_, b_);
    apply(a_, b_, stage_, k3_);
    for (std::size_t i = 0; i < n; ++i) stage_[i] = y_[i] + h * k3_[i];
    rates(3, t + h, stage_, a_, b_);
    apply(a_, b_, stage_, k4_);
    for (std::size_t i = 0; i < n; ++i) y_[i] += h / 6.0 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
    tail_ += flux;
    finish_step(t + h);
  }

  // Time derivative at the current state under the given rates.
  template <class RateFn>
  std::vector<double> derivative(double t, RateFn&& rates) {
    rates(0, t, y_, a_, b_);
    std::vector<double> out;
    apply(a_, b_, y_, out);
    return out;
  }

  void annotate(MeasureFlow& flow, const std::string& route, const std::string& config) const {
    flow.meta.cap = std::max(flow.meta.cap, cap());
    flow.meta.clipped = clipped_;
    flow.meta.tail_mass = tail_;
    flow.meta.cap_doublings = doublings_;
    flow.meta.route = route;
    flow.meta.config = config;
  }

 private:
  void finish_step(double t) {
    double neg = 0.0, sum = 0.0;
    for (auto& v : y_) {
      if (v < 0.0) {
        neg -= v;
        v = 0.0;
      }
      sum += v;
    }
    clipped_ += neg;
    if (clipped_ > opt_.clip_budget) {
      std::ostringstream os;
      os << model_.describe() << ": cumulative negative clipping " << clipped_ << " exceeds "
         << opt_.clip_budget << " at t=" << t;
      throw StepTooLarge(os.str());
    }
    if (!(sum > 0.0) || !std::isfinite(sum)) throw StepTooLarge(model_.describe() + ": solution diverged");
    for (auto& v : y_) v /= sum;
    if (y_.back() > opt_.boundary_mass) {
      if (2 * cap() <= opt_.max_cap) {
        y_.resize(2 * y_.size() - 1, 0.0);
        ++doublings_;
      }
    }
    if (tail_ > opt_.tail_budget) {
      std::ostringstream os;
      os << model_.describe() << ": truncation tail mass " << tail_ << " exceeds " << opt_.tail_budget
         << " with cap " << cap() << " at t=" << t;
      throw CapOverflow(os.str());
    }
  }

  const RateModel& model_;
  SolverOptions opt_;
  std::vector<double> y_, a_, b_, k1_, k2_, k3_, k4_, stage_;
  double top_birth_ = 0.0;
  double tail_ = 0.0, clipped_ = 0.0;
  int doublings_ = 0;
};

std::vector<double> grid_times(const TimeGrid& grid) {
  const std::size_t n = grid.steps();
  std::vector<double> ts(n + 1);
  for (std::size_t k = 0; k <= n; ++k) ts[k] = grid.at(k);
  return ts;
}

}  // namespace

MeasureFlow linear_solve(const RateModel& model, const MeasureFlow& frozen, const Distribution& mu0,
                         const TimeGrid& grid, const SolverOptions& opt) {
  const auto ts = grid_times(grid);
  if (frozen.size() != ts.size() || std::abs(frozen.times().front() - grid.t0) > 1e-12 ||
      std::abs(frozen.times().back() - grid.T) > 1e-12)
    throw SizeMismatch("frozen flow is not defined on the solver grid");
  Integrator in(model, mu0, opt);
  std::vector<Distribution> nodes{in.snapshot()};
  std::vector<std::vector<double>> slopes(ts.size());
  std::vector<double> mid;
  std::size_t k = 0;
  MeasureView v0, vm, v1;
  auto rates = [&](int stage, double t, const std::vector<double>&, std::vector<double>& a,
                   std::vector<double>& b) {
    const MeasureView& v = stage == 0 ? v0 : (stage == 3 ? v1 : vm);
    in.fill(t, v, ts[k + 1] - ts[k], a, b);
  };
  for (k = 0; k + 1 < ts.size(); ++k) {
    v0 = MeasureView::of(frozen.node(k));
    v1 = MeasureView::of(frozen.node(k + 1));
    frozen.midpoint(k, mid);
    vm = view_of(mid);
    in.step(ts[k], ts[k + 1] - ts[k], rates, &slopes[k]);
    nodes.push_back(in.snapshot());
  }
  k = ts.size() - 1;
  v0 = MeasureView::of(frozen.node(k));
  slopes[k] = in.derivative(ts[k], [&](int, double t, const std::vector<double>&, std::vector<double>& a,
                                       std::vector<double>& b) { in.fill(t, v0, grid.h, a, b); });
  MeasureFlow flow(ts, std::move(nodes), std::move(slopes));
  in.annotate(flow, "linear", grid_text(grid));
  return flow;
}

double default_lambda(const ModelConstants& c, double t0, double T) {
  constexpr int kPanels = 2048;
  double integral = 0.0;
  for (int k = 0; k < kPanels; ++k) {
    double a = t0 + (T - t0) * k / kPanels, b = t0 + (T - t0) * (k + 1) / kPanels;
    integral += 0.5 * (b - a) * (std::abs(c.K1(a)) + std::abs(c.K1(b)));
  }
  double k2 = std::max(0.0, c.K2.max_on(t0, T));
  return 2.0 * k2 * std::exp(integral) + 1.0;
}

PicardResult picard_fixed_point(const RateModel& model, const Distribution& mu0, const TimeGrid& grid,
                                const PicardConfig& cfg, const SolverOptions& opt) {
  if (!(cfg.tol > 0.0) || cfg.max_iter < 1) throw InvalidArgument("Picard needs tol > 0 and max_iter >= 1");
  PicardResult res;
  if (cfg.lambda) {
    if (!(*cfg.lambda > 0.0)) throw InvalidArgument("Picard lambda must be positive");
    res.lambda = *cfg.lambda;
  } else {
    SamplePlan plan;
    plan.times.clear();
    for (int k = 0; k <= 8; ++k) plan.times.push_back(grid.t0 + (grid.T - grid.t0) * k / 8.0);
    try {
      res.lambda = default_lambda(resolve_constants(model, plan), grid.t0, grid.T);
    } catch (const MissingConstants&) {
      if (model.distribution_dependent()) throw;
      res.lambda = 1.0;
    }
  }
  MeasureFlow gamma = MeasureFlow::constant(mu0, grid);
  for (int it = 1; it <= cfg.max_iter; ++it) {
    MeasureFlow next = linear_solve(model, gamma, mu0, grid, opt);
    double gap = rho_lambda(next, gamma, res.lambda);
    double sup_gap = sup_w1(next, gamma);
    res.gaps.push_back(gap);
    res.sup_gaps.push_back(sup_gap);
    gamma = std::move(next);
    if (gap < cfg.tol && sup_gap < cfg.tol) {
      res.iterations = it;
      res.final_gap = gap;
      gamma.meta.route = "picard";
      std::ostringstream os;
      os << grid_text(grid) << " lambda=" << fmt(res.lambda) << " tol=" << fmt(cfg.tol)
         << " iterations=" << it;
      gamma.meta.config = os.str();
      res.flow = std::move(gamma);
      return res;
    }
  }
  std::ostringstream os;
  os << model.describe() << ": Picard iteration did not reach gap " << cfg.tol << " in " << cfg.max_iter
     << " iterations (last gap " << res.gaps.back() << ", lambda " << res.lambda << ")";
  throw NoConvergence(os.str());
}

MeasureFlow direct_nonlinear_solve(const RateModel& model, const Distribution& mu0, const TimeGrid& grid,
                                   const SolverOptions& opt) {
  const auto ts = grid_times(grid);
  Integrator in(model, mu0, opt);
  std::vector<Distribution> nodes{in.snapshot()};
  std::vector<std::vector<double>> slopes(ts.size());
  double h = grid.h;
  auto rates = [&](int, double t, const std::vector<double>& y, std::vector<double>& a, std::vector<double>& b) {
    in.fill(t, view_of(y), h, a, b);
  };
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
    h = ts[k + 1] - ts[k];
    in.step(ts[k], h, rates, &slopes[k]);
    nodes.push_back(in.snapshot());
  }
  slopes.back() = in.derivative(ts.back(), rates);
  MeasureFlow flow(ts, std::move(nodes), std::move(slopes));
  in.annotate(flow, "direct", grid_text(grid));
  return flow;
}

MeasureFlow dyadic_approx_solve(const RateModel& model, const Distribution& mu0, const TimeGrid& grid, int n,
                                const SolverOptions& opt) {
  if (n < 0 || n > 40) throw InvalidArgument("dyadic level must lie in [0, 40]");
  const auto ts = grid_times(grid);
  const double cell = std::ldexp(1.0, -n);
  constexpr double kEps = 1e-12;

  struct Break {
    double t;
    bool node, boundary;
  };
  std::vector<Break> br;
  for (double t : ts) br.push_back({t, true, false});
  const auto first = static_cast<long long>(std::floor(grid.t0 / cell + 1e-9)) + 1;
  for (long long j = first;; ++j) {
    double t = static_cast<double>(j) * cell;
    if (t >= grid.T - kEps) break;
    br.push_back({t, false, true});
  }
  std::sort(br.begin(), br.end(), [](const Break& a, const Break& b) { return a.t < b.t; });
  std::vector<Break> merged;
  for (const auto& b : br) {
    if (!merged.empty() && b.t - merged.back().t < kEps) {
      merged.back().node |= b.node;
      merged.back().boundary |= b.boundary;
      if (b.node) merged.back().t = b.t;
    } else {
      merged.push_back(b);
    }
  }

  Integrator in(model, mu0, opt);
  std::vector<Distribution> nodes{in.snapshot()};
  std::vector<double> frozen = in.y();
  double t_frozen = std::floor(grid.t0 / cell + 1e-9) * cell;
  MeasureView fv = view_of(frozen);
  double h = grid.h;
  auto rates = [&](int, double, const std::vector<double>&, std::vector<double>& a, std::vector<double>& b) {
    in.fill(t_frozen, fv, h, a, b);
  };
  for (std::size_t k = 0; k + 1 < merged.size(); ++k) {
    if (merged[k].boundary) {
      frozen = in.y();
      fv = view_of(frozen);
      t_frozen = merged[k].t;
    }
    h = merged[k + 1].t - merged[k].t;
    in.step(merged[k].t, h, rates);
    if (merged[k + 1].node) nodes.push_back(in.snapshot());
  }
  MeasureFlow flow(ts, std::move(nodes));
  std::ostringstream os;
  os << grid_text(grid) << " n=" << n;
  in.annotate(flow, "dyadic:" + std::to_string(n), os.str());
  return flow;
}

namespace {

// pi_mu on {0..cap} from detailed balance, in log space; extends the cap
// until the top weight is negligible.
Distribution detailed_balance(const RateModel& model, const Distribution& mu, State cap,
                              const StationaryOptions& opt) {
  const MeasureView v = MeasureView::of(mu);
  for (;;) {
    std::vector<double> lw(static_cast<std::size_t>(cap) + 1, -std::numeric_limits<double>::infinity());
    lw[0] = 0.0;
    State last = 0;
    for (State i = 0; i < cap; ++i) {
      const double b = eval_rates(model, 0.0, i, v).birth;
      if (b == 0.0) break;
      const double a = eval_rates(model, 0.0, i + 1, v).death;
      if (a == 0.0) {
        std::ostringstream os;
        os << model.describe() << ": death rate vanishes at state " << i + 1 << " while birth at " << i
           << " is positive";
        throw ZeroDeathRate(os.str());
      }
      lw[static_cast<std::size_t>(i) + 1] = lw[static_cast<std::size_t>(i)] + std::log(b) - std::log(a);
      last = i + 1;
    }
    const double top = *std::max_element(lw.begin(), lw.end());
    std::vector<double> w(lw.size(), 0.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) sum += (w[i] = std::exp(lw[i] - top));
    if (last < cap || w.back() / sum <= opt.top_mass) {
      for (auto& x : w) x /= sum;
      return DistributionBuilder::adopt(std::move(w), 0.0);
    }
    if (2 * cap > opt.max_cap) {
      std::ostringstream os;
      os << model.describe() << ": stationary support exceeds " << opt.max_cap << " states";
      throw NoConvergence(os.str());
    }
    cap *= 2;
  }
}

}  // namespace

StationaryResult stationary_solve(const RateModel& model, const StationaryOptions& opt) {
  if (!model.time_homogeneous()) throw InvalidArgument("stationary_solve needs a time-homogeneous model");
  if (!(opt.omega > 0.0 && opt.omega <= 1.0)) throw InvalidArgument("damping omega must lie in (0, 1]");
  StationaryResult res;
  Distribution mu = Distribution::dirac(0, 32);
  State cap = 32;
  for (int it = 1; it <= opt.max_iter; ++it) {
    Distribution pi = detailed_balance(model, mu, cap, opt);
    cap = std::max(cap, pi.cap());
    res.residual = total_variation(pi, mu);
    res.iterations = it;
    if (res.residual <= opt.tol) break;
    if (it == opt.max_iter) {
      std::ostringstream os;
      os << model.describe() << ": stationary iteration stalled at TV residual " << res.residual << " after "
         << it << " iterations";
      throw NoConvergence(os.str());
    }
    std::vector<double> next(static_cast<std::size_t>(cap) + 1, 0.0);
    for (State i = 0; i <= cap; ++i)
      next[static_cast<std::size_t>(i)] = (1.0 - opt.omega) * mu[i] + opt.omega * pi[i];
    double s = 0.0;
    for (double x : next) s += x;
    for (auto& x : next) x /= s;
    mu = DistributionBuilder::adopt(std::move(next), 0.0);
  }
  res.mu = mu;
  res.invariance_drift = std::numeric_limits<double>::quiet_NaN();
  if (opt.verify) {
    double worst = 0.0;
    const MeasureView v = MeasureView::of(mu);
    for (State i = 0; i <= 2 * mu.cap(); ++i) worst = std::max(worst, eval_rates(model, 0.0, i, v).total());
    double h = 1.0;
    while (h * worst > 0.4) h /= 2.0;
    TimeGrid g{0.0, 1.0, h};
    SolverOptions so;
    so.max_cap = std::max<State>(so.max_cap, 2 * mu.cap());
    MeasureFlow f = linear_solve(model, MeasureFlow::constant(mu, g), mu, g, so);
    res.invariance_drift = w1(f.back(), mu);
  }
  return res;
}

std::vector<double> linear_ode_curve(const std::vector<double>& times, double B0,
                                     const std::function<double(double)>& r,
                                     const std::function<double(double)>& f, int refine) {
  std::vector<double> out{B0};
  double B = B0;
  auto rhs = [&](double t, double x) { return r(t) * x + f(t); };
  for (std::size_t k = 0; k + 1 < times.size(); ++k) {
    const double dt = (times[k + 1] - times[k]) / refine;
    for (int s = 0; s < refine; ++s) {
      double t = times[k] + s * dt;
      double k1 = rhs(t, B), k2 = rhs(t + dt / 2, B + dt / 2 * k1), k3 = rhs(t + dt / 2, B + dt / 2 * k2),
             k4 = rhs(t + dt, B + dt * k3);
      B += dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    out.push_back(B);
  }
  return out;
}

ExperimentReport moment_check(const MeasureFlow& flow, const RateModel& model, double p, const ModelConstants& c,
                              double tol) {
  if (!(p >= 1.0)) throw InvalidArgument("moment_check needs p >= 1");
  ExperimentReport rep(p == 1.0 ? "moment_first" : "moment_p", model.describe());
  const auto& ts = flow.times();
  std::vector<double> bound;
  if (p == 1.0) {
    const std::vector<double> d0{1.0};
    const MeasureView delta0{d0, 0.0};
    bound = linear_ode_curve(
        ts, flow.node(0).mean(), [&](double s) { return c.K1(s) + c.K2(s); },
        [&](double s) { return eval_rates(model, s, 0, delta0).birth; });
  } else {
    if (!c.beta1 || !c.beta2 || !c.beta3 || c.beta_p != p)
      throw MissingConstants(model.describe() + ": moment drift constants unavailable for this p");
    bound = linear_ode_curve(
        ts, flow.node(0).moment(p), [&](double s) { return (*c.beta2)(s) + (*c.beta3)(s); },
        [&](double s) { return (*c.beta1)(s); });
  }
  for (std::size_t k = 0; k < ts.size(); ++k) {
    double measured = p == 1.0 ? flow.node(k).mean() : flow.node(k).moment(p);
    rep.add_bound((p == 1.0 ? "mean@" : "moment_p@") + fmt(ts[k]), ts[k], measured, bound[k], tol);
  }
  rep.note("p = " + fmt(p) + (c.K_fitted || c.beta_fitted ? ", constants partly fitted" : ", declared constants"));
  return rep;
}

}  // namespace mvbd
