#include "mvbd/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <sstream>

#include "mvbd/error.hpp"
#include "mvbd/metrics.hpp"
#include "mvbd/parallel.hpp"
#include "mvbd/report.hpp"

namespace mvbd {

const char* channel_name(Channel c) {
  switch (c) {
    case Channel::SyncBirth: return "sync-birth";
    case Channel::SyncDeath: return "sync-death";
    case Channel::XBirth: return "X-birth";
    case Channel::YBirth: return "Y-birth";
    case Channel::XDeath: return "X-death";
    case Channel::YDeath: return "Y-death";
  }
  return "?";
}

namespace {

constexpr int kChannels = 6;
constexpr int kDx[kChannels] = {1, -1, 1, 0, -1, 0};
constexpr int kDy[kChannels] = {1, -1, 0, 1, 0, -1};
constexpr std::uint64_t kDriftCheck = 1'000'000;

// Empirical law of one side, maintained incrementally.
class Empirical {
 public:
  void reset(const std::vector<State>& xs) {
    counts_.clear();
    mass_.clear();
    sum_ = 0;
    inv_ = 1.0 / static_cast<double>(xs.size());
    for (State x : xs) add(x, 1);
  }
  void add(State x, int delta) {
    auto i = static_cast<std::size_t>(x);
    if (i >= counts_.size()) {
      counts_.resize(std::max<std::size_t>(2 * counts_.size(), i + 1), 0);
      mass_.resize(counts_.size(), 0.0);
    }
    counts_[i] += delta;
    mass_[i] = static_cast<double>(counts_[i]) * inv_;
    sum_ += delta * x;
  }
  MeasureView view() const {
    std::size_t n = counts_.size();
    while (n > 1 && counts_[n - 1] == 0) --n;
    return {std::span<const double>(mass_.data(), n), static_cast<double>(sum_) * inv_};
  }
  std::int64_t sum() const { return sum_; }
  bool matches(const std::vector<State>& xs) const {
    std::vector<std::int64_t> c(counts_.size(), 0);
    std::int64_t s = 0;
    for (State x : xs) {
      if (static_cast<std::size_t>(x) >= c.size()) return false;
      ++c[static_cast<std::size_t>(x)];
      s += x;
    }
    if (s != sum_ || c != counts_) return false;
    for (std::size_t i = 0; i < c.size(); ++i)
      if (std::abs(mass_[i] - static_cast<double>(c[i]) * inv_) > 1e-9) return false;
    return true;
  }

 private:
  std::vector<std::int64_t> counts_;
  std::vector<double> mass_;
  std::int64_t sum_ = 0;
  double inv_ = 1.0;
};

struct Group {
  std::vector<std::int32_t> members;
  double c[kChannels] = {};
  double total = 0.0;
};

using Key = std::pair<State, State>;

class Engine {
 public:
  Engine(const RateModel& model, Side X, Side Y, std::vector<State> x0, std::vector<State> y0,
         const SimOptions& opt, Rng& rng)
      : model_(model), X_(X), Y_(Y), opt_(opt), rng_(rng), x_(std::move(x0)), y_(std::move(y0)) {
    if (x_.empty()) throw InvalidArgument("simulation needs at least one particle");
    if (y_.empty()) y_.assign(x_.size(), 0);
    if (y_.size() != x_.size()) throw SizeMismatch("x and y initial vectors differ in length");
    if (X.mode == Side::Mode::None) throw InvalidArgument("the X side must read a flow or its empirical law");
    for (State v : x_)
      if (v < 0) throw InvalidArgument("initial states must be nonnegative");
    for (State v : y_)
      if (v < 0) throw InvalidArgument("initial states must be nonnegative");
    if (X.mode == Side::Mode::Empirical) ex_.reset(x_);
    if (Y.mode == Side::Mode::Empirical) ey_.reset(y_);
    pos_.resize(x_.size());
    for (std::size_t l = 0; l < x_.size(); ++l) {
      auto& g = groups_[{x_[l], y_[l]}];
      pos_[l] = static_cast<std::int32_t>(g.members.size());
      g.members.push_back(static_cast<std::int32_t>(l));
    }
  }

  CoupledRun run(double T, const std::vector<double>& checkpoints) {
    CoupledRun out;
    for (double c : checkpoints)
      if (c < 0.0 || c > T + 1e-12) throw InvalidArgument("checkpoints must lie in [0, T]");
    if (!std::is_sorted(checkpoints.begin(), checkpoints.end()))
      throw InvalidArgument("checkpoints must be sorted");

    std::vector<double> br{0.0, T};
    const MeasureFlow* grid_flow = X_.flow ? X_.flow : Y_.flow;
    const bool constant_rates = model_.time_homogeneous() && !model_.distribution_dependent();
    if (grid_flow && !constant_rates) {
      if (grid_flow->times().front() > 1e-12 || grid_flow->times().back() < T - 1e-12)
        throw InvalidArgument("flow does not cover [0, T]");
      for (double t : grid_flow->times())
        if (t > 0.0 && t < T) br.push_back(t);
    } else if (!model_.time_homogeneous()) {
      for (double t = opt_.h; t < T - 1e-12; t += opt_.h) br.push_back(t);
    }
    for (double c : checkpoints) br.push_back(c);
    std::sort(br.begin(), br.end());
    br.erase(std::unique(br.begin(), br.end(), [](double a, double b) { return b - a < 1e-12; }), br.end());

    std::size_t next_cp = 0;
    auto snap = [&](double t) {
      while (next_cp < checkpoints.size() && checkpoints[next_cp] <= t + 1e-12) {
        out.xs.push_back(x_);
        out.ys.push_back(y_);
        ++next_cp;
      }
    };
    snap(0.0);
    for (std::size_t w = 0; w + 1 < br.size(); ++w) {
      window(br[w], br[w + 1], out);
      snap(br[w + 1]);
    }
    out.x = std::move(x_);
    out.y = std::move(y_);
    out.events = events_;
    out.proposals = proposals_;
    return out;
  }

 private:
  MeasureView view(const Side& s, const Empirical& e, std::size_t node) const {
    switch (s.mode) {
      case Side::Mode::Flow: return MeasureView::of(s.flow->node(node));
      case Side::Mode::Empirical: return e.view();
      default: return {};
    }
  }

  // Channel rates of every group at time t; returns the total.
  double evaluate(double t) {
    const MeasureView vx = view(X_, ex_, xnode_), vy = view(Y_, ey_, ynode_);
    double total = 0.0;
    for (auto& [key, g] : groups_) {
      Rates rx = eval_rates(model_, t, key.first, vx);
      Rates ry = Y_.mode == Side::Mode::None ? Rates{} : eval_rates(model_, t, key.second, vy);
      g.c[0] = std::min(rx.birth, ry.birth);
      g.c[1] = std::min(rx.death, ry.death);
      g.c[2] = std::max(0.0, rx.birth - ry.birth);
      g.c[3] = std::max(0.0, ry.birth - rx.birth);
      g.c[4] = std::max(0.0, rx.death - ry.death);
      g.c[5] = std::max(0.0, ry.death - rx.death);
      double s = 0.0;
      for (double c : g.c) s += c;
      g.total = s * static_cast<double>(g.members.size());
      total += g.total;
    }
    if (total > opt_.rate_ceiling) {
      std::ostringstream os;
      os << model_.describe() << ": total event rate " << total << " exceeds the ceiling " << opt_.rate_ceiling
         << " at t=" << t;
      throw RateOverflow(os.str());
    }
    return total;
  }

  void window(double s, double e, CoupledRun& out) {
    if (X_.flow) xnode_ = X_.flow->left_index(s);
    if (Y_.flow) ynode_ = Y_.flow->left_index(s);
    const bool exact = model_.time_homogeneous();
    double t = s;
    for (;;) {
      double bound = exact ? evaluate(t) : opt_.safety * std::max(evaluate(e), evaluate(t));
      if (!(bound > 0.0)) return;
      t += rng_.exponential(bound);
      if (t >= e) return;
      ++proposals_;
      double q = bound;
      if (!exact) {
        q = evaluate(t);
        if (q > bound) {
          std::ostringstream os;
          os << model_.describe() << ": rate " << q << " exceeds its window bound " << bound << " at t=" << t;
          throw DominationFailure(os.str());
        }
        if (rng_.uniform() * bound > q) continue;
      }
      fire(t, q, out);
    }
  }

  void fire(double t, double q, CoupledRun& out) {
    double u = rng_.uniform() * q;
    auto it = groups_.begin();
    for (; std::next(it) != groups_.end(); ++it) {
      if (u < it->second.total) break;
      u -= it->second.total;
    }
    Group& g = it->second;
    const double n = static_cast<double>(g.members.size());
    int ch = 0;
    double per = u / n;
    for (; ch < kChannels - 1; ++ch) {
      if (per < g.c[ch] && g.c[ch] > 0.0) break;
      per -= g.c[ch];
    }
    while (g.c[ch] <= 0.0) --ch;  // rounding pushed u past the last positive channel
    const auto l = static_cast<std::size_t>(g.members[rng_.below(g.members.size())]);
    move(l, it, x_[l] + kDx[ch], y_[l] + (Y_.mode == Side::Mode::None ? 0 : kDy[ch]));
    if (opt_.log_events) out.log.push_back({t, static_cast<std::int32_t>(l), static_cast<Channel>(ch)});
    if (++events_ % kDriftCheck == 0) {
      if ((X_.mode == Side::Mode::Empirical && !ex_.matches(x_)) ||
          (Y_.mode == Side::Mode::Empirical && !ey_.matches(y_)))
        throw Error("InternalError", "cached empirical moments drifted from the particle states");
    }
  }

  void move(std::size_t l, std::map<Key, Group>::iterator from, State nx, State ny) {
    if (nx < 0 || ny < 0) throw Error("InternalError", "death fired at state 0");
    auto& m = from->second.members;
    const auto p = static_cast<std::size_t>(pos_[l]);
    m[p] = m.back();
    pos_[static_cast<std::size_t>(m[p])] = static_cast<std::int32_t>(p);
    m.pop_back();
    if (m.empty()) groups_.erase(from);
    if (X_.mode == Side::Mode::Empirical && nx != x_[l]) ex_.add(x_[l], -1), ex_.add(nx, 1);
    if (Y_.mode == Side::Mode::Empirical && ny != y_[l]) ey_.add(y_[l], -1), ey_.add(ny, 1);
    x_[l] = nx;
    y_[l] = ny;
    auto& g = groups_[{nx, ny}];
    pos_[l] = static_cast<std::int32_t>(g.members.size());
    g.members.push_back(static_cast<std::int32_t>(l));
  }

  const RateModel& model_;
  Side X_, Y_;
  SimOptions opt_;
  Rng& rng_;
  std::vector<State> x_, y_;
  std::vector<std::int32_t> pos_;
  std::map<Key, Group> groups_;
  Empirical ex_, ey_;
  std::size_t xnode_ = 0, ynode_ = 0;
  std::uint64_t events_ = 0, proposals_ = 0;
};

}  // namespace

CoupledRun run_coupled(const RateModel& model, Side X, Side Y, std::vector<State> x0, std::vector<State> y0,
                       double T, const std::vector<double>& checkpoints, Rng& rng, const SimOptions& opt) {
  if (!(T > 0.0)) throw InvalidArgument("simulation horizon must be positive");
  Engine e(model, X, Y, std::move(x0), std::move(y0), opt, rng);
  return e.run(T, checkpoints);
}

State JumpPath::at(double t) const {
  State s = x0;
  for (const auto& [te, x] : events) {
    if (te > t) break;
    s = x;
  }
  return s;
}

std::pair<State, State> CoupledPath::at(double t) const {
  std::pair<State, State> s{x0, y0};
  for (const auto& e : events) {
    if (e.t > t) break;
    s = {e.x, e.y};
  }
  return s;
}

JumpPath simulate_frozen(const RateModel& model, const MeasureFlow& flow, State x0, double T, std::uint64_t seed,
                         const SimOptions& opt) {
  Rng rng(seed);
  SimOptions o = opt;
  o.log_events = true;
  CoupledRun r = run_coupled(model, Side::frozen(flow), Side::none(), {x0}, {}, T, {}, rng, o);
  JumpPath p{x0, T, {}};
  State x = x0;
  for (const auto& e : r.log) {
    x += kDx[static_cast<int>(e.channel)];
    p.events.emplace_back(e.t, x);
  }
  return p;
}

CoupledPath simulate_coupling(const RateModel& model, const MeasureFlow& flow_x, const MeasureFlow& flow_y,
                              State x0, State y0, double T, std::uint64_t seed, const SimOptions& opt) {
  Rng rng(seed);
  SimOptions o = opt;
  o.log_events = true;
  CoupledRun r = run_coupled(model, Side::frozen(flow_x), Side::frozen(flow_y), {x0}, {y0}, T, {}, rng, o);
  CoupledPath p{x0, y0, T, {}};
  State x = x0, y = y0;
  for (const auto& e : r.log) {
    x += kDx[static_cast<int>(e.channel)];
    y += kDy[static_cast<int>(e.channel)];
    p.events.push_back({e.t, e.channel, x, y});
  }
  return p;
}

State sample(const Distribution& mu, Rng& rng) {
  const double u = rng.uniform();
  double f = 0.0;
  const auto m = mu.mass();
  for (std::size_t i = 0; i < m.size(); ++i) {
    f += m[i];
    if (u < f) return static_cast<State>(i);
  }
  return mu.top();
}

std::pair<State, State> sample_comonotone(const Distribution& mu, const Distribution& nu, Rng& rng) {
  const double u = rng.uniform();
  auto quantile = [u](const Distribution& d) {
    double f = 0.0;
    const auto m = d.mass();
    for (std::size_t i = 0; i < m.size(); ++i) {
      f += m[i];
      if (u < f) return static_cast<State>(i);
    }
    return d.top();
  };
  return {quantile(mu), quantile(nu)};
}

std::vector<State> frozen_final_states(const RateModel& model, const MeasureFlow& flow, const Distribution& mu0,
                                       double T, std::int64_t replicas, std::uint64_t seed, unsigned workers,
                                       const SimOptions& opt) {
  if (replicas < 1) throw InvalidArgument("replicas must be >= 1");
  std::vector<State> out(static_cast<std::size_t>(replicas));
  parallel_for(out.size(), workers, [&](std::size_t r) {
    Rng rng(stream_seed(seed, r));
    State x0 = sample(mu0, rng);
    out[r] = run_coupled(model, Side::frozen(flow), Side::none(), {x0}, {}, T, {}, rng, opt).x[0];
  });
  return out;
}

ParticleState::ParticleState(std::vector<State> xs) : x(std::move(xs)) {
  for (State v : x) sum += v;
}

Distribution ParticleState::empirical() const { return empirical_law(x); }

Distribution empirical_law(const std::vector<State>& xs) { return EmpiricalMeasure(xs).distribution(); }

InitSampler iid(const Distribution& mu0, std::size_t N) {
  return [mu0, N](Rng& rng) {
    std::vector<State> x(N);
    for (auto& v : x) v = sample(mu0, rng);
    return x;
  };
}

ParticleRun simulate_particles(const RateModel& model, std::size_t N, const InitSampler& init, double T,
                               std::uint64_t seed, const std::vector<double>& checkpoints, const SimOptions& opt) {
  if (N < 1) throw InvalidArgument("particle count must be >= 1");
  Rng rng(seed);
  std::vector<State> x0 = init(rng);
  if (x0.size() != N) throw SizeMismatch("initial sampler returned the wrong number of particles");
  CoupledRun r = run_coupled(model, Side::empirical(), Side::none(), std::move(x0), {}, T, checkpoints, rng, opt);
  ParticleRun out;
  out.final = ParticleState(std::move(r.x));
  out.snapshots = std::move(r.xs);
  out.log = std::move(r.log);
  out.events = r.events;
  return out;
}

ParticleCouplingRun simulate_particle_coupling(const RateModel& model, std::size_t N, const Distribution& mu0,
                                               const MeasureFlow& flow, double T, std::uint64_t seed,
                                               const std::vector<double>& checkpoints, const SimOptions& opt) {
  if (N < 1) throw InvalidArgument("particle count must be >= 1");
  Rng rng(seed);
  std::vector<State> x0 = iid(mu0, N)(rng);
  CoupledRun r = run_coupled(model, Side::empirical(), Side::frozen(flow), x0, x0, T, checkpoints, rng, opt);
  ParticleCouplingRun out;
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    std::int64_t d = 0;
    for (std::size_t l = 0; l < N; ++l) d += std::llabs(r.xs[c][l] - r.ys[c][l]);
    out.distance.push_back(static_cast<double>(d) / static_cast<double>(N));
    const std::size_t k = flow.left_index(checkpoints[c]);
    if (std::abs(flow.times()[k] - checkpoints[c]) > 1e-9)
      throw InvalidArgument("particle coupling checkpoints must be flow grid nodes");
    out.empirical_w1.push_back(w1(empirical_law(r.xs[c]), flow.node(k)));
  }
  out.particle = ParticleState(std::move(r.x));
  out.independent = ParticleState(std::move(r.y));
  out.xs = std::move(r.xs);
  out.ys = std::move(r.ys);
  out.log = std::move(r.log);
  return out;
}

void write_event_log(const std::vector<std::vector<Event>>& logs, std::size_t N, std::ostream& os) {
  os << "replica,t,coordinate,delta\n";
  for (std::size_t r = 0; r < logs.size(); ++r) {
    for (const auto& e : logs[r]) {
      const int c = static_cast<int>(e.channel);
      if (kDx[c] != 0) os << r << ',' << fmt(e.t) << ',' << e.particle << ',' << kDx[c] << '\n';
      if (kDy[c] != 0) os << r << ',' << fmt(e.t) << ',' << N + static_cast<std::size_t>(e.particle) << ','
                          << kDy[c] << '\n';
    }
  }
}

void write_stats(const std::vector<StatRow>& rows, std::ostream& os) {
  os << "t,stat,value,stderr\n";
  for (const auto& r : rows) os << fmt(r.t) << ',' << r.stat << ',' << fmt(r.value) << ',' << fmt(r.stderr_) << '\n';
}

}  // namespace mvbd
