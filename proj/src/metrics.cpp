#include "mvbd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mvbd/error.hpp"

namespace mvbd {

double w1(const Distribution& mu, const Distribution& nu) {
  const State cap = std::max(mu.cap(), nu.cap());
  CompensatedSum fa, fb, total;
  for (State i = 0; i < cap; ++i) {
    fa.add(mu[i]);
    fb.add(nu[i]);
    total.add(std::abs(fa.value() - fb.value()));
  }
  return total.value();
}

namespace {

double cost(State i, State j, double p) {
  double d = static_cast<double>(i > j ? i - j : j - i);
  return p == 1.0 ? d : std::pow(d, p);
}

// Cumulative staircase of one distribution, walked state by state. The last
// step is pinned to exactly 1 so both staircases end together.
class Staircase {
 public:
  explicit Staircase(const Distribution& d) : d_(d), top_(d.top()) { advance(); }
  State state() const { return state_; }
  double level() const { return level_; }
  bool done() const { return state_ > top_; }
  void advance() {
    do {
      ++state_;
      if (state_ > top_) return;
      acc_.add(d_[state_]);
    } while (d_[state_] == 0.0);
    level_ = state_ == top_ ? 1.0 : std::min(1.0, acc_.value());
  }

 private:
  const Distribution& d_;
  State top_;
  State state_ = -1;
  double level_ = 0.0;
  CompensatedSum acc_;
};

}  // namespace

double wp(const Distribution& mu, const Distribution& nu, double p) {
  if (!(p >= 1.0)) throw InvalidArgument("wp needs p >= 1");
  Staircase a(mu), b(nu);
  CompensatedSum total;
  double prev = 0.0;
  while (!a.done() && !b.done()) {
    double next = std::min(a.level(), b.level());
    if (next > prev) total.add((next - prev) * cost(a.state(), b.state(), p));
    prev = std::max(prev, next);
    const bool step_a = a.level() <= next;
    const bool step_b = b.level() <= next;
    if (step_a) a.advance();
    if (step_b) b.advance();
  }
  double s = std::max(0.0, total.value());
  return p == 1.0 ? s : std::pow(s, 1.0 / p);
}

double transport_lp_oracle(const Distribution& mu, const Distribution& nu, double p) {
  if (!(p >= 1.0)) throw InvalidArgument("transport oracle needs p >= 1");
  std::vector<State> xs, ys;
  std::vector<double> supply, demand;
  const State cap = std::max(mu.cap(), nu.cap());
  std::size_t union_size = 0;
  for (State i = 0; i <= cap; ++i) {
    if (mu[i] > 0.0) xs.push_back(i), supply.push_back(mu[i]);
    if (nu[i] > 0.0) ys.push_back(i), demand.push_back(nu[i]);
    if (mu[i] > 0.0 || nu[i] > 0.0) ++union_size;
  }
  if (union_size > 64) throw SupportTooLarge("transport oracle limited to 64 support points");

  // Successive shortest paths with Johnson potentials on the residual graph
  // SS -> sources -> sinks -> ST (dense Dijkstra, V <= 130).
  const std::size_t n = xs.size(), m = ys.size();
  const std::size_t V = n + m + 2, SS = n + m, ST = n + m + 1;
  std::vector<double> c(n * m);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t d = 0; d < m; ++d) c[s * m + d] = cost(xs[s], ys[d], p);
  std::vector<double> flow(n * m, 0.0), rs = supply, rd = demand, phi(V, 0.0);
  constexpr double kEps = 1e-15;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  auto active = [&](const std::vector<double>& r) {
    return std::any_of(r.begin(), r.end(), [](double x) { return x > kEps; });
  };
  std::vector<double> dist(V);
  std::vector<std::size_t> parent(V);
  std::vector<char> done(V);
  while (active(rs) && active(rd)) {
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(done.begin(), done.end(), 0);
    dist[SS] = 0.0;
    for (;;) {
      std::size_t u = V;
      for (std::size_t v = 0; v < V; ++v)
        if (!done[v] && dist[v] < kInf && (u == V || dist[v] < dist[u])) u = v;
      if (u == V || u == ST) break;
      done[u] = 1;
      auto relax = [&](std::size_t v, double w) {
        double nd = dist[u] + std::max(0.0, w + phi[u] - phi[v]);
        if (nd < dist[v]) dist[v] = nd, parent[v] = u;
      };
      if (u == SS) {
        for (std::size_t s = 0; s < n; ++s)
          if (rs[s] > kEps) relax(s, 0.0);
      } else if (u < n) {
        for (std::size_t d = 0; d < m; ++d) relax(n + d, c[u * m + d]);
      } else {
        std::size_t d = u - n;
        for (std::size_t s = 0; s < n; ++s)
          if (flow[s * m + d] > 0.0) relax(s, -c[s * m + d]);
        if (rd[d] > kEps) relax(ST, 0.0);
      }
    }
    if (dist[ST] == kInf) break;
    for (std::size_t v = 0; v < V; ++v) phi[v] += std::min(dist[v], dist[ST]);

    // bottleneck along ST <- d ... s <- SS
    std::size_t d_end = parent[ST] - n;
    double delta = rd[d_end];
    std::size_t v = parent[ST], s0 = 0;
    while (v != SS) {
      std::size_t u = parent[v];
      if (u == SS) {
        s0 = v;
        delta = std::min(delta, rs[v]);
      } else if (u >= n) {
        delta = std::min(delta, flow[v * m + (u - n)]);
      }
      v = u;
    }
    v = parent[ST];
    while (v != SS) {
      std::size_t u = parent[v];
      if (u < n && v >= n) flow[u * m + (v - n)] += delta;
      if (u >= n && u < SS && v < n) {
        double& f = flow[v * m + (u - n)];
        f = (f - delta <= kEps) ? 0.0 : f - delta;
      }
      v = u;
    }
    rs[s0] = (rs[s0] - delta <= kEps) ? 0.0 : rs[s0] - delta;
    rd[d_end] = (rd[d_end] - delta <= kEps) ? 0.0 : rd[d_end] - delta;
  }

  CompensatedSum total;
  for (std::size_t k = 0; k < n * m; ++k)
    if (flow[k] > 0.0) total.add(flow[k] * c[k]);
  double s = std::max(0.0, total.value());
  return p == 1.0 ? s : std::pow(s, 1.0 / p);
}

EmpiricalMeasure::EmpiricalMeasure(std::vector<State> samples) : samples_(std::move(samples)) {
  if (samples_.empty()) throw InvalidArgument("empirical measure needs samples");
  if (std::any_of(samples_.begin(), samples_.end(), [](State x) { return x < 0; }))
    throw InvalidArgument("empirical samples must be nonnegative");
  std::sort(samples_.begin(), samples_.end());
}

Distribution EmpiricalMeasure::distribution() const {
  std::vector<double> w(static_cast<std::size_t>(samples_.back()) + 1, 0.0);
  for (State x : samples_) w[static_cast<std::size_t>(x)] += 1.0;
  const double inv = 1.0 / static_cast<double>(samples_.size());
  for (auto& x : w) x *= inv;
  return Distribution::from_weights(std::move(w));
}

double w1_counts(std::span<const std::int64_t> counts, std::int64_t total, const Distribution& nu) {
  if (total <= 0) throw InvalidArgument("w1_counts needs a positive sample count");
  const State cap = std::max<State>(static_cast<State>(counts.size()) - 1, nu.cap());
  const double inv = 1.0 / static_cast<double>(total);
  std::int64_t running = 0;
  CompensatedSum fb, acc;
  for (State i = 0; i < cap; ++i) {
    if (i < static_cast<State>(counts.size())) running += counts[static_cast<std::size_t>(i)];
    fb.add(nu[i]);
    acc.add(std::abs(static_cast<double>(running) * inv - fb.value()));
  }
  return acc.value();
}

double product_w1_upper(const std::vector<std::vector<State>>& xs,
                        const std::vector<std::vector<State>>& ys) {
  if (xs.size() != ys.size() || xs.empty())
    throw SizeMismatch("product_w1_upper needs two nonempty sample sets of equal size");
  CompensatedSum acc;
  for (std::size_t r = 0; r < xs.size(); ++r) {
    if (xs[r].size() != ys[r].size()) throw SizeMismatch("sample vectors differ in dimension");
    std::int64_t s = 0;
    for (std::size_t l = 0; l < xs[r].size(); ++l) s += std::llabs(xs[r][l] - ys[r][l]);
    acc.add(static_cast<double>(s));
  }
  return acc.value() / static_cast<double>(xs.size());
}

double w1_stderr(const Distribution& ref, std::int64_t replicas) {
  if (replicas <= 0) throw InvalidArgument("w1_stderr needs replicas > 0");
  double f = 0.0, s = 0.0;
  for (State i = 0; i < ref.cap(); ++i) {
    f += ref[i];
    double v = std::clamp(f, 0.0, 1.0);
    s += std::sqrt(v * (1.0 - v));
  }
  return s / std::sqrt(static_cast<double>(replicas));
}

double w1_stderr_two_sample(const Distribution& a, std::int64_t ra, const Distribution& b,
                            std::int64_t rb) {
  if (ra <= 0 || rb <= 0) throw InvalidArgument("w1_stderr_two_sample needs positive sizes");
  const State cap = std::max(a.cap(), b.cap());
  const double wa = static_cast<double>(ra), wb = static_cast<double>(rb);
  double fa = 0.0, fb = 0.0, s = 0.0;
  for (State i = 0; i < cap; ++i) {
    fa += a[i];
    fb += b[i];
    double f = std::clamp((wa * fa + wb * fb) / (wa + wb), 0.0, 1.0);
    s += std::sqrt(f * (1.0 - f) * (1.0 / wa + 1.0 / wb));
  }
  return s;
}

}  // namespace mvbd
