#include <cmath>
#include <sstream>

#include "doctest.h"
#include "mvbd/experiments.hpp"
#include "mvbd/report.hpp"

using namespace mvbd;

namespace {

ExperimentOptions quick(double T, std::int64_t replicas) {
  ExperimentOptions o;
  o.T = T;
  o.h = 1.0 / 128;
  o.replicas = replicas;
  o.seed = 3;
  return o;
}

// sup_{j != i} |f(j) - f(i)| / |i - j| by brute force over j in [0, scan].
double gradient_at(const TestFunction& f, State i, State scan) {
  double g = 0;
  for (State j = 0; j <= scan; ++j)
    if (j != i) g = std::max(g, std::abs(f(j) - f(i)) / std::abs(double(i - j)));
  return g;
}

}  // namespace

TEST_CASE("report margins and verdicts") {
  ExperimentReport r("demo", "model", 1);
  r.add_bound("a", 1.0, 1.0, 1.0, 0.02);
  r.add_bound("b", 1.0, 1.1, 1.0, 0.02, 0.05);
  r.add_equality("c", 1.0, -0.45, -0.5, 0.15);
  r.add_info("d", 1.0, 42.0);
  CHECK(r.points[0].margin == doctest::Approx(0.02));
  CHECK(r.points[1].margin == doctest::Approx(1.02 + 0.15 - 1.1));
  CHECK(r.points[2].margin == doctest::Approx(0.10));
  CHECK(r.passed());
  CHECK(r.worst_margin() == doctest::Approx(0.02));
  r.add_bound("e", 2.0, 3.0, 1.0, 0.0);
  CHECK_FALSE(r.passed());
  CHECK(r.failures() == 1);
  r.exclude("precondition");
  CHECK(r.passed());
  std::ostringstream os;
  r.write_summary(os);
  CHECK(os.str().find("demo,e,3,1,0,excluded") != std::string::npos);
}

TEST_CASE("number formatting round-trips") {
  CHECK(fmt(0.0) == "0");
  CHECK(fmt(0.5) == "0.5");
  CHECK(std::stod(fmt(0.1)) == 0.1);
  CHECK(fmt(std::numeric_limits<double>::infinity()) == "inf");
}

TEST_CASE("log-log slope of a power law") {
  std::vector<double> x{16, 32, 64, 128}, y;
  for (double n : x) y.push_back(3.0 * std::pow(n, -0.5));
  CHECK(loglog_slope(x, y) == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("exponential of an integral") {
  auto e = exp_integral([](double s) { return -0.5 + s; }, {0.5, 1.0, 2.0});
  for (auto [k, t] : {std::pair{0, 0.5}, {1, 1.0}, {2, 2.0}})
    CHECK(e[static_cast<std::size_t>(k)] == doctest::Approx(std::exp(-0.5 * t + 0.5 * t * t)).epsilon(1e-6));
}

TEST_CASE("intrinsic gradient matches brute force") {
  TestFunction clip = [](State i) { return double(std::min<State>(i, 10)); };
  TestFunction indicator = [](State i) { return i == 0 ? 1.0 : 0.0; };
  auto g1 = intrinsic_gradient(clip, 30, 200);
  auto g2 = intrinsic_gradient(indicator, 30, 200);
  for (State i = 0; i <= 30; ++i) {
    CHECK(g1[i] == doctest::Approx(gradient_at(clip, i, 200)));
    CHECK(g2[i] == doctest::Approx(gradient_at(indicator, i, 200)));
  }
  CHECK(g1[10] == doctest::Approx(1.0));
  CHECK(g1[20] == doctest::Approx(0.5));
  CHECK(g2[4] == doctest::Approx(0.25));
}

TEST_CASE("contraction on the affine model") {
  AffineMeanField m(1.0, 0.5, 1.0);
  auto r = contraction_experiment(m, Distribution::dirac(0), Distribution::dirac(4), quick(2.0, 2000));
  CHECK(r.passed());
  CHECK_FALSE(r.excluded);
  // two deterministic flows started at 0 and 4: W1 = E|X - Y| = 4 e^{-t/2}
  for (const auto& p : r.points)
    if (p.label.rfind("flow_w1@", 0) == 0) CHECK(p.measured == doctest::Approx(4.0 * std::exp(-0.5 * p.t)).epsilon(1e-8));
}

TEST_CASE("contraction outside the ergodic regime is excluded") {
  AffineMeanField m(1.0, 1.0, 1.0);
  auto r = contraction_experiment(m, Distribution::dirac(0), Distribution::dirac(4), quick(1.0, 200));
  CHECK(r.excluded);
  CHECK(r.passed());
}

TEST_CASE("Wp Lipschitz and gradient estimates") {
  AffineMeanField m(1.0, 0.5, 1.0);
  auto o = quick(1.0, 100);
  auto r = wp_lipschitz_experiment(m, Distribution::dirac(0), Distribution::dirac(3), 2.0, o);
  CHECK(r.passed());
  auto g = intrinsic_gradient_experiment(m, Distribution::dirac(0), Distribution::dirac(3), 2.0,
                                         [](State i) { return double(std::min<State>(i, 10)); }, o);
  CHECK(g.passed());
}

TEST_CASE("chaos constants against closed forms") {
  ModelConstants c;
  c.K1 = TimeCurve(-1.0);
  c.K2 = TimeCurve(0.5);
  c.beta = TimeCurve(1.0);
  c.beta1 = TimeCurve(2.0);
  c.beta2 = TimeCurve(0.5);
  c.beta3 = TimeCurve(0.5);
  // beta2 + beta3 = 1: h_t^2 = 4 e^t + 2 (e^t - 1)
  auto h = [](double t) { return std::sqrt(4.0 * std::exp(t) + 2.0 * (std::exp(t) - 1.0)); };
  // H_t = 1 + h_t + int_0^t (1 + h_s) 0.5 e^{-0.5 (t - s)} ds, Simpson on 2000 panels
  auto H = [&](double t) {
    const int n = 2000;
    double s = 0;
    for (int k = 0; k <= n; ++k) {
      double u = t * k / n, w = (k == 0 || k == n) ? 1 : (k % 2 ? 4 : 2);
      s += w * (1 + h(u)) * 0.5 * std::exp(-0.5 * (t - u));
    }
    return 1 + h(t) + s * t / n / 3;
  };
  auto cc = compute_chaos_constants(c, Distribution::dirac(2), {0.25, 0.5, 1.0}, 256);
  CHECK(cc.mu0_norm2 == doctest::Approx(2.0));
  REQUIRE(cc.H.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(cc.h[k] == doctest::Approx(h(cc.times[k])).epsilon(1e-6));
    CHECK(cc.H[k] == doctest::Approx(H(cc.times[k])).epsilon(1e-6));
  }
  ModelConstants missing;
  CHECK_THROWS(compute_chaos_constants(missing, Distribution::dirac(2), {1.0}));
}

TEST_CASE("particle stability on a small system") {
  AffineMeanField m(1.0, 0.5, 1.0);
  auto r = particle_stability_experiment(m, Distribution::dirac(0), Distribution::dirac(2), 8, quick(1.0, 400));
  CHECK(r.passed());
}

TEST_CASE("experiment summaries are reproducible across worker counts") {
  AffineMeanField m(1.0, 0.5, 1.0);
  auto o = quick(1.0, 300);
  auto a = contraction_experiment(m, Distribution::dirac(0), Distribution::dirac(4), o);
  o.workers = 4;
  auto b = contraction_experiment(m, Distribution::dirac(0), Distribution::dirac(4), o);
  std::ostringstream sa, sb;
  a.write_summary(sa);
  b.write_summary(sb);
  CHECK(sa.str() == sb.str());
}
