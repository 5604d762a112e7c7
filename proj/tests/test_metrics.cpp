#include <cmath>
#include <random>

#include "doctest.h"
#include "mvbd/distribution.hpp"
#include "mvbd/error.hpp"
#include "mvbd/metrics.hpp"

using namespace mvbd;

namespace {

Distribution random_law(std::mt19937_64& gen, int max_support) {
  std::uniform_int_distribution<int> len(1, max_support);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> w(static_cast<std::size_t>(len(gen)));
  for (auto& x : w) x = u(gen) < 0.3 ? 0.0 : u(gen);
  w.back() += 1e-3;
  return Distribution::from_weights(w);
}

// Inverse-CDF coupling evaluated on a fine uniform grid of quantile levels.
double quantile_wp(const Distribution& a, const Distribution& b, double p, int levels) {
  auto q = [](const Distribution& d, double u) {
    double c = 0;
    for (State i = 0; i <= d.cap(); ++i) {
      c += d[i];
      if (c >= u) return i;
    }
    return d.cap();
  };
  double s = 0;
  for (int k = 0; k < levels; ++k) {
    double u = (k + 0.5) / levels;
    s += std::pow(std::abs(double(q(a, u) - q(b, u))), p);
  }
  return std::pow(s / levels, 1.0 / p);
}

}  // namespace

TEST_CASE("distances between point masses") {
  for (State a : {0, 3, 10}) {
    for (State b : {0, 1, 25}) {
      double d = std::abs(double(a - b));
      CHECK(w1(Distribution::dirac(a), Distribution::dirac(b)) == doctest::Approx(d));
      CHECK(wp(Distribution::dirac(a), Distribution::dirac(b), 2.0) == doctest::Approx(d));
      CHECK(wp(Distribution::dirac(a), Distribution::dirac(b), 3.5) == doctest::Approx(d));
    }
  }
}

TEST_CASE("W1 between ordered Poisson laws is the mean gap") {
  // Poisson laws are stochastically ordered, so the monotone coupling gives |m1 - m2|
  for (double l1 : {0.5, 2.0, 7.0}) {
    for (double l2 : {1.0, 3.5}) {
      auto a = Distribution::poisson(l1, 120), b = Distribution::poisson(l2, 120);
      CHECK(w1(a, b) == doctest::Approx(std::abs(l1 - l2)).epsilon(1e-10));
    }
  }
}

TEST_CASE("W1 is symmetric, zero on the diagonal, and satisfies the triangle inequality") {
  std::mt19937_64 gen(5);
  for (int n = 0; n < 200; ++n) {
    auto a = random_law(gen, 30), b = random_law(gen, 30), c = random_law(gen, 30);
    CHECK(w1(a, a) == 0.0);
    CHECK(w1(a, b) == doctest::Approx(w1(b, a)).epsilon(1e-14));
    CHECK(w1(a, c) <= w1(a, b) + w1(b, c) + 1e-12);
    CHECK(wp(a, b, 1.0) == doctest::Approx(w1(a, b)).epsilon(1e-12));
    CHECK(wp(a, b, 2.0) >= w1(a, b) - 1e-12);
  }
}

TEST_CASE("closed forms agree with the transport oracle") {
  std::mt19937_64 gen(11);
  for (int n = 0; n < 200; ++n) {
    auto a = random_law(gen, 32), b = random_law(gen, 32);
    CHECK(w1(a, b) == doctest::Approx(w1_lp_oracle(a, b)).epsilon(1e-12));
    CHECK(wp(a, b, 2.0) == doctest::Approx(transport_lp_oracle(a, b, 2.0)).epsilon(1e-12));
  }
}

TEST_CASE("staircase Wp matches a fine quantile integral") {
  auto a = Distribution::from_weights({0.25, 0.25, 0.5});
  auto b = Distribution::from_weights({0.5, 0.0, 0.0, 0.5});
  // quantile pairs (0,0) on [0,1/4], (1,0) on [1/4,1/2], (2,3) on [1/2,1]
  CHECK(wp(a, b, 2.0) == doctest::Approx(std::sqrt(0.25 + 0.5)));
  CHECK(wp(a, b, 2.0) == doctest::Approx(quantile_wp(a, b, 2.0, 4096)).epsilon(1e-9));
  CHECK(w1(a, b) == doctest::Approx(0.75));
}

TEST_CASE("transport oracle guards its support size") {
  auto big = Distribution::uniform(0, 80);
  CHECK_THROWS_AS(transport_lp_oracle(big, Distribution::dirac(0), 1.0), SupportTooLarge);
}

TEST_CASE("empirical measures") {
  EmpiricalMeasure e({3, 0, 3, 1});
  CHECK(e.size() == 4);
  Distribution d = e.distribution();
  CHECK(d[0] == 0.25);
  CHECK(d[1] == 0.25);
  CHECK(d[3] == 0.5);
  CHECK(d.mean() == doctest::Approx(1.75));
  std::vector<std::int64_t> counts{1, 1, 0, 2};
  auto ref = Distribution::poisson(1.2, 20);
  CHECK(w1_counts(counts, 4, ref) == doctest::Approx(w1(d, ref)).epsilon(1e-14));
}

TEST_CASE("identity pairing bounds the product distance") {
  std::vector<std::vector<State>> xs{{0, 1}, {2, 2}}, ys{{1, 1}, {2, 5}};
  // (|0-1| + 0 + 0 + |2-5|) / 2 samples
  CHECK(product_w1_upper(xs, ys) == doctest::Approx(2.0));
}

TEST_CASE("standard error scale shrinks like one over root R") {
  auto ref = Distribution::poisson(2.0, 40);
  double s1 = w1_stderr(ref, 100), s2 = w1_stderr(ref, 10000);
  CHECK(s1 / s2 == doctest::Approx(10.0));
  double manual = 0, c = 0;
  for (State i = 0; i <= ref.cap(); ++i) {
    c += ref[i];
    manual += std::sqrt(c * (1 - c) / 100.0);
  }
  CHECK(s1 == doctest::Approx(manual).epsilon(1e-12));
  CHECK(w1_stderr(Distribution::dirac(3), 50) == 0.0);
  CHECK(w1_stderr_two_sample(ref, 100, ref, 100) == doctest::Approx(s1 * std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("compensated sum keeps small terms") {
  CompensatedSum s;
  s.add(1.0);
  for (int k = 0; k < 1000; ++k) s.add(1e-17);
  s.add(-1.0);
  CHECK(s.value() == doctest::Approx(1e-14).epsilon(1e-6));
}

TEST_CASE("distribution construction") {
  CHECK_THROWS_AS(Distribution({0.5, 0.4}), InvalidArgument);
  CHECK_THROWS_AS(Distribution({1.5, -0.5}), InvalidArgument);
  CHECK_THROWS_AS(Distribution::from_weights({0.0, 0.0}), InvalidArgument);
  auto p = Distribution::poisson(3.0, 60);
  CHECK(p.mean() == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(p.moment(2.0) == doctest::Approx(12.0).epsilon(1e-12));
  auto g = Distribution::geometric(0.5, 200);
  CHECK(g.mean() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(Distribution::dirac(4).top() == 4);
  CHECK(Distribution::dirac(2).padded(9).cap() == 9);
  CHECK(Distribution::uniform(2, 5).mean() == doctest::Approx(3.5));
  CHECK(total_variation(Distribution::dirac(0), Distribution::dirac(1)) == doctest::Approx(1.0));
}
