#include <cmath>
#include <limits>
#include <memory>

#include "doctest.h"
#include "mvbd/checks.hpp"
#include "mvbd/error.hpp"
#include "mvbd/model.hpp"

using namespace mvbd;

namespace {

std::vector<ModelPtr> builtins() {
  auto affine = std::make_shared<AffineMeanField>(1.0, 0.5, 1.0);
  return {affine,
          std::make_shared<LogisticMeanField>(2.0, 1.0, 1.5, 0.5, 0.25),
          std::make_shared<TimeModulated>(affine, TimeCurve::tabulated({{0, 1}, {1, 1.2}, {2, 1}})),
          make_immigration_death(2.0, 1.0)};
}

double power_weight(State i, double k) { return std::pow(1.0 + static_cast<double>(i), k); }

}  // namespace

TEST_CASE("builtin rates are nonnegative and vanish at 0 for death") {
  SamplePlan plan;
  plan.max_state = 40;
  const auto measures = sample_measures(plan);
  for (const auto& m : builtins()) {
    for (double t : {0.0, 0.3, 1.0, 1.7}) {
      for (const auto& mu : measures) {
        CHECK(eval_rates(*m, t, 0, mu).death == 0.0);
        for (State i = 0; i <= 40; ++i) {
          Rates r = eval_rates(*m, t, i, mu);
          REQUIRE(r.death >= 0.0);
          REQUIRE(r.birth >= 0.0);
        }
      }
    }
  }
}

TEST_CASE("affine rates match their formula") {
  AffineMeanField m(1.5, 0.25, 2.0);
  Distribution mu = Distribution::from_weights({1, 2, 3, 4});
  // mean = (2 + 6 + 12) / 10
  Rates r = m.rates(0.0, 3, MeasureView::of(mu));
  CHECK(r.birth == doctest::Approx(1.5 + 0.25 * 2.0));
  CHECK(r.death == doctest::Approx(6.0));
  CHECK(m.time_homogeneous());
  CHECK(m.distribution_dependent());
  CHECK_FALSE(AffineMeanField(1, 0, 1).distribution_dependent());
}

TEST_CASE("time modulation multiplies the base rates exactly") {
  auto base = std::make_shared<LogisticMeanField>(2.0, 1.0, 1.5, 0.5, 0.25);
  TimeCurve mult = TimeCurve::tabulated({{0, 0.5}, {1, 2.0}, {3, 1.0}});
  TimeModulated m(base, mult);
  CHECK_FALSE(m.time_homogeneous());
  Distribution mu = Distribution::poisson(3.0, 30);
  for (double t : {0.0, 0.25, 1.0, 2.2, 5.0}) {
    for (State i : {0, 1, 7, 29}) {
      Rates b = base->rates(t, i, MeasureView::of(mu));
      Rates r = m.rates(t, i, MeasureView::of(mu));
      CHECK(r.birth == mult(t) * b.birth);
      CHECK(r.death == mult(t) * b.death);
    }
  }
}

TEST_CASE("tabulated curves interpolate linearly and extrapolate flat") {
  TimeCurve c = TimeCurve::tabulated({{0, 1}, {2, 3}});
  CHECK(c(1.0) == doctest::Approx(2.0));
  CHECK(c(-1.0) == 1.0);
  CHECK(c(9.0) == 3.0);
  CHECK(c.max_on(0.0, 1.0) == doctest::Approx(2.0));
  CHECK(c.min_on(0.5, 2.0) == doctest::Approx(1.5));
  CHECK(TimeCurve(4.0).is_constant());
}

TEST_CASE("checked evaluation rejects ill-posed rates") {
  FunctionModel nan_model([](double, State, const MeasureView&) { return Rates{0.0, std::nan("")}; }, true, false,
                          "nan");
  FunctionModel neg([](double, State i, const MeasureView&) { return Rates{static_cast<double>(i), -1.0}; }, true,
                    false, "neg");
  FunctionModel dies_at_zero([](double, State, const MeasureView&) { return Rates{1.0, 1.0}; }, true, false, "zero");
  Distribution mu;
  CHECK_THROWS_AS(eval_rates(nan_model, 0.0, 1, mu), NonFiniteRate);
  CHECK_THROWS_AS(eval_rates(neg, 0.0, 1, mu), NonFiniteRate);
  CHECK_THROWS_AS(eval_rates(dies_at_zero, 0.0, 0, mu), NonFiniteRate);
  CHECK_THROWS_AS(AffineMeanField(-1, 0, 1), InvalidArgument);
}

TEST_CASE("monotone check recovers the affine constants for any plan") {
  for (std::uint64_t seed : {1u, 2u, 17u}) {
    for (State range : {16, 64}) {
      SamplePlan plan;
      plan.seed = seed;
      plan.max_state = range;
      plan.trials = 1500;
      // K1 = -alpha, K2 = beta1 for these rates
      auto r = check_H1(AffineMeanField(1.0, 0.5, 1.0), plan);
      CHECK(r.violations.empty());
      CHECK(r.K1_hat[0] == doctest::Approx(-1.0).epsilon(1e-9));
      CHECK(r.K2_hat[0] == doctest::Approx(0.5).epsilon(1e-9));
      auto r2 = check_H1(AffineMeanField(0.3, 1.25, 3.0), plan);
      CHECK(r2.K1_hat[0] == doctest::Approx(-3.0).epsilon(1e-9));
      CHECK(r2.K2_hat[0] == doctest::Approx(1.25).epsilon(1e-9));
    }
  }
}

TEST_CASE("monotone check flags wrong declared constants") {
  DeclaredConstants d;
  d.K1 = TimeCurve(-2.0);
  d.K2 = TimeCurve(0.5);
  AffineMeanField base(1.0, 0.5, 1.0);
  FunctionModel lying([&](double t, State i, const MeasureView& mu) { return base.rates(t, i, mu); }, true, true,
                      "lying", d);
  SamplePlan plan;
  CHECK_THROWS_AS(check_H1(lying, plan), DeclaredConstantViolation);
  auto r = check_H1(lying, plan, false);
  CHECK_FALSE(r.violations.empty());
}

TEST_CASE("monotone left side at equal states") {
  AffineMeanField m(1.0, 0.5, 1.0);
  Distribution mu = Distribution::dirac(2), nu = Distribution::dirac(6);
  // only the i = j term survives: |b(mu) - b(nu)| = 0.5 * 4
  CHECK(monotone_lhs(m, 0.0, 3, 3, MeasureView::of(mu), MeasureView::of(nu)) == doctest::Approx(2.0));
  // i > j with equal measures: b - b + a(j) - a(i) = -(i - j)
  CHECK(monotone_lhs(m, 0.0, 5, 2, MeasureView::of(mu), MeasureView::of(mu)) == doctest::Approx(-3.0));
}

TEST_CASE("growth condition holds for linear and logistic instances") {
  SamplePlan plan;
  auto lin = check_H2(AffineMeanField(1.0, 0.5, 1.0), [](State i) { return power_weight(i, 2.0); }, 2.0, plan);
  CHECK(lin.violations.empty());
  CHECK(std::isfinite(lin.K3_hat[0]));
  // V(i+1)/V(i) is largest at i = 0
  CHECK(lin.c0_hat == doctest::Approx(4.0));

  const double q = 1.5, eps = 0.5;
  LogisticMeanField lg(2.0, 1.0, q, eps, 0.25);
  auto log = check_H2(lg, [&](State i) { return power_weight(i, q + eps); }, 2.0, plan);
  CHECK(log.violations.empty());
  CHECK(std::isfinite(log.K3_hat[0]));
}

TEST_CASE("growth condition fails on a superlinear birth rate") {
  FunctionModel blowup([](double, State i, const MeasureView&) {
    double x = static_cast<double>(i);
    return Rates{x, 1.0 + x * x};
  }, true, false, "superlinear");
  SamplePlan plan;
  CHECK_THROWS_AS(check_H2(blowup, [](State i) { return power_weight(i, 2.0); }, 2.0, plan), UnboundedGrowth);
}

TEST_CASE("growth check validates its weight") {
  SamplePlan plan;
  AffineMeanField m(1.0, 0.5, 1.0);
  CHECK_THROWS_AS(check_H2(m, [](State) { return 0.5; }, 2.0, plan), InvalidArgument);
  CHECK_THROWS_AS(check_H2(m, [](State i) { return power_weight(i, 2.0); }, 1.0, plan), InvalidArgument);
}

TEST_CASE("moment drift left side drops the death term at 0") {
  AffineMeanField m(1.0, 0.5, 1.0);
  Distribution mu = Distribution::dirac(2);
  // p [(i+1)^(p-1) b - (i-1)^(p-1) a] with b = 2, a = i
  CHECK(drift_lhs(m, 2.0, 0.0, 0, MeasureView::of(mu)) == doctest::Approx(2.0 * 1.0 * 2.0));
  CHECK(drift_lhs(m, 2.0, 0.0, 3, MeasureView::of(mu)) == doctest::Approx(2.0 * (4.0 * 2.0 - 2.0 * 3.0)));
  CHECK(drift_lhs(m, 1.5, 0.0, 0, MeasureView::of(mu)) == doctest::Approx(1.5 * 2.0));
}

TEST_CASE("moment and Lipschitz fit on the affine model") {
  SamplePlan plan;
  AffineMeanField m(1.0, 0.5, 1.0);
  auto r = check_H3(m, 2.0, plan);
  CHECK(r.violations.empty());
  // |da| + |db| <= alpha |i-j| + beta1 W1
  CHECK(r.beta_hat[0] == doctest::Approx(1.0).epsilon(1e-9));
  for (State i = 0; i <= plan.max_state; i += 7) {
    for (const auto& mu : sample_measures(plan)) {
      MeasureView v = MeasureView::of(mu);
      double rhs = r.beta1_hat[0] + r.beta2_hat[0] * std::pow(double(i), 2) + r.beta3_hat[0] * std::pow(v.mean, 2);
      CHECK(drift_lhs(m, 2.0, 0.0, i, v) <= rhs + 1e-9 * std::max(1.0, rhs));
    }
  }
}

TEST_CASE("Lipschitz fit is unbounded for a superlinear death rate") {
  SamplePlan plan;
  auto r = check_H3(LogisticMeanField(2.0, 1.0, 1.5, 0.5, 0.25), 2.0, plan);
  bool flagged = false;
  for (const auto& v : r.violations) flagged |= v.condition == "H3:beta-unbounded";
  CHECK(flagged);
}

TEST_CASE("constants come from declarations or from the checkers") {
  SamplePlan plan;
  auto id = make_immigration_death(2.0, 1.0);
  ModelConstants c = resolve_constants(*id, plan);
  CHECK_FALSE(c.K_fitted);
  CHECK(c.K1(0.0) == -1.0);
  CHECK(c.K2(0.0) == 0.0);

  FunctionModel plain([](double, State i, const MeasureView& mu) { return Rates{2.0 * double(i), 1.0 + mu.mean}; },
                      true, true, "plain");
  ModelConstants f = resolve_constants(plain, plan);
  CHECK(f.K_fitted);
  CHECK(f.K1(0.0) == doctest::Approx(-2.0).epsilon(1e-9));
  CHECK(f.K2(0.0) == doctest::Approx(1.0).epsilon(1e-9));
  REQUIRE(f.beta);
  CHECK((*f.beta)(0.0) == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("sample measures are deterministic under the seed") {
  SamplePlan a, b;
  b.seed = 99;
  auto x = sample_measures(a), y = sample_measures(a), z = sample_measures(b);
  REQUIRE(x.size() == y.size());
  for (std::size_t k = 0; k < x.size(); ++k) CHECK(x[k] == y[k]);
  bool differ = false;
  for (std::size_t k = 0; k < x.size(); ++k) differ |= !(x[k] == z[k]);
  CHECK(differ);
}
