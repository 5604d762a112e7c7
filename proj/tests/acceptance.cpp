#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mvbd/cli.hpp"
#include "mvbd/error.hpp"
#include "mvbd/experiments.hpp"
#include "mvbd/metrics.hpp"
#include "mvbd/parallel.hpp"
#include "mvbd/solver.hpp"

using namespace mvbd;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Instance {
  std::string name;
  ModelPtr model;
};

std::vector<Instance> builtin_instances() {
  auto affine = std::make_shared<AffineMeanField>(1.0, 0.5, 1.0);
  return {{"affine", affine},
          {"logistic", std::make_shared<LogisticMeanField>(2.0, 1.0, 1.5, 0.5, 0.25)},
          {"modulated", std::make_shared<TimeModulated>(affine, TimeCurve::tabulated({{0, 1}, {1, 1.2}, {2, 1}}))},
          {"immigration_death", make_immigration_death(2.0, 1.0)}};
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string failing_points(const ExperimentReport& r) {
  std::string s;
  for (const auto& p : r.points)
    if (!p.pass && p.kind != PointKind::Info) s += " " + p.label + "(margin " + num(p.margin) + ")";
  return s;
}

Outcome judge_reports(const std::vector<ExperimentReport>& reports) {
  Outcome o{true, ""};
  for (const auto& r : reports) {
    o.pass = o.pass && r.passed() && !r.excluded;
    o.detail += r.id + " worst margin " + num(r.worst_margin()) + failing_points(r) + "; ";
  }
  return o;
}

ExperimentOptions base_options(double T, std::int64_t replicas) {
  ExperimentOptions o;
  o.T = T;
  o.replicas = replicas;
  o.seed = 20240601;
  o.workers = default_workers();
  o.tol = 0.02;
  return o;
}

Outcome stationarity() {
  auto m = make_immigration_death(2.0, 1.0);
  StationaryResult s = stationary_solve(*m);
  double tv = total_variation(s.mu, Distribution::poisson(2.0, s.mu.cap()));
  TimeGrid g{0.0, 20.0, 1.0 / 256};
  MeasureFlow f = linear_solve(*m, MeasureFlow::constant(Distribution::dirac(0), g), Distribution::dirac(0), g);
  double w = w1(f.back(), s.mu);
  return {tv <= 1e-10 && w <= 1e-6, "TV " + num(tv) + ", W1(P_20 delta_0, pi) " + num(w)};
}

Outcome self_consistent_mean() {
  AffineMeanField m(1.0, 0.5, 1.0);
  double stat = stationary_solve(m).mu.mean();
  MeasureFlow f = picard_fixed_point(m, Distribution::dirac(0), TimeGrid{0.0, 1.0, 1.0 / 256}).flow;
  double exact = 2.0 * (1.0 - std::exp(-0.5));
  double e1 = std::abs(stat - 2.0), e2 = std::abs(f.back().mean() - exact);
  return {e1 <= 1e-8 && e2 <= 2e-4, "stationary mean error " + num(e1) + ", mean(1) error " + num(e2)};
}

Outcome route_agreement() {
  Outcome o{true, ""};
  for (double T : {1.0, 2.0}) {
    TimeGrid g{0.0, T, 1.0 / 256};
    for (const auto& inst : builtin_instances()) {
      MeasureFlow p = picard_fixed_point(*inst.model, Distribution::dirac(0), g).flow;
      MeasureFlow d = direct_nonlinear_solve(*inst.model, Distribution::dirac(0), g);
      MeasureFlow y = dyadic_approx_solve(*inst.model, Distribution::dirac(0), g, 10);
      double worst = std::max({sup_w1(p, d), sup_w1(p, y), sup_w1(d, y)});
      if (worst > 1e-4) {
        o.pass = false;
        o.detail += inst.name + "@T=" + num(T) + " " + num(worst) + " (picard-direct " + num(sup_w1(p, d)) +
                    ", picard-dyadic " + num(sup_w1(p, y)) + "); ";
      }
    }
  }
  if (o.pass) o.detail = "all pairwise sup W1 <= 1e-4";
  return o;
}

Outcome picard_contraction() {
  Outcome o{true, ""};
  double worst = 0.0;
  TimeGrid g{0.0, 2.0, 1.0 / 256};
  for (const auto& inst : builtin_instances()) {
    PicardResult r = picard_fixed_point(*inst.model, Distribution::dirac(0), g);
    if (!inst.model->distribution_dependent()) {
      if (r.iterations != 2) o.pass = false;
      o.detail += inst.name + " converged in " + std::to_string(r.iterations) + "; ";
      continue;
    }
    for (std::size_t k = 2; k < r.gaps.size(); ++k) {
      // gaps at the solver's noise floor carry no contraction information
      if (r.gaps[k - 1] <= 1e-12) break;
      worst = std::max(worst, r.gaps[k] / r.gaps[k - 1]);
    }
  }
  o.pass = o.pass && worst <= 0.5;
  o.detail += "largest gap ratio " + num(worst);
  return o;
}

Outcome dyadic_convergence() {
  AffineMeanField m(1.0, 0.5, 1.0);
  TimeGrid g{0.0, 2.0, 1.0 / 256};
  MeasureFlow ref = picard_fixed_point(m, Distribution::dirac(0), g).flow;
  Outcome o{true, "sup W1 by n:"};
  double prev = INFINITY;
  for (int n = 2; n <= 8; ++n) {
    double e = sup_w1(dyadic_approx_solve(m, Distribution::dirac(0), g, n), ref);
    o.pass = o.pass && e <= prev;
    o.detail += " " + num(e);
    prev = e;
  }
  return o;
}

Outcome oracle_equivalence() {
  std::mt19937_64 gen(61);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> len(1, 64);
  auto law = [&] {
    std::vector<double> w(static_cast<std::size_t>(len(gen)));
    for (auto& x : w) x = u(gen) < 0.3 ? 0.0 : u(gen);
    w.back() += 1e-3;
    return Distribution::from_weights(w);
  };
  double d1 = 0, d2 = 0;
  for (int k = 0; k < 1000; ++k) {
    Distribution a = law(), b = law();
    d1 = std::max(d1, std::abs(w1(a, b) - w1_lp_oracle(a, b)));
    d2 = std::max(d2, std::abs(wp(a, b, 2.0) - transport_lp_oracle(a, b, 2.0)));
  }
  return {d1 <= 1e-12 && d2 <= 1e-12, "max |W1 - LP| " + num(d1) + ", max |W2 - LP| " + num(d2)};
}

Outcome moment_bounds() {
  std::vector<ExperimentReport> reports;
  const double T = 2.0;
  TimeGrid g{0.0, T, 1.0 / 256};
  for (const auto& inst : builtin_instances()) {
    SamplePlan plan;
    if (!inst.model->time_homogeneous()) plan.times = {0.0, 0.5, 1.0, 1.5, 2.0};
    ModelConstants c = resolve_constants(*inst.model, plan, false, 2.0);
    for (State start : {0, 3}) {
      MeasureFlow f = picard_fixed_point(*inst.model, Distribution::dirac(start), g).flow;
      reports.push_back(moment_check(f, *inst.model, 1.0, c));
      reports.push_back(moment_check(f, *inst.model, 2.0, c));
      reports.back().id += "(" + inst.name + ")";
    }
  }
  Outcome o{true, ""};
  double worst = INFINITY;
  for (const auto& r : reports) {
    o.pass = o.pass && r.passed();
    worst = std::min(worst, r.worst_margin());
    if (!r.passed()) o.detail += r.id + failing_points(r) + "; ";
  }
  o.detail += std::to_string(reports.size()) + " reports, worst margin " + num(worst);
  return o;
}

Outcome contraction() {
  AffineMeanField m(1.0, 0.5, 1.0);
  return judge_reports({contraction_experiment(m, Distribution::dirac(0), Distribution::dirac(4),
                                               base_options(4.0, 10000))});
}

Outcome lipschitz_estimates() {
  AffineMeanField m(1.0, 0.5, 1.0);
  auto o = base_options(4.0, 10000);
  return judge_reports(
      {wp_lipschitz_experiment(m, Distribution::dirac(0), Distribution::dirac(3), 2.0, o),
       intrinsic_gradient_experiment(m, Distribution::dirac(0), Distribution::dirac(3), 2.0,
                                     [](State i) { return static_cast<double>(std::min<State>(i, 10)); }, o),
       intrinsic_gradient_experiment(m, Distribution::dirac(0), Distribution::dirac(3), 2.0,
                                     [](State i) { return i == 0 ? 1.0 : 0.0; }, o)});
}

Outcome coupling_marginals() {
  AffineMeanField m(1.0, 0.5, 1.0);
  return judge_reports(
      {coupling_marginal_experiment(m, Distribution::dirac(0), Distribution::dirac(4), 16, base_options(4.0, 10000))});
}

Outcome chaos() {
  AffineMeanField m(1.0, 0.5, 1.0);
  ChaosOptions co;
  co.slope_time = 1.0;
  ExperimentReport r = chaos_experiment(m, Distribution::dirac(0), base_options(1.0, 200), co);
  Outcome o = judge_reports({r});
  for (const auto& p : r.points)
    if (p.label.rfind("loglog_slope", 0) == 0) o.detail = "slope " + num(p.measured) + ", " + o.detail;
  return o;
}

Outcome particle_stability() {
  AffineMeanField m(1.0, 0.5, 1.0);
  return judge_reports(
      {particle_stability_experiment(m, Distribution::dirac(0), Distribution::dirac(2), 64, base_options(4.0, 10000))});
}

Outcome determinism() {
  const std::string text = R"({
    "name": "determinism",
    "model": {"family": "affine", "beta0": 1, "beta1": 0.5, "alpha": 1},
    "initial_alt": {"kind": "dirac", "i": 4},
    "solver": {"T": 2},
    "simulate": {"replicas": 1000, "seed": 77},
    "experiments": [
      "contraction",
      {"name": "particle_stability", "N": 16, "replicas": 400},
      {"name": "coupling_marginals", "N": 8, "replicas": 400},
      {"name": "chaos", "T": 1, "replicas": 40}
    ]
  })";
  RunConfig cfg = parse_config(text);
  fs::path base = fs::temp_directory_path() / "mvbd_acceptance_determinism";
  fs::remove_all(base);
  cmd_experiment(cfg, base / "w1", 1);
  cmd_experiment(cfg, base / "w8", 8);
  bool same = true;
  for (const char* f : {"determinism_summary.csv", "determinism_records.txt", "manifest.json"})
    same = same && slurp(base / "w1" / "experiment" / f) == slurp(base / "w8" / "experiment" / f);
  std::size_t bytes = slurp(base / "w1" / "experiment" / "determinism_summary.csv").size();
  return {same && bytes > 100, std::string(same ? "identical" : "DIFFERENT") + " summaries (" +
                                   std::to_string(bytes) + " bytes)"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "stationarity oracle", 1.0, stationarity},
      {2, "self-consistent mean", 5.0, self_consistent_mean},
      {3, "route agreement", 30.0, route_agreement},
      {4, "picard contraction", 10.0, picard_contraction},
      {5, "dyadic convergence", 60.0, dyadic_convergence},
      {6, "W1/Wp oracle equivalence", 5.0, oracle_equivalence},
      {7, "moment bounds", 5.0, moment_bounds},
      {8, "exponential contraction", 120.0, contraction},
      {9, "Wp Lipschitz and gradient estimates", 60.0, lipschitz_estimates},
      {10, "coupling marginal property", 120.0, coupling_marginals},
      {11, "propagation of chaos", 600.0, chaos},
      {12, "particle stability", 120.0, particle_stability},
      {13, "determinism", INFINITY, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const Error& e) {
      o = {false, std::string(e.kind()) + ": " + e.what()};
    } catch (const std::exception& e) {
      o = {false, e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool in_time = secs <= c.budget;
    bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s criterion %2d %-36s %7.2fs  %s%s\n", pass ? "PASS" : "FAIL", c.id, c.name, secs,
                o.detail.c_str(), in_time ? "" : " [over time budget]");
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
