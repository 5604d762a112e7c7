#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "mvbd/cli.hpp"
#include "mvbd/error.hpp"

using namespace mvbd;
namespace fs = std::filesystem;

namespace {

const char* kAffine = R"({
  "name": "affine",
  "model": {"family": "affine", "beta0": 1, "beta1": 0.5, "alpha": 1},
  "initial": {"kind": "dirac", "i": 0},
  "solver": {"T": 1, "h": 0.0078125, "routes": ["picard", "direct"]},
  "simulate": {"N": 4, "replicas": 300, "seed": 5, "checkpoints": [0.5, 1]}
})";

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& tag) {
  fs::path d = fs::temp_directory_path() / ("mvbd_cli_test_" + tag);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream is(slurp(p));
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("fnv1a reference values") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("config defaults") {
  RunConfig c = parse_config(R"({"model": {"family": "zero"}})");
  CHECK(c.name == "run");
  CHECK(c.T == 1.0);
  CHECK(c.h == 1.0 / 256);
  REQUIRE(c.routes.size() == 1);
  CHECK(c.routes[0].name() == "picard");
  CHECK(c.initial == Distribution::dirac(0));
  CHECK_FALSE(c.seed.has_value());
  CHECK(c.replicas >= 1);
}

TEST_CASE("config errors name the offending field") {
  CHECK(config_error(R"({"model": {"family": "zero"}, "solver": {"h": 0}})").rfind("solver.h:", 0) == 0);
  CHECK(config_error(R"({"model": {"family": "zero"}, "solver": {"T": 1, "h": 0.3}})").rfind("solver.h:", 0) == 0);
  CHECK(config_error(R"({"model": {"family": "zero"}, "simulate": {"replicas": 0}})").rfind("simulate.replicas:", 0) ==
        0);
  CHECK(config_error(R"({"model": {"family": "zero"}, "experiments": ["nope"]})").rfind("experiments[0].name:", 0) ==
        0);
  CHECK(config_error(R"({"model": {"family": "cubic"}})").rfind("model.family:", 0) == 0);
  CHECK(config_error(R"({"model": {"family": "affine", "beta0": 1, "alpha": 1}})").rfind("model.beta1:", 0) == 0);
  CHECK(config_error(R"({"model": {"family": "zero"}, "solvr": {}})").rfind("solvr:", 0) == 0);
  CHECK(config_error(R"({"model": {"family": "zero"}, "solver": {"routes": ["dyadic:x"]}})")
            .rfind("solver.routes[0]:", 0) == 0);
  CHECK(config_error(R"({"model": {"family": "zero"}, "initial": {"kind": "masses", "masses": [0.5, 0.4]}})")
            .rfind("initial.masses:", 0) == 0);
  CHECK(config_error(R"({"model": {"family": "zero"}, "simulate": {"checkpoints": [0.3]}})")
            .rfind("simulate.checkpoints:", 0) == 0);
  CHECK(config_error(R"({"model": {"family": "zero"}, "experiments": [{"name": "chaos", "tol": -1}]})")
            .rfind("experiments[0].tol:", 0) == 0);
  CHECK(config_error("{not json").rfind("config:", 0) == 0);
  CHECK(config_error(R"({"solver": {}})").rfind("model:", 0) == 0);
}

TEST_CASE("route parsing") {
  CHECK(RouteSpec::parse("dyadic:10", "x").n == 10);
  CHECK(RouteSpec::parse("direct", "x").kind == RouteSpec::Kind::Direct);
  CHECK_THROWS_AS(RouteSpec::parse("rk4", "x"), ConfigError);
  CHECK_THROWS_AS(RouteSpec::parse("dyadic:99", "x"), ConfigError);
}

TEST_CASE("model blocks build the right rates") {
  RunConfig c = parse_config(R"({"model": {"family": "affine", "beta0": 1, "beta1": 0.5, "alpha": 2,
                                            "multiplier": [[0, 1], [1, 3]]}})");
  Distribution mu = Distribution::dirac(2);
  Rates r = c.model->rates(0.5, 3, MeasureView::of(mu));
  CHECK(r.birth == doctest::Approx(2.0 * 2.0));
  CHECK(r.death == doctest::Approx(2.0 * 6.0));
  RunConfig d = parse_config(R"({"model": {"family": "immigration_death", "lambda": 2, "delta": 1,
                                            "declared": {"K1": -1, "K2": 0}}})");
  CHECK(d.model->declared().K1.has_value());
  CHECK_FALSE(d.model->distribution_dependent());
}

TEST_CASE("solve writes agreeing routes") {
  fs::path out = scratch("solve");
  RunConfig cfg = parse_config(kAffine);
  CommandResult res = cmd_solve(cfg, out);
  CHECK(res.pass);
  CHECK(fs::exists(out / "solve" / "affine_picard.csv"));
  CHECK(fs::exists(out / "solve" / "affine_direct.meta"));
  CHECK(fs::exists(out / "solve" / "manifest.json"));
  auto rows = read_csv(out / "solve" / "affine_agreement.csv");
  REQUIRE(rows.size() == 1);
  CHECK(std::stod(rows[0][2]) <= 1e-5);
  CHECK(slurp(out / "solve" / "affine_picard.csv").rfind("t,i,mass\n", 0) == 0);
}

TEST_CASE("zero-rate solve repeats the initial row") {
  fs::path out = scratch("zero");
  RunConfig cfg = parse_config(R"({"name": "z", "model": {"family": "zero"}, "initial": {"kind": "dirac", "i": 3},
                                   "solver": {"T": 1, "h": 0.125}})");
  cmd_solve(cfg, out);
  auto rows = read_csv(out / "solve" / "z_picard.csv");
  CHECK(rows.size() == 9);
  for (const auto& r : rows) {
    CHECK(r[1] == "3");
    CHECK(r[2] == "1");
  }
}

TEST_CASE("simulate statistics are byte-identical across worker counts") {
  RunConfig cfg = parse_config(kAffine);
  fs::path a = scratch("sim1"), b = scratch("sim8");
  cmd_simulate(cfg, a, 1);
  cmd_simulate(cfg, b, 8);
  CHECK(slurp(a / "simulate" / "affine_stats.csv") == slurp(b / "simulate" / "affine_stats.csv"));
  CHECK(slurp(a / "simulate" / "affine_events.csv") == slurp(b / "simulate" / "affine_events.csv"));
  CHECK(slurp(a / "simulate" / "manifest.json") == slurp(b / "simulate" / "manifest.json"));
}

TEST_CASE("simulate needs a seed") {
  RunConfig cfg = parse_config(R"({"model": {"family": "zero"}})");
  CHECK_THROWS_AS(cmd_simulate(cfg, scratch("noseed"), 1), ConfigError);
}

TEST_CASE("single distribution-free particle matches the solved marginals") {
  const char* text = R"({
    "name": "idm",
    "model": {"family": "immigration_death", "lambda": 2, "delta": 1},
    "solver": {"T": 1, "h": 0.0078125},
    "simulate": {"N": 1, "replicas": 4000, "seed": 9, "checkpoints": [0.5, 1]}
  })";
  RunConfig cfg = parse_config(text);
  fs::path out = scratch("n1");
  cmd_solve(cfg, out);
  cmd_simulate(cfg, out, 2);
  std::map<std::pair<std::string, int>, double> flow;
  for (const auto& r : read_csv(out / "solve" / "idm_picard.csv")) flow[{r[0], std::stoi(r[1])}] = std::stod(r[2]);
  int compared = 0;
  for (const auto& r : read_csv(out / "simulate" / "idm_stats.csv")) {
    if (r[1].rfind("pmf_", 0) != 0) continue;
    int i = std::stoi(r[1].substr(4));
    double target = flow[{r[0], i}], value = std::stod(r[2]), se = std::stod(r[3]);
    // pmf standard error from the target itself so empty bins are judged too
    double se_ref = std::sqrt(target * (1 - target) / 4000.0);
    CHECK(std::abs(value - target) <= 3 * std::max(se, se_ref) + 1e-12);
    ++compared;
  }
  CHECK(compared > 6);
}

TEST_CASE("experiments report and gate the exit status") {
  const char* text = R"({
    "name": "suite",
    "model": {"family": "affine", "beta0": 1, "beta1": 0.5, "alpha": 1},
    "initial_alt": {"kind": "dirac", "i": 4},
    "solver": {"T": 1, "h": 0.0078125},
    "simulate": {"replicas": 200, "seed": 2},
    "experiments": ["moments", {"name": "contraction", "tol": 0.02}]
  })";
  RunConfig cfg = parse_config(text);
  fs::path out = scratch("exp");
  CommandResult res = cmd_experiment(cfg, out, 1);
  CHECK(res.pass);
  std::string summary = slurp(out / "experiment" / "suite_summary.csv");
  CHECK(summary.rfind("experiment,point,measured,bound,stderr,verdict\n", 0) == 0);
  CHECK(summary.find("contraction,flow_w1@1,") != std::string::npos);
  CHECK(summary.find(",fail\n") == std::string::npos);

  RunConfig boundary = parse_config(R"({"model": {"family": "affine", "beta0": 1, "beta1": 1, "alpha": 1},
      "solver": {"T": 1, "h": 0.0078125}, "simulate": {"replicas": 50, "seed": 2}, "experiments": ["contraction"]})");
  fs::path out2 = scratch("exp_boundary");
  CHECK(cmd_experiment(boundary, out2, 1).pass);
  CHECK(slurp(out2 / "experiment" / "run_records.txt").find("excluded = true") != std::string::npos);
}

TEST_CASE("reruns are byte-identical") {
  RunConfig cfg = parse_config(kAffine);
  fs::path a = scratch("rerun_a"), b = scratch("rerun_b");
  cmd_solve(cfg, a);
  cmd_solve(cfg, b);
  for (const char* f : {"affine_picard.csv", "affine_picard.meta", "affine_agreement.csv", "manifest.json"})
    CHECK(slurp(a / "solve" / f) == slurp(b / "solve" / f));
}

TEST_CASE("check reports constants and fails on a lying declaration") {
  fs::path out = scratch("check");
  RunConfig ok = parse_config(R"({"name": "ok", "model": {"family": "affine", "beta0": 1, "beta1": 0.5, "alpha": 1}})");
  CHECK(cmd_check(ok, out, 1).pass);
  std::string consts = slurp(out / "check" / "ok_constants.csv");
  CHECK(consts.find("monotone,0,K1,-") != std::string::npos);
  RunConfig bad = parse_config(
      R"({"name": "bad", "model": {"family": "affine", "beta0": 1, "beta1": 0.5, "alpha": 1, "declared": {"K1": -2, "K2": 0.5}}})");
  CHECK_FALSE(cmd_check(bad, out, 1).pass);
}

TEST_CASE("exit codes") {
  CHECK(exit_code_for(ConfigError("x")) == 2);
  CHECK(exit_code_for(StepTooLarge("x")) == 3);
  CHECK(exit_code_for(NoConvergence("x")) == 3);
}
