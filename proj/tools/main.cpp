#include <cstdio>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mvbd/cli.hpp"
#include "mvbd/error.hpp"
#include "mvbd/parallel.hpp"

int main(int argc, char** argv) {
  CLI::App app{"McKean-Vlasov birth-death solver, simulator and experiment runner"};
  app.set_version_flag("--version", std::string(MVBD_VERSION));
  app.require_subcommand(1);

  std::string config, out, route;
  unsigned workers = 0;
  std::optional<std::uint64_t> seed;

  for (const char* name : {"solve", "simulate", "experiment", "check"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "run config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory (overrides config `output`)");
    sub->add_option("--workers", workers, "worker threads, 0 = available parallelism");
    sub->add_option("--seed", seed, "master seed (overrides simulate.seed)");
    sub->add_option("--route", route, "picard | direct | dyadic:<n> (overrides solver.routes)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    mvbd::RunConfig cfg = mvbd::load_config(config);
    if (seed) {
      cfg.seed = *seed;
      cfg.plan.seed = *seed;
    }
    if (!route.empty()) cfg.routes = {mvbd::RouteSpec::parse(route, "--route")};
    if (workers == 0) workers = mvbd::default_workers();
    const std::filesystem::path dir = out.empty() ? cfg.output : out;

    mvbd::CommandResult res;
    if (command == "solve")
      res = mvbd::cmd_solve(cfg, dir);
    else if (command == "simulate")
      res = mvbd::cmd_simulate(cfg, dir, workers);
    else if (command == "experiment")
      res = mvbd::cmd_experiment(cfg, dir, workers);
    else
      res = mvbd::cmd_check(cfg, dir, workers);

    for (const auto& f : res.files) std::printf("%s\n", f.string().c_str());
    if (!res.pass) {
      std::fprintf(stderr, "fail: %s: bound or condition violated\n", command.c_str());
      return 1;
    }
    return 0;
  } catch (const mvbd::Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", e.kind().c_str(), e.what());
    return mvbd::exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: Internal: %s\n", e.what());
    return 3;
  }
}
