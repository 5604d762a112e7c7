#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "mvbd/cli.hpp"
#include "mvbd/error.hpp"
#include "mvbd/experiments.hpp"
#include "mvbd/metrics.hpp"
#include "mvbd/simulate.hpp"
#include "mvbd/solver.hpp"

namespace py = pybind11;
using namespace mvbd;

namespace {

using Model = std::shared_ptr<RateModel>;

Model hold(ModelPtr m) { return std::const_pointer_cast<RateModel>(std::move(m)); }

std::vector<double> masses(const Distribution& d) { return {d.mass().begin(), d.mass().end()}; }

TimeGrid grid(double T, double h) { return TimeGrid{0.0, T, h}; }

py::dict flow_dict(const MeasureFlow& f) {
  py::list nodes;
  for (const auto& n : f.nodes()) nodes.append(masses(n));
  py::dict d;
  d["times"] = f.times();
  d["masses"] = nodes;
  d["cap"] = f.meta.cap;
  d["tail_mass"] = f.meta.tail_mass;
  d["route"] = f.meta.route;
  return d;
}

std::string summary(const ExperimentReport& r) {
  std::ostringstream os;
  os << kSummaryHeader << '\n';
  r.write_summary(os);
  return os.str();
}

ExperimentOptions options(double T, double h, std::int64_t replicas, std::uint64_t seed, std::size_t workers,
                          double tol) {
  ExperimentOptions o;
  o.T = T;
  o.h = h;
  o.replicas = replicas;
  o.seed = seed;
  o.workers = workers;
  o.tol = tol;
  return o;
}

}  // namespace

PYBIND11_MODULE(_mvbd, m) {
  static py::exception<Error> error(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, (e.kind() + ": " + e.what()).c_str());
    }
  });

  py::class_<Distribution>(m, "Distribution")
      .def(py::init([](std::vector<double> mass) { return Distribution(std::move(mass)); }), py::arg("mass"))
      .def_static("dirac", [](State i) { return Distribution::dirac(i); }, py::arg("i"))
      .def_static("poisson", &Distribution::poisson, py::arg("lam"), py::arg("cap"))
      .def_static("geometric", &Distribution::geometric, py::arg("q"), py::arg("cap"))
      .def_static("from_weights", &Distribution::from_weights, py::arg("weights"))
      .def_property_readonly("cap", &Distribution::cap)
      .def_property_readonly("mass", &masses)
      .def_property_readonly("tail_mass", &Distribution::tail_mass)
      .def("mean", &Distribution::mean)
      .def("moment", &Distribution::moment, py::arg("p"))
      .def("__getitem__", &Distribution::operator[])
      .def("__repr__", [](const Distribution& d) {
        return "Distribution(cap=" + std::to_string(d.cap()) + ", mean=" + fmt(d.mean()) + ")";
      });

  py::class_<RateModel, Model>(m, "RateModel")
      .def("rates",
           [](const RateModel& self, double t, State i, const Distribution& mu) {
             Rates r = eval_rates(self, t, i, mu);
             return py::make_tuple(r.death, r.birth);
           },
           py::arg("t"), py::arg("i"), py::arg("mu"), "Returns (death, birth).")
      .def_property_readonly("time_homogeneous", &RateModel::time_homogeneous)
      .def_property_readonly("distribution_dependent", &RateModel::distribution_dependent)
      .def("__repr__", &RateModel::describe);

  m.def("affine", [](double b0, double b1, double a) -> Model { return std::make_shared<AffineMeanField>(b0, b1, a); },
        py::arg("beta0"), py::arg("beta1"), py::arg("alpha"));
  m.def("logistic",
        [](double lam, double c2, double q, double eps, double kappa) -> Model {
          return std::make_shared<LogisticMeanField>(lam, c2, q, eps, kappa);
        },
        py::arg("lam"), py::arg("c2"), py::arg("q"), py::arg("epsilon"), py::arg("kappa") = 0.0);
  m.def("immigration_death", [](double lam, double delta) { return hold(make_immigration_death(lam, delta)); }, py::arg("lam"), py::arg("delta"));
  m.def("time_modulated",
        [](Model base, std::vector<std::pair<double, double>> curve) -> Model {
          return std::make_shared<TimeModulated>(std::move(base), TimeCurve::tabulated(std::move(curve)));
        },
        py::arg("base"), py::arg("multiplier"));

  m.def("w1", &w1, py::arg("mu"), py::arg("nu"));
  m.def("wp", &wp, py::arg("mu"), py::arg("nu"), py::arg("p"));
  m.def("transport_lp_oracle", &transport_lp_oracle, py::arg("mu"), py::arg("nu"), py::arg("p"));
  m.def("total_variation", &total_variation);

  m.def("picard",
        [](const RateModel& model, const Distribution& mu0, double T, double h) {
          PicardResult r = picard_fixed_point(model, mu0, grid(T, h));
          py::dict d = flow_dict(r.flow);
          d["iterations"] = r.iterations;
          d["gaps"] = r.gaps;
          d["lambda"] = r.lambda;
          return d;
        },
        py::arg("model"), py::arg("mu0"), py::arg("T") = 1.0, py::arg("h") = 1.0 / 256);
  m.def("direct",
        [](const RateModel& model, const Distribution& mu0, double T, double h) {
          return flow_dict(direct_nonlinear_solve(model, mu0, grid(T, h)));
        },
        py::arg("model"), py::arg("mu0"), py::arg("T") = 1.0, py::arg("h") = 1.0 / 256);
  m.def("dyadic",
        [](const RateModel& model, const Distribution& mu0, int n, double T, double h) {
          return flow_dict(dyadic_approx_solve(model, mu0, grid(T, h), n));
        },
        py::arg("model"), py::arg("mu0"), py::arg("n"), py::arg("T") = 1.0, py::arg("h") = 1.0 / 256);
  m.def("stationary",
        [](const RateModel& model) {
          StationaryResult s = stationary_solve(model);
          return py::make_tuple(s.mu, s.residual);
        },
        py::arg("model"));

  m.def("simulate_particles",
        [](const RateModel& model, std::size_t N, const Distribution& mu0, double T, std::uint64_t seed,
           std::vector<double> checkpoints) {
          ParticleRun run = simulate_particles(model, N, iid(mu0, N), T, seed, checkpoints);
          return py::make_tuple(run.final.x, run.snapshots);
        },
        py::arg("model"), py::arg("N"), py::arg("mu0"), py::arg("T"), py::arg("seed"),
        py::arg("checkpoints") = std::vector<double>{});

  py::class_<ExperimentReport>(m, "Report")
      .def_readonly("id", &ExperimentReport::id)
      .def_readonly("excluded", &ExperimentReport::excluded)
      .def_readonly("notes", &ExperimentReport::notes)
      .def("passed", &ExperimentReport::passed)
      .def("worst_margin", &ExperimentReport::worst_margin)
      .def("summary", &summary);

  m.def("contraction",
        [](const RateModel& model, const Distribution& mu0, const Distribution& nu0, double T, double h,
           std::int64_t replicas, std::uint64_t seed, std::size_t workers, double tol) {
          return contraction_experiment(model, mu0, nu0, options(T, h, replicas, seed, workers, tol));
        },
        py::arg("model"), py::arg("mu0"), py::arg("nu0"), py::arg("T") = 4.0, py::arg("h") = 1.0 / 256,
        py::arg("replicas") = 1000, py::arg("seed") = 1, py::arg("workers") = 1, py::arg("tol") = 0.02);
  m.def("chaos",
        [](const RateModel& model, const Distribution& mu0, std::vector<std::size_t> Ns, double T, double h,
           std::int64_t replicas, std::uint64_t seed, std::size_t workers) {
          ChaosOptions c;
          c.Ns = std::move(Ns);
          return chaos_experiment(model, mu0, options(T, h, replicas, seed, workers, 0.02), c);
        },
        py::arg("model"), py::arg("mu0"), py::arg("Ns"), py::arg("T") = 1.0, py::arg("h") = 1.0 / 256,
        py::arg("replicas") = 200, py::arg("seed") = 1, py::arg("workers") = 1);

  m.def("run",
        [](const std::string& command, const std::string& config_path, const std::string& out, std::size_t workers) {
          RunConfig cfg = load_config(config_path);
          CommandResult r;
          if (command == "solve") r = cmd_solve(cfg, out);
          else if (command == "simulate") r = cmd_simulate(cfg, out, workers);
          else if (command == "experiment") r = cmd_experiment(cfg, out, workers);
          else if (command == "check") r = cmd_check(cfg, out, workers);
          else throw InvalidArgument("unknown command " + command);
          std::vector<std::string> files;
          for (const auto& f : r.files) files.push_back(f.string());
          return py::make_tuple(r.pass, files);
        },
        py::arg("command"), py::arg("config"), py::arg("out") = "out", py::arg("workers") = 1);

  m.attr("__version__") = MVBD_VERSION;
}
