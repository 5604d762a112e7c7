#include "mvbd/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mvbd/error.hpp"
#include "mvbd/experiments.hpp"
#include "mvbd/metrics.hpp"
#include "mvbd/parallel.hpp"
#include "mvbd/report.hpp"
#include "mvbd/rng.hpp"

#ifndef MVBD_VERSION
#define MVBD_VERSION "0.0.0"
#endif

namespace mvbd {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr std::uint64_t kSimulateSalt = 0x51u;

[[noreturn]] void fail(const std::string& path, const std::string& msg) { throw ConfigError(path + ": " + msg); }

std::string join(const std::string& a, const std::string& b) { return a.empty() ? b : a + "." + b; }

// Field accessor that remembers where it is in the document.
class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  const json& raw() const { return j_; }
  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  Node at(const char* key) const { return Node(j_.at(key), join(path_, key)); }

  void expect_object(const std::set<std::string>& allowed) const {
    if (!j_.is_object()) fail(path_.empty() ? "config" : path_, "expected an object");
    for (const auto& [k, v] : j_.items())
      if (!allowed.count(k)) fail(join(path_, k), "unknown field");
  }

  double number(const char* key, std::optional<double> def = std::nullopt) const {
    if (!has(key)) {
      if (!def) fail(join(path_, key), "required");
      return *def;
    }
    const json& v = j_.at(key);
    if (!v.is_number()) fail(join(path_, key), "expected a number");
    double x = v.get<double>();
    if (!std::isfinite(x)) fail(join(path_, key), "must be finite");
    return x;
  }

  double positive(const char* key, std::optional<double> def = std::nullopt) const {
    double x = number(key, def);
    if (!(x > 0)) fail(join(path_, key), "must be > 0");
    return x;
  }

  double nonneg(const char* key, std::optional<double> def = std::nullopt) const {
    double x = number(key, def);
    if (x < 0) fail(join(path_, key), "must be >= 0");
    return x;
  }

  std::int64_t integer(const char* key, std::optional<std::int64_t> def = std::nullopt) const {
    if (!has(key)) {
      if (!def) fail(join(path_, key), "required");
      return *def;
    }
    const json& v = j_.at(key);
    if (!v.is_number_integer()) fail(join(path_, key), "expected an integer");
    return v.get<std::int64_t>();
  }

  std::string string(const char* key, std::optional<std::string> def = std::nullopt) const {
    if (!has(key)) {
      if (!def) fail(join(path_, key), "required");
      return *def;
    }
    if (!j_.at(key).is_string()) fail(join(path_, key), "expected a string");
    return j_.at(key).get<std::string>();
  }

  bool boolean(const char* key, bool def) const {
    if (!has(key)) return def;
    if (!j_.at(key).is_boolean()) fail(join(path_, key), "expected true or false");
    return j_.at(key).get<bool>();
  }

 private:
  const json& j_;
  std::string path_;
};

TimeCurve parse_curve(const json& v, const std::string& path) {
  if (v.is_number()) return TimeCurve(v.get<double>());
  if (!v.is_array() || v.empty()) fail(path, "expected a number or a list of [t, value] pairs");
  std::vector<std::pair<double, double>> pts;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const json& p = v[k];
    const std::string pp = path + "[" + std::to_string(k) + "]";
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) fail(pp, "expected [t, value]");
    pts.emplace_back(p[0].get<double>(), p[1].get<double>());
    if (k > 0 && !(pts[k].first > pts[k - 1].first)) fail(pp, "times must increase");
  }
  try {
    return TimeCurve::tabulated(std::move(pts));
  } catch (const Error& e) {
    fail(path, e.what());
  }
}

DeclaredConstants parse_declared(const Node& n, DeclaredConstants d) {
  n.expect_object({"K1", "K2", "K3", "theta", "c0", "beta", "beta1", "beta2", "beta3", "beta_p"});
  auto curve = [&](const char* key, std::optional<TimeCurve>& slot) {
    if (n.has(key)) slot = parse_curve(n.raw().at(key), join(n.path(), key));
  };
  curve("K1", d.K1);
  curve("K2", d.K2);
  curve("K3", d.K3);
  curve("beta", d.beta);
  curve("beta1", d.beta1);
  curve("beta2", d.beta2);
  curve("beta3", d.beta3);
  if (n.has("theta")) d.theta = n.positive("theta");
  if (n.has("c0")) d.c0 = n.positive("c0");
  d.beta_p = n.number("beta_p", d.beta_p);
  return d;
}

ModelPtr parse_model(const Node& n) {
  n.expect_object({"family", "beta0", "beta1", "alpha", "lambda", "c2", "q", "epsilon", "kappa", "delta",
                   "multiplier", "declared"});
  const std::string family = n.string("family");
  ModelPtr m;
  try {
    if (family == "affine") {
      m = std::make_shared<AffineMeanField>(n.nonneg("beta0"), n.nonneg("beta1"), n.nonneg("alpha"));
    } else if (family == "logistic") {
      m = std::make_shared<LogisticMeanField>(n.nonneg("lambda"), n.nonneg("c2"), n.positive("q"),
                                              n.positive("epsilon"), n.nonneg("kappa", 0.0));
    } else if (family == "immigration_death") {
      m = make_immigration_death(n.nonneg("lambda"), n.nonneg("delta"));
    } else if (family == "zero") {
      DeclaredConstants c;
      c.K1 = TimeCurve(0.0);
      c.K2 = TimeCurve(0.0);
      m = std::make_shared<FunctionModel>([](double, State, const MeasureView&) { return Rates{}; }, true, false,
                                          "zero", c);
    } else {
      fail(join(n.path(), "family"), "unknown family '" + family + "' (affine, logistic, immigration_death, zero)");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    fail(n.path(), e.what());
  }
  if (n.has("multiplier")) {
    TimeCurve mult = parse_curve(n.raw().at("multiplier"), join(n.path(), "multiplier"));
    if (mult.min_on(0.0, 1e6) < 0) fail(join(n.path(), "multiplier"), "must be nonnegative");
    m = std::make_shared<TimeModulated>(m, mult);
  }
  if (n.has("declared")) {
    DeclaredConstants d = parse_declared(n.at("declared"), m->declared());
    ModelPtr base = m;
    m = std::make_shared<FunctionModel>(
        [base](double t, State i, const MeasureView& mu) { return base->rates(t, i, mu); }, base->time_homogeneous(),
        base->distribution_dependent(), base->describe(), std::move(d));
  }
  return m;
}

Distribution parse_initial(const Node& n) {
  n.expect_object({"kind", "i", "lambda", "q", "cap", "masses"});
  const std::string kind = n.string("kind");
  try {
    if (kind == "dirac") {
      n.expect_object({"kind", "i"});
      std::int64_t i = n.integer("i");
      if (i < 0) fail(join(n.path(), "i"), "must be >= 0");
      return Distribution::dirac(i);
    }
    if (kind == "poisson") {
      n.expect_object({"kind", "lambda", "cap"});
      double lam = n.positive("lambda");
      std::int64_t cap = n.integer("cap", static_cast<std::int64_t>(std::ceil(lam + 12 * std::sqrt(lam) + 12)));
      if (cap < 0) fail(join(n.path(), "cap"), "must be >= 0");
      return Distribution::poisson(lam, cap);
    }
    if (kind == "geometric") {
      n.expect_object({"kind", "q", "cap"});
      double q = n.number("q");
      if (!(q > 0 && q < 1)) fail(join(n.path(), "q"), "must lie in (0, 1)");
      std::int64_t cap = n.integer("cap", 64);
      if (cap < 0) fail(join(n.path(), "cap"), "must be >= 0");
      return Distribution::geometric(q, cap);
    }
    if (kind == "masses") {
      n.expect_object({"kind", "masses"});
      const std::string p = join(n.path(), "masses");
      if (!n.has("masses") || !n.raw().at("masses").is_array() || n.raw().at("masses").empty())
        fail(p, "expected a nonempty list of masses");
      std::vector<double> w;
      for (const auto& v : n.raw().at("masses")) {
        if (!v.is_number() || v.get<double>() < 0) fail(p, "masses must be nonnegative numbers");
        w.push_back(v.get<double>());
      }
      double s = 0;
      for (double x : w) s += x;
      if (std::abs(s - 1.0) > 1e-9) fail(p, "masses must sum to 1");
      return Distribution::from_weights(std::move(w));
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    fail(n.path(), e.what());
  }
  fail(join(n.path(), "kind"), "unknown kind '" + kind + "' (dirac, poisson, geometric, masses)");
}

bool on_grid(double t, double T, double h) {
  double k = t / h;
  return t > 0 && t <= T + 1e-12 && std::abs(k - std::round(k)) < 1e-9;
}

std::vector<double> parse_times(const Node& n, const char* key, double T, double h) {
  std::vector<double> out;
  if (!n.has(key)) return out;
  const std::string p = join(n.path(), key);
  const json& v = n.raw().at(key);
  if (!v.is_array()) fail(p, "expected a list of times");
  for (const auto& x : v) {
    if (!x.is_number()) fail(p, "expected numbers");
    double t = x.get<double>();
    if (!on_grid(t, T, h)) fail(p, "every checkpoint must be a grid node in (0, T]");
    if (!out.empty() && t <= out.back()) fail(p, "checkpoints must increase");
    out.push_back(t);
  }
  return out;
}

void write_file(const fs::path& path, const std::string& body, CommandResult& res) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidArgument("cannot write " + path.string());
  os << body;
  res.files.push_back(path);
}

fs::path command_dir(const fs::path& out, const char* command) {
  fs::path dir = out / command;
  fs::create_directories(dir);
  return dir;
}

std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

void write_manifest(const fs::path& dir, const char* command, const RunConfig& cfg, const CommandResult& res) {
  json m;
  m["command"] = command;
  m["name"] = cfg.name;
  m["config_hash"] = "fnv1a:" + hex64(cfg.hash);
  m["seed"] = cfg.seed ? json(*cfg.seed) : json(nullptr);
  m["version"] = MVBD_VERSION;
  m["model"] = cfg.model->describe();
  m["verdict"] = res.pass ? "pass" : "fail";
  json files = json::array();
  for (const auto& f : res.files) files.push_back(f.filename().string());
  m["files"] = files;
  std::ofstream os(dir / "manifest.json", std::ios::binary);
  os << m.dump(2) << '\n';
}

std::uint64_t need_seed(const RunConfig& cfg, const char* path) {
  if (!cfg.seed) fail(path, "a seed is required for stochastic runs (or pass --seed)");
  return *cfg.seed;
}

MeasureFlow solve_route(const RunConfig& cfg, const RouteSpec& r, const Distribution& mu0, double T) {
  TimeGrid grid{0.0, T, cfg.h};
  switch (r.kind) {
    case RouteSpec::Kind::Picard:
      return picard_fixed_point(*cfg.model, mu0, grid, cfg.picard, cfg.solver).flow;
    case RouteSpec::Kind::Direct:
      return direct_nonlinear_solve(*cfg.model, mu0, grid, cfg.solver);
    case RouteSpec::Kind::Dyadic:
      return dyadic_approx_solve(*cfg.model, mu0, grid, r.n, cfg.solver);
  }
  return {};
}

std::string file_tag(const RouteSpec& r) {
  std::string s = r.name();
  std::replace(s.begin(), s.end(), ':', '_');
  return s;
}

}  // namespace

std::string RouteSpec::name() const {
  switch (kind) {
    case Kind::Picard: return "picard";
    case Kind::Direct: return "direct";
    case Kind::Dyadic: return "dyadic:" + std::to_string(n);
  }
  return {};
}

RouteSpec RouteSpec::parse(const std::string& text, const std::string& path) {
  if (text == "picard") return {Kind::Picard, 0};
  if (text == "direct") return {Kind::Direct, 0};
  if (text.rfind("dyadic:", 0) == 0) {
    const std::string digits = text.substr(7);
    if (digits.empty() || digits.size() > 2 || !std::all_of(digits.begin(), digits.end(), ::isdigit))
      fail(path, "expected dyadic:<n> with 0 <= n <= 30");
    int n = std::stoi(digits);
    if (n > 30) fail(path, "expected dyadic:<n> with 0 <= n <= 30");
    return {Kind::Dyadic, n};
  }
  fail(path, "unknown route '" + text + "' (picard, direct, dyadic:<n>)");
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"moments",    "contraction",        "wp_lipschitz",
                                              "intrinsic_gradient", "chaos", "particle_stability",
                                              "coupling_marginals"};
  return names;
}

RunConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  RunConfig cfg;
  cfg.hash = fnv1a(text);
  const Node root(doc, "");
  root.expect_object({"name", "model", "initial", "initial_alt", "solver", "simulate", "experiments", "check",
                      "output"});
  cfg.name = root.string("name", "run");
  if (cfg.name.empty() || cfg.name.find_first_of("/\\") != std::string::npos) fail("name", "must be a plain file stem");
  cfg.output = root.string("output", "out");
  if (!root.has("model")) fail("model", "required");
  cfg.model = parse_model(root.at("model"));
  cfg.initial = root.has("initial") ? parse_initial(root.at("initial")) : Distribution::dirac(0);
  cfg.initial_alt = root.has("initial_alt") ? parse_initial(root.at("initial_alt")) : Distribution::dirac(4);

  if (root.has("solver")) {
    Node s = root.at("solver");
    s.expect_object({"T", "h", "routes", "stationary", "min_cap", "max_cap", "tail_budget", "clip_budget", "picard"});
    cfg.T = s.positive("T", cfg.T);
    cfg.h = s.positive("h", cfg.h);
    if (cfg.h > cfg.T) fail("solver.h", "must not exceed solver.T");
    double steps = cfg.T / cfg.h;
    if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps))
      fail("solver.h", "T / h must be an integer");
    if (s.has("routes")) {
      const json& v = s.raw().at("routes");
      if (!v.is_array() || v.empty()) fail("solver.routes", "expected a nonempty list");
      cfg.routes.clear();
      for (std::size_t k = 0; k < v.size(); ++k) {
        const std::string p = "solver.routes[" + std::to_string(k) + "]";
        if (!v[k].is_string()) fail(p, "expected a string");
        cfg.routes.push_back(RouteSpec::parse(v[k].get<std::string>(), p));
      }
    }
    cfg.stationary = s.boolean("stationary", false);
    cfg.solver.min_cap = s.integer("min_cap", cfg.solver.min_cap);
    cfg.solver.max_cap = s.integer("max_cap", cfg.solver.max_cap);
    if (cfg.solver.min_cap < 1) fail("solver.min_cap", "must be >= 1");
    if (cfg.solver.max_cap < cfg.solver.min_cap) fail("solver.max_cap", "must be >= solver.min_cap");
    cfg.solver.tail_budget = s.positive("tail_budget", cfg.solver.tail_budget);
    cfg.solver.clip_budget = s.positive("clip_budget", cfg.solver.clip_budget);
    if (s.has("picard")) {
      Node p = s.at("picard");
      p.expect_object({"lambda", "tol", "max_iter"});
      if (p.has("lambda")) cfg.picard.lambda = p.positive("lambda");
      cfg.picard.tol = p.positive("tol", cfg.picard.tol);
      cfg.picard.max_iter = static_cast<int>(p.integer("max_iter", cfg.picard.max_iter));
      if (cfg.picard.max_iter < 1) fail("solver.picard.max_iter", "must be >= 1");
    }
  }

  if (root.has("simulate")) {
    Node s = root.at("simulate");
    s.expect_object({"N", "replicas", "seed", "checkpoints", "log_replicas", "safety", "rate_ceiling"});
    std::int64_t N = s.integer("N", 1);
    if (N < 1) fail("simulate.N", "must be >= 1");
    cfg.N = static_cast<std::size_t>(N);
    cfg.replicas = s.integer("replicas", cfg.replicas);
    if (cfg.replicas < 1) fail("simulate.replicas", "must be >= 1");
    if (s.has("seed")) {
      const json& v = s.raw().at("seed");
      if (!v.is_number_unsigned()) fail("simulate.seed", "expected a nonnegative integer");
      cfg.seed = v.get<std::uint64_t>();
    }
    cfg.checkpoints = parse_times(s, "checkpoints", cfg.T, cfg.h);
    cfg.log_replicas = s.integer("log_replicas", cfg.log_replicas);
    if (cfg.log_replicas < 0) fail("simulate.log_replicas", "must be >= 0");
    cfg.sim.safety = s.number("safety", cfg.sim.safety);
    if (!(cfg.sim.safety >= 1)) fail("simulate.safety", "must be >= 1");
    cfg.sim.rate_ceiling = s.positive("rate_ceiling", cfg.sim.rate_ceiling);
  }
  cfg.sim.h = cfg.h;

  if (root.has("experiments")) {
    const json& v = doc.at("experiments");
    if (!v.is_array()) fail("experiments", "expected a list");
    for (std::size_t k = 0; k < v.size(); ++k) {
      const std::string p = "experiments[" + std::to_string(k) + "]";
      Node e(v[k], p);
      ExperimentSpec spec;
      if (v[k].is_string()) {
        spec.name = v[k].get<std::string>();
      } else {
        e.expect_object({"name", "tol", "T", "replicas", "N", "p", "f_cap", "declared_beta"});
        spec.name = e.string("name");
        spec.tol = e.positive("tol", spec.tol);
        if (e.has("T")) spec.T = e.positive("T");
        if (e.has("replicas")) {
          spec.replicas = e.integer("replicas");
          if (*spec.replicas < 2) fail(p + ".replicas", "must be >= 2");
        }
        std::int64_t N = e.integer("N", 0);
        if (N < 0) fail(p + ".N", "must be >= 1");
        spec.N = static_cast<std::size_t>(N);
        spec.p = e.number("p", spec.p);
        if (!(spec.p >= 1)) fail(p + ".p", "must be >= 1");
        spec.f_cap = e.integer("f_cap", spec.f_cap);
        spec.declared_beta = e.boolean("declared_beta", false);
      }
      const auto& names = experiment_names();
      if (std::find(names.begin(), names.end(), spec.name) == names.end())
        fail(p + ".name", "unknown experiment '" + spec.name + "'");
      if (spec.T && !on_grid(*spec.T, *spec.T, cfg.h)) fail(p + ".T", "must be a multiple of solver.h");
      cfg.experiments.push_back(spec);
    }
  }

  if (root.has("check")) {
    Node c = root.at("check");
    c.expect_object({"max_state", "measures", "trials", "lyapunov_exponent", "theta", "p"});
    cfg.plan.max_state = c.integer("max_state", cfg.plan.max_state);
    if (cfg.plan.max_state < 4) fail("check.max_state", "must be >= 4");
    cfg.plan.measures = static_cast<int>(c.integer("measures", cfg.plan.measures));
    if (cfg.plan.measures < 2) fail("check.measures", "must be >= 2");
    cfg.plan.trials = static_cast<int>(c.integer("trials", cfg.plan.trials));
    if (cfg.plan.trials < 1) fail("check.trials", "must be >= 1");
    cfg.lyapunov_exponent = c.positive("lyapunov_exponent", cfg.lyapunov_exponent);
    cfg.theta = c.number("theta", cfg.theta);
    if (!(cfg.theta > 1)) fail("check.theta", "must be > 1");
    cfg.check_p = c.number("p", cfg.check_p);
    if (!(cfg.check_p >= 1)) fail("check.p", "must be >= 1");
  }
  if (cfg.seed) cfg.plan.seed = *cfg.seed;
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("config: cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

CommandResult cmd_solve(const RunConfig& cfg, const fs::path& out) {
  CommandResult res;
  const fs::path dir = command_dir(out, "solve");
  std::vector<MeasureFlow> flows;
  for (const auto& r : cfg.routes) {
    MeasureFlow f = solve_route(cfg, r, cfg.initial, cfg.T);
    f.meta.config = cfg.name + " " + f.meta.config;
    std::ostringstream csv, meta;
    write_flow_csv(f, csv);
    write_flow_meta(f, meta);
    write_file(dir / (cfg.name + "_" + file_tag(r) + ".csv"), csv.str(), res);
    write_file(dir / (cfg.name + "_" + file_tag(r) + ".meta"), meta.str(), res);
    flows.push_back(std::move(f));
  }
  std::ostringstream agree;
  agree << "route_a,route_b,sup_w1\n";
  for (std::size_t a = 0; a < flows.size(); ++a)
    for (std::size_t b = a + 1; b < flows.size(); ++b)
      agree << cfg.routes[a].name() << ',' << cfg.routes[b].name() << ',' << fmt(sup_w1(flows[a], flows[b])) << '\n';
  write_file(dir / (cfg.name + "_agreement.csv"), agree.str(), res);
  if (cfg.stationary) {
    StationaryResult st = stationary_solve(*cfg.model);
    std::ostringstream os;
    os << "i,mass\n";
    const auto m = st.mu.mass();
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m[i] > 1e-15) os << i << ',' << fmt(m[i]) << '\n';
    write_file(dir / (cfg.name + "_stationary.csv"), os.str(), res);
  }
  write_manifest(dir, "solve", cfg, res);
  return res;
}

CommandResult cmd_simulate(const RunConfig& cfg, const fs::path& out, unsigned workers) {
  const std::uint64_t seed = need_seed(cfg, "simulate.seed");
  CommandResult res;
  const fs::path dir = command_dir(out, "simulate");
  std::vector<double> cps = cfg.checkpoints.empty() ? default_checkpoints(cfg.T) : cfg.checkpoints;
  const std::size_t R = static_cast<std::size_t>(cfg.replicas), nc = cps.size(), N = cfg.N;
  std::vector<std::vector<std::vector<State>>> snaps(R);
  std::vector<std::vector<Event>> logs(std::min<std::size_t>(R, static_cast<std::size_t>(cfg.log_replicas)));
  const InitSampler init = iid(cfg.initial, N);
  parallel_for(R, workers, [&](std::size_t r) {
    SimOptions opt = cfg.sim;
    opt.log_events = r < logs.size();
    ParticleRun run = simulate_particles(*cfg.model, N, init, cfg.T, stream_seed(seed, r, kSimulateSalt), cps, opt);
    snaps[r] = std::move(run.snapshots);
    if (opt.log_events) logs[r] = std::move(run.log);
  });

  std::vector<StatRow> rows;
  const double dR = static_cast<double>(R);
  auto add = [&](double t, std::string stat, const std::vector<double>& v) {
    double m = 0, q = 0;
    for (double x : v) m += x;
    m /= dR;
    for (double x : v) q += (x - m) * (x - m);
    double se = R > 1 ? std::sqrt(q / (dR - 1) / dR) : 0.0;
    rows.push_back({t, std::move(stat), m, se});
  };
  for (std::size_t k = 0; k < nc; ++k) {
    State top = 0;
    for (std::size_t r = 0; r < R; ++r)
      for (State x : snaps[r][k]) top = std::max(top, x);
    std::vector<double> mean(R), second(R);
    std::vector<std::vector<double>> pmf(static_cast<std::size_t>(top) + 1, std::vector<double>(R, 0.0));
    for (std::size_t r = 0; r < R; ++r) {
      double s = 0, s2 = 0;
      for (State x : snaps[r][k]) {
        s += static_cast<double>(x);
        s2 += static_cast<double>(x) * static_cast<double>(x);
        pmf[static_cast<std::size_t>(x)][r] += 1.0 / static_cast<double>(N);
      }
      mean[r] = s / static_cast<double>(N);
      second[r] = s2 / static_cast<double>(N);
    }
    add(cps[k], "mean", mean);
    add(cps[k], "second_moment", second);
    for (std::size_t i = 0; i < pmf.size(); ++i) add(cps[k], "pmf_" + std::to_string(i), pmf[i]);
  }
  std::ostringstream stats, events;
  write_stats(rows, stats);
  write_file(dir / (cfg.name + "_stats.csv"), stats.str(), res);
  write_event_log(logs, N, events);
  write_file(dir / (cfg.name + "_events.csv"), events.str(), res);
  write_manifest(dir, "simulate", cfg, res);
  return res;
}

CommandResult cmd_experiment(const RunConfig& cfg, const fs::path& out, unsigned workers) {
  if (cfg.experiments.empty()) fail("experiments", "select at least one experiment");
  bool stochastic = false;
  for (const auto& e : cfg.experiments) stochastic |= e.name != "moments";
  if (stochastic) need_seed(cfg, "simulate.seed");
  CommandResult res;
  const fs::path dir = command_dir(out, "experiment");
  std::vector<ExperimentReport> reports;
  for (const auto& spec : cfg.experiments) {
    ExperimentOptions o;
    o.T = spec.T.value_or(cfg.T);
    o.h = cfg.h;
    o.checkpoints = spec.T || cfg.checkpoints.empty() ? default_checkpoints(o.T) : cfg.checkpoints;
    o.replicas = spec.replicas.value_or(cfg.replicas);
    o.seed = cfg.seed.value_or(0);
    o.workers = workers;
    o.tol = spec.tol;
    o.plan = cfg.plan;
    o.plan.times = {0.0};
    o.sim = cfg.sim;
    const RateModel& m = *cfg.model;
    if (spec.name == "moments") {
      TimeGrid grid{0.0, o.T, o.h};
      MeasureFlow f = picard_fixed_point(m, cfg.initial, grid, cfg.picard, cfg.solver).flow;
      SamplePlan plan = o.plan;
      if (!m.time_homogeneous()) plan.times = {0.0, o.T / 4, o.T / 2, 3 * o.T / 4, o.T};
      ModelConstants c = resolve_constants(m, plan, false, spec.p);
      reports.push_back(moment_check(f, m, 1.0, c, spec.tol));
      if (spec.p > 1) reports.push_back(moment_check(f, m, spec.p, c, spec.tol));
    } else if (spec.name == "contraction") {
      reports.push_back(contraction_experiment(m, cfg.initial, cfg.initial_alt, o));
    } else if (spec.name == "wp_lipschitz") {
      reports.push_back(wp_lipschitz_experiment(m, cfg.initial, cfg.initial_alt, spec.p, o, spec.declared_beta));
    } else if (spec.name == "intrinsic_gradient") {
      const State cap = spec.f_cap;
      reports.push_back(intrinsic_gradient_experiment(
          m, cfg.initial, cfg.initial_alt, spec.p, [cap](State i) { return static_cast<double>(std::min(i, cap)); },
          o, spec.declared_beta));
    } else if (spec.name == "chaos") {
      ChaosOptions co;
      co.slope_time = o.T;
      reports.push_back(chaos_experiment(m, cfg.initial, o, co));
    } else if (spec.name == "particle_stability") {
      reports.push_back(
          particle_stability_experiment(m, cfg.initial, cfg.initial_alt, spec.N ? spec.N : 64, o));
    } else if (spec.name == "coupling_marginals") {
      reports.push_back(coupling_marginal_experiment(m, cfg.initial, cfg.initial_alt, spec.N ? spec.N : 16, o));
    }
  }
  std::ostringstream summary, records;
  summary << kSummaryHeader << '\n';
  for (const auto& r : reports) {
    r.write_summary(summary);
    r.write_records(records);
    records << '\n';
    res.pass = res.pass && r.passed();
  }
  write_file(dir / (cfg.name + "_summary.csv"), summary.str(), res);
  write_file(dir / (cfg.name + "_records.txt"), records.str(), res);
  write_manifest(dir, "experiment", cfg, res);
  return res;
}

CommandResult cmd_check(const RunConfig& cfg, const fs::path& out, unsigned workers) {
  CommandResult res;
  const fs::path dir = command_dir(out, "check");
  SamplePlan plan = cfg.plan;
  plan.workers = workers;
  if (!cfg.model->time_homogeneous()) plan.times = {0.0, cfg.T / 4, cfg.T / 2, 3 * cfg.T / 4, cfg.T};
  std::ostringstream consts, viol;
  consts << "condition,t,constant,value\n";
  viol << "condition,t,i,j,lhs,rhs,note\n";
  auto add_violations = [&](const std::vector<Violation>& vs) {
    for (const auto& v : vs)
      viol << v.condition << ',' << fmt(v.t) << ',' << v.i << ',' << v.j << ',' << fmt(v.lhs) << ',' << fmt(v.rhs)
           << ',' << v.note << '\n';
    if (!vs.empty()) res.pass = false;
  };
  auto failed = [&](const char* cond, const Error& e) {
    viol << cond << ",,,,,," << e.kind() << ": " << e.what() << '\n';
    res.pass = false;
  };

  try {
    H1Report h1 = check_H1(*cfg.model, plan, false);
    for (std::size_t k = 0; k < h1.times.size(); ++k)
      consts << "monotone," << fmt(h1.times[k]) << ",K1," << fmt(h1.K1_hat[k]) << "\nmonotone," << fmt(h1.times[k])
             << ",K2," << fmt(h1.K2_hat[k]) << '\n';
    add_violations(h1.violations);
  } catch (const DeclaredConstantViolation& e) {
    failed("monotone", e);
  }

  try {
    const double k = cfg.lyapunov_exponent;
    H2Report h2 = check_H2(
        *cfg.model, [k](State i) { return std::pow(1.0 + static_cast<double>(i), k); }, cfg.theta, plan);
    consts << "growth,0,c0," << fmt(h2.c0_hat) << '\n';
    for (std::size_t i = 0; i < h2.times.size(); ++i)
      consts << "growth," << fmt(h2.times[i]) << ",K3," << fmt(h2.K3_hat[i]) << '\n';
    add_violations(h2.violations);
  } catch (const UnboundedGrowth& e) {
    failed("growth", e);
  }

  try {
    H3Report h3 = check_H3(*cfg.model, cfg.check_p, plan, false);
    for (std::size_t k = 0; k < h3.times.size(); ++k) {
      const std::string t = fmt(h3.times[k]);
      consts << "moment," << t << ",beta," << fmt(h3.beta_hat[k]) << "\nmoment," << t << ",beta1,"
             << fmt(h3.beta1_hat[k]) << "\nmoment," << t << ",beta2," << fmt(h3.beta2_hat[k]) << "\nmoment," << t
             << ",beta3," << fmt(h3.beta3_hat[k]) << '\n';
    }
    add_violations(h3.violations);
  } catch (const DeclaredConstantViolation& e) {
    failed("moment", e);
  } catch (const UnboundedGrowth& e) {
    failed("moment", e);
  }

  write_file(dir / (cfg.name + "_constants.csv"), consts.str(), res);
  write_file(dir / (cfg.name + "_violations.csv"), viol.str(), res);
  write_manifest(dir, "check", cfg, res);
  return res;
}

int exit_code_for(const std::exception& e) { return dynamic_cast<const ConfigError*>(&e) ? 2 : 3; }

}  // namespace mvbd
