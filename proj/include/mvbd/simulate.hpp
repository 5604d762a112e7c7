#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "mvbd/distribution.hpp"
#include "mvbd/flow.hpp"
#include "mvbd/model.hpp"
#include "mvbd/rng.hpp"

namespace mvbd {

/// Rate channels of the synchronized coupling. Uncoupled runs only use the
/// X channels.
enum class Channel : std::uint8_t { SyncBirth, SyncDeath, XBirth, YBirth, XDeath, YDeath };
const char* channel_name(Channel c);

struct Event {
  double t = 0.0;
  std::int32_t particle = 0;
  Channel channel = Channel::XBirth;
};

struct SimOptions {
  /// Thinning bound = safety * max(total rate at the window endpoints).
  double safety = 1.05;
  double rate_ceiling = 1e9;
  /// Window length for time-dependent runs that read no flow.
  double h = 1.0 / 256;
  bool log_events = false;
};

/// Where one side of a coupled run reads its measure argument.
struct Side {
  enum class Mode { None, Flow, Empirical };
  Mode mode = Mode::None;
  const MeasureFlow* flow = nullptr;

  static Side none() { return {}; }
  static Side frozen(const MeasureFlow& f) { return {Mode::Flow, &f}; }
  static Side empirical() { return {Mode::Empirical, nullptr}; }
};

struct CoupledRun {
  std::vector<State> x, y;
  /// State vectors at each checkpoint, in checkpoint order.
  std::vector<std::vector<State>> xs, ys;
  std::vector<Event> log;
  std::uint64_t events = 0, proposals = 0;
};

/// Event-driven simulation of N coordinate pairs (x_l, y_l) under the
/// six-channel coupling. X rates read `X` (a frozen flow at the left grid
/// node, or the empirical law of x); Y likewise, and a `None` side has zero
/// rates so X evolves alone. Exact Gillespie between window boundaries when
/// the model is time-homogeneous, thinning otherwise.
CoupledRun run_coupled(const RateModel& model, Side X, Side Y, std::vector<State> x0, std::vector<State> y0,
                       double T, const std::vector<double>& checkpoints, Rng& rng, const SimOptions& opt = {});

struct JumpPath {
  State x0 = 0;
  double T = 0.0;
  std::vector<std::pair<double, State>> events;
  State at(double t) const;
};

struct CoupledEvent {
  double t;
  Channel channel;
  State x, y;
};

struct CoupledPath {
  State x0 = 0, y0 = 0;
  double T = 0.0;
  std::vector<CoupledEvent> events;
  std::pair<State, State> at(double t) const;
};

/// Single path of the process whose rates read `flow`.
JumpPath simulate_frozen(const RateModel& model, const MeasureFlow& flow, State x0, double T, std::uint64_t seed,
                         const SimOptions& opt = {});

CoupledPath simulate_coupling(const RateModel& model, const MeasureFlow& flow_x, const MeasureFlow& flow_y,
                              State x0, State y0, double T, std::uint64_t seed, const SimOptions& opt = {});

/// Inverse-CDF draw.
State sample(const Distribution& mu, Rng& rng);
/// Comonotone pair: one uniform pushed through both quantile functions.
std::pair<State, State> sample_comonotone(const Distribution& mu, const Distribution& nu, Rng& rng);

/// Final states of `replicas` independent frozen-flow paths started from
/// mu0; replica r uses stream r of `seed`.
std::vector<State> frozen_final_states(const RateModel& model, const MeasureFlow& flow, const Distribution& mu0,
                                       double T, std::int64_t replicas, std::uint64_t seed, unsigned workers = 1,
                                       const SimOptions& opt = {});

struct ParticleState {
  std::vector<State> x;
  std::int64_t sum = 0;

  explicit ParticleState(std::vector<State> xs = {});
  std::size_t N() const { return x.size(); }
  double m1() const { return static_cast<double>(sum) / static_cast<double>(x.size()); }
  Distribution empirical() const;
};

struct ParticleRun {
  ParticleState final;
  std::vector<std::vector<State>> snapshots;
  std::vector<Event> log;
  std::uint64_t events = 0;
};

using InitSampler = std::function<std::vector<State>(Rng&)>;
/// N i.i.d. draws from mu0.
InitSampler iid(const Distribution& mu0, std::size_t N);

ParticleRun simulate_particles(const RateModel& model, std::size_t N, const InitSampler& init, double T,
                               std::uint64_t seed, const std::vector<double>& checkpoints = {},
                               const SimOptions& opt = {});

struct ParticleCouplingRun {
  ParticleState particle, independent;
  std::vector<std::vector<State>> xs, ys;
  /// Per checkpoint: rho_N(X, Y) / N and W1(mu^N(X), mu_t).
  std::vector<double> distance, empirical_w1;
  std::vector<Event> log;
};

/// Particle system X (rates read mu^N(X)) coupled with N independent copies
/// Y of the nonlinear process (rates read `flow`), X_0 = Y_0 i.i.d. mu0.
/// Checkpoints must be grid nodes of `flow`.
ParticleCouplingRun simulate_particle_coupling(const RateModel& model, std::size_t N, const Distribution& mu0,
                                               const MeasureFlow& flow, double T, std::uint64_t seed,
                                               const std::vector<double>& checkpoints, const SimOptions& opt = {});

/// Empirical law of a sample of states.
Distribution empirical_law(const std::vector<State>& xs);

/// Rows `replica,t,coordinate,delta`; sync events give one row per side.
void write_event_log(const std::vector<std::vector<Event>>& logs, std::size_t N, std::ostream& os);

struct StatRow {
  double t;
  std::string stat;
  double value, stderr_;
};
/// Rows `t,stat,value,stderr`.
void write_stats(const std::vector<StatRow>& rows, std::ostream& os);

}  // namespace mvbd
