#include "kvopt/solvers.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include <Eigen/Dense>

#include "kvopt/compiler.hpp"
#include "kvopt/error.hpp"

namespace kvopt {

namespace {

constexpr long kRefreshEvery = 100;
constexpr double kDivergenceFactor = 1e6;
constexpr double kDriftTolerance = 1e-6;

void check_length(const ReducedSystem& system, const Eigen::VectorXd& v,
                  const char* what) {
  if (v.size() != system.size()) {
    throw DimensionError(std::string(what) + " has length " +
                         std::to_string(v.size()) + ", expected " +
                         std::to_string(system.size()));
  }
}

void check_rho(double rho) {
  if (!(rho > 0.0 && rho <= 1.0)) {
    throw InvalidArgument("filter parameter must lie in (0, 1]");
  }
}

}  // namespace

IndexSet sample_index_set(Eigen::Index K, double p, std::mt19937_64& rng) {
  if (!(p > 0.0 && p <= 1.0)) throw InvalidArgument("p must lie in (0, 1]");
  IndexSet out;
  if (p == 1.0) {
    out.resize(K);
    for (Eigen::Index j = 0; j < K; ++j) out[j] = j;
    return out;
  }
  std::bernoulli_distribution keep(p);
  out.reserve(static_cast<std::size_t>(K * p) + 1);
  for (Eigen::Index j = 0; j < K; ++j) {
    if (keep(rng)) out.push_back(j);
  }
  return out;
}

Eigen::VectorXd iterative_step(const ReducedSystem& system,
                               const Eigen::VectorXd& d_prev,
                               const IndexSet& active, double rho) {
  check_length(system, d_prev, "d");
  check_rho(rho);
  const Eigen::VectorXd md = eval_m(system.maps, d_prev);
  Eigen::VectorXd d_next = d_prev;
  if (static_cast<Eigen::Index>(active.size()) == system.size()) {
    d_next.noalias() = rho * (system.G * md + system.f);
    d_next += (1.0 - rho) * d_prev;
    return d_next;
  }
  for (Eigen::Index j : active) {
    const double target = system.G.row(j).dot(md) + system.f[j];
    d_next[j] = rho * target + (1.0 - rho) * d_prev[j];
  }
  return d_next;
}

void incremental_step_inplace(const ReducedSystem& system,
                              IncrementalState& state, const IndexSet& active,
                              double rho) {
  // Evaluate every gated coordinate against the same d before touching it.
  Eigen::VectorXd delta(static_cast<Eigen::Index>(active.size()));
  for (std::size_t i = 0; i < active.size(); ++i) {
    const auto j = active[i];
    delta[i] = rho * (system.maps[j](state.d[j]) - state.c[j]);
  }
  for (std::size_t i = 0; i < active.size(); ++i) {
    const auto j = active[i];
    state.c[j] += delta[i];
    state.d.noalias() += delta[i] * system.G.col(j);
  }
}

IncrementalState incremental_step(const ReducedSystem& system,
                                  const IncrementalState& prev,
                                  const IndexSet& active, double rho) {
  check_length(system, prev.c, "c");
  check_length(system, prev.d, "d");
  check_rho(rho);
  const double drift =
      (prev.d - (system.G * prev.c + system.f)).cwiseAbs().maxCoeff();
  if (drift > kDriftTolerance) {
    throw StateDriftError("d deviates from G c + f by " +
                          std::to_string(drift) + "; re-synchronize first");
  }
  IncrementalState next = prev;
  incremental_step_inplace(system, next, active, rho);
  return next;
}

SolveTrace run(const ReducedSystem& system, const SolverConfig& config,
               std::optional<IncrementalState> init) {
  config.validate();
  const Eigen::Index K = system.size();
  const double rho = config.effective_rho();
  const long steps_per_sweep =
      static_cast<long>(std::ceil(1.0 / config.p - 1e-12));
  std::mt19937_64 rng(config.seed);

  IncrementalState state;
  if (init) {
    check_length(system, init->c, "initial c");
    check_length(system, init->d, "initial d");
    state = std::move(*init);
  } else {
    state.c = Eigen::VectorXd::Zero(K);
    state.d = system.f;
  }
  if (config.solver == SolverType::Iterative) state.c = eval_m(system.maps, state.d);

  const auto start = std::chrono::steady_clock::now();
  auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - start)
        .count();
  };

  SolveTrace trace;
  double r = residual(system, state.c, state.d);
  trace.records.push_back({0, r, elapsed_ms()});
  const double initial = r;

  long sweep = 0;
  while (r > config.epsilon && sweep < config.max_sweeps) {
    ++sweep;
    for (long s = 0; s < steps_per_sweep; ++s) {
      const IndexSet active = sample_index_set(K, config.p, rng);
      if (config.solver == SolverType::Iterative) {
        state.d = iterative_step(system, state.d, active, rho);
      } else {
        incremental_step_inplace(system, state, active, rho);
      }
    }
    if (config.solver == SolverType::Iterative) {
      state.c = eval_m(system.maps, state.d);
    } else if (sweep % kRefreshEvery == 0) {
      state.d.noalias() = system.G * state.c;
      state.d += system.f;
    }
    r = residual(system, state.c, state.d);
    trace.records.push_back({sweep, r, elapsed_ms()});
    if (!std::isfinite(r) || (initial > 0.0 && r > kDivergenceFactor * initial)) {
      throw DivergenceError("residual grew from " + std::to_string(initial) +
                            " to " + std::to_string(r) + " by sweep " +
                            std::to_string(sweep));
    }
  }

  trace.converged = r <= config.epsilon;
  trace.sweeps_used = sweep;
  trace.c = std::move(state.c);
  trace.d = std::move(state.d);
  return trace;
}

void write_trace_csv(std::ostream& out, const SolveTrace& trace,
                     const ReducedSystem& system) {
  const auto old_precision = out.precision(17);
  out << "sweep,residual,time_ms\n";
  for (const auto& rec : trace.records) {
    out << rec.sweep << ',' << rec.residual << ',' << rec.time_ms << '\n';
  }
  const Readout ro = readout(system, trace.c, trace.d);
  out << "\nindex,x_hat\n";
  for (Eigen::Index i = 0; i < ro.x_hat.size(); ++i) {
    out << i << ',' << ro.x_hat[i] << '\n';
  }
  out.precision(old_precision);
}

}  // namespace kvopt
