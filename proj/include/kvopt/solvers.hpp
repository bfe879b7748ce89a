#pragma once

#include <iosfwd>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "kvopt/problem.hpp"

namespace kvopt {

using IndexSet = std::vector<Eigen::Index>;

// Bernoulli gating: each index in [0, K) is kept independently with
// probability p. Sorted ascending.
IndexSet sample_index_set(Eigen::Index K, double p, std::mt19937_64& rng);

// d_j <- rho (G m(d) + f)_j + (1 - rho) d_j for j in active, held otherwise.
Eigen::VectorXd iterative_step(const ReducedSystem& system,
                               const Eigen::VectorXd& d_prev,
                               const IndexSet& active, double rho);

struct IncrementalState {
  Eigen::VectorXd c;
  Eigen::VectorXd d;
};

// c <- c + rho I_active (m(d) - c);  d <- d + G (c_next - c_prev).
// Requires d = G c + f; throws StateDriftError if it is off by more than 1e-6.
IncrementalState incremental_step(const ReducedSystem& system,
                                  const IncrementalState& prev,
                                  const IndexSet& active, double rho);

// In-place form used by run(); skips the drift check.
void incremental_step_inplace(const ReducedSystem& system,
                              IncrementalState& state, const IndexSet& active,
                              double rho);

struct SweepRecord {
  long sweep = 0;
  double residual = 0.0;
  double time_ms = 0.0;

  bool operator==(const SweepRecord&) const = default;
};

struct SolveTrace {
  std::vector<SweepRecord> records;
  Eigen::VectorXd c;
  Eigen::VectorXd d;
  bool converged = false;
  long sweeps_used = 0;
};

// Runs the configured local solver until residual <= epsilon or max_sweeps.
// One sweep is ceil(1/p) gated steps. Throws DivergenceError when the
// residual grows past 1e6 times its initial value.
SolveTrace run(const ReducedSystem& system, const SolverConfig& config,
               std::optional<IncrementalState> init = std::nullopt);

// sweep,residual,time_ms rows, then a blank line and the solution block.
void write_trace_csv(std::ostream& out, const SolveTrace& trace,
                     const ReducedSystem& system);

}  // namespace kvopt
