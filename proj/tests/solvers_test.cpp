#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "kvopt/compiler.hpp"
#include "kvopt/error.hpp"
#include "kvopt/instance_gen.hpp"
#include "kvopt/solvers.hpp"
#include "test_support.hpp"

namespace kvopt {
namespace {

using testing::vec;

::testing::AssertionResult near(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                                double tol = 1e-12) {
  if (a.size() == b.size() && (a - b).cwiseAbs().maxCoeff() <= tol) {
    return ::testing::AssertionSuccess();
  }
  return ::testing::AssertionFailure() << a.transpose() << " vs " << b.transpose();
}

IndexSet all(Eigen::Index K) { IndexSet s(K); for (Eigen::Index j = 0; j < K; ++j) s[j] = j; return s; }

TEST(SampleIndexSet, Examples) {
  std::mt19937_64 rng(1);
  EXPECT_EQ(sample_index_set(5, 1.0, rng), all(5));
  EXPECT_TRUE(sample_index_set(0, 0.3, rng).empty());
  EXPECT_THROW(sample_index_set(5, 0.0, rng), InvalidArgument);
  EXPECT_THROW(sample_index_set(5, 1.01, rng), InvalidArgument);
}

TEST(SampleIndexSet, BinomialMoments) {
  std::mt19937_64 rng(2);
  const Eigen::Index K = 1000;
  const double p = 0.25;
  const int draws = 1000;
  double total = 0.0;
  std::vector<int> hits(K, 0);
  for (int i = 0; i < draws; ++i) {
    const auto s = sample_index_set(K, p, rng);
    ASSERT_TRUE(std::is_sorted(s.begin(), s.end()));
    total += static_cast<double>(s.size());
    for (auto j : s) ++hits[j];
  }
  // Mean of `draws` sizes: sd of the mean is sqrt(K p (1-p) / draws).
  const double sigma = std::sqrt(K * p * (1 - p));
  EXPECT_NEAR(total / draws, K * p, 3.0 * sigma / std::sqrt(draws));
  // Every index is included at roughly rate p.
  const double per_index_sd = std::sqrt(draws * p * (1 - p));
  for (Eigen::Index j = 0; j < K; ++j) {
    EXPECT_NEAR(hits[j], draws * p, 6.0 * per_index_sd) << j;
  }
}

TEST(IterativeStep, NnlsHandIteration) {
  const auto sys = testing::nnls_toy();
  const auto d1 = iterative_step(sys, vec({0.0, 0.0}), {0, 1}, 1.0);
  EXPECT_TRUE(near(d1, vec({3.0, 0.0})));
  const auto d2 = iterative_step(sys, d1, {0, 1}, 1.0);
  EXPECT_TRUE(near(d2, vec({3.0, 3.0})));
  EXPECT_TRUE(near(iterative_step(sys, d2, {0, 1}, 1.0), d2));

  // Gated: coordinate 1 is held.
  EXPECT_TRUE(near(iterative_step(sys, vec({0.0, 0.0}), {0}, 1.0), vec({3.0, 0.0})));
  EXPECT_TRUE(near(iterative_step(sys, vec({0.0, 5.0}), {0}, 1.0), vec({3.0, 5.0})));
}

TEST(IterativeStep, FixedPointInvariantForAnyGateAndRho) {
  const auto sys = testing::nnls_toy();
  const auto d = vec({3.0, 3.0});
  for (double rho : {0.1, 0.5, 1.0}) {
    for (const IndexSet& I : {IndexSet{}, IndexSet{0}, IndexSet{1}, IndexSet{0, 1}}) {
      EXPECT_LE((iterative_step(sys, d, I, rho) - d).cwiseAbs().maxCoeff(), 1e-15);
    }
  }
}

TEST(IterativeStep, Errors) {
  const auto sys = testing::nnls_toy();
  EXPECT_THROW(iterative_step(sys, vec({0.0}), {0}, 1.0), DimensionError);
  EXPECT_THROW(iterative_step(sys, vec({0.0, 0.0}), {0}, 0.0), InvalidArgument);
}

TEST(IncrementalStep, NnlsHandEvaluation) {
  const auto sys = testing::nnls_toy();
  const auto next = incremental_step(sys, {vec({0.0, 0.0}), vec({0.0, 0.0})}, {0, 1}, 1.0);
  EXPECT_TRUE(near(next.c, vec({0.0, -3.0})));
  EXPECT_TRUE(near(next.d, vec({3.0, 0.0})));

  const IncrementalState s{vec({1.0, 2.0}), sys.G * vec({1.0, 2.0})};
  const auto same = incremental_step(sys, s, {}, 1.0);
  EXPECT_EQ(same.c, s.c);
  EXPECT_EQ(same.d, s.d);

  const IncrementalState fp{vec({3.0, -3.0}), vec({3.0, 3.0})};
  for (double rho : {0.3, 1.0}) {
    for (const IndexSet& I : {IndexSet{0}, IndexSet{1}, IndexSet{0, 1}}) {
      const auto out = incremental_step(sys, fp, I, rho);
      EXPECT_LE((out.c - fp.c).cwiseAbs().maxCoeff(), 1e-15);
      EXPECT_LE((out.d - fp.d).cwiseAbs().maxCoeff(), 1e-15);
    }
  }
}

TEST(IncrementalStep, DriftIsAnError) {
  const auto sys = testing::nnls_toy();
  EXPECT_THROW(incremental_step(sys, {vec({1.0, 0.0}), vec({0.0, 0.0})}, {0}, 1.0),
               StateDriftError);
  // Small drift inside the tolerance is accepted.
  EXPECT_NO_THROW(incremental_step(sys, {vec({0.0, 0.0}), vec({1e-8, 0.0})}, {0}, 1.0));
}

std::vector<ReducedSystem> example_systems() {
  std::vector<ReducedSystem> out;
  for (ProblemKind kind : {ProblemKind::Lasso, ProblemKind::Nnls, ProblemKind::Ecd}) {
    GenParams gp = default_params(kind);
    gp.m = 12;
    gp.n = 20;
    gp.k = 3;
    gp.seed = 5;
    out.push_back(compile(gen_instance(gp).spec));
  }
  return out;
}

// Property: with p = 1 and rho = 1 the two recursions generate the same
// d-sequence from a consistent start.
TEST(Solvers, IterativeAndIncrementalAgree) {
  for (const auto& sys : example_systems()) {
    const auto K = sys.size();
    const auto I = all(K);
    IncrementalState inc{Eigen::VectorXd::Zero(K), sys.f};
    Eigen::VectorXd d = sys.f;
    for (int sweep = 0; sweep < 100; ++sweep) {
      d = iterative_step(sys, d, I, 1.0);
      incremental_step_inplace(sys, inc, I, 1.0);
      ASSERT_LE((d - inc.d).cwiseAbs().maxCoeff(), 1e-10) << "sweep " << sweep;
    }
  }
}

TEST(Solvers, IncrementalInvariantHolds) {
  for (const auto& sys : example_systems()) {
    SolverConfig cfg;
    cfg.p = 0.25;
    cfg.epsilon = 1e-300;
    cfg.max_sweeps = 1000;
    const auto trace = run(sys, cfg);
    EXPECT_EQ(trace.sweeps_used, 1000);
    EXPECT_LE((trace.d - (sys.G * trace.c + sys.f)).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Run, NnlsIterativeUnfiltered) {
  const auto sys = testing::nnls_toy();
  SolverConfig cfg;
  cfg.solver = SolverType::Iterative;
  cfg.filtered = false;
  cfg.epsilon = 1e-12;
  const auto trace = run(sys, cfg);
  ASSERT_TRUE(trace.converged);
  EXPECT_LE(trace.sweeps_used, 3);
  EXPECT_NEAR(readout(sys, trace.c, trace.d).x_hat[0], 3.0, 1e-12);
}

TEST(Run, LassoIncrementalFiltered) {
  const auto sys = testing::lasso_toy();
  SolverConfig cfg;
  cfg.rho_filter = 0.5;
  cfg.epsilon = 1e-9;
  const auto trace = run(sys, cfg);
  ASSERT_TRUE(trace.converged);
  EXPECT_NEAR(readout(sys, trace.c, trace.d).x_hat[0], 2.5, 1e-6);
}

TEST(Run, InfiniteEpsilonReturnsImmediately) {
  SolverConfig cfg;
  cfg.epsilon = std::numeric_limits<double>::infinity();
  const auto trace = run(testing::nnls_toy(), cfg);
  EXPECT_TRUE(trace.converged);
  EXPECT_EQ(trace.sweeps_used, 0);
  ASSERT_EQ(trace.records.size(), 1u);
  EXPECT_EQ(trace.records[0].sweep, 0);
}

TEST(Run, Validation) {
  SolverConfig cfg;
  cfg.epsilon = 0.0;
  EXPECT_THROW(run(testing::nnls_toy(), cfg), InvalidArgument);
  cfg = SolverConfig{};
  IncrementalState bad{vec({0.0}), vec({0.0})};
  EXPECT_THROW(run(testing::nnls_toy(), cfg, bad), DimensionError);
}

TEST(Run, AcceptsInitialState) {
  const auto sys = testing::nnls_toy();
  SolverConfig cfg;
  cfg.epsilon = 1e-12;
  const auto trace = run(sys, cfg, IncrementalState{vec({3.0, -3.0}), vec({3.0, 3.0})});
  EXPECT_TRUE(trace.converged);
  EXPECT_EQ(trace.sweeps_used, 0);
}

TEST(Run, DivergenceGuard) {
  // G = 2I is not orthogonal; with identity maps d doubles every sweep.
  ReducedSystem sys;
  sys.G = 2.0 * Eigen::MatrixXd::Identity(2, 2);
  sys.f = vec({1.0, 1.0});
  sys.maps.assign(2, CoordinateMap::identity());
  sys.x_block = {0};
  sys.w_block = {1};
  for (SolverType type : {SolverType::Iterative, SolverType::Incremental}) {
    SolverConfig cfg;
    cfg.solver = type;
    cfg.filtered = false;
    EXPECT_THROW(run(sys, cfg), DivergenceError);
  }
}

TEST(Run, DeterministicGivenSeed) {
  const auto sys = example_systems()[0];
  for (SolverType type : {SolverType::Iterative, SolverType::Incremental}) {
    SolverConfig cfg;
    cfg.solver = type;
    cfg.p = 0.25;
    cfg.seed = 99;
    cfg.max_sweeps = 300;
    const auto a = run(sys, cfg);
    const auto b = run(sys, cfg);
    ASSERT_EQ(a.records.size(), b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
      EXPECT_EQ(a.records[i].sweep, b.records[i].sweep);
      EXPECT_EQ(a.records[i].residual, b.records[i].residual);
    }
    EXPECT_EQ(a.c, b.c);
    EXPECT_EQ(a.d, b.d);
    EXPECT_EQ(a.converged, b.converged);
    cfg.seed = 100;
    EXPECT_NE(run(sys, cfg).c, a.c);
  }
}

// Median residual over consecutive 10-sweep windows.
std::vector<double> window_medians(const std::vector<SweepRecord>& records) {
  std::vector<double> out;
  for (std::size_t start = 1; start + 10 <= records.size(); start += 10) {
    std::vector<double> w;
    for (std::size_t i = start; i < start + 10; ++i) w.push_back(records[i].residual);
    std::nth_element(w.begin(), w.begin() + 5, w.end());
    out.push_back(w[5]);
  }
  return out;
}

class Convergence
    : public ::testing::TestWithParam<std::tuple<ProblemKind, double, double>> {};

TEST_P(Convergence, FilteredSolversReachTolerance) {
  const auto [kind, rho, p] = GetParam();
  const auto sys = compile(gen_instance(default_params(kind)).spec);
  for (SolverType type : {SolverType::Incremental, SolverType::Iterative}) {
    SolverConfig cfg;
    cfg.solver = type;
    cfg.rho_filter = rho;
    cfg.p = p;
    cfg.epsilon = 1e-6;
    cfg.max_sweeps = 50000;
    const auto trace = run(sys, cfg);
    EXPECT_TRUE(trace.converged)
        << to_string(type) << " residual " << trace.records.back().residual;
    const auto med = window_medians(trace.records);
    for (std::size_t i = 1; i < med.size(); ++i) {
      EXPECT_LE(med[i], med[i - 1] * (1.0 + 1e-9)) << to_string(type) << " window " << i;
    }
  }
}

INSTANTIATE_TEST_SUITE_P(
    AllKinds, Convergence,
    ::testing::Combine(::testing::Values(ProblemKind::Lasso, ProblemKind::Nnls,
                                         ProblemKind::Ecd),
                       ::testing::Values(0.25, 0.5, 0.75), ::testing::Values(0.25, 1.0)),
    [](const auto& info) {
      return std::string(to_string(std::get<0>(info.param))) + "_rho" +
             std::to_string(static_cast<int>(std::get<1>(info.param) * 100)) + "_p" +
             std::to_string(static_cast<int>(std::get<2>(info.param) * 100));
    });

TEST(WriteTraceCsv, Format) {
  const auto sys = testing::nnls_toy();
  SolverConfig cfg;
  cfg.epsilon = 1e-12;
  const auto trace = run(sys, cfg);
  std::ostringstream os;
  write_trace_csv(os, trace, sys);
  const std::string s = os.str();
  EXPECT_EQ(s.rfind("sweep,residual,time_ms\n0,", 0), 0u);
  EXPECT_NE(s.find("\n\nindex,x_hat\n0,"), std::string::npos);
  const auto rows = std::count(s.begin(), s.end(), '\n');
  EXPECT_EQ(rows, static_cast<long>(trace.records.size()) + 1 + 2 + 1);
}

}  // namespace
}  // namespace kvopt
