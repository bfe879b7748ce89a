#include <cmath>

#include <gtest/gtest.h>

#include "kvopt/error.hpp"
#include "kvopt/instance_gen.hpp"

namespace kvopt {
namespace {

TEST(GenInstance, DeterministicGivenSeed) {
  for (ProblemKind kind : {ProblemKind::Lasso, ProblemKind::Nnls, ProblemKind::Ecd}) {
    GenParams p = default_params(kind);
    p.seed = 42;
    const auto a = gen_instance(p);
    const auto b = gen_instance(p);
    EXPECT_EQ(a.spec.A, b.spec.A);
    EXPECT_EQ(a.spec.y, b.spec.y);
    EXPECT_EQ(a.x_true, b.x_true);
    EXPECT_EQ(a.corrupted, b.corrupted);
    p.seed = 43;
    EXPECT_NE(gen_instance(p).spec.A, a.spec.A);
  }
}

TEST(GenInstance, LassoHasPlantedSupport) {
  const auto inst = gen_instance(default_params(ProblemKind::Lasso));
  EXPECT_EQ(inst.spec.rows(), 60);
  EXPECT_EQ(inst.spec.cols(), 128);
  EXPECT_EQ((inst.x_true.array() != 0.0).count(), 8);
  EXPECT_TRUE((inst.x_true.array().abs() == 1.0 || inst.x_true.array() == 0.0).all());
  EXPECT_EQ(inst.spec.rho_obj, 10.0);
}

TEST(GenInstance, NnlsTruthIsNonnegative) {
  const auto inst = gen_instance(default_params(ProblemKind::Nnls));
  EXPECT_EQ(inst.spec.rows(), 128);
  EXPECT_EQ(inst.spec.cols(), 60);
  EXPECT_GE(inst.x_true.minCoeff(), 0.0);
  EXPECT_GT(inst.x_true.maxCoeff(), 0.0);
}

TEST(GenInstance, EcdCorruptsExactlyCeilFractionRows) {
  GenParams p = default_params(ProblemKind::Ecd);
  EXPECT_EQ(p.m, 96);
  EXPECT_EQ(p.corruption_count(), 10);
  const auto inst = gen_instance(p);
  ASSERT_EQ(inst.corrupted.size(), 10u);
  EXPECT_TRUE((inst.x_true.array() == 0.0 || inst.x_true.array() == 1.0).all());
  // Noise-free: the residual is nonzero exactly on the corrupted rows.
  const Eigen::VectorXd r = inst.spec.y - inst.spec.A * inst.x_true;
  std::vector<Eigen::Index> hit;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    if (std::abs(r[i]) > 1e-12) hit.push_back(i);
  }
  EXPECT_EQ(hit, inst.corrupted);
}

TEST(GenInstance, GaussianScaling) {
  GenParams p = default_params(ProblemKind::Nnls);
  p.m = 400;
  p.n = 400;
  const auto A = gen_instance(p).spec.A;
  // Entries are N(0, 1/m): the mean square is 1/m up to sampling error.
  const double ms = A.squaredNorm() / static_cast<double>(A.size());
  EXPECT_NEAR(ms * p.m, 1.0, 0.02);
}

TEST(GenParams, Validation) {
  GenParams p = default_params(ProblemKind::Lasso);
  p.k = 200;
  EXPECT_THROW(gen_instance(p), InvalidArgument);
  p = default_params(ProblemKind::Ecd);
  p.corruption_fraction = 0.5;
  EXPECT_THROW(gen_instance(p), InvalidArgument);
  p.corruption_fraction = 1.0;
  EXPECT_THROW(gen_instance(p), InvalidArgument);
  p = default_params(ProblemKind::Nnls);
  p.m = 0;
  EXPECT_THROW(gen_instance(p), InvalidArgument);
  p = default_params(ProblemKind::Nnls);
  p.noise_sigma = -1.0;
  EXPECT_THROW(gen_instance(p), InvalidArgument);
}

}  // namespace
}  // namespace kvopt
