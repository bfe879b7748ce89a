#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "kvopt/problem.hpp"

namespace kvopt {

struct GenParams {
  ProblemKind kind = ProblemKind::Lasso;
  Eigen::Index m = 60;  // rows of A
  Eigen::Index n = 128; // cols of A
  Eigen::Index k = 8;   // planted support size (lasso)
  double corruption_fraction = 0.1;  // ecd
  double noise_sigma = 0.0;
  double rho_obj = 10.0;  // lasso
  std::uint64_t seed = 0;

  void validate() const;
  // ceil(corruption_fraction * m)
  Eigen::Index corruption_count() const;
};

// Defaults used by the CLI and the reproduction tests for each kind.
GenParams default_params(ProblemKind kind);

struct GeneratedInstance {
  ProblemSpec spec;
  Eigen::VectorXd x_true;
  std::vector<Eigen::Index> corrupted;  // rows hit by sparse noise (ecd)
};

// A has i.i.d. N(0, 1/m) entries.
//   lasso  k-sparse +-1 x_true, y = A x_true + noise
//   nnls   x_true = max(N(0,1), 0) entrywise, y = A x_true + noise
//   ecd    x_true in {0,1}^n, y = A x_true + z + noise, z N(0,1) on exactly
//          corruption_count() rows
// Deterministic given the seed.
GeneratedInstance gen_instance(const GenParams& params);

}  // namespace kvopt
