#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "kvopt/coordinate_map.hpp"

namespace kvopt {

enum class ProblemKind { Lasso, Nnls, Ecd };

std::string_view to_string(ProblemKind kind);
ProblemKind problem_kind_from_string(std::string_view name);

// A user-facing instance:
//   lasso  minimize rho/2 |Ax - y|^2 + |x|_1
//   nnls   minimize 1/2 |Ax - y|^2  s.t. x >= 0
//   ecd    minimize |Ax - y|_1
struct ProblemSpec {
  ProblemKind kind = ProblemKind::Lasso;
  Eigen::MatrixXd A;
  Eigen::VectorXd y;
  double rho_obj = 1.0;  // only meaningful for lasso
  std::string name;

  Eigen::Index rows() const { return A.rows(); }
  Eigen::Index cols() const { return A.cols(); }

  // Throws InvalidArgument / DimensionError when an invariant fails.
  void validate() const;
};

ProblemSpec make_problem(ProblemKind kind, Eigen::MatrixXd A,
                         Eigen::VectorXd y, double rho_obj = 1.0,
                         std::string name = {});

// The compiled fixed-point system  c = m(d),  d = G c + f.
struct ReducedSystem {
  Eigen::MatrixXd G;
  Eigen::VectorXd f;
  std::vector<CoordinateMap> maps;
  std::vector<Eigen::Index> x_block;  // inputs to A
  std::vector<Eigen::Index> w_block;  // outputs from A
  ProblemSpec provenance;

  Eigen::Index size() const { return G.rows(); }

  // Structural checks (shapes, block partition). Orthogonality is checked
  // separately by orthogonality_defect() since it costs O(K^3).
  void validate() const;
};

// max |G^T G - I|
double orthogonality_defect(const Eigen::MatrixXd& G);

// max |(G S)^2 - I| with S = blkdiag(I_n, -I_m).
double reflection_defect(const Eigen::MatrixXd& G, Eigen::Index n);

enum class SolverType { Iterative, Incremental };

std::string_view to_string(SolverType type);
SolverType solver_type_from_string(std::string_view name);

struct SolverConfig {
  SolverType solver = SolverType::Incremental;
  bool filtered = true;
  double rho_filter = 0.5;
  double p = 1.0;
  long max_sweeps = 20000;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;

  // Filter parameter actually applied: 1 when unfiltered.
  double effective_rho() const { return filtered ? rho_filter : 1.0; }
  void validate() const;
};

}  // namespace kvopt
