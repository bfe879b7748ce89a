#include "kvopt/problem.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "kvopt/error.hpp"

namespace kvopt {

std::string_view to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::Lasso: return "lasso";
    case ProblemKind::Nnls: return "nnls";
    case ProblemKind::Ecd: return "ecd";
  }
  return "?";
}

ProblemKind problem_kind_from_string(std::string_view name) {
  if (name == "lasso") return ProblemKind::Lasso;
  if (name == "nnls") return ProblemKind::Nnls;
  if (name == "ecd") return ProblemKind::Ecd;
  throw InvalidArgument("unknown problem kind: " + std::string(name));
}

void ProblemSpec::validate() const {
  if (A.rows() < 1 || A.cols() < 1) {
    throw DimensionError("A must have at least one row and one column");
  }
  if (y.size() != A.rows()) {
    throw DimensionError("y has length " + std::to_string(y.size()) +
                         " but A has " + std::to_string(A.rows()) + " rows");
  }
  if (!A.allFinite()) throw InvalidArgument("A has non-finite entries");
  if (!y.allFinite()) throw InvalidArgument("y has non-finite entries");
  if (!(rho_obj > 0.0) || !std::isfinite(rho_obj)) {
    throw InvalidArgument("rho_obj must be a positive finite number");
  }
}

ProblemSpec make_problem(ProblemKind kind, Eigen::MatrixXd A,
                         Eigen::VectorXd y, double rho_obj, std::string name) {
  ProblemSpec spec;
  spec.kind = kind;
  spec.A = std::move(A);
  spec.y = std::move(y);
  spec.rho_obj = kind == ProblemKind::Lasso ? rho_obj : 1.0;
  spec.name = std::move(name);
  spec.validate();
  return spec;
}

void ReducedSystem::validate() const {
  const Eigen::Index K = G.rows();
  if (K < 1 || G.cols() != K) throw DimensionError("G must be square, K >= 1");
  if (f.size() != K) throw DimensionError("f must have length K");
  if (static_cast<Eigen::Index>(maps.size()) != K) {
    throw DimensionError("map table must have K entries");
  }
  if (static_cast<Eigen::Index>(x_block.size() + w_block.size()) != K) {
    throw DimensionError("x_block and w_block must partition 0..K-1");
  }
  std::vector<bool> seen(K, false);
  for (const auto* block : {&x_block, &w_block}) {
    for (Eigen::Index j : *block) {
      if (j < 0 || j >= K || seen[j]) {
        throw DimensionError("x_block and w_block must partition 0..K-1");
      }
      seen[j] = true;
    }
  }
  if (!G.allFinite() || !f.allFinite()) {
    throw InvalidArgument("G and f must be finite");
  }
}

double orthogonality_defect(const Eigen::MatrixXd& G) {
  const Eigen::MatrixXd gram = G.transpose() * G;
  return (gram - Eigen::MatrixXd::Identity(G.rows(), G.cols()))
      .cwiseAbs()
      .maxCoeff();
}

double reflection_defect(const Eigen::MatrixXd& G, Eigen::Index n) {
  Eigen::MatrixXd GS = G;
  GS.rightCols(G.cols() - n) *= -1.0;
  const Eigen::MatrixXd sq = GS * GS;
  return (sq - Eigen::MatrixXd::Identity(G.rows(), G.cols()))
      .cwiseAbs()
      .maxCoeff();
}

std::string_view to_string(SolverType type) {
  return type == SolverType::Iterative ? "iterative" : "incremental";
}

SolverType solver_type_from_string(std::string_view name) {
  if (name == "iterative") return SolverType::Iterative;
  if (name == "incremental") return SolverType::Incremental;
  throw InvalidArgument("unknown solver type: " + std::string(name));
}

void SolverConfig::validate() const {
  if (!(rho_filter > 0.0 && rho_filter <= 1.0)) {
    throw InvalidArgument("rho_filter must lie in (0, 1]");
  }
  if (!(p > 0.0 && p <= 1.0)) throw InvalidArgument("p must lie in (0, 1]");
  if (max_sweeps < 1) throw InvalidArgument("max_sweeps must be positive");
  if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
}

}  // namespace kvopt
