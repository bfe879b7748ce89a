#pragma once

#include <Eigen/Core>

#include "kvopt/problem.hpp"

namespace kvopt {

// Orthogonal operator of the reduced system:
//
//   R = [I -A^T; A I]^2 blkdiag((I + A^T A)^-1, (I + A A^T)^-1)
//
// Only the smaller of the two Gram blocks is factorized (Cholesky); the
// other inverse follows from the push-through identity. Throws CompileError
// when the factorization fails.
Eigen::MatrixXd compute_R(const Eigen::MatrixXd& A);

// Builds c = m(d), d = G c + f for the given problem. G = compute_R(A),
// f = 0, x_block = [0, n), w_block = [n, n + m). Observations only enter the
// w-block maps so G never depends on y.
ReducedSystem compile(const ProblemSpec& spec);

// w-block nonlinearities for one problem kind and observation vector.
std::vector<CoordinateMap> w_block_maps(ProblemKind kind, double rho_obj,
                                        const Eigen::VectorXd& y);
CoordinateMap x_block_map(ProblemKind kind);

struct Readout {
  Eigen::VectorXd x_hat;  // primal variable
  Eigen::VectorXd w_hat;  // A x_hat at a fixed point
};

// x_j = (d_j + c_j) / 2 on inputs to A, w_j = (d_j - c_j) / 2 on outputs.
Readout readout(const ReducedSystem& system, const Eigen::VectorXd& c,
                const Eigen::VectorXd& d);

// |c - m(d)|_2 + |d - (G c + f)|_2
double residual(const ReducedSystem& system, const Eigen::VectorXd& c,
                const Eigen::VectorXd& d);

// Rebuilds the w-block map parameters from y_new; G, f and x-block maps are
// carried over untouched.
ReducedSystem update_observation(const ReducedSystem& system,
                                 const Eigen::VectorXd& y_new);

}  // namespace kvopt
