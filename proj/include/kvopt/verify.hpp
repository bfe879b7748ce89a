#pragma once

#include <string>

#include <Eigen/Core>

#include "kvopt/problem.hpp"

namespace kvopt {

struct VerifyReport {
  bool pass = false;
  double violation = 0.0;  // worst violation of the checked conditions
  std::string detail;
};

// First-order optimality check of x_hat for spec.
//   lasso  g = rho A^T (A x - y); |g_i| <= 1 + tol where x_i = 0,
//          |g_i + sign(x_i)| <= tol elsewhere
//   nnls   g = A^T (A x - y); x >= -tol, g >= -tol, |x_i g_i| <= tol
//   ecd    small (n <= 4, m <= 12): |A x - y|_1 <= oracle + tol;
//          otherwise a subgradient u of |.|_1 at A x - y with |A^T u|_inf <= tol
VerifyReport verify_optimality(const ProblemSpec& spec,
                               const Eigen::VectorXd& x_hat, double tol);

// |A x - y|_1
double l1_objective(const Eigen::MatrixXd& A, const Eigen::VectorXd& y,
                    const Eigen::VectorXd& x);

// Brute-force minimizer of |A x - y|_1 over the vertices: every n-row subset
// with an invertible block is solved exactly. Ties go to the lexicographically
// smallest x. Limited to n <= 4, m <= 12; throws Error if no subset is
// invertible.
Eigen::VectorXd l1_oracle(const Eigen::MatrixXd& A, const Eigen::VectorXd& y);

}  // namespace kvopt
