#include "kvopt/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "kvopt/error.hpp"

namespace kvopt {

namespace {

constexpr Eigen::Index kOracleMaxCols = 4;
constexpr Eigen::Index kOracleMaxRows = 12;

VerifyReport finish(double violation, double tol, const std::string& what) {
  VerifyReport r;
  r.violation = violation;
  r.pass = violation <= tol;
  std::ostringstream os;
  os << what << ": worst violation " << violation << " (tol " << tol << ")";
  r.detail = os.str();
  return r;
}

VerifyReport verify_lasso(const ProblemSpec& spec, const Eigen::VectorXd& x,
                          double tol) {
  const Eigen::VectorXd g = spec.rho_obj * (spec.A.transpose() * (spec.A * x - spec.y));
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    // Entries within tol of zero are judged against the zero branch.
    const double v = std::abs(x[i]) <= tol ? std::max(0.0, std::abs(g[i]) - 1.0)
                                 : std::abs(g[i] + std::copysign(1.0, x[i]));
    worst = std::max(worst, v);
  }
  return finish(worst, tol, "lasso stationarity");
}

VerifyReport verify_nnls(const ProblemSpec& spec, const Eigen::VectorXd& x,
                         double tol) {
  const Eigen::VectorXd g = spec.A.transpose() * (spec.A * x - spec.y);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    worst = std::max({worst, -x[i], -g[i], std::abs(x[i] * g[i])});
  }
  return finish(worst, tol, "nnls KKT");
}

// Looks for u with u_i = sign(r_i) off the zero set Z and |u_Z| <= 1 such
// that A^T u = 0, by projected gradient on 1/2 |A_Z^T u_Z + b|^2.
VerifyReport verify_ecd_certificate(const ProblemSpec& spec,
                                    const Eigen::VectorXd& x, double tol) {
  const Eigen::VectorXd r = spec.A * x - spec.y;
  std::vector<Eigen::Index> zero_set;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(spec.cols());
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    if (std::abs(r[i]) <= tol) {
      zero_set.push_back(i);
    } else {
      b += std::copysign(1.0, r[i]) * spec.A.row(i).transpose();
    }
  }
  const auto nz = static_cast<Eigen::Index>(zero_set.size());
  if (nz == 0) return finish(b.cwiseAbs().maxCoeff(), tol, "ecd subgradient");
  Eigen::MatrixXd AZ(nz, spec.cols());
  for (Eigen::Index i = 0; i < nz; ++i) AZ.row(i) = spec.A.row(zero_set[i]);

  // Generic vertex: the zero set pins u_Z down; take the least-squares
  // solution and judge it directly.
  const Eigen::VectorXd u_ls =
      AZ.transpose().completeOrthogonalDecomposition().solve(-b);
  const double ls_violation =
      std::max((AZ.transpose() * u_ls + b).cwiseAbs().maxCoeff(),
               std::max(0.0, u_ls.cwiseAbs().maxCoeff() - 1.0));
  if (ls_violation <= tol) return finish(ls_violation, tol, "ecd subgradient");

  // Otherwise search the box with accelerated projected gradient.
  const double lipschitz = std::max(
      Eigen::JacobiSVD<Eigen::MatrixXd>(AZ).singularValues()[0], 1e-12);
  const double step = 1.0 / (lipschitz * lipschitz);
  Eigen::VectorXd u = u_ls.cwiseMax(-1.0).cwiseMin(1.0);
  Eigen::VectorXd v = u;
  double t = 1.0;
  double best = (AZ.transpose() * u + b).cwiseAbs().maxCoeff();
  for (int it = 0; it < 50000 && best > 1e-2 * tol; ++it) {
    const Eigen::VectorXd grad = AZ * (AZ.transpose() * v + b);
    const Eigen::VectorXd u_next = (v - step * grad).cwiseMax(-1.0).cwiseMin(1.0);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    v = u_next + ((t - 1.0) / t_next) * (u_next - u);
    u = u_next;
    t = t_next;
    best = std::min(best, (AZ.transpose() * u + b).cwiseAbs().maxCoeff());
  }
  return finish(best, tol, "ecd subgradient");
}

}  // namespace

double l1_objective(const Eigen::MatrixXd& A, const Eigen::VectorXd& y,
                    const Eigen::VectorXd& x) {
  return (A * x - y).lpNorm<1>();
}

Eigen::VectorXd l1_oracle(const Eigen::MatrixXd& A, const Eigen::VectorXd& y) {
  const Eigen::Index m = A.rows();
  const Eigen::Index n = A.cols();
  if (y.size() != m) throw DimensionError("y must match the rows of A");
  if (n < 1 || n > kOracleMaxCols || m > kOracleMaxRows || m < n) {
    throw InvalidArgument("l1_oracle supports 1 <= n <= 4 and n <= m <= 12");
  }
  std::vector<bool> pick(static_cast<std::size_t>(m), false);
  std::fill(pick.begin(), pick.begin() + n, true);

  bool found = false;
  double best_obj = 0.0;
  Eigen::VectorXd best;
  Eigen::MatrixXd sub(n, n);
  Eigen::VectorXd rhs(n);
  do {
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!pick[i]) continue;
      sub.row(r) = A.row(i);
      rhs[r] = y[i];
      ++r;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sub);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible()) continue;
    const Eigen::VectorXd x = lu.solve(rhs);
    const double obj = l1_objective(A, y, x);
    const double tie = 1e-12 * (1.0 + std::abs(best_obj));
    const bool better = !found || obj < best_obj - tie ||
                        (std::abs(obj - best_obj) <= tie &&
                         std::lexicographical_compare(x.begin(), x.end(),
                                                      best.begin(), best.end()));
    if (better) {
      found = true;
      best_obj = obj;
      best = x;
    }
  } while (std::prev_permutation(pick.begin(), pick.end()));
  if (!found) throw Error("l1_oracle: every n-row block of A is singular");
  return best;
}

VerifyReport verify_optimality(const ProblemSpec& spec,
                               const Eigen::VectorXd& x_hat, double tol) {
  if (x_hat.size() != spec.cols()) {
    throw DimensionError("x_hat has length " + std::to_string(x_hat.size()) +
                         ", expected " + std::to_string(spec.cols()));
  }
  switch (spec.kind) {
    case ProblemKind::Lasso: return verify_lasso(spec, x_hat, tol);
    case ProblemKind::Nnls: return verify_nnls(spec, x_hat, tol);
    case ProblemKind::Ecd:
      if (spec.cols() <= kOracleMaxCols && spec.rows() <= kOracleMaxRows &&
          spec.rows() >= spec.cols()) {
        const double oracle = l1_objective(spec.A, spec.y, l1_oracle(spec.A, spec.y));
        const double gap = l1_objective(spec.A, spec.y, x_hat) - oracle;
        return finish(std::max(gap, 0.0), tol, "ecd objective gap vs oracle");
      }
      return verify_ecd_certificate(spec, x_hat, tol);
  }
  return {};
}

}  // namespace kvopt
