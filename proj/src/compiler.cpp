#include "kvopt/compiler.hpp"

#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "kvopt/error.hpp"

namespace kvopt {

namespace {

// Cholesky of a regularized Gram block I + X X^T.
Eigen::LLT<Eigen::MatrixXd> factor_gram(const Eigen::MatrixXd& X) {
  Eigen::MatrixXd S = Eigen::MatrixXd::Identity(X.rows(), X.rows());
  S.selfadjointView<Eigen::Lower>().rankUpdate(X);
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  const double rcond = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
  if (!(rcond > 1e-15)) {
    throw CompileError("Cholesky factorization of the Gram block failed "
                       "(reciprocal condition estimate " +
                       std::to_string(rcond) + ")");
  }
  return llt;
}

}  // namespace

Eigen::MatrixXd compute_R(const Eigen::MatrixXd& A) {
  if (A.rows() < 1 || A.cols() < 1) {
    throw DimensionError("A must have at least one row and one column");
  }
  if (!A.allFinite()) throw CompileError("A has non-finite entries");

  const Eigen::Index m = A.rows();
  const Eigen::Index n = A.cols();
  Eigen::MatrixXd R(n + m, n + m);

  // Blocks of R, using (I - X)(I + X)^-1 = 2 (I + X)^-1 - I and
  // A^T (I + A A^T)^-1 = (I + A^T A)^-1 A^T:
  //   R11 = 2 (I + A^T A)^-1 - I     R12 = -2 A^T (I + A A^T)^-1
  //   R21 =  2 A (I + A^T A)^-1      R22 = 2 (I + A A^T)^-1 - I
  if (m <= n) {
    const auto llt = factor_gram(A);
    const Eigen::MatrixXd W = llt.solve(A);  // (I + A A^T)^-1 A
    R.topLeftCorner(n, n).noalias() = -2.0 * A.transpose() * W;
    R.topLeftCorner(n, n).diagonal().array() += 1.0;
    R.topRightCorner(n, m) = -2.0 * W.transpose();
    R.bottomLeftCorner(m, n) = 2.0 * W;
    R.bottomRightCorner(m, m) =
        2.0 * llt.solve(Eigen::MatrixXd::Identity(m, m));
    R.bottomRightCorner(m, m).diagonal().array() -= 1.0;
  } else {
    const auto llt = factor_gram(A.transpose());
    // V = A (I + A^T A)^-1 = ((I + A^T A)^-1 A^T)^T
    const Eigen::MatrixXd V = llt.solve(A.transpose()).transpose();
    R.topLeftCorner(n, n) = 2.0 * llt.solve(Eigen::MatrixXd::Identity(n, n));
    R.topLeftCorner(n, n).diagonal().array() -= 1.0;
    R.topRightCorner(n, m) = -2.0 * V.transpose();
    R.bottomLeftCorner(m, n) = 2.0 * V;
    R.bottomRightCorner(m, m).noalias() = -2.0 * V * A.transpose();
    R.bottomRightCorner(m, m).diagonal().array() += 1.0;
  }
  return R;
}

CoordinateMap x_block_map(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::Lasso: return CoordinateMap::ssr(1.0);
    case ProblemKind::Nnls: return CoordinateMap::abs();
    case ProblemKind::Ecd: return CoordinateMap::identity();
  }
  throw CompileError("unknown problem kind");
}

std::vector<CoordinateMap> w_block_maps(ProblemKind kind, double rho_obj,
                                        const Eigen::VectorXd& y) {
  std::vector<CoordinateMap> maps;
  maps.reserve(y.size());
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    switch (kind) {
      case ProblemKind::Lasso: {
        // Negated reflected prox of rho/2 (w - y)^2.
        const double a = -(1.0 - rho_obj) / (1.0 + rho_obj);
        const double b = -2.0 * rho_obj * y[j] / (1.0 + rho_obj);
        maps.push_back(CoordinateMap::affine(a, b));
        break;
      }
      case ProblemKind::Nnls:
        maps.push_back(CoordinateMap::constant(-y[j]));
        break;
      case ProblemKind::Ecd:
        // u -> -(y + SSR(u - y)) = -y + NEG_SSR(u - y)
        maps.push_back(CoordinateMap::neg_ssr(1.0).shifted(y[j], -y[j]));
        break;
    }
  }
  return maps;
}

ReducedSystem compile(const ProblemSpec& spec) {
  spec.validate();
  const Eigen::Index n = spec.cols();
  const Eigen::Index m = spec.rows();

  ReducedSystem sys;
  sys.G = compute_R(spec.A);
  sys.f = Eigen::VectorXd::Zero(n + m);
  sys.maps.assign(n, x_block_map(spec.kind));
  auto w_maps = w_block_maps(spec.kind, spec.rho_obj, spec.y);
  sys.maps.insert(sys.maps.end(), w_maps.begin(), w_maps.end());
  sys.x_block.resize(n);
  sys.w_block.resize(m);
  for (Eigen::Index j = 0; j < n; ++j) sys.x_block[j] = j;
  for (Eigen::Index j = 0; j < m; ++j) sys.w_block[j] = n + j;
  sys.provenance = spec;
  return sys;
}

Readout readout(const ReducedSystem& system, const Eigen::VectorXd& c,
                const Eigen::VectorXd& d) {
  const Eigen::Index K = system.size();
  if (c.size() != K || d.size() != K) {
    throw DimensionError("readout expects state vectors of length K");
  }
  Readout out;
  out.x_hat.resize(static_cast<Eigen::Index>(system.x_block.size()));
  out.w_hat.resize(static_cast<Eigen::Index>(system.w_block.size()));
  for (std::size_t i = 0; i < system.x_block.size(); ++i) {
    const auto j = system.x_block[i];
    out.x_hat[i] = 0.5 * (d[j] + c[j]);
  }
  for (std::size_t i = 0; i < system.w_block.size(); ++i) {
    const auto j = system.w_block[i];
    out.w_hat[i] = 0.5 * (d[j] - c[j]);
  }
  return out;
}

double residual(const ReducedSystem& system, const Eigen::VectorXd& c,
                const Eigen::VectorXd& d) {
  const Eigen::Index K = system.size();
  if (c.size() != K || d.size() != K) {
    throw DimensionError("residual expects state vectors of length K");
  }
  const Eigen::VectorXd md = eval_m(system.maps, d);
  const Eigen::VectorXd gc = system.G * c + system.f;
  return (c - md).norm() + (d - gc).norm();
}

ReducedSystem update_observation(const ReducedSystem& system,
                                 const Eigen::VectorXd& y_new) {
  const auto& spec = system.provenance;
  if (y_new.size() != static_cast<Eigen::Index>(system.w_block.size())) {
    throw DimensionError("observation vector has length " +
                         std::to_string(y_new.size()) + ", expected " +
                         std::to_string(system.w_block.size()));
  }
  if (!y_new.allFinite()) throw InvalidArgument("observation must be finite");
  ReducedSystem out = system;
  const auto maps = w_block_maps(spec.kind, spec.rho_obj, y_new);
  for (std::size_t i = 0; i < system.w_block.size(); ++i) {
    out.maps[system.w_block[i]] = maps[i];
  }
  out.provenance.y = y_new;
  return out;
}

}  // namespace kvopt
