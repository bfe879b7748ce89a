#include "kvopt/instance_gen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "kvopt/error.hpp"

namespace kvopt {

namespace {

std::vector<Eigen::Index> choose(Eigen::Index from, Eigen::Index count,
                                 std::mt19937_64& rng) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(from));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  for (Eigen::Index i = 0; i < count; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, from - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(static_cast<std::size_t>(count));
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

Eigen::Index GenParams::corruption_count() const {
  return static_cast<Eigen::Index>(
      std::ceil(corruption_fraction * static_cast<double>(m) - 1e-9));
}

void GenParams::validate() const {
  if (m < 1 || n < 1) throw InvalidArgument("dimensions must be positive");
  if (kind == ProblemKind::Lasso && (k < 0 || k > n)) {
    throw InvalidArgument("sparsity k must satisfy 0 <= k <= n");
  }
  if (!(noise_sigma >= 0.0)) throw InvalidArgument("noise_sigma must be >= 0");
  if (kind == ProblemKind::Lasso && !(rho_obj > 0.0)) {
    throw InvalidArgument("rho_obj must be positive");
  }
  if (kind == ProblemKind::Ecd) {
    if (!(corruption_fraction >= 0.0 && corruption_fraction < 1.0)) {
      throw InvalidArgument("corruption_fraction must lie in [0, 1)");
    }
    if (2 * corruption_count() >= m) {
      throw InvalidArgument("corrupting " + std::to_string(corruption_count()) +
                            " of " + std::to_string(m) +
                            " entries leaves decoding ill-posed");
    }
  }
}

GenParams default_params(ProblemKind kind) {
  GenParams p;
  p.kind = kind;
  switch (kind) {
    case ProblemKind::Lasso:
      p.m = 60;
      p.n = 128;
      p.k = 8;
      p.noise_sigma = 0.01;
      p.rho_obj = 10.0;
      break;
    case ProblemKind::Nnls:
      p.m = 128;
      p.n = 60;
      p.noise_sigma = 0.1;
      p.rho_obj = 1.0;
      break;
    case ProblemKind::Ecd:
      p.m = 96;
      p.n = 32;
      p.corruption_fraction = 0.1;
      p.noise_sigma = 0.0;
      p.rho_obj = 1.0;
      break;
  }
  return p;
}

GeneratedInstance gen_instance(const GenParams& params) {
  params.validate();
  std::mt19937_64 rng(params.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto m = params.m;
  const auto n = params.n;

  Eigen::MatrixXd A(m, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  for (Eigen::Index r = 0; r < m; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) A(r, c) = scale * gauss(rng);
  }

  GeneratedInstance out;
  out.x_true = Eigen::VectorXd::Zero(n);
  switch (params.kind) {
    case ProblemKind::Lasso: {
      std::bernoulli_distribution coin(0.5);
      for (Eigen::Index j : choose(n, params.k, rng)) {
        out.x_true[j] = coin(rng) ? 1.0 : -1.0;
      }
      break;
    }
    case ProblemKind::Nnls:
      for (Eigen::Index j = 0; j < n; ++j) out.x_true[j] = std::max(gauss(rng), 0.0);
      break;
    case ProblemKind::Ecd: {
      std::bernoulli_distribution coin(0.5);
      for (Eigen::Index j = 0; j < n; ++j) out.x_true[j] = coin(rng) ? 1.0 : 0.0;
      break;
    }
  }

  Eigen::VectorXd y = A * out.x_true;
  if (params.kind == ProblemKind::Ecd) {
    out.corrupted = choose(m, params.corruption_count(), rng);
    for (Eigen::Index r : out.corrupted) y[r] += gauss(rng);
  }
  if (params.noise_sigma > 0.0) {
    for (Eigen::Index r = 0; r < m; ++r) y[r] += params.noise_sigma * gauss(rng);
  }

  const std::string name = std::string(to_string(params.kind)) + "-" +
                           std::to_string(m) + "x" + std::to_string(n) + "-s" +
                           std::to_string(params.seed);
  out.spec = make_problem(params.kind, std::move(A), std::move(y),
                          params.rho_obj, name);
  return out;
}

}  // namespace kvopt
