#include "kvopt/coordinate_map.hpp"

#include <cmath>
#include <random>
#include <string>

#include "kvopt/error.hpp"

namespace kvopt {

namespace {

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) {
    throw InvalidArgument(std::string(what) + " must be finite");
  }
}

void require_threshold(double t) {
  require_finite(t, "threshold");
  if (!(t > 0.0)) throw InvalidArgument("threshold must be positive");
}

double reflected_soft_threshold(double u, double t) {
  if (std::abs(u) <= t) return -u;
  return u - 2.0 * t * std::copysign(1.0, u);
}

}  // namespace

std::string_view to_string(MapKind kind) {
  switch (kind) {
    case MapKind::Ssr: return "SSR";
    case MapKind::NegSsr: return "NEG_SSR";
    case MapKind::Abs: return "ABS";
    case MapKind::Affine: return "AFFINE";
    case MapKind::Const: return "CONST";
    case MapKind::Identity: return "IDENTITY";
  }
  return "?";
}

MapKind map_kind_from_string(std::string_view name) {
  for (MapKind k : {MapKind::Ssr, MapKind::NegSsr, MapKind::Abs,
                    MapKind::Affine, MapKind::Const, MapKind::Identity}) {
    if (to_string(k) == name) return k;
  }
  throw InvalidArgument("unknown map kind: " + std::string(name));
}

CoordinateMap CoordinateMap::ssr(double threshold) {
  require_threshold(threshold);
  CoordinateMap m(MapKind::Ssr);
  m.threshold_ = threshold;
  return m;
}

CoordinateMap CoordinateMap::neg_ssr(double threshold) {
  require_threshold(threshold);
  CoordinateMap m(MapKind::NegSsr);
  m.threshold_ = threshold;
  return m;
}

CoordinateMap CoordinateMap::abs() { return CoordinateMap(MapKind::Abs); }

CoordinateMap CoordinateMap::affine(double slope, double offset) {
  require_finite(slope, "slope");
  require_finite(offset, "offset");
  if (std::abs(slope) > 1.0) {
    throw InvalidArgument("affine slope must satisfy |a| <= 1, got " +
                          std::to_string(slope));
  }
  CoordinateMap m(MapKind::Affine);
  m.slope_ = slope;
  m.intercept_ = offset;
  return m;
}

CoordinateMap CoordinateMap::constant(double value) {
  require_finite(value, "value");
  CoordinateMap m(MapKind::Const);
  m.value_ = value;
  return m;
}

CoordinateMap CoordinateMap::identity() {
  return CoordinateMap(MapKind::Identity);
}

CoordinateMap CoordinateMap::shifted(double shift, double offset) const {
  require_finite(shift, "shift");
  require_finite(offset, "offset");
  CoordinateMap m = *this;
  m.shifted_ = true;
  m.shift_ = shift;
  m.offset_ = offset;
  return m;
}

double CoordinateMap::eval_base(double u) const {
  switch (kind_) {
    case MapKind::Ssr: return reflected_soft_threshold(u, threshold_);
    case MapKind::NegSsr: return reflected_soft_threshold(-u, threshold_);
    case MapKind::Abs: return std::abs(u);
    case MapKind::Affine: return slope_ * u + intercept_;
    case MapKind::Const: return value_;
    case MapKind::Identity: return u;
  }
  return u;
}

double CoordinateMap::operator()(double u) const {
  if (!std::isfinite(u)) {
    throw EvaluationError("nonlinearity evaluated at non-finite input");
  }
  if (shifted_) return offset_ + eval_base(u - shift_);
  return eval_base(u);
}

Eigen::VectorXd eval_m(const std::vector<CoordinateMap>& table,
                       const Eigen::VectorXd& d) {
  if (static_cast<Eigen::Index>(table.size()) != d.size()) {
    throw DimensionError("map table has " + std::to_string(table.size()) +
                         " entries, state has " + std::to_string(d.size()));
  }
  Eigen::VectorXd out(d.size());
  for (Eigen::Index j = 0; j < d.size(); ++j) out[j] = table[j](d[j]);
  return out;
}

bool nonexpansive_probe(const CoordinateMap& map, int trials,
                        std::uint64_t rng_seed) {
  if (trials < 1) throw InvalidArgument("trials must be >= 1");
  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> log_scale(-3.0, 3.0);
  // Anchor half the draws around the kinks so both sides of each breakpoint
  // get exercised.
  const double kink = map.is_shifted() ? map.shift() : 0.0;
  const double t = map.threshold();
  for (int i = 0; i < trials; ++i) {
    const double scale = std::pow(10.0, log_scale(rng));
    double u = scale * gauss(rng);
    if (i % 2 == 1) {
      const double anchor = kink + ((i % 4 == 1) ? t : -t);
      u = anchor + 1e-2 * scale * gauss(rng);
    }
    const double v = u + std::pow(10.0, log_scale(rng)) * gauss(rng);
    if (std::abs(map(u) - map(v)) > std::abs(u - v) + 1e-12) return false;
  }
  return true;
}

}  // namespace kvopt
