#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace kvopt {

enum class MapKind { Ssr, NegSsr, Abs, Affine, Const, Identity };

std::string_view to_string(MapKind kind);
MapKind map_kind_from_string(std::string_view name);

/*
 * One coordinatewise nonexpansive nonlinearity m_j.
 *
 *   SSR(t)      -u               |u| <= t
 *               u - 2 t sign(u)  |u| >  t
 *   NEG_SSR(t)  SSR(t)(-u)
 *   ABS         |u|
 *   AFFINE      a u + b,  |a| <= 1
 *   CONST       v
 *   IDENTITY    u
 *
 * A shifted map evaluates as offset + base(u - shift). Every constructible
 * map is 1-Lipschitz; the factories reject parameters that would break that.
 */
class CoordinateMap {
 public:
  static CoordinateMap ssr(double threshold = 1.0);
  static CoordinateMap neg_ssr(double threshold = 1.0);
  static CoordinateMap abs();
  static CoordinateMap affine(double slope, double offset);
  static CoordinateMap constant(double value);
  static CoordinateMap identity();

  // Returns a copy wrapped as u -> offset + base(u - shift).
  CoordinateMap shifted(double shift, double offset) const;

  // Throws EvaluationError for non-finite u.
  double operator()(double u) const;

  MapKind kind() const { return kind_; }
  double threshold() const { return threshold_; }
  double slope() const { return slope_; }
  double intercept() const { return intercept_; }
  double value() const { return value_; }
  bool is_shifted() const { return shifted_; }
  double shift() const { return shift_; }
  double offset() const { return offset_; }

  bool operator==(const CoordinateMap&) const = default;

 private:
  explicit CoordinateMap(MapKind kind) : kind_(kind) {}
  double eval_base(double u) const;

  MapKind kind_;
  double threshold_ = 1.0;
  double slope_ = 1.0;
  double intercept_ = 0.0;
  double value_ = 0.0;
  bool shifted_ = false;
  double shift_ = 0.0;
  double offset_ = 0.0;
};

inline double eval_map(const CoordinateMap& map, double u) { return map(u); }

// Applies table[j] to d[j] for every coordinate.
Eigen::VectorXd eval_m(const std::vector<CoordinateMap>& table,
                       const Eigen::VectorXd& d);

// Randomized check of |m(u) - m(v)| <= |u - v| + 1e-12 over `trials` pairs.
bool nonexpansive_probe(const CoordinateMap& map, int trials,
                        std::uint64_t rng_seed);

}  // namespace kvopt
