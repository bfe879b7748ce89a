#pragma once

#include <string>

#include <Eigen/Core>
#include <json.hpp>

#include "kvopt/coordinate_map.hpp"
#include "kvopt/problem.hpp"

namespace kvopt {

using json = nlohmann::json;

// Map: {"kind": "SSR", "t": 1} plus "a"/"b" (AFFINE), "v" (CONST) and
// "shift"/"offset" when shifted.
json map_to_json(const CoordinateMap& map);
CoordinateMap map_from_json(const json& j);

json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const json& j);

// {"rows": m, "cols": n, "data": [row-major]}
json matrix_to_json(const Eigen::MatrixXd& M);
Eigen::MatrixXd matrix_from_json(const json& j);

// Problem file: {"kind", "A": {rows, cols, data}, "y", "rho_obj", "name"}
json problem_to_json(const ProblemSpec& spec);
ProblemSpec problem_from_json(const json& j);

// System file: {"format", "K", "n", "m", "G" (row-major K*K), "f", "maps",
// "x_block", "w_block", "provenance"}
json system_to_json(const ReducedSystem& system);
ReducedSystem system_from_json(const json& j);

json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const json& j);

}  // namespace kvopt
