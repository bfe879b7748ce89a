#include "kvopt/serialize.hpp"

#include <fstream>

#include "kvopt/error.hpp"

namespace kvopt {

namespace {

constexpr const char* kSystemFormat = "kvopt.system/1";

const json& field(const json& j, const char* name) {
  if (!j.is_object() || !j.contains(name)) {
    throw InvalidArgument(std::string("missing field '") + name + "'");
  }
  return j.at(name);
}

}  // namespace

json map_to_json(const CoordinateMap& map) {
  json j;
  j["kind"] = std::string(to_string(map.kind()));
  switch (map.kind()) {
    case MapKind::Ssr:
    case MapKind::NegSsr: j["t"] = map.threshold(); break;
    case MapKind::Affine:
      j["a"] = map.slope();
      j["b"] = map.intercept();
      break;
    case MapKind::Const: j["v"] = map.value(); break;
    case MapKind::Abs:
    case MapKind::Identity: break;
  }
  if (map.is_shifted()) {
    j["shift"] = map.shift();
    j["offset"] = map.offset();
  }
  return j;
}

CoordinateMap map_from_json(const json& j) {
  const MapKind kind = map_kind_from_string(field(j, "kind").get<std::string>());
  CoordinateMap map = CoordinateMap::identity();
  switch (kind) {
    case MapKind::Ssr: map = CoordinateMap::ssr(j.value("t", 1.0)); break;
    case MapKind::NegSsr: map = CoordinateMap::neg_ssr(j.value("t", 1.0)); break;
    case MapKind::Abs: map = CoordinateMap::abs(); break;
    case MapKind::Affine:
      map = CoordinateMap::affine(field(j, "a").get<double>(),
                                  field(j, "b").get<double>());
      break;
    case MapKind::Const:
      map = CoordinateMap::constant(field(j, "v").get<double>());
      break;
    case MapKind::Identity: break;
  }
  if (j.contains("shift") || j.contains("offset")) {
    map = map.shifted(j.value("shift", 0.0), j.value("offset", 0.0));
  }
  return map;
}

json vector_to_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from_json(const json& j) {
  if (!j.is_array()) throw InvalidArgument("expected an array of numbers");
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(),
                                           static_cast<Eigen::Index>(values.size()));
}

json matrix_to_json(const Eigen::MatrixXd& M) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(M.size()));
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    for (Eigen::Index c = 0; c < M.cols(); ++c) data.push_back(M(r, c));
  }
  return {{"rows", M.rows()}, {"cols", M.cols()}, {"data", std::move(data)}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = field(j, "rows").get<Eigen::Index>();
  const auto cols = field(j, "cols").get<Eigen::Index>();
  const auto data = field(j, "data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 ||
      static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw DimensionError("matrix data length does not match rows * cols");
  }
  using RowMajor =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  return Eigen::Map<const RowMajor>(data.data(), rows, cols);
}

json problem_to_json(const ProblemSpec& spec) {
  return {{"kind", std::string(to_string(spec.kind))},
          {"A", matrix_to_json(spec.A)},
          {"y", vector_to_json(spec.y)},
          {"rho_obj", spec.rho_obj},
          {"name", spec.name}};
}

ProblemSpec problem_from_json(const json& j) {
  return make_problem(
      problem_kind_from_string(field(j, "kind").get<std::string>()),
      matrix_from_json(field(j, "A")), vector_from_json(field(j, "y")),
      j.value("rho_obj", 1.0), j.value("name", std::string{}));
}

json system_to_json(const ReducedSystem& system) {
  const Eigen::Index K = system.size();
  json maps = json::array();
  for (const auto& m : system.maps) maps.push_back(map_to_json(m));
  json G = matrix_to_json(system.G).at("data");
  return {{"format", kSystemFormat},
          {"K", K},
          {"n", system.x_block.size()},
          {"m", system.w_block.size()},
          {"G", std::move(G)},
          {"f", vector_to_json(system.f)},
          {"maps", std::move(maps)},
          {"x_block", system.x_block},
          {"w_block", system.w_block},
          {"provenance", problem_to_json(system.provenance)}};
}

ReducedSystem system_from_json(const json& j) {
  if (j.value("format", std::string{}) != kSystemFormat) {
    throw InvalidArgument("not a system document (format != kvopt.system/1)");
  }
  const auto K = field(j, "K").get<Eigen::Index>();
  ReducedSystem sys;
  sys.G = matrix_from_json({{"rows", K}, {"cols", K}, {"data", field(j, "G")}});
  sys.f = vector_from_json(field(j, "f"));
  for (const auto& m : field(j, "maps")) sys.maps.push_back(map_from_json(m));
  sys.x_block = field(j, "x_block").get<std::vector<Eigen::Index>>();
  sys.w_block = field(j, "w_block").get<std::vector<Eigen::Index>>();
  sys.provenance = problem_from_json(field(j, "provenance"));
  sys.validate();
  return sys;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidArgument(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ServiceError("cannot write " + path);
  out << j.dump() << '\n';
}

}  // namespace kvopt
