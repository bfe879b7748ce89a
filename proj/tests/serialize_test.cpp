#include <random>

#include <gtest/gtest.h>

#include "kvopt/compiler.hpp"
#include "kvopt/error.hpp"
#include "kvopt/serialize.hpp"
#include "test_support.hpp"

namespace kvopt {
namespace {

using testing::vec;

TEST(Serialize, MapDocuments) {
  EXPECT_EQ(map_to_json(CoordinateMap::ssr(1.0)), json::parse(R"({"kind":"SSR","t":1.0})"));
  EXPECT_EQ(map_to_json(CoordinateMap::constant(-3.0)),
            json::parse(R"({"kind":"CONST","v":-3.0})"));
  EXPECT_EQ(map_from_json(json::parse(R"({"kind":"ABS"})")), CoordinateMap::abs());
  EXPECT_EQ(map_from_json(json::parse(R"({"kind":"NEG_SSR","t":1,"shift":2,"offset":-2})")),
            CoordinateMap::neg_ssr(1.0).shifted(2.0, -2.0));
  EXPECT_THROW(map_from_json(json::parse(R"({"kind":"AFFINE","a":2,"b":0})")),
               InvalidArgument);
  EXPECT_THROW(map_from_json(json::parse(R"({"kind":"CONST"})")), InvalidArgument);
  EXPECT_THROW(map_from_json(json::parse(R"({"t":1})")), InvalidArgument);
}

TEST(Serialize, MatrixIsRowMajor) {
  Eigen::MatrixXd M(2, 3);
  M << 1, 2, 3, 4, 5, 6;
  const json j = matrix_to_json(M);
  EXPECT_EQ(j.at("data"), json({1.0, 2.0, 3.0, 4.0, 5.0, 6.0}));
  EXPECT_EQ(matrix_from_json(j), M);
  EXPECT_THROW(matrix_from_json(json::parse(R"({"rows":2,"cols":2,"data":[1,2,3]})")),
               DimensionError);
}

// Property: problem and system documents round-trip bit for bit.
TEST(Serialize, RandomRoundTrips) {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> dim(1, 12);
  for (int trial = 0; trial < 30; ++trial) {
    const auto kind = static_cast<ProblemKind>(trial % 3);
    const Eigen::MatrixXd A = testing::random_matrix(dim(rng), dim(rng), rng);
    const auto full = make_problem(kind, A, testing::random_vector(A.rows(), rng),
                                   1.0 + trial, "t" + std::to_string(trial));
    const ProblemSpec back = problem_from_json(json::parse(problem_to_json(full).dump()));
    EXPECT_EQ(back.kind, full.kind);
    EXPECT_EQ(back.A, full.A);
    EXPECT_EQ(back.y, full.y);
    EXPECT_EQ(back.rho_obj, full.rho_obj);
    EXPECT_EQ(back.name, full.name);

    const auto sys = compile(full);
    const auto sys_back = system_from_json(json::parse(system_to_json(sys).dump()));
    EXPECT_EQ(sys_back.G, sys.G);
    EXPECT_EQ(sys_back.f, sys.f);
    EXPECT_EQ(sys_back.maps, sys.maps);
    EXPECT_EQ(sys_back.x_block, sys.x_block);
    EXPECT_EQ(sys_back.w_block, sys.w_block);
    EXPECT_EQ(sys_back.provenance.y, sys.provenance.y);
  }
}

TEST(Serialize, RejectsForeignDocuments) {
  EXPECT_THROW(system_from_json(json::parse(R"({"K":2})")), InvalidArgument);
  json doc = system_to_json(testing::nnls_toy());
  doc["f"] = json({0.0});
  EXPECT_THROW(system_from_json(doc), DimensionError);
  EXPECT_THROW(problem_from_json(json::parse(R"({"kind":"qp"})")), InvalidArgument);
  EXPECT_THROW(read_json_file("/nonexistent/kvopt.json"), NotFound);
}

}  // namespace
}  // namespace kvopt
