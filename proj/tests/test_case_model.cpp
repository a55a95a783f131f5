#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pgnn/case_model.hpp"
#include "pgnn/errors.hpp"
#include "test_util.hpp"

#include <set>

using namespace pgnn;
using testutil::golden;

namespace {

const char* kTwoBus = R"(BASEMVA 100
BUS
1 3 0 0 0 0 1.0 0
2 1 0 0 0 0 1.0 0
BRANCH
1 2 0 0.1 0 1 0
GEN
1 100 0
)";

const char* kThreeBus = R"(BASEMVA 100
BUS
1 3 0 0 0 0 1.0 0
2 1 50 20 0 0 1.0 0
3 1 30 10 0 0 1.0 0
BRANCH
1 2 0.01 0.1 0 1 0
2 3 0.01 0.1 0 1 0
GEN
1 200 80
)";

}  // namespace

TEST_CASE("parse converts to per-unit and radians") {
  const auto sys = parse_case(kThreeBus);
  REQUIRE(sys.size() == 3);
  CHECK(sys.buses[1].p_demand == doctest::Approx(0.5));
  CHECK(sys.buses[2].q_demand == doctest::Approx(0.1));
  CHECK(sys.generators.at(0).p_max == doctest::Approx(2.0));
  CHECK(sys.generators.at(0).p_gen == doctest::Approx(0.8));
  CHECK(sys.slack_index() == 0);
  CHECK(sys.index_of(3) == 2);
  CHECK(sys.index_of(9) == -1);
}

TEST_CASE("GEN rows accept an omitted dispatch column") {
  const auto sys = parse_case("BUS\n1 3 0 0 0 0 1 0\n2 1 10 0 0 0 1 0\nBRANCH\n1 2 0 0.1 0 0 0\nGEN\n1 50\n");
  CHECK(sys.generators.at(0).p_gen == 0.0);
  CHECK(sys.branches.at(0).tap == 1.0);  // 0 means nominal
}

TEST_CASE("malformed case text reports the line") {
  try {
    parse_case("BUS\n1 3 0 0 0 0 1.0\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse_case("1 3 0 0 0 0 1 0\n"), ParseError);
  CHECK_THROWS_AS(parse_case("BUS\n1 3 0 0 0 0 1 x\n"), ParseError);
  CHECK_THROWS_AS(parse_case("BUS\n1 7 0 0 0 0 1 0\n"), ParseError);
}

TEST_CASE("semantic violations") {
  // two slacks
  CHECK_THROWS_AS(parse_case("BUS\n1 3 0 0 0 0 1 0\n2 3 0 0 0 0 1 0\n"), ValidationError);
  // no slack
  CHECK_THROWS_AS(parse_case("BUS\n1 1 0 0 0 0 1 0\n2 1 0 0 0 0 1 0\n"), ValidationError);
  // dangling branch
  CHECK_THROWS_AS(parse_case("BUS\n1 3 0 0 0 0 1 0\n2 1 0 0 0 0 1 0\nBRANCH\n1 5 0 0.1 0 1 0\n"),
                  ValidationError);
  // duplicate id
  CHECK_THROWS_AS(parse_case("BUS\n1 3 0 0 0 0 1 0\n1 1 0 0 0 0 1 0\n"), ValidationError);
  // zero impedance
  CHECK_THROWS_AS(parse_case("BUS\n1 3 0 0 0 0 1 0\n2 1 0 0 0 0 1 0\nBRANCH\n1 2 0 0 0 1 0\n"),
                  ValidationError);
}

TEST_CASE("purely reactive line") {
  const auto y = build_admittance(parse_case(kTwoBus));
  CHECK(y.b(0, 0) == doctest::Approx(-10.0));
  CHECK(y.b(0, 1) == doctest::Approx(10.0));
  CHECK(y.b(1, 0) == doctest::Approx(10.0));
  CHECK(y.b(1, 1) == doctest::Approx(-10.0));
  CHECK(y.g.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("shunt-only system") {
  auto sys = parse_case("BUS\n1 3 0 0 50 0 1 0\n2 1 0 0 0 0 1 0\n");
  const auto y = build_admittance(sys);
  CHECK(y.g(0, 0) == doctest::Approx(0.5));
  CHECK(y.g(1, 1) == 0.0);
  CHECK(y.g(0, 1) == 0.0);
  CHECK(y.b.cwiseAbs().maxCoeff() == 0.0);
  CHECK_FALSE(y.pattern(0, 1));
}

TEST_CASE("three-bus admittance matches the oracle") {
  const auto y = build_admittance(parse_case(kThreeBus));
  CHECK(testutil::max_abs_diff(y.g, testutil::matrix(golden()["ybus3_g"])) < 1e-12);
  CHECK(testutil::max_abs_diff(y.b, testutil::matrix(golden()["ybus3_b"])) < 1e-12);
  CHECK_FALSE(y.pattern(0, 2));
  CHECK(y.pattern(0, 1));
}

TEST_CASE("tap and phase shift enter asymmetrically") {
  auto sys = parse_case("BUS\n1 3 0 0 0 0 1 0\n2 1 0 0 0 0 1 0\nBRANCH\n1 2 0 0.1 0 0.95 10\n");
  const auto y = build_admittance(sys);
  CHECK(y.b(0, 0) == doctest::Approx(-10.0 / (0.95 * 0.95)));
  CHECK(y.b(1, 1) == doctest::Approx(-10.0));
  CHECK(y.g(0, 1) != doctest::Approx(y.g(1, 0)));
}

TEST_CASE("parallel branches are summed") {
  auto sys = parse_case(
      "BUS\n1 3 0 0 0 0 1 0\n2 1 0 0 0 0 1 0\nBRANCH\n1 2 0 0.1 0 1 0\n1 2 0 0.1 0 1 0\n");
  const auto y = build_admittance(sys);
  CHECK(y.b(0, 1) == doctest::Approx(20.0));
  CHECK(adjacency(sys).a(0, 1) == 1.0);
}

TEST_CASE("adjacency of small systems") {
  const auto a2 = adjacency(parse_case(kTwoBus)).a;
  CHECK(a2 == Eigen::MatrixXd::Ones(2, 2));
  const auto a3 = adjacency(parse_case(kThreeBus)).a;
  CHECK(a3(0, 2) == 0.0);
  CHECK(a3(2, 0) == 0.0);
  CHECK(a3(0, 1) == 1.0);
  CHECK(a3(1, 2) == 1.0);
  CHECK(a3.diagonal() == Eigen::VectorXd::Ones(3));
}

TEST_CASE("IEEE 57 structure") {
  const auto sys = load_case(testutil::case_path("ieee57"));
  REQUIRE(sys.size() == 57);
  const auto a = adjacency(sys);
  const auto y = build_admittance(sys);
  const auto offdiag = (a.a.array() != 0.0).count() - 57;
  CHECK(offdiag == golden()["ieee57_offdiag_nnz"].get<long>());
  CHECK(y.g.cwiseAbs().sum() == doctest::Approx(golden()["ieee57_abs_g_sum"].get<double>()).epsilon(1e-9));
  CHECK(y.b.cwiseAbs().sum() == doctest::Approx(golden()["ieee57_abs_b_sum"].get<double>()).epsilon(1e-9));
  // pattern(Y) within pattern(A) and G o A = G, B o A = B.
  CHECK((y.pattern && !a.pattern()).count() == 0);
  CHECK(y.g.cwiseProduct(a.a) == y.g);
  CHECK(y.b.cwiseProduct(a.a) == y.b);
}

TEST_CASE("serialize round trip") {
  for (const char* name : {"ieee57", "ieee118"}) {
    const auto sys = load_case(testutil::case_path(name));
    CHECK(parse_case(serialize_case(sys)) == sys);
  }
  const auto small = parse_case(kThreeBus);
  CHECK(parse_case(serialize_case(small)) == small);
}
