#include <doctest.h>

#include <sstream>

#include "braids/data.hpp"
#include "braids/stats.hpp"
#include "helpers.hpp"

using namespace braids;

namespace {

DataSchema schema_xyz() {
  DataSchema s;
  s.outcome = "y";
  s.treatment = "a";
  s.covariates = {{"x", ColumnKind::kContinuous}, {"g", ColumnKind::kCategorical}};
  return s;
}

Dataset parse(const std::string& text, DataSchema s = schema_xyz()) {
  std::istringstream in(text);
  return parse_dataset(in, s);
}

}  // namespace

TEST_CASE("parses comma and tab separated input") {
  const Dataset d = parse("y,a,x,g\n1.0,1,0.5,b\n2.0,0,1.5,a\n3.0,1,2.5,b\n");
  CHECK(d.n() == 3);
  CHECK(d.p() == 2);
  CHECK(d.column(1).categorical());
  CHECK(d.column(1).levels == 2);
  CHECK(d.x()(0, 1) == 1.0);  // "b" sorts after "a"
  CHECK(d.propensity()[0] == doctest::Approx(2.0 / 3.0));
  const Dataset t = parse("y\ta\tx\tg\n1\t1\t0\tq\n2\t0\t1\tr\n");
  CHECK(t.n() == 2);
}

TEST_CASE("numeric categorical labels sort numerically") {
  const Dataset d = parse("y,a,x,g\n1,1,0,10\n2,0,1,9\n3,1,2,2\n");
  CHECK(d.column(1).level_labels == std::vector<std::string>{"2", "9", "10"});
  CHECK(d.x()(0, 1) == 2.0);
}

TEST_CASE("invalid input is rejected") {
  CHECK_THROWS_WITH_AS(parse("y,a,x,g\n1,2,0,a\n"), doctest::Contains("invalid treatment value"), DataError);
  CHECK_THROWS_AS(parse("y,a,x,g\nNA,1,0,a\n"), DataError);
  CHECK_THROWS_AS(parse("y,a,x,g\n1,1,,a\n"), DataError);
  CHECK_THROWS_AS(parse("y,a,x\n1,1,0\n"), DataError);
  CHECK_THROWS_AS(parse("y,a,x,g\n1,1,abc,a\n"), DataError);
  CHECK_THROWS_AS(parse("y,a,x,g\n"), DataError);
  DataSchema s = schema_xyz();
  s.propensity_constant = 1.0;
  CHECK_THROWS_AS(parse("y,a,x,g\n1,1,0,a\n2,0,1,b\n", s), DataError);
}

TEST_CASE("propensity bounds are enforced") {
  Eigen::MatrixXd x(2, 1);
  x << 0, 1;
  Eigen::VectorXd y(2), a(2);
  y << 1, 2;
  a << 1, 0;
  std::vector<ColumnSpec> cols{ColumnSpec::continuous("x")};
  CHECK_THROWS_AS(Dataset(y, a, x, cols, Eigen::VectorXd::Constant(2, 0.0)), DataError);
  CHECK_THROWS_AS(Dataset(y, a, x, cols, Eigen::VectorXd::Constant(2, 1e-4)), DataError);
  CHECK_NOTHROW(Dataset(y, a, x, cols, Eigen::VectorXd::Constant(2, 1e-4), {}, 1e-5));
}

TEST_CASE("standardization round trips and rejects constant columns") {
  const Dataset d = testing::random_dataset(50, 3, 11);
  auto [s, recipe] = standardize(d);
  for (int j = 0; j < 3; ++j) {
    const Eigen::VectorXd c = s.x().col(j);
    CHECK(std::abs(mean(as_span(c))) < 1e-12);
    CHECK(variance(as_span(c), 1) == doctest::Approx(1.0));
  }
  const Dataset back = recipe.invert(s);
  CHECK((back.x() - d.x()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((back.y() - d.y()).cwiseAbs().maxCoeff() < 1e-12);
  Eigen::MatrixXd x = d.x();
  x.col(1).setConstant(2.0);
  const Dataset flat = d.with_covariates(x, d.columns());
  CHECK_THROWS_WITH_AS(standardize(flat), doctest::Contains("zero-variance column x2"), DataError);
}

TEST_CASE("continuous cutpoints respect min_leaf") {
  Eigen::MatrixXd x(6, 1);
  x << 1, 2, 3, 4, 5, 6;
  const Dataset d = testing::continuous_dataset(x, Eigen::VectorXd::Zero(6), Eigen::VectorXd::Zero(6));
  const CutpointGrid g = build_cutpoints(d, 2);
  REQUIRE(g.column(0).size() == 3);
  CHECK(g.column(0)[0].threshold == 2.5);
  CHECK(g.column(0)[2].threshold == 4.5);
  CHECK(build_cutpoints(d, 1, 2).column(0).size() == 2);
}

TEST_CASE("categorical cutpoints enumerate subsets up to complement") {
  for (int levels : {2, 3, 4, 5}) {
    const int n = 20;
    Eigen::MatrixXd x(n, 1);
    for (int i = 0; i < n; ++i) x(i, 0) = i % levels;
    std::vector<ColumnSpec> cols{ColumnSpec::categorical("g", levels)};
    const Dataset d(Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), x, cols, Eigen::VectorXd::Constant(n, 0.5));
    const auto splits = build_cutpoints(d, 1).column(0);
    const std::size_t expected = levels == 2 ? 1 : levels == 3 ? 3 : levels == 4 ? 7 : 5;
    CHECK(splits.size() == expected);
  }
}

TEST_CASE("splits route and describe") {
  std::vector<ColumnSpec> cols{ColumnSpec::continuous("age"), ColumnSpec::categorical("race", 3, {"a", "b", "c"})};
  const Split s{0, false, 1.5, 0};
  CHECK(s.goes_left(1.5));
  CHECK_FALSE(s.goes_left(1.6));
  const Split c{1, true, 0.0, 0b101};
  CHECK(c.goes_left(2.0));
  CHECK_FALSE(c.goes_left(1.0));
  CHECK(s.describe(cols).find("age") != std::string::npos);
  CHECK(c.describe(cols).find("race") != std::string::npos);
  CHECK(Split{0, false, 1.0, 0} < Split{0, false, 2.0, 0});
  CHECK(Split{0, false, 9.0, 0} < Split{1, false, 0.0, 0});
}

TEST_CASE("subset and column lookup") {
  const Dataset d = testing::random_dataset(10, 2, 3);
  const std::vector<int> rows{1, 3, 5};
  const Dataset s = d.subset(rows);
  CHECK(s.n() == 3);
  CHECK(s.y()[1] == d.y()[3]);
  CHECK(d.column_index("x2") == 1);
  CHECK_THROWS_AS(d.column_index("nope"), DataError);
}
