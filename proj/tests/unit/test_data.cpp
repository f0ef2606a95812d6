#include <doctest.h>

#include "dagmix/data.hpp"
#include "support.hpp"

using namespace dagmix;

namespace {

ModelSpec with_covariate() {
  return parse_model(R"({"covariates":["age"],"nodes":[
      {"name":"U","categories":2,"latent":true,"link":"adjacent"},
      {"name":"A","categories":3,"parents":["U"],"covariates":["age"]},
      {"name":"B","categories":2,"parents":["U"]}]})");
}

}  // namespace

TEST_CASE("csv reading maps columns by name") {
  const ModelSpec m = with_covariate();
  const Dataset d = read_csv(m, "B,age,A\n1,0.5,2\n0,-1,0\n");
  REQUIRE(d.size() == 2);
  CHECK(d.observed_nodes == std::vector<int>{1, 2});
  CHECK(d.records[0].categories == std::vector<int>{2, 1});
  CHECK(d.records[0].covariates == std::vector<double>{0.5});
  CHECK(d.records[1].weight == 1.0);
}

TEST_CASE("latent columns are ignored and weights honoured") {
  ModelSpec m = testing::lca_model(2);
  const Dataset d = read_csv(m, "U,A1,A2,weight\n1,0,1,3\n0,1,1,2.5\n");
  CHECK(d.total_weight() == doctest::Approx(5.5));
  CHECK(d.records[1].categories == std::vector<int>{1, 1});
}

TEST_CASE("csv errors are data errors") {
  const ModelSpec m = testing::lca_model(2);
  CHECK_THROWS_AS(read_csv(m, "A1,A2\n0,2\n"), DataError);
  CHECK_THROWS_AS(read_csv(m, "A1\n0\n"), DataError);
  CHECK_THROWS_AS(read_csv(m, "A1,A2,Q\n0,1,1\n"), DataError);
  CHECK_THROWS_AS(read_csv(m, "A1,A2\n0,x\n"), DataError);
  CHECK_THROWS_AS(read_csv(m, "A1,A2\n0,1,1\n"), DataError);
  CHECK_THROWS_AS(read_csv(m, "A1,A2,weight\n0,1,-1\n"), DataError);
  CHECK_THROWS_AS(read_csv(m, ""), DataError);
  CHECK_THROWS_AS(read_csv_file(m, "/nonexistent/file.csv"), DataError);
}

TEST_CASE("grouped and ungrouped forms convert both ways") {
  const ModelSpec m = testing::lca_model(2);
  const Dataset d = read_csv(m, "A1,A2\n0,1\n1,1\n0,1\n0,1\n");
  const Dataset g = d.grouped();
  REQUIRE(g.size() == 2);
  CHECK(g.records[0].weight == 3.0);
  CHECK(g.ungrouped().size() == 4);
  CHECK(g.ungrouped().grouped().records == g.records);
  Dataset frac = g;
  frac.records[0].weight = 0.5;
  CHECK_THROWS_AS(frac.ungrouped(), DataError);
}

TEST_CASE("write then read round trips") {
  const ModelSpec m = with_covariate();
  Dataset d = make_dataset(m);
  d.records = {{{1, 0}, {0.125}, 1.0}, {{2, 1}, {-3.5}, 2.0}};
  CHECK(read_csv(m, write_csv(m, d)).records == d.records);
  check_compatible(m, d);
  d.records[0].categories[0] = 3;
  CHECK_THROWS_AS(check_compatible(m, d), DataError);
}
