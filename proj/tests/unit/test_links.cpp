#include <doctest.h>

#include <cmath>
#include <random>

#include "dagmix/links.hpp"
#include "support.hpp"

using namespace dagmix;
using testing::logit;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) out[k++] = x;
  return out;
}

Eigen::VectorXd random_logits(std::mt19937_64& rng, LinkKind link, int c) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  Eigen::VectorXd lam(c - 1);
  for (int h = 0; h < c - 1; ++h) lam[h] = u(rng);
  if (link == LinkKind::global) std::sort(lam.data(), lam.data() + lam.size(), std::greater<>());
  return lam;
}

}  // namespace

TEST_CASE("linear predictor examples") {
  ModelSpec m;
  m.nodes = {testing::node("P", 3, LinkKind::global), testing::node("Z", 2, LinkKind::global, {0})};
  const Eigen::VectorXd block = vec({0.5, 1.0, -0.5});
  CHECK(linear_predictor(m, 1, std::vector<int>{2}, {}, block)[0] == doctest::Approx(1.0));
  CHECK(linear_predictor(m, 1, std::vector<int>{1}, {}, block)[0] == doctest::Approx(1.5));
  CHECK(linear_predictor(m, 1, std::vector<int>{0}, {}, block)[0] == doctest::Approx(0.5));

  ModelSpec three;
  three.nodes = {testing::node("Z", 3, LinkKind::adjacent)};
  const auto lam = linear_predictor(three, 0, std::vector<int>{}, {}, vec({1.0, -2.0}));
  CHECK(lam[0] == doctest::Approx(1.0));
  CHECK(lam[1] == doctest::Approx(-1.0));

  CHECK_THROWS_AS(linear_predictor(m, 1, std::vector<int>{0}, {}, vec({0.5, 1.0})), ArgumentError);
}

TEST_CASE("linear predictor with covariates and per-logit slopes") {
  const ModelSpec m = parse_model(R"({"covariates":["x","w"],"nodes":[
      {"name":"A","categories":3,"covariates":["x","w"]},
      {"name":"B","categories":3,"covariates":["w"],"covariate_slopes":"per_logit"}]})");
  const std::vector<double> cov{2.0, -1.0};
  const auto a = linear_predictor(m, 0, std::vector<int>{}, cov, vec({0.5, -1.0, 0.25, 3.0}));
  CHECK(a[0] == doctest::Approx(0.5 + 0.5 - 3.0));
  CHECK(a[1] == doctest::Approx(-0.5 + 0.5 - 3.0));
  const auto b = linear_predictor(m, 1, std::vector<int>{}, cov, vec({0.0, 0.0, 1.0, 2.0}));
  CHECK(b[0] == doctest::Approx(-1.0));
  CHECK(b[1] == doctest::Approx(-2.0));
}

TEST_CASE("design override rows are used verbatim") {
  const ModelSpec m = parse_model(R"({"nodes":[{"name":"A","categories":2},{"name":"B","categories":2},
      {"name":"C","categories":2,"parents":["A","B"],"design":[[1,0,0,0],[1,0,1,0],[1,1,0,0],[1,1,1,1]]}]})");
  const Eigen::VectorXd b = vec({-1.0, 0.5, 0.25, 2.0});
  CHECK(linear_predictor(m, 2, std::vector<int>{0, 0}, {}, b)[0] == doctest::Approx(-1.0));
  CHECK(linear_predictor(m, 2, std::vector<int>{0, 1}, {}, b)[0] == doctest::Approx(-0.75));
  CHECK(linear_predictor(m, 2, std::vector<int>{1, 0}, {}, b)[0] == doctest::Approx(-0.5));
  CHECK(linear_predictor(m, 2, std::vector<int>{1, 1}, {}, b)[0] == doctest::Approx(1.75));
  const auto d = design_block(m, 2, std::vector<int>{1, 1}, {});
  CHECK(d.rows() == 1);
  CHECK(d(0, 3) == 1.0);
}

TEST_CASE("logits to probabilities examples") {
  const auto u = logits_to_probs(LinkKind::adjacent, vec({0.0, 0.0}));
  for (int h = 0; h < 3; ++h) CHECK(u[h] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const auto a = logits_to_probs(LinkKind::adjacent, vec({std::log(2.0), std::log(2.0)}));
  CHECK(a[0] == doctest::Approx(1.0 / 7.0).epsilon(1e-14));
  CHECK(a[1] == doctest::Approx(2.0 / 7.0).epsilon(1e-14));
  CHECK(a[2] == doctest::Approx(4.0 / 7.0).epsilon(1e-14));
  const auto g = logits_to_probs(LinkKind::global, vec({logit(0.9), logit(0.4)}));
  CHECK(g[0] == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(g[1] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(g[2] == doctest::Approx(0.4).epsilon(1e-14));
}

TEST_CASE("global link rejects non-decreasing logits") {
  try {
    logits_to_probs(LinkKind::global, vec({0.0, 0.5}));
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("invalid cumulative logits") != std::string::npos);
  }
  CHECK_THROWS_AS(logits_to_probs(LinkKind::global, vec({0.3, 0.3})), NumericalError);
  CHECK_THROWS_AS(dprobs_dlogits(LinkKind::global, vec({0.0, 0.5})), NumericalError);
}

TEST_CASE("probabilities to logits examples") {
  for (auto link : {LinkKind::adjacent, LinkKind::global, LinkKind::continuation})
    CHECK(probs_to_logits(link, vec({0.5, 0.5}))[0] == doctest::Approx(0.0));
  const auto g = probs_to_logits(LinkKind::global, vec({0.1, 0.5, 0.4}));
  CHECK(g[0] == doctest::Approx(logit(0.9)).epsilon(1e-13));
  CHECK(g[1] == doctest::Approx(logit(0.4)).epsilon(1e-13));
  const auto a = probs_to_logits(LinkKind::adjacent, vec({1.0 / 7, 2.0 / 7, 4.0 / 7}));
  CHECK(a[0] == doctest::Approx(std::log(2.0)).epsilon(1e-13));
  CHECK(a[1] == doctest::Approx(std::log(2.0)).epsilon(1e-13));
  CHECK_THROWS_AS(probs_to_logits(LinkKind::adjacent, vec({0.0, 1.0})), ArgumentError);
  CHECK_THROWS_AS(probs_to_logits(LinkKind::global, vec({-0.1, 1.1})), ArgumentError);
}

TEST_CASE("continuation link matches its defining ratio") {
  const Eigen::VectorXd p = vec({0.2, 0.3, 0.1, 0.4});
  const auto lam = probs_to_logits(LinkKind::continuation, p);
  CHECK(lam[0] == doctest::Approx(std::log(0.8 / 0.2)));
  CHECK(lam[1] == doctest::Approx(std::log(0.5 / 0.3)));
  CHECK(lam[2] == doctest::Approx(std::log(0.4 / 0.1)));
}

TEST_CASE("derivative examples") {
  const auto d = dprobs_dlogits(LinkKind::global, vec({0.0}));
  CHECK(d(1, 0) == doctest::Approx(0.25));
  CHECK(d(0, 0) == doctest::Approx(-0.25));

  const Eigen::VectorXd lam = vec({logit(0.9), logit(0.4)});
  const auto j = dprobs_dlogits(LinkKind::global, lam);
  for (int k = 0; k < 2; ++k) {
    Eigen::VectorXd up = lam, dn = lam;
    up[k] += 1e-6;
    dn[k] -= 1e-6;
    const Eigen::VectorXd fd = (logits_to_probs(LinkKind::global, up) - logits_to_probs(LinkKind::global, dn)) / 2e-6;
    CHECK((fd - j.col(k)).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("property: round trips, normalization, derivatives") {
  std::mt19937_64 rng(41);
  for (auto link : {LinkKind::adjacent, LinkKind::global, LinkKind::continuation}) {
    for (int t = 0; t < 300; ++t) {
      const int c = std::uniform_int_distribution<int>(2, 6)(rng);
      const Eigen::VectorXd lam = random_logits(rng, link, c);
      const Eigen::VectorXd p = logits_to_probs(link, lam);
      CHECK(std::abs(p.sum() - 1.0) < 1e-14);
      CHECK(p.minCoeff() >= 0.0);
      CHECK((probs_to_logits(link, p) - lam).cwiseAbs().maxCoeff() < 1e-9);
      CHECK((logits_to_probs(link, probs_to_logits(link, p)) - p).cwiseAbs().maxCoeff() < 1e-12);

      const std::vector<double> expected = testing::oracle_probs(link, std::vector<double>(lam.data(), lam.data() + lam.size()));
      for (int h = 0; h < c; ++h) CHECK(std::abs(p[h] - expected[h]) < 1e-14);

      const Eigen::MatrixXd j = dprobs_dlogits(link, lam);
      CHECK(j.colwise().sum().cwiseAbs().maxCoeff() < 1e-14);
    }
  }
}

TEST_CASE("binary adjacent and global coincide") {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> u(-8.0, 8.0);
  for (int t = 0; t < 100; ++t) {
    const Eigen::VectorXd lam = vec({u(rng)});
    CHECK((logits_to_probs(LinkKind::adjacent, lam) - logits_to_probs(LinkKind::global, lam)).cwiseAbs().maxCoeff() <
          1e-15);
  }
}

TEST_CASE("extreme logits stay finite") {
  const auto p = logits_to_probs(LinkKind::global, vec({40.0, -40.0}));
  CHECK(std::isfinite(p[0]));
  CHECK(p[1] == doctest::Approx(1.0));
  const auto q = logits_to_probs(LinkKind::adjacent, vec({700.0, 700.0}));
  CHECK(std::isfinite(q[2]));
  CHECK(expit(-800.0) >= 0.0);
  CHECK(expit(800.0) == 1.0);
}

TEST_CASE("parameter validity for global nodes") {
  ModelSpec m;
  m.nodes = {testing::node("Z", 3, LinkKind::global)};
  CHECK(parameters_valid(m, vec({1.0, -1.0})));
  CHECK_FALSE(parameters_valid(m, vec({1.0, 0.5})));
}
