#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dnstein/dnormal.hpp"

using namespace dnstein;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double phi_interval(double lo, double hi, double mean, double sd) {
  auto cdf = [&](double x) { return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0))); };
  return cdf(hi) - cdf(lo);
}

GaussianParams std_gauss(int d, double var = 1.0) {
  return GaussianParams{VectorXd::Zero(d), var * MatrixXd::Identity(d, d)};
}

}  // namespace

TEST_CASE("unit box at the origin of a standard normal", "[dnormal]") {
  double p = box_probability(LatticePoint{0}, std_gauss(1));
  double oracle = std::erf(0.5 / std::sqrt(2.0));  // Phi(1/2) - Phi(-1/2)
  REQUIRE(p == Catch::Approx(oracle).margin(1e-14));
  REQUIRE(p == Catch::Approx(0.3829249).margin(1e-7));
}

TEST_CASE("diagonal covariance factorizes", "[dnormal]") {
  GaussianParams g{VectorXd::Zero(2), MatrixXd::Zero(2, 2)};
  g.cov << 2.0, 0.0, 0.0, 5.0;
  g.mean << 0.25, -0.5;
  LatticePoint i{1, -2};
  double p = box_probability(i, g);
  double p1 = phi_interval(0.5, 1.5, 0.25, std::sqrt(2.0));
  double p2 = phi_interval(-2.5, -1.5, -0.5, std::sqrt(5.0));
  REQUIRE(p == Catch::Approx(p1 * p2).margin(1e-14));
}

TEST_CASE("correlated box probability against a Riemann oracle", "[dnormal]") {
  GaussianParams g{VectorXd::Zero(2), MatrixXd::Zero(2, 2)};
  g.cov << 2.0, 1.0, 1.0, 2.0;
  double p = box_probability(LatticePoint{0, 0}, g, 12);

  // midpoint rule with step 1e-3 over the unit box
  const int steps = 1000;
  const double h = 1.0 / steps;
  double det = 3.0;  // det [[2,1],[1,2]]
  double norm = 1.0 / (2.0 * M_PI * std::sqrt(det));
  // inverse of [[2,1],[1,2]] is [[2,-1],[-1,2]]/3
  double sum = 0.0;
  for (int a = 0; a < steps; ++a) {
    double x = -0.5 + (a + 0.5) * h;
    for (int b = 0; b < steps; ++b) {
      double y = -0.5 + (b + 0.5) * h;
      double q = (2.0 * x * x - 2.0 * x * y + 2.0 * y * y) / 3.0;
      sum += std::exp(-0.5 * q);
    }
  }
  double oracle = norm * sum * h * h;
  REQUIRE(p == Catch::Approx(oracle).margin(1e-8));
}

TEST_CASE("high-dimensional quadrature agrees with the tail-function product", "[dnormal]") {
  // a negligible off-diagonal forces the quadrature path; the product of
  // 1-d tails is then correct to the size of the perturbation
  const int d = 4;
  GaussianParams g{VectorXd::Zero(d), MatrixXd::Identity(d, d)};
  g.cov(0, 1) = g.cov(1, 0) = 1e-14;
  for (int i = 0; i < d; ++i) g.cov(i, i) = 1.0 + 0.25 * i;
  LatticePoint pt{0, 1, -1, 2};
  double via_quad = box_probability(pt, g, 6);
  double prod = 1.0;
  for (int j = 0; j < d; ++j) {
    double sd = std::sqrt(g.cov(j, j));
    prod *= phi_interval(pt[j] - 0.5, pt[j] + 0.5, 0.0, sd);
  }
  REQUIRE(via_quad == Catch::Approx(prod).margin(1e-10));

  // genuinely correlated: order 6 against order 10 bounds the rule error
  MatrixXd cov = MatrixXd::Identity(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j) cov(i, j) = 0.3;
  GaussianParams gc{VectorXd::Constant(d, 0.2), cov};
  double p6 = box_probability(LatticePoint{0, 0, 1, 0}, gc, 6);
  double p10 = box_probability(LatticePoint{0, 0, 1, 0}, gc, 10);
  REQUIRE(p6 == Catch::Approx(p10).margin(1e-9));
}

TEST_CASE("non positive definite covariance is rejected", "[dnormal]") {
  GaussianParams g{VectorXd::Zero(2), MatrixXd::Zero(2, 2)};
  g.cov << 1.0, 2.0, 2.0, 1.0;  // indefinite
  REQUIRE_THROWS_AS(box_probability(LatticePoint{0, 0}, g), std::invalid_argument);
  REQUIRE_THROWS_AS(dn_build(4.0, VectorXd::Zero(2), g.cov, 1e-10), std::invalid_argument);
}

TEST_CASE("dn build, d=1 centre mass and mass accounting", "[dnormal]") {
  DiscreteNormal dn = dn_build(9.0, VectorXd::Zero(1), MatrixXd::Identity(1, 1), 1e-10);
  double oracle = std::erf(1.0 / (6.0 * std::sqrt(2.0)));  // Phi(1/6) - Phi(-1/6)
  REQUIRE(dn.pmf.at(LatticePoint{0}) == Catch::Approx(oracle).margin(1e-14));
  REQUIRE(oracle == Catch::Approx(0.1324).margin(5e-5));
  REQUIRE(dn.pmf.mass() + dn.discarded_mass == Catch::Approx(1.0).margin(1e-9));
  REQUIRE(dn.discarded_mass <= 1e-10);
  REQUIRE(dn.pmf.mass() >= 1.0 - 1e-10);
}

TEST_CASE("centred dn is symmetric", "[dnormal]") {
  DiscreteNormal dn = dn_build(9.0, VectorXd::Zero(1), MatrixXd::Identity(1, 1), 1e-10);
  for (const auto& [x, w] : dn.pmf.support()) REQUIRE(dn.pmf.at(-x) == w);

  MatrixXd cov(2, 2);
  cov << 2.0, 1.0, 1.0, 2.0;
  DiscreteNormal dn2 = dn_build(4.0, VectorXd::Zero(2), cov / 4.0, 1e-8);
  for (const auto& [x, w] : dn2.pmf.support())
    REQUIRE(dn2.pmf.at(-x) == Catch::Approx(w).epsilon(1e-12));
}

TEST_CASE("product dn marginals match the 1-d build", "[dnormal]") {
  DiscreteNormal dn2 = dn_build(4.0, VectorXd::Zero(2), MatrixXd::Identity(2, 2), 1e-9);
  DiscreteNormal dn1 = dn_build(4.0, VectorXd::Zero(1), MatrixXd::Identity(1, 1), 1e-9);
  LatticePmf m0 = marginal(dn2.pmf, {0});
  for (const auto& [x, w] : dn1.pmf.support())
    REQUIRE(m0.at(x) == Catch::Approx(w).margin(1e-10));
}

TEST_CASE("translate tv against the 1-d box oracle", "[dnormal]") {
  DiscreteNormal dn = dn_build(9.0, VectorXd::Zero(1), MatrixXd::Identity(1, 1), 1e-10);
  TranslateTv tv = dn_translate_tv(dn, 0);

  double oracle = 0.0;
  for (Coord i = -40; i <= 40; ++i)
    oracle += std::abs(phi_interval(i - 0.5, i + 0.5, 0.0, 3.0) -
                       phi_interval(i - 1.5, i - 0.5, 0.0, 3.0));
  oracle *= 0.5;
  REQUIRE(tv.value == Catch::Approx(oracle).margin(1e-9));
  REQUIRE(tv.error_bar >= dn.discarded_mass);
}

TEST_CASE("translate tv decreases with n and scales like n^{-1/2}", "[dnormal]") {
  double v16 = dn_translate_tv(dn_build(16, VectorXd::Zero(1), MatrixXd::Identity(1, 1), 1e-10), 0).value;
  double v64 = dn_translate_tv(dn_build(64, VectorXd::Zero(1), MatrixXd::Identity(1, 1), 1e-10), 0).value;
  double v256 = dn_translate_tv(dn_build(256, VectorXd::Zero(1), MatrixXd::Identity(1, 1), 1e-10), 0).value;
  REQUIRE(v256 <= v64);
  REQUIRE(v64 <= v16);
  double lo = std::min({v16 * 4.0, v64 * 8.0, v256 * 16.0});
  double hi = std::max({v16 * 4.0, v64 * 8.0, v256 * 16.0});
  REQUIRE(hi <= 1.3 * lo);
}

TEST_CASE("diagonal product translate tv equals the 1-d value", "[dnormal]") {
  MatrixXd cov(2, 2);
  cov << 1.0, 0.0, 0.0, 2.5;
  DiscreteNormal dn2 = dn_build(16.0, VectorXd::Zero(2), cov, 1e-9);
  DiscreteNormal dn1 = dn_build(16.0, VectorXd::Zero(1), MatrixXd::Identity(1, 1), 1e-9);
  REQUIRE(dn_translate_tv(dn2, 0).value ==
          Catch::Approx(dn_translate_tv(dn1, 0).value).margin(1e-8));
}

TEST_CASE("moment checks at d=1, n=16", "[dnormal]") {
  DiscreteNormal dn = dn_build(16.0, VectorXd::Zero(1), MatrixXd::Identity(1, 1), 1e-10);
  auto rows = dn_moment_check(dn, 2);
  bool saw_var = false, saw_metric2 = false;
  for (const auto& r : rows) {
    REQUIRE(r.margin >= 0.0);
    if (r.name == "coordinate_variance_j1") {
      saw_var = true;
      REQUIRE(r.rhs == Catch::Approx(32.5));  // 1/2 + 2 n Sigma_11
      REQUIRE(r.lhs <= 32.5);
    }
    if (r.name == "metric_moment_l2") {
      saw_metric2 = true;
      REQUIRE(r.rhs == Catch::Approx(4.0 * std::sqrt(3.0) * 16.0));  // C(2) (nd)
    }
  }
  REQUIRE(saw_var);
  REQUIRE(saw_metric2);
}

TEST_CASE("moment checks pass with margin on the d=2 grid", "[dnormal]") {
  DiscreteNormal dn = dn_build(64.0, VectorXd::Zero(2), MatrixXd::Identity(2, 2), 1e-10);
  for (const auto& r : dn_moment_check(dn, 4)) {
    if (!r.precondition_ok) continue;
    REQUIRE(r.margin > 0.0);
  }
}

TEST_CASE("renormalized build carries no deficit", "[dnormal]") {
  DiscreteNormal dn = dn_build(9.0, VectorXd::Zero(1), MatrixXd::Identity(1, 1), 1e-8, true);
  REQUIRE(dn.discarded_mass == 0.0);
  REQUIRE(dn.pmf.mass() == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("support cap triggers the documented error", "[dnormal]") {
  REQUIRE_THROWS_WITH(
      dn_build(1e6, VectorXd::Zero(2), MatrixXd::Identity(2, 2), 1e-10, false, 0, 1000),
      Catch::Matchers::ContainsSubstring("support cap"));
}
