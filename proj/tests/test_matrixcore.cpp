#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "dnstein/matrixcore.hpp"

using namespace dnstein;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd random_spd(std::mt19937_64& rng, int d, double ridge = 0.05) {
  std::normal_distribution<double> g(0.0, 1.0);
  MatrixXd G(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) G(i, j) = g(rng);
  return G * G.transpose() + ridge * MatrixXd::Identity(d, d);
}

MatrixXd random_hurwitz(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> g(0.0, 1.0);
  MatrixXd M(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) M(i, j) = g(rng);
  Eigen::EigenSolver<MatrixXd> es(M);
  double shift = es.eigenvalues().real().maxCoeff() + 0.5;
  return M - shift * MatrixXd::Identity(d, d);
}

}  // namespace

TEST_CASE("spectral summary of simple matrices", "[matrixcore]") {
  MatrixXd mI = -MatrixXd::Identity(3, 3);
  SpectralSummary s = spectral_summary(mI);
  REQUIRE(s.lambda_min == Catch::Approx(-1.0));
  REQUIRE(s.lambda_max == Catch::Approx(-1.0));
  REQUIRE(s.is_hurwitz);
  REQUIRE_FALSE(spectral_summary(MatrixXd::Identity(3, 3)).is_hurwitz);

  MatrixXd T(2, 2);
  T << -1.0, 1.0, 0.0, -2.0;  // triangular, eigenvalues {-1, -2}
  REQUIRE(spectral_summary(T).is_hurwitz);
}

TEST_CASE("asymmetry between ||A|| and the symmetric-part spectrum is flagged", "[matrixcore]") {
  MatrixXd R(2, 2);
  R << 0.0, -1.0, 1.0, 0.0;  // rotation: symmetric part 0, spectral norm 1
  SpectralSummary s = spectral_summary(R);
  REQUIRE(s.spectral_norm == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(s.asymmetry_flag);
  REQUIRE_FALSE(spectral_summary(-MatrixXd::Identity(2, 2)).asymmetry_flag);
}

TEST_CASE("spectral summary invariants on SPD input", "[matrixcore]") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    int d = 2 + static_cast<int>(rng() % 6);
    MatrixXd S = random_spd(rng, d);
    SpectralSummary s = spectral_summary(S);
    REQUIRE(s.lambda_min > 0.0);
    REQUIRE(s.lambda_max >= s.lambda_min);
    REQUIRE(s.rho >= 1.0);
    REQUIRE(s.trace >= d * s.lambda_min - 1e-12);
    REQUIRE(s.is_positive_definite);
    REQUIRE(s.entrywise_l1 <= std::pow(d, 1.5) * s.spectral_norm + 1e-10);
  }
}

TEST_CASE("lyapunov solve closed forms", "[matrixcore]") {
  std::mt19937_64 rng(17);
  // A = -I gives Sigma = sigma2 / 2
  for (int trial = 0; trial < 5; ++trial) {
    int d = 1 + static_cast<int>(rng() % 5);
    MatrixXd s2 = random_spd(rng, d);
    MatrixXd Sigma = lyapunov_solve(-MatrixXd::Identity(d, d), s2);
    REQUIRE((Sigma - 0.5 * s2).cwiseAbs().maxCoeff() < 1e-12);
  }

  MatrixXd A1(1, 1), s1(1, 1);
  A1 << -3.0;
  s1 << 6.0;
  REQUIRE(lyapunov_solve(A1, s1)(0, 0) == Catch::Approx(1.0).margin(1e-13));

  // hand-solved 2x2: A = [[-1,1],[0,-2]], sigma2 = diag(2,4); the entries
  // satisfy -2a+2b+2 = 0, -3b+c = 0, -4c+4 = 0, giving Sigma = [[4/3,1/3],[1/3,1]]
  MatrixXd A2(2, 2), s22(2, 2);
  A2 << -1.0, 1.0, 0.0, -2.0;
  s22 << 2.0, 0.0, 0.0, 4.0;
  MatrixXd Sigma = lyapunov_solve(A2, s22);
  REQUIRE(Sigma(0, 0) == Catch::Approx(4.0 / 3.0).margin(1e-12));
  REQUIRE(Sigma(0, 1) == Catch::Approx(1.0 / 3.0).margin(1e-12));
  REQUIRE(Sigma(1, 1) == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(spectral_norm(A2 * Sigma + Sigma * A2.transpose() + s22) <= 1e-12);
}

TEST_CASE("lyapunov solve on random Hurwitz/SPD pairs", "[matrixcore]") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    int d = 1 + static_cast<int>(rng() % 8);
    MatrixXd A = random_hurwitz(rng, d);
    MatrixXd s2 = random_spd(rng, d);
    MatrixXd Sigma = lyapunov_solve(A, s2);
    REQUIRE((Sigma - Sigma.transpose()).cwiseAbs().maxCoeff() <=
            1e-12 * std::max(1.0, Sigma.cwiseAbs().maxCoeff()));
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(Sigma);
    REQUIRE(es.eigenvalues().minCoeff() > 0.0);
    REQUIRE(spectral_norm(A * Sigma + Sigma * A.transpose() + s2) <= 1e-10 * spectral_norm(s2));
  }
}

TEST_CASE("lyapunov scaling covariance", "[matrixcore]") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 10; ++trial) {
    int d = 2 + static_cast<int>(rng() % 4);
    MatrixXd A = random_hurwitz(rng, d);
    MatrixXd s2 = random_spd(rng, d);
    double a = 0.1 + static_cast<double>(rng() % 100) / 10.0;
    MatrixXd S1 = lyapunov_solve(A, s2);
    MatrixXd S2 = lyapunov_solve(a * A, a * s2);
    REQUIRE((S1 - S2).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, S1.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("lyapunov precondition errors", "[matrixcore]") {
  MatrixXd I2 = MatrixXd::Identity(2, 2);
  REQUIRE_THROWS_AS(lyapunov_solve(I2, I2), std::invalid_argument);   // not Hurwitz
  REQUIRE_THROWS_AS(lyapunov_solve(-I2, -I2), std::invalid_argument); // sigma2 not SPD
}

TEST_CASE("sigma norm", "[matrixcore]") {
  MatrixXd I3 = MatrixXd::Identity(3, 3);
  VectorXd x(3);
  x << 1.0, 2.0, 2.0;
  REQUIRE(sigma_norm(x, I3) == Catch::Approx(3.0).margin(1e-13));
  REQUIRE(sigma_norm(VectorXd::Zero(3), I3) == 0.0);

  MatrixXd D(2, 2);
  D << 4.0, 0.0, 0.0, 1.0;
  VectorXd y(2);
  y << 2.0, 0.0;
  REQUIRE(sigma_norm(y, D) == Catch::Approx(1.0).margin(1e-13));

  MatrixXd bad = -I3;
  REQUIRE_THROWS_AS(SigmaNorm(bad), std::invalid_argument);
}

TEST_CASE("half parallelogram inequality for the sigma norm", "[matrixcore]") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g(0.0, 2.0);
  for (int trial = 0; trial < 30; ++trial) {
    int d = 2 + static_cast<int>(rng() % 3);
    SigmaNorm norm(random_spd(rng, d));
    VectorXd x(d), y(d);
    for (int i = 0; i < d; ++i) {
      x[i] = g(rng);
      y[i] = g(rng);
    }
    REQUIRE(norm.squared(x) + norm.squared(y) >= 0.5 * norm.squared(x + y) - 1e-10);
  }
}

TEST_CASE("inverse square root", "[matrixcore]") {
  MatrixXd I3 = MatrixXd::Identity(3, 3);
  REQUIRE((inv_sqrt(I3) - I3).cwiseAbs().maxCoeff() < 1e-13);

  MatrixXd D(2, 2);
  D << 4.0, 0.0, 0.0, 9.0;
  MatrixXd R = inv_sqrt(D);
  REQUIRE(R(0, 0) == Catch::Approx(0.5).margin(1e-13));
  REQUIRE(R(1, 1) == Catch::Approx(1.0 / 3.0).margin(1e-13));

  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 10; ++trial) {
    MatrixXd S = random_spd(rng, 3);
    MatrixXd Rr = inv_sqrt(S);
    REQUIRE(spectral_norm(Rr * S * Rr - MatrixXd::Identity(3, 3)) <= 1e-10);
  }
}

TEST_CASE("ellipsoid lattice enumeration matches box scan", "[matrixcore]") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    int d = 1 + static_cast<int>(rng() % 3);
    MatrixXd Q = random_spd(rng, d, 0.3);
    VectorXd centre(d);
    for (int i = 0; i < d; ++i) centre[i] = (static_cast<double>(rng() % 100) - 50.0) / 10.0;
    double radius = 1.0 + static_cast<double>(rng() % 30) / 10.0;

    auto pts = ellipsoid_lattice_points(centre, Q, radius);

    // oracle: scan the full bounding box of the ellipsoid
    MatrixXd Qi = Q.llt().solve(MatrixXd::Identity(d, d));
    std::vector<LatticePoint> oracle;
    std::vector<Coord> lo(d), hi(d), cur(d);
    for (int i = 0; i < d; ++i) {
      double half = radius * std::sqrt(Qi(i, i)) + 1.0;
      lo[i] = static_cast<Coord>(std::floor(centre[i] - half));
      hi[i] = static_cast<Coord>(std::ceil(centre[i] + half));
      cur[i] = lo[i];
    }
    for (;;) {
      VectorXd v(d);
      for (int i = 0; i < d; ++i) v[i] = static_cast<double>(cur[i]) - centre[i];
      if (v.dot(Q * v) <= radius * radius)
        oracle.push_back(LatticePoint(std::vector<Coord>(cur)));
      int i = d - 1;
      while (i >= 0) {
        if (++cur[i] <= hi[i]) break;
        cur[i] = lo[i];
        --i;
      }
      if (i < 0) break;
    }
    std::sort(oracle.begin(), oracle.end());
    REQUIRE(pts.size() == oracle.size());
    REQUIRE(std::equal(pts.begin(), pts.end(), oracle.begin()));
  }
}
