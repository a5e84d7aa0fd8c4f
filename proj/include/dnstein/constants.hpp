#pragma once

// Explicit constants used by the moment bounds, the discrete
// integration-by-parts bounds, and the translate-TV bound. All of them are
// elementary functions of the truncation level delta and the spectrum of
// Sigma.

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace dnstein {

// k(l) = E N^{2l} = (2l)! / (2^l l!) for a standard normal N.
inline double gaussian_even_moment(int l) {
  double v = 1.0;
  for (int j = 1; j <= l; ++j) v *= 2.0 * j - 1.0;  // (2l-1)!!
  return v;
}

struct ConstantsTable {
  int l_max = 0;
  double delta = 0.0;
  int dim = 0;
  double lambda_min = 0.0, lambda_max = 0.0;

  std::vector<double> k;        // k[l], l = 0..l_max
  std::vector<double> C;        // C[l]  = 2^l sqrt(k(l))
  std::vector<double> C_prime;  // C'[l] = 2^{2l-1} k(l)

  double xi_star = 0.0;  // (delta/3) ||Sigma^{-1/2}|| + 3 / (2 lambda_min)
  double c1 = 0.0;       // (6/delta)^4 C(4)
  double c2 = 0.0;       // 2 e^{xi_star} / lambda_min
  double c3 = 0.0;       // (6/delta)^3 sqrt(2 (1+lambda_max) C(6))
  double c4 = 0.0;       // c2 sqrt(2 (1+lambda_max)) (1 + sqrt(C'(2)(1+lambda_min^{-2})))
  double c3p = 0.0;      // (6/delta)^3 C(4) sqrt(lambda_max)
  double c4p = 0.0;      // c2 sqrt(C(2) lambda_max) (1 + sqrt(C'(2)(1+lambda_min^{-2})))

  double ibp_vector = 0.0;   // c1 + c2 {1 + C'(1)(1 + 1/lambda_min)}
  double ibp_matrix = 0.0;   // c3 + c4
  double ibp_rowwise = 0.0;  // c3p + c4p

  double n_min = 0.0;            // max{d^4, lambda_min^{-8/7}, (4 lambda_min^2)^{-4/3}}
  double translate_tv = 0.0;     // ibp_vector at delta=1 + sqrt(C'(1)(1+max_j (Sigma^{-1})_jj)) + 18 C(2)
  bool dim4_warning = false;     // set by checks when n < d^4
};

inline ConstantsTable bound_constants(int l_max, double delta, const Eigen::MatrixXd& Sigma) {
  if (delta <= 0.0) throw std::invalid_argument("bound_constants: delta must be positive");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Sigma);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
    throw std::invalid_argument("bound_constants: Sigma must be positive definite");

  ConstantsTable t;
  t.l_max = std::max(l_max, 6);
  t.delta = delta;
  t.dim = static_cast<int>(Sigma.rows());
  t.lambda_min = es.eigenvalues().minCoeff();
  t.lambda_max = es.eigenvalues().maxCoeff();

  t.k.resize(t.l_max + 1);
  t.C.resize(t.l_max + 1);
  t.C_prime.resize(t.l_max + 1);
  for (int l = 0; l <= t.l_max; ++l) {
    t.k[l] = gaussian_even_moment(l);
    t.C[l] = std::pow(2.0, l) * std::sqrt(t.k[l]);
    t.C_prime[l] = std::pow(2.0, 2 * l - 1) * t.k[l];
  }

  double lmin = t.lambda_min, lmax = t.lambda_max;
  t.xi_star = (delta / 3.0) / std::sqrt(lmin) + 1.5 / lmin;
  t.c1 = std::pow(6.0 / delta, 4) * t.C[4];
  t.c2 = 2.0 * std::exp(t.xi_star) / lmin;
  t.c3 = std::pow(6.0 / delta, 3) * std::sqrt(2.0 * (1.0 + lmax) * t.C[6]);
  double bracket = 1.0 + std::sqrt(t.C_prime[2] * (1.0 + 1.0 / (lmin * lmin)));
  t.c4 = t.c2 * std::sqrt(2.0 * (1.0 + lmax)) * bracket;
  t.c3p = std::pow(6.0 / delta, 3) * t.C[4] * std::sqrt(lmax);
  t.c4p = t.c2 * std::sqrt(t.C[2] * lmax) * bracket;

  t.ibp_vector = t.c1 + t.c2 * (1.0 + t.C_prime[1] * (1.0 + 1.0 / lmin));
  t.ibp_matrix = t.c3 + t.c4;
  t.ibp_rowwise = t.c3p + t.c4p;

  double n1 = std::pow(lmin, -8.0 / 7.0);
  t.n_min = std::max({std::pow(static_cast<double>(t.dim), 4.0), n1,
                      std::pow(4.0 * lmin * lmin, -4.0 / 3.0)});

  // translate-TV constant uses the delta = 1 vector bound
  double xi1 = (1.0 / 3.0) / std::sqrt(lmin) + 1.5 / lmin;
  double c2_1 = 2.0 * std::exp(xi1) / lmin;
  double c1_1 = std::pow(6.0, 4) * t.C[4];
  double ibp_vec_1 = c1_1 + c2_1 * (1.0 + t.C_prime[1] * (1.0 + 1.0 / lmin));
  Eigen::MatrixXd Sinv = Sigma.llt().solve(Eigen::MatrixXd::Identity(t.dim, t.dim));
  double max_diag = Sinv.diagonal().maxCoeff();
  t.translate_tv = ibp_vec_1 + std::sqrt(t.C_prime[1] * (1.0 + max_diag)) + 18.0 * t.C[2];
  return t;
}

}  // namespace dnstein
