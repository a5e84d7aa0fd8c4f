#pragma once

// Dense small-matrix services: spectra, norms, Lyapunov solves, matrix
// square roots, the Sigma-norm, and lattice-point enumeration inside
// ellipsoids. Everything here targets d <= ~15.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "dnstein/lattice.hpp"

namespace dnstein {

struct SpectralSummary {
  double lambda_min = 0.0;    // of M when symmetric, else of (M+M')/2
  double lambda_max = 0.0;
  double rho = 0.0;           // lambda_max / lambda_min
  double trace = 0.0;
  double spectral_norm = 0.0; // largest singular value of M itself
  double entrywise_l1 = 0.0;  // sum of |M_ij|
  bool is_hurwitz = false;    // all eigenvalues of M have real part < -1e-12
  bool is_positive_definite = false;
  bool symmetric_input = false;
  // set when the symmetric-part spectral radius differs from ||M|| by >= 10%
  bool asymmetry_flag = false;
};

constexpr double kHurwitzTol = -1e-12;

inline bool is_symmetric(const Eigen::MatrixXd& M, double rel = 1e-12) {
  double scale = M.cwiseAbs().maxCoeff();
  if (scale == 0.0) return true;
  return (M - M.transpose()).cwiseAbs().maxCoeff() <= rel * scale;
}

inline SpectralSummary spectral_summary(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols()) throw std::invalid_argument("spectral_summary: square matrix required");
  if (!M.allFinite()) throw std::invalid_argument("spectral_summary: non-finite entries");
  SpectralSummary s;
  s.trace = M.trace();
  s.entrywise_l1 = M.cwiseAbs().sum();
  s.symmetric_input = is_symmetric(M);

  Eigen::MatrixXd sym = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("spectral_summary: eigen solver failed");
  s.lambda_min = es.eigenvalues().minCoeff();
  s.lambda_max = es.eigenvalues().maxCoeff();
  s.rho = s.lambda_min != 0.0 ? s.lambda_max / s.lambda_min
                              : std::numeric_limits<double>::infinity();
  s.is_positive_definite = s.symmetric_input && s.lambda_min > 0.0;

  if (s.symmetric_input) {
    s.spectral_norm = std::max(std::abs(s.lambda_min), std::abs(s.lambda_max));
    s.is_hurwitz = s.lambda_max < kHurwitzTol;
  } else {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
    s.spectral_norm = svd.singularValues()(0);
    Eigen::EigenSolver<Eigen::MatrixXd> ges(M, /*computeEigenvectors=*/false);
    if (ges.info() != Eigen::Success)
      throw std::runtime_error("spectral_summary: eigen solver failed");
    s.is_hurwitz = (ges.eigenvalues().real().array() < kHurwitzTol).all();
    double sym_radius = std::max(std::abs(s.lambda_min), std::abs(s.lambda_max));
    if (s.spectral_norm > 0.0 &&
        std::abs(sym_radius - s.spectral_norm) > 0.1 * s.spectral_norm)
      s.asymmetry_flag = true;
  }
  return s;
}

inline double spectral_norm(const Eigen::MatrixXd& M) {
  if (is_symmetric(M)) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  return svd.singularValues()(0);
}

inline Eigen::MatrixXd kron(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  Eigen::MatrixXd K(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return K;
}

// Solves A Sigma + Sigma A' + sigma2 = 0 through the d^2 x d^2 vectorized
// system (I (x) A + A (x) I) vec(Sigma) = -vec(sigma2). Preconditions are
// checked; the residual is verified against 1e-10 * ||sigma2||.
inline Eigen::MatrixXd lyapunov_solve(const Eigen::MatrixXd& A, const Eigen::MatrixXd& sigma2) {
  const Eigen::Index d = A.rows();
  if (A.cols() != d || sigma2.rows() != d || sigma2.cols() != d)
    throw std::invalid_argument("lyapunov_solve: dimension mismatch");
  SpectralSummary sa = spectral_summary(A);
  if (!sa.is_hurwitz) throw std::invalid_argument("lyapunov_solve: A is not Hurwitz");
  SpectralSummary ss = spectral_summary(sigma2);
  if (!ss.is_positive_definite)
    throw std::invalid_argument("lyapunov_solve: sigma2 is not symmetric positive definite");

  Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd K = kron(I, A) + kron(A, I);
  Eigen::VectorXd rhs(d * d);
  // column-major vec
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i) rhs(j * d + i) = -sigma2(i, j);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
  if (!lu.isInvertible())
    throw std::runtime_error("lyapunov_solve: singular vectorized system");
  Eigen::VectorXd x = lu.solve(rhs);
  Eigen::MatrixXd Sigma(d, d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i) Sigma(i, j) = x(j * d + i);
  Sigma = 0.5 * (Sigma + Sigma.transpose()).eval();

  double resid = spectral_norm(A * Sigma + Sigma * A.transpose() + sigma2);
  double scale = spectral_norm(sigma2);
  if (resid > 1e-10 * scale)
    throw std::runtime_error("lyapunov_solve: residual " + std::to_string(resid) +
                             " exceeds 1e-10 * ||sigma2||");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Sigma);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw std::runtime_error("lyapunov_solve: solution is not positive definite");
  return Sigma;
}

// ||x||_Sigma = sqrt(x' Sigma^{-1} x) with a cached Cholesky factor.
class SigmaNorm {
 public:
  SigmaNorm() = default;
  explicit SigmaNorm(const Eigen::MatrixXd& Sigma) : Sigma_(Sigma) {
    if (!is_symmetric(Sigma)) throw std::invalid_argument("SigmaNorm: Sigma not symmetric");
    llt_.compute(Sigma);
    if (llt_.info() != Eigen::Success)
      throw std::invalid_argument("SigmaNorm: Sigma not positive definite");
  }

  double operator()(const Eigen::VectorXd& x) const {
    return llt_.matrixL().solve(x).norm();
  }
  double squared(const Eigen::VectorXd& x) const {
    return llt_.matrixL().solve(x).squaredNorm();
  }
  Eigen::VectorXd inverse_apply(const Eigen::VectorXd& b) const { return llt_.solve(b); }
  Eigen::MatrixXd inverse() const {
    return llt_.solve(Eigen::MatrixXd::Identity(Sigma_.rows(), Sigma_.cols()));
  }
  const Eigen::MatrixXd& matrix() const { return Sigma_; }

 private:
  Eigen::MatrixXd Sigma_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

inline double sigma_norm(const Eigen::VectorXd& x, const Eigen::MatrixXd& Sigma) {
  return SigmaNorm(Sigma)(x);
}

// Symmetric R with R Sigma R = I, from the eigendecomposition.
inline Eigen::MatrixXd inv_sqrt(const Eigen::MatrixXd& Sigma) {
  if (!is_symmetric(Sigma)) throw std::invalid_argument("inv_sqrt: input not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Sigma);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
    throw std::invalid_argument("inv_sqrt: input not positive definite");
  Eigen::VectorXd inv_root = es.eigenvalues().cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd R = es.eigenvectors() * inv_root.asDiagonal() * es.eigenvectors().transpose();
  double err = spectral_norm(R * Sigma * R - Eigen::MatrixXd::Identity(Sigma.rows(), Sigma.cols()));
  if (err > 1e-10)
    throw std::runtime_error("inv_sqrt: identity check failed, error " + std::to_string(err));
  return R;
}

// All integer points x with (x - center)' Q (x - center) <= radius^2, Q SPD,
// enumerated by recursive per-axis interval narrowing on the Cholesky factor
// of Q. Throws if more than `cap` points qualify.
inline std::vector<LatticePoint> ellipsoid_lattice_points(const Eigen::VectorXd& center,
                                                          const Eigen::MatrixXd& Q,
                                                          double radius,
                                                          std::size_t cap = std::size_t(1) << 24) {
  const int d = static_cast<int>(center.size());
  if (radius < 0.0) return {};
  Eigen::LLT<Eigen::MatrixXd> llt(Q);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("ellipsoid_lattice_points: Q not positive definite");
  // Q = L L', so (x-c)' Q (x-c) = ||U (x-c)||^2 with U = L' upper triangular.
  Eigen::MatrixXd U = Eigen::MatrixXd(llt.matrixL()).transpose();

  std::vector<LatticePoint> out;
  LatticePoint pt = LatticePoint::zero(d);
  double r2 = radius * radius;

  // Fix coordinates from axis d-1 down to 0; with x_{k+1..d-1} fixed,
  // y_k = U_kk (x_k - c_k) + t_k where t_k collects the fixed tail.
  auto recurse = [&](auto&& self, int k, double used) -> void {
    double rem = r2 - used;
    if (rem < 0.0) return;
    double t = 0.0;
    for (int j = k + 1; j < d; ++j)
      t += U(k, j) * (static_cast<double>(pt[j]) - center[j]);
    double ukk = U(k, k);
    double half = std::sqrt(rem);
    double lo_f = center[k] + (-half - t) / ukk;
    double hi_f = center[k] + (half - t) / ukk;
    Coord lo = static_cast<Coord>(std::ceil(lo_f - 1e-12));
    Coord hi = static_cast<Coord>(std::floor(hi_f + 1e-12));
    for (Coord v = lo; v <= hi; ++v) {
      pt[k] = v;
      double yk = ukk * (static_cast<double>(v) - center[k]) + t;
      double used2 = used + yk * yk;
      if (used2 > r2 * (1.0 + 1e-12) + 1e-12) continue;
      if (k == 0) {
        if (out.size() >= cap)
          throw std::runtime_error("ellipsoid_lattice_points: cap exceeded");
        out.push_back(pt);
      } else {
        self(self, k - 1, used2);
      }
    }
  };
  recurse(recurse, d - 1, 0.0);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace dnstein
