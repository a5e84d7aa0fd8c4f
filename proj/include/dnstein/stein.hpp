#pragma once

// The discrete generator-like operator, forward-difference calculus,
// restricted norms over metric balls, and the numerical checks of the
// integration-by-parts and truncated-expectation bounds for the discrete
// normal family.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dnstein/constants.hpp"
#include "dnstein/dnormal.hpp"
#include "dnstein/lattice.hpp"
#include "dnstein/matrixcore.hpp"

namespace dnstein {

// Drift/diffusion triple (n, c, A, sigma2) together with the Lyapunov
// solution Sigma and the derived spectral thresholds.
struct SteinTriple {
  double n = 0.0;
  Eigen::VectorXd c;
  Eigen::MatrixXd A, sigma2, Sigma;
  double lambda_bar = 0.0;       // d^{-1} Tr(sigma2)
  double norm_A = 0.0;           // spectral norm of A
  double lambda_min_Sigma = 0.0;
  double lambda_max_Sigma = 0.0;
  double delta0_tilde = 0.0;     // min{3, lambda_min(sigma2) / (8 ||A|| sqrt(lambda_max(Sigma)))}
  double eta0 = 0.0;             // delta0_tilde * sqrt(lambda_min(Sigma)) / 6
  SigmaNorm snorm;

  int dim() const { return static_cast<int>(c.size()); }
  double psi_sigma(double v) const { return 6.0 / (v * std::sqrt(lambda_min_Sigma)); }
  Eigen::VectorXd centre() const { return n * c; }
};

inline SteinTriple make_stein_triple(double n, const Eigen::VectorXd& c,
                                     const Eigen::MatrixXd& A, const Eigen::MatrixXd& sigma2) {
  if (n <= 0.0) throw std::invalid_argument("make_stein_triple: n must be positive");
  SteinTriple t;
  t.n = n;
  t.c = c;
  t.A = A;
  t.sigma2 = sigma2;
  t.Sigma = lyapunov_solve(A, sigma2);
  t.snorm = SigmaNorm(t.Sigma);
  const int d = t.dim();
  t.lambda_bar = sigma2.trace() / d;
  t.norm_A = spectral_norm(A);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t.Sigma);
  t.lambda_min_Sigma = es.eigenvalues().minCoeff();
  t.lambda_max_Sigma = es.eigenvalues().maxCoeff();
  double lmin_s2 = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sigma2).eigenvalues().minCoeff();
  t.delta0_tilde = std::min(3.0, lmin_s2 / (8.0 * t.norm_A * std::sqrt(t.lambda_max_Sigma)));
  t.eta0 = t.delta0_tilde * std::sqrt(t.lambda_min_Sigma) / 6.0;
  return t;
}

// Real function on Z^d with a symbolic tag. Custom evaluators can memoize;
// the pseudo-random tabulated family is a pure O(1) hash and is not cached.
class TestFunction {
 public:
  enum class Kind { constant, linear, quadratic, indicator, tabulated, custom };

  TestFunction() = default;

  static TestFunction constant(int dim, double v) {
    return TestFunction(Kind::constant, dim, [v](const LatticePoint&) { return v; }, false);
  }

  // a' (w - shift)
  static TestFunction linear(const Eigen::VectorXd& a, const Eigen::VectorXd& shift) {
    return TestFunction(Kind::linear, static_cast<int>(a.size()),
                        [a, shift](const LatticePoint& w) {
                          return a.dot(to_vector(w) - shift);
                        },
                        false);
  }

  // (w - shift)' M (w - shift)
  static TestFunction quadratic(const Eigen::MatrixXd& M, const Eigen::VectorXd& shift) {
    return TestFunction(Kind::quadratic, static_cast<int>(M.rows()),
                        [M, shift](const LatticePoint& w) {
                          Eigen::VectorXd u = to_vector(w) - shift;
                          return u.dot(M * u);
                        },
                        false);
  }

  static TestFunction indicator(int dim, std::function<bool(const LatticePoint&)> in) {
    return TestFunction(Kind::indicator, dim,
                        [in = std::move(in)](const LatticePoint& w) { return in(w) ? 1.0 : 0.0; },
                        false);
  }

  // deterministic pseudo-random values in [-1, 1], keyed by (seed, point)
  static TestFunction tabulated(int dim, std::uint64_t seed) {
    return TestFunction(Kind::tabulated, dim,
                        [seed, dim](const LatticePoint& w) {
                          std::uint64_t h = seed ^ 0x9e3779b97f4a7c15ull;
                          for (int i = 0; i < dim; ++i) {
                            h ^= static_cast<std::uint64_t>(w[i]) + 0x9e3779b97f4a7c15ull +
                                 (h << 6) + (h >> 2);
                            h *= 0xff51afd7ed558ccdull;
                            h ^= h >> 33;
                          }
                          return 2.0 * (static_cast<double>(h >> 11) * 0x1.0p-53) - 1.0;
                        },
                        false);
  }

  static TestFunction from_fn(int dim, std::function<double(const LatticePoint&)> f,
                              bool memoize = true) {
    return TestFunction(Kind::custom, dim, std::move(f), memoize);
  }

  double operator()(const LatticePoint& w) const {
    if (!impl_) throw std::logic_error("TestFunction: empty");
    if (impl_->memoize) {
      auto it = impl_->memo.find(w);
      if (it != impl_->memo.end()) return it->second;
      double v = impl_->eval(w);
      impl_->memo.emplace(w, v);
      return v;
    }
    return impl_->eval(w);
  }

  Kind kind() const { return impl_ ? impl_->kind : Kind::custom; }
  int dim() const { return impl_ ? impl_->dim : 0; }

 private:
  struct Impl {
    Kind kind;
    int dim;
    std::function<double(const LatticePoint&)> eval;
    bool memoize;
    std::map<LatticePoint, double> memo;
  };

  TestFunction(Kind k, int dim, std::function<double(const LatticePoint&)> f, bool memoize) {
    impl_ = std::make_shared<Impl>();
    impl_->kind = k;
    impl_->dim = dim;
    impl_->eval = std::move(f);
    impl_->memoize = memoize;
  }

  std::shared_ptr<Impl> impl_;
};

// forward difference along axis j: h(w + e_j) - h(w)
inline double diff1_at(const TestFunction& h, const LatticePoint& w, int j) {
  return h(w + LatticePoint::unit(w.dim(), j)) - h(w);
}

// second forward difference: symmetric in (j, k) by construction
inline double diff2_at(const TestFunction& h, const LatticePoint& w, int j, int k) {
  const int d = w.dim();
  LatticePoint wj = w + LatticePoint::unit(d, j);
  LatticePoint wk = w + LatticePoint::unit(d, k);
  LatticePoint wjk = wj + LatticePoint::unit(d, k);
  return h(wjk) - h(wj) - h(wk) + h(w);
}

inline TestFunction diff1(const TestFunction& h, int j) {
  return TestFunction::from_fn(h.dim(),
                               [h, j](const LatticePoint& w) { return diff1_at(h, w, j); },
                               false);
}

inline TestFunction diff2(const TestFunction& h, int j, int k) {
  return TestFunction::from_fn(h.dim(),
                               [h, j, k](const LatticePoint& w) { return diff2_at(h, w, j, k); },
                               false);
}

// (n/2) Tr(sigma2 D2 h(w)) + Dh(w)' A (w - nc)
inline double stein_apply(const TestFunction& h, const LatticePoint& w, const SteinTriple& t) {
  const int d = t.dim();
  double tr = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (t.sigma2(i, j) != 0.0) tr += t.sigma2(i, j) * diff2_at(h, w, j, i);
  Eigen::VectorXd grad(d);
  for (int j = 0; j < d; ++j) grad[j] = diff1_at(h, w, j);
  Eigen::VectorXd u = to_vector(w) - t.centre();
  return 0.5 * t.n * tr + grad.dot(t.A * u);
}

// 1 iff ||w - nc||_Sigma <= n delta / 3 (closed ball)
inline bool indicator_ball(const LatticePoint& w, double delta, const SteinTriple& t) {
  if (delta <= 0.0) throw std::invalid_argument("indicator_ball: delta must be positive");
  return t.snorm(to_vector(w) - t.centre()) <= t.n * delta / 3.0;
}

enum class NormVariant { value, diff1, diff2 };

struct RestrictedNormResult {
  double value = 0.0;
  bool ball_empty = false;
  std::size_t ball_points = 0;
};

// max over the integer ball {X : ||X - nc||_Sigma <= n eta} of |f|, or of the
// largest first/second forward difference, by exhaustive scan.
inline RestrictedNormResult restricted_norm(const TestFunction& f, double eta,
                                            const SteinTriple& t,
                                            NormVariant variant = NormVariant::value) {
  if (eta <= 0.0) throw std::invalid_argument("restricted_norm: eta must be positive");
  const int d = t.dim();
  Eigen::MatrixXd Q = t.snorm.inverse();
  std::vector<LatticePoint> ball =
      ellipsoid_lattice_points(t.centre(), Q, t.n * eta, std::size_t(1) << 24);
  RestrictedNormResult r;
  r.ball_points = ball.size();
  if (ball.empty()) {
    r.ball_empty = true;
    return r;
  }
  double best = 0.0;
  for (const auto& x : ball) {
    double v = 0.0;
    switch (variant) {
      case NormVariant::value:
        v = std::abs(f(x));
        break;
      case NormVariant::diff1:
        for (int j = 0; j < d; ++j) v = std::max(v, std::abs(diff1_at(f, x, j)));
        break;
      case NormVariant::diff2:
        for (int j = 0; j < d; ++j)
          for (int k = j; k < d; ++k) v = std::max(v, std::abs(diff2_at(f, x, j, k)));
        break;
    }
    best = std::max(best, v);
  }
  r.value = best;
  return r;
}

namespace detail {

// Truncation slack of an expectation over the dn support: zero when the
// integrand's indicator ball already sits inside the truncation region.
inline double truncation_slack(const DiscreteNormal& dn, const SteinTriple& t, double delta,
                               double max_integrand) {
  double ball_metric_radius = std::sqrt(dn.n) * delta / 3.0;  // ||.||_{n Sigma} units
  if (ball_metric_radius + 1.0 <= dn.trunc_radius) return 0.0;
  return 2.0 * dn.discarded_mass * max_integrand;
}

}  // namespace detail

enum class IbpPart { vector_b, matrix_entrywise, matrix_rowwise };

struct IbpReport {
  IbpPart part = IbpPart::vector_b;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;
  double lhs_error_bar = 0.0;
  bool n_ok = true;        // n >= max{n_min, psi_Sigma(delta)}
  double n_required = 0.0;
  bool dim4_warning = false;  // n < d^4
};

// Discrete integration-by-parts check, vector form:
//   | E{Df(W)' b I(W)} - n^{-1} E{f(W) (W-nc)' Sigma^{-1} b I(W)} |
//     <= sqrt(d) K1(delta) n^{-1} ||b||_1 ||f||_{n delta/2}
// with I(W) the closed ball indicator at radius n delta / 3.
inline IbpReport ibp_vector_check(const DiscreteNormal& dn, const SteinTriple& t,
                                  const TestFunction& f, const Eigen::VectorXd& b, double delta) {
  const int d = t.dim();
  ConstantsTable ct = bound_constants(6, delta, t.Sigma);
  Eigen::VectorXd sb = t.snorm.inverse_apply(b);
  Eigen::VectorXd nc = t.centre();
  double ball = t.n * delta / 3.0;

  double s1 = 0.0, s2 = 0.0, max_int = 0.0;
  for (const auto& [x, w] : dn.pmf.support()) {
    Eigen::VectorXd u = to_vector(x) - nc;
    if (t.snorm(u) > ball) continue;
    double g1 = 0.0;
    for (int j = 0; j < d; ++j)
      if (b[j] != 0.0) g1 += b[j] * diff1_at(f, x, j);
    double fv = f(x);
    double g2 = fv * u.dot(sb) / t.n;
    s1 += w * g1;
    s2 += w * g2;
    max_int = std::max(max_int, std::abs(g1) + std::abs(g2));
  }

  IbpReport r;
  r.part = IbpPart::vector_b;
  r.lhs = std::abs(s1 - s2);
  double fn = restricted_norm(f, delta / 2.0, t, NormVariant::value).value;
  r.rhs = std::sqrt(static_cast<double>(d)) * ct.ibp_vector / t.n * b.cwiseAbs().sum() * fn;
  r.margin = r.rhs - r.lhs;
  r.lhs_error_bar = detail::truncation_slack(dn, t, delta, max_int);
  r.n_required = std::max(ct.n_min, t.psi_sigma(delta));
  r.n_ok = t.n >= r.n_required;
  r.dim4_warning = t.n < std::pow(static_cast<double>(d), 4.0);
  return r;
}

// Matrix forms, entrywise (||B||_1) and rowwise (sum_j |row_j B|) bounds:
//   | E{Df(W)' B (W-nc) I(W)}
//       - E{f(W) [n^{-1}(W-nc)' Sigma^{-1} B (W-nc) - Tr B] I(W)} |
inline IbpReport ibp_matrix_check(const DiscreteNormal& dn, const SteinTriple& t,
                                  const TestFunction& f, const Eigen::MatrixXd& B, double delta,
                                  IbpPart part = IbpPart::matrix_entrywise) {
  if (part == IbpPart::vector_b)
    throw std::invalid_argument("ibp_matrix_check: requires a matrix part");
  const int d = t.dim();
  ConstantsTable ct = bound_constants(6, delta, t.Sigma);
  Eigen::MatrixXd Sinv = t.snorm.inverse();
  Eigen::MatrixXd SB = Sinv * B;
  Eigen::VectorXd nc = t.centre();
  double ball = t.n * delta / 3.0;
  double trB = B.trace();

  double s1 = 0.0, s2 = 0.0, max_int = 0.0;
  for (const auto& [x, w] : dn.pmf.support()) {
    Eigen::VectorXd u = to_vector(x) - nc;
    if (t.snorm(u) > ball) continue;
    Eigen::VectorXd Bu = B * u;
    double g1 = 0.0;
    for (int j = 0; j < d; ++j)
      if (Bu[j] != 0.0) g1 += diff1_at(f, x, j) * Bu[j];
    double fv = f(x);
    double g2 = fv * (u.dot(SB * u) / t.n - trB);
    s1 += w * g1;
    s2 += w * g2;
    max_int = std::max(max_int, std::abs(g1) + std::abs(g2));
  }

  IbpReport r;
  r.part = part;
  r.lhs = std::abs(s1 - s2);
  double fn = restricted_norm(f, delta / 2.0, t, NormVariant::value).value;
  double dfn = restricted_norm(f, delta / 2.0, t, NormVariant::diff1).value;
  double diag_l1 = B.diagonal().cwiseAbs().sum();
  if (part == IbpPart::matrix_entrywise) {
    r.rhs = std::sqrt(static_cast<double>(d)) * ct.ibp_matrix / std::sqrt(t.n) *
                B.cwiseAbs().sum() * fn +
            diag_l1 * dfn;
  } else {
    double rowsum = 0.0;
    for (int j = 0; j < d; ++j) rowsum += B.row(j).norm();
    r.rhs = static_cast<double>(d) * ct.ibp_rowwise / std::sqrt(t.n) * rowsum * fn + diag_l1 * dfn;
  }
  r.margin = r.rhs - r.lhs;
  r.lhs_error_bar = detail::truncation_slack(dn, t, delta, max_int);
  r.n_required = std::max(ct.n_min, t.psi_sigma(delta));
  r.n_ok = t.n >= r.n_required;
  r.dim4_warning = t.n < std::pow(static_cast<double>(d), 4.0);
  return r;
}

struct OperatorBracketReport {
  double lhs = 0.0;      // |E{ A~_n h(W) I[||W-nc|| <= n delta/3] }|
  double bracket = 0.0;  // d^{5/2} n^{-1/2} LambdaBar (||h|| + sqrt(n) ||Dh||)
  double ratio = 0.0;
  double lhs_error_bar = 0.0;
};

// Truncated expectation of the operator applied to h against the
// Lambda-bar-normalized norm bracket; the proportionality constant is left
// to the caller (it is only implicit), so the interesting output is ratio.
inline OperatorBracketReport operator_bracket_check(const DiscreteNormal& dn, const SteinTriple& t,
                                                    const TestFunction& h, double delta) {
  Eigen::VectorXd nc = t.centre();
  double ball = t.n * delta / 3.0;
  double s = 0.0, max_int = 0.0;
  for (const auto& [x, w] : dn.pmf.support()) {
    Eigen::VectorXd u = to_vector(x) - nc;
    if (t.snorm(u) > ball) continue;
    double v = stein_apply(h, x, t);
    s += w * v;
    max_int = std::max(max_int, std::abs(v));
  }
  double hn = restricted_norm(h, delta / 2.0, t, NormVariant::value).value;
  double dhn = restricted_norm(h, delta / 2.0, t, NormVariant::diff1).value;
  OperatorBracketReport r;
  r.lhs = std::abs(s);
  const double d = t.dim();
  r.bracket = std::pow(d, 2.5) / std::sqrt(t.n) * t.lambda_bar * (hn + std::sqrt(t.n) * dhn);
  r.ratio = r.bracket > 0.0 ? r.lhs / r.bracket : 0.0;
  r.lhs_error_bar = detail::truncation_slack(dn, t, delta, max_int);
  return r;
}

}  // namespace dnstein
