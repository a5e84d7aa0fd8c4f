#pragma once

// Discrete normal family DN_d(nc, nSigma): each integer point carries the
// Gaussian probability of its surrounding unit box. Diagonal covariances use
// exact 1-d tail functions; general covariances use tensor-product
// Gauss-Legendre quadrature on the density.

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dnstein/constants.hpp"
#include "dnstein/detail/parallel.hpp"
#include "dnstein/lattice.hpp"
#include "dnstein/matrixcore.hpp"

namespace dnstein {

namespace detail {

// Nodes/weights of the n-point Gauss-Legendre rule on [-1, 1], by Newton
// iteration on the Legendre recurrence.
inline void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.resize(n);
  weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    weights[i] = 2.0 / ((1.0 - x * x) * pp * pp);
    weights[n - 1 - i] = weights[i];
  }
}

// P[lo < N(mean, sd^2) <= hi], stable in both tails.
inline double normal_interval(double lo, double hi, double mean, double sd) {
  double a = (lo - mean) / (sd * std::sqrt(2.0));
  double b = (hi - mean) / (sd * std::sqrt(2.0));
  if (a >= 0.0) return 0.5 * (std::erfc(a) - std::erfc(b));
  if (b <= 0.0) return 0.5 * (std::erfc(-b) - std::erfc(-a));
  return 0.5 * (std::erf(b) - std::erf(a));
}

}  // namespace detail

struct GaussianParams {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  int dim() const { return static_cast<int>(mean.size()); }

  void validate() const {
    if (cov.rows() != mean.size() || cov.cols() != mean.size())
      throw std::invalid_argument("GaussianParams: dimension mismatch");
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (!is_symmetric(cov) || llt.info() != Eigen::Success)
      throw std::invalid_argument("GaussianParams: covariance not positive definite");
  }

  bool diagonal() const {
    for (Eigen::Index i = 0; i < cov.rows(); ++i)
      for (Eigen::Index j = 0; j < cov.cols(); ++j)
        if (i != j && cov(i, j) != 0.0) return false;
    return true;
  }
};

namespace detail {

// Shared state for evaluating many unit-box probabilities of one Gaussian.
// The quadrature grid is the same for every box, so the density factor
// g(u) = w(u) exp(-u'Qu/2) is precomputed once; per box only the rank-one
// factor exp(-v'u) with v = Q(i - mean) changes, and the grid sum becomes a
// sequence of axis contractions.
class BoxQuadrature {
 public:
  BoxQuadrature(const GaussianParams& g, int order) : d_(g.dim()), order_(order) {
    g.validate();
    Eigen::LLT<Eigen::MatrixXd> llt(g.cov);
    Q_ = llt.solve(Eigen::MatrixXd::Identity(d_, d_));
    double det = 1.0;
    Eigen::MatrixXd L = llt.matrixL();
    for (int i = 0; i < d_; ++i) det *= L(i, i);
    log_norm_ = -0.5 * d_ * std::log(2.0 * M_PI) - std::log(det);
    mean_ = g.mean;

    std::vector<double> x, w;
    gauss_legendre(order_, x, w);
    nodes_.resize(order_);
    weights_.resize(order_);
    for (int i = 0; i < order_; ++i) {
      nodes_[i] = 0.5 * x[i];    // scale [-1,1] -> [-1/2,1/2]
      weights_[i] = 0.5 * w[i];
    }

    std::size_t cells = 1;
    for (int i = 0; i < d_; ++i) cells *= static_cast<std::size_t>(order_);
    grid_.resize(cells);
    std::vector<int> idx(d_, 0);
    Eigen::VectorXd u(d_);
    for (std::size_t c = 0; c < cells; ++c) {
      double wprod = 1.0;
      for (int i = 0; i < d_; ++i) {
        u[i] = nodes_[idx[i]];
        wprod *= weights_[idx[i]];
      }
      grid_[c] = wprod * std::exp(-0.5 * u.dot(Q_ * u));
      for (int i = d_ - 1; i >= 0; --i) {
        if (++idx[i] < order_) break;
        idx[i] = 0;
      }
    }
  }

  // probability of the unit box centred at integer point i
  double box(const LatticePoint& i) const {
    Eigen::VectorXd y = to_vector(i) - mean_;
    double q = y.dot(Q_ * y);
    Eigen::VectorXd v = Q_ * y;
    thread_local std::vector<double> work, factor;
    work.assign(grid_.begin(), grid_.end());
    factor.resize(static_cast<std::size_t>(order_));
    std::size_t len = grid_.size();
    for (int axis = d_ - 1; axis >= 0; --axis) {
      for (int t = 0; t < order_; ++t)
        factor[static_cast<std::size_t>(t)] = std::exp(-v[axis] * nodes_[t]);
      std::size_t rows = len / static_cast<std::size_t>(order_);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* src = work.data() + r * order_;
        double s = 0.0;
        for (int t = 0; t < order_; ++t) s += src[t] * factor[static_cast<std::size_t>(t)];
        work[r] = s;
      }
      len = rows;
    }
    return std::exp(log_norm_ - 0.5 * q) * work[0];
  }

  // conservative per-box relative error estimate of the rule
  double error_estimate() const {
    double qmax = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Q_).eigenvalues().maxCoeff();
    // 1-d Gauss-Legendre error constant (q-point rule, unit interval) times
    // the 2q-th derivative scale of the Gaussian density
    double q = order_;
    double logc = 4.0 * std::lgamma(q + 1.0) - std::log(2.0 * q + 1.0) - 3.0 * std::lgamma(2.0 * q + 1.0);
    double deriv = gaussian_even_moment(order_) * std::pow(qmax, q);  // (2q-1)!! * lambda_max(Q)^q
    return d_ * std::exp(logc) * deriv;
  }

 private:
  int d_, order_;
  Eigen::MatrixXd Q_;
  Eigen::VectorXd mean_;
  double log_norm_ = 0.0;
  std::vector<double> nodes_, weights_, grid_;
};

}  // namespace detail

inline int default_quadrature_order(int dim) { return dim <= 3 ? 12 : 6; }

// Probability assigned by N(mean, cov) to the unit box centred at integer
// point i. Diagonal covariances are computed exactly from 1-d tails.
inline double box_probability(const LatticePoint& i, const GaussianParams& g, int order = 0) {
  g.validate();
  if (i.dim() != g.dim()) throw std::invalid_argument("box_probability: dimension mismatch");
  if (g.diagonal()) {
    double p = 1.0;
    for (int j = 0; j < g.dim(); ++j)
      p *= detail::normal_interval(i[j] - 0.5, i[j] + 0.5, g.mean[j], std::sqrt(g.cov(j, j)));
    return p;
  }
  if (order <= 0) order = default_quadrature_order(g.dim());
  detail::BoxQuadrature quad(g, order);
  return quad.box(i);
}

struct DiscreteNormal {
  GaussianParams params;   // mean = n c, cov = n Sigma
  LatticePmf pmf;
  double discarded_mass = 0.0;
  int quadrature_order = 0;
  double quad_error_est = 0.0;
  double trunc_radius = 0.0;  // in the || . ||_{n Sigma} metric
  double n = 0.0;
  Eigen::VectorXd c;
  Eigen::MatrixXd Sigma;

  DiscreteNormal(GaussianParams p, LatticePmf f) : params(std::move(p)), pmf(std::move(f)) {}
};

// Builds DN_d(nc, nSigma) truncated to ||i - nc||_{nSigma} <= R, where R is
// a chi-square tail radius for tail_tol/2 plus two lattice units of padding.
// The deficit is recorded as discarded_mass (no renormalization by default).
inline DiscreteNormal dn_build(double n, const Eigen::VectorXd& c, const Eigen::MatrixXd& Sigma,
                               double tail_tol, bool renormalize = false, int order = 0,
                               std::size_t support_cap = std::size_t(1) << 24) {
  if (n <= 0.0) throw std::invalid_argument("dn_build: n must be positive");
  if (tail_tol <= 0.0 || tail_tol > 1e-6)
    throw std::invalid_argument("dn_build: tail_tol must lie in (0, 1e-6]");
  const int d = static_cast<int>(c.size());
  GaussianParams g{n * c, n * Sigma};
  g.validate();
  if (order <= 0) order = default_quadrature_order(d);

  // chi-square tail bound: P[chi2_d >= d + 2 sqrt(dx) + 2x] <= e^{-x}
  double x = std::log(2.0 / tail_tol);
  double r2 = d + 2.0 * std::sqrt(d * x) + 2.0 * x;
  Eigen::LLT<Eigen::MatrixXd> llt(g.cov);
  Eigen::MatrixXd Q = llt.solve(Eigen::MatrixXd::Identity(d, d));
  double pad = 2.0 * Q.diagonal().cwiseSqrt().maxCoeff();  // two lattice units
  double radius = std::sqrt(r2) + pad;

  std::vector<LatticePoint> pts;
  try {
    pts = ellipsoid_lattice_points(g.mean, Q, radius, support_cap);
  } catch (const std::runtime_error&) {
    throw std::runtime_error("dn_build: tail_tol too small to satisfy with the support cap");
  }

  std::vector<double> probs(pts.size(), 0.0);
  double quad_err = 0.0;
  if (g.diagonal()) {
    Eigen::VectorXd sd = g.cov.diagonal().cwiseSqrt();
    detail::run_chunks(8, [&](int ch) {
      auto [lo, hi] = detail::chunk_range(pts.size(), 8, ch);
      for (std::size_t a = lo; a < hi; ++a) {
        double p = 1.0;
        for (int j = 0; j < d; ++j)
          p *= detail::normal_interval(pts[a][j] - 0.5, pts[a][j] + 0.5, g.mean[j], sd[j]);
        probs[a] = p;
      }
    });
    quad_err = 1e-15;
  } else {
    detail::BoxQuadrature quad(g, order);
    quad_err = quad.error_estimate();
    detail::run_chunks(8, [&](int ch) {
      auto [lo, hi] = detail::chunk_range(pts.size(), 8, ch);
      for (std::size_t a = lo; a < hi; ++a) probs[a] = quad.box(pts[a]);
    });
  }

  double total = 0.0;
  for (double p : probs) total += p;
  double discarded = std::max(0.0, 1.0 - total);

  LatticePmf::Support supp;
  double scale = renormalize && total > 0.0 ? 1.0 / total : 1.0;
  for (std::size_t a = 0; a < pts.size(); ++a)
    if (probs[a] > 0.0) supp[pts[a]] = probs[a] * scale;

  double tol = renormalize ? quad_err + 1e-12 : discarded + quad_err + 1e-12;
  DiscreteNormal dn(std::move(g), LatticePmf(d, std::move(supp), tol));
  dn.discarded_mass = renormalize ? 0.0 : discarded;
  dn.quadrature_order = order;
  dn.quad_error_est = quad_err;
  dn.trunc_radius = radius;
  dn.n = n;
  dn.c = c;
  dn.Sigma = Sigma;
  return dn;
}

struct TranslateTv {
  double value = 0.0;
  double error_bar = 0.0;
};

// Exact half-l1 distance between the truncated pmf and its unit translate
// along the given axis; the unseen tail contributes at most 2 * discarded.
inline TranslateTv dn_translate_tv(const DiscreteNormal& dn, int axis) {
  LatticePmf shifted = translate(dn.pmf, LatticePoint::unit(dn.pmf.dim(), axis));
  TranslateTv r;
  r.value = tv_distance(dn.pmf, shifted);
  r.error_bar = std::min(1.0, 2.0 * dn.discarded_mass + 2.0 * dn.quad_error_est);
  return r;
}

struct MomentCheckRow {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;        // rhs - lhs
  bool precondition_ok = true;
};

// Truncated-expectation checks of the DN moment bounds:
//   (a) E ||W - nc||_Sigma^l   <= C(l) (nd)^{l/2}        for n >= 1/lambda_min
//   (b) E (W_j - nc_j)^2       <= 1/2 + 2 n Sigma_jj
//   (c) E [Sigma^{-1}(W-nc)]_j^{2l} <= n^l C'(l)(1 + (Sigma^{-1})_jj^l)
//                                                        for n >= d/(4 lambda_min^2)
inline std::vector<MomentCheckRow> dn_moment_check(const DiscreteNormal& dn, int l_max) {
  const int d = dn.pmf.dim();
  ConstantsTable ct = bound_constants(std::max(l_max, 2), 1.0, dn.Sigma);
  SigmaNorm snorm(dn.Sigma);
  Eigen::MatrixXd Sinv = snorm.inverse();
  Eigen::VectorXd nc = dn.n * dn.c;

  std::vector<double> metric_mom(static_cast<std::size_t>(l_max) + 1, 0.0);
  Eigen::VectorXd sq_mom = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd pow_mom = Eigen::MatrixXd::Zero(d, l_max);  // E [Sinv u]_j^{2l}
  for (const auto& [xpt, w] : dn.pmf.support()) {
    Eigen::VectorXd u = to_vector(xpt) - nc;
    double r = snorm(u);
    double pw = w;
    for (int l = 0; l <= l_max; ++l) {
      metric_mom[static_cast<std::size_t>(l)] += pw;
      pw *= r;
    }
    Eigen::VectorXd su = Sinv * u;
    for (int j = 0; j < d; ++j) {
      sq_mom[j] += w * u[j] * u[j];
      double base = su[j] * su[j], acc = w;
      for (int l = 1; l <= l_max; ++l) {
        acc *= base;
        pow_mom(j, l - 1) += acc;
      }
    }
  }

  std::vector<MomentCheckRow> rows;
  bool pre_a = dn.n >= 1.0 / ct.lambda_min;
  for (int l = 1; l <= l_max; ++l) {
    MomentCheckRow r;
    r.name = "metric_moment_l" + std::to_string(l);
    r.lhs = metric_mom[static_cast<std::size_t>(l)];
    r.rhs = ct.C[l] * std::pow(dn.n * d, 0.5 * l);
    r.margin = r.rhs - r.lhs;
    r.precondition_ok = pre_a;
    rows.push_back(r);
  }
  for (int j = 0; j < d; ++j) {
    MomentCheckRow r;
    r.name = "coordinate_variance_j" + std::to_string(j + 1);
    r.lhs = sq_mom[j];
    r.rhs = 0.5 + 2.0 * dn.n * dn.Sigma(j, j);
    r.margin = r.rhs - r.lhs;
    r.precondition_ok = dn.n >= 1.0;
    rows.push_back(r);
  }
  bool pre_c = dn.n >= d / (4.0 * ct.lambda_min * ct.lambda_min);
  for (int l = 1; l <= l_max; ++l) {
    for (int j = 0; j < d; ++j) {
      MomentCheckRow r;
      r.name = "whitened_moment_l" + std::to_string(l) + "_j" + std::to_string(j + 1);
      r.lhs = pow_mom(j, l - 1);
      r.rhs = std::pow(dn.n, l) * ct.C_prime[l] * (1.0 + std::pow(Sinv(j, j), l));
      r.margin = r.rhs - r.lhs;
      r.precondition_ok = pre_c;
      rows.push_back(r);
    }
  }
  return rows;
}

}  // namespace dnstein
