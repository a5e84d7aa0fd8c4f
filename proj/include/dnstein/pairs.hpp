#pragma once

// Exchangeable / linear-regression pair framework: exact joint laws of
// (W, W') through the jump xi = W' - W, regression and conditional-variance
// residuals, jump-set statistics with chain decompositions, translate-TV
// diagnostics, and the standardized-moment checks.

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dnstein/lattice.hpp"
#include "dnstein/matrixcore.hpp"
#include "dnstein/stein.hpp"

namespace dnstein {

// Joint law of (W, xi) with xi = W' - W. Exact mode stores every atom;
// MC mode carries a seeded sampler instead. The optional partition backend
// lists, per outcome class of a refining sigma-field, the conditional jump
// probabilities P[xi = J | F].
struct PairLaw {
  int dim = 0;
  bool exact = true;
  std::map<LatticePoint, std::map<LatticePoint, double>> joint;  // w -> J -> P[W=w, xi=J]
  std::map<LatticePoint, double> w_prob;                         // marginal of W
  std::map<LatticePoint, double> q;                              // jump set with q^J
  Eigen::VectorXd mu;                                            // E W
  bool exchangeable = false;
  double marginal_gap = 0.0;      // max_w |P[W=w] - P[W'=w]|
  double exchangeable_gap = 0.0;  // max |P[w,J] - P[w+J,-J]|

  std::vector<std::pair<double, std::map<LatticePoint, double>>> partition;

  std::function<std::pair<LatticePoint, LatticePoint>(std::mt19937_64&)> sampler;

  LatticePmf w_marginal() const { return LatticePmf(dim, w_prob, 1e-9); }

  LatticePmf xi_law() const { return LatticePmf(dim, q, 1e-9); }

  // L(W | xi = J)
  LatticePmf w_conditional(const LatticePoint& J) const {
    auto qit = q.find(J);
    if (qit == q.end()) throw std::invalid_argument("w_conditional: jump not in the jump set");
    LatticePmf::Support s;
    for (const auto& [w, jumps] : joint) {
      auto it = jumps.find(J);
      if (it != jumps.end()) s[w] = it->second / qit->second;
    }
    return LatticePmf(dim, std::move(s), 1e-9);
  }

  std::vector<LatticePoint> jump_set() const {
    std::vector<LatticePoint> js;
    js.reserve(q.size());
    for (const auto& [J, p] : q) {
      (void)p;
      js.push_back(J);
    }
    return js;
  }
};

// Builds a PairLaw from exact joint atoms, computing marginals, the jump
// set, E W, and the marginal-equality / exchangeability gaps.
inline PairLaw make_pair_law(int dim,
                             std::map<LatticePoint, std::map<LatticePoint, double>> joint) {
  PairLaw p;
  p.dim = dim;
  p.joint = std::move(joint);
  double total = 0.0;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  std::map<LatticePoint, double> wprime_prob;
  for (const auto& [w, jumps] : p.joint) {
    double pw = 0.0;
    for (const auto& [J, pr] : jumps) {
      if (pr < 0.0) throw std::invalid_argument("make_pair_law: negative probability");
      pw += pr;
      p.q[J] += pr;
      wprime_prob[w + J] += pr;
    }
    p.w_prob[w] = pw;
    total += pw;
    mean += pw * to_vector(w);
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("make_pair_law: joint mass " + std::to_string(total));
  p.mu = mean / total;

  double gap = 0.0;
  for (const auto& [w, pw] : p.w_prob) {
    auto it = wprime_prob.find(w);
    gap = std::max(gap, std::abs(pw - (it == wprime_prob.end() ? 0.0 : it->second)));
  }
  for (const auto& [w, pw] : wprime_prob)
    if (!p.w_prob.count(w)) gap = std::max(gap, pw);
  p.marginal_gap = gap;

  double xgap = 0.0;
  for (const auto& [w, jumps] : p.joint) {
    for (const auto& [J, pr] : jumps) {
      double other = 0.0;
      auto wit = p.joint.find(w + J);
      if (wit != p.joint.end()) {
        auto jit = wit->second.find(-J);
        if (jit != wit->second.end()) other = jit->second;
      }
      xgap = std::max(xgap, std::abs(pr - other));
    }
  }
  p.exchangeable_gap = xgap;
  p.exchangeable = xgap <= 1e-12;
  return p;
}

// --- regression and conditional variance -----------------------------------

struct RegressionResidual {
  std::map<LatticePoint, Eigen::VectorXd> r1;  // per atom
  double mean_abs = 0.0;                       // E |R1(W)|
  double max_abs = 0.0;
  Eigen::VectorXd mean;                        // E R1(W), should vanish
};

// R1(w) = sqrt(n/||A||) (E(xi | W=w) - A (w - mu) / n)
inline RegressionResidual fit_regression(const PairLaw& p, double n, const Eigen::MatrixXd& A) {
  if (!p.exact) throw std::logic_error("fit_regression: exact joint required");
  RegressionResidual out;
  double na = spectral_norm(A);
  double scale = std::sqrt(n / na);
  out.mean = Eigen::VectorXd::Zero(p.dim);
  for (const auto& [w, jumps] : p.joint) {
    double pw = p.w_prob.at(w);
    Eigen::VectorXd cond = Eigen::VectorXd::Zero(p.dim);
    for (const auto& [J, pr] : jumps) cond += pr * to_vector(J);
    cond /= pw;
    Eigen::VectorXd r = scale * (cond - A * (to_vector(w) - p.mu) / n);
    out.r1[w] = r;
    out.mean += pw * r;
    double nr = r.norm();
    out.mean_abs += pw * nr;
    out.max_abs = std::max(out.max_abs, nr);
  }
  return out;
}

struct ConditionalCovResidual {
  Eigen::MatrixXd sigma2;                      // E xi xi'
  std::map<LatticePoint, Eigen::MatrixXd> r2;  // sigma2(w) - sigma2
  double l1_mean = 0.0;                        // E ||R2(W)||_1 (entrywise)
  Eigen::MatrixXd mean;                        // E R2(W), should vanish
};

inline ConditionalCovResidual conditional_cov_residual(const PairLaw& p) {
  if (!p.exact) throw std::logic_error("conditional_cov_residual: exact joint required");
  ConditionalCovResidual out;
  out.sigma2 = Eigen::MatrixXd::Zero(p.dim, p.dim);
  for (const auto& [J, pr] : p.q) {
    Eigen::VectorXd v = to_vector(J);
    out.sigma2 += pr * v * v.transpose();
  }
  out.mean = Eigen::MatrixXd::Zero(p.dim, p.dim);
  for (const auto& [w, jumps] : p.joint) {
    double pw = p.w_prob.at(w);
    Eigen::MatrixXd cond = Eigen::MatrixXd::Zero(p.dim, p.dim);
    for (const auto& [J, pr] : jumps) {
      Eigen::VectorXd v = to_vector(J);
      cond += pr * v * v.transpose();
    }
    cond /= pw;
    Eigen::MatrixXd r = cond - out.sigma2;
    out.r2[w] = r;
    out.mean += pw * r;
    out.l1_mean += pw * r.cwiseAbs().sum();
  }
  return out;
}

// --- chains and u statistics ------------------------------------------------

struct ChainSearchOptions {
  double radius_factor = 3.0;  // box radius = factor * max_J |J|_inf
  int depth_cap = 8;
};

struct ChainResult {
  // chains[j] = jumps summing to e^(j), shortest first, lexicographic
  // tie-break; empty optional = no chain within the caps
  std::vector<std::optional<std::vector<LatticePoint>>> chains;
  bool all_found = false;
};

// Breadth-first search over partial sums of jump-set elements, confined to
// an L-infinity box. Failure is a first-class result.
inline ChainResult find_chains(const std::vector<LatticePoint>& jumps, int dim,
                               const ChainSearchOptions& opt = {}) {
  ChainResult res;
  res.chains.assign(dim, std::nullopt);
  auto cabs = [](Coord v) { return v < 0 ? -v : v; };
  Coord max_inf = 0;
  for (const auto& J : jumps)
    for (int i = 0; i < J.dim(); ++i) max_inf = std::max(max_inf, cabs(J[i]));
  Coord radius = static_cast<Coord>(std::llround(opt.radius_factor * max_inf));
  if (radius < 1) radius = max_inf >= 1 ? max_inf : 0;

  std::vector<LatticePoint> sorted = jumps;
  std::sort(sorted.begin(), sorted.end());

  std::map<LatticePoint, std::pair<LatticePoint, LatticePoint>> parent;  // node -> (prev, jump)
  std::vector<LatticePoint> frontier{LatticePoint::zero(dim)};
  parent.emplace(LatticePoint::zero(dim), std::make_pair(LatticePoint::zero(dim), LatticePoint::zero(dim)));

  auto in_box = [&](const LatticePoint& x) {
    for (int i = 0; i < dim; ++i)
      if (cabs(x[i]) > radius) return false;
    return true;
  };

  int found = 0;
  std::vector<LatticePoint> targets;
  for (int j = 0; j < dim; ++j) targets.push_back(LatticePoint::unit(dim, j));

  for (int depth = 1; depth <= opt.depth_cap && found < dim && !frontier.empty(); ++depth) {
    std::vector<LatticePoint> next;
    for (const auto& node : frontier) {
      for (const auto& J : sorted) {
        LatticePoint cand = node + J;
        if (!in_box(cand) || parent.count(cand)) continue;
        parent.emplace(cand, std::make_pair(node, J));
        next.push_back(cand);
      }
    }
    std::sort(next.begin(), next.end());
    for (int j = 0; j < dim; ++j) {
      if (res.chains[j]) continue;
      auto it = parent.find(targets[j]);
      if (it == parent.end()) continue;
      std::vector<LatticePoint> chain;
      LatticePoint cur = targets[j];
      while (!(cur == LatticePoint::zero(dim))) {
        auto& pr = parent.at(cur);
        chain.push_back(pr.second);
        cur = pr.first;
      }
      std::reverse(chain.begin(), chain.end());
      res.chains[j] = std::move(chain);
      ++found;
    }
    frontier = std::move(next);
  }
  res.all_found = found == dim;
  return res;
}

enum class Conditioning { atoms, partition };

struct UStats {
  Conditioning mode = Conditioning::atoms;
  std::map<LatticePoint, double> u;  // u^J per jump
  double u_star = 0.0;
  ChainResult chains;
  std::vector<std::optional<double>> u_tilde;  // per axis, needs a chain
  std::optional<double> u_tilde_star;          // absent if any axis failed
};

// u^J = (q^J)^{-1} E |Q^J(W) - q^J| from atoms, or the Jensen upper bound
// E |P[xi=J | F] - q^J| / q^J from a refining partition.
inline UStats u_statistics(const PairLaw& p, Conditioning mode = Conditioning::atoms,
                           const ChainSearchOptions& opt = {}) {
  UStats out;
  out.mode = mode;
  if (mode == Conditioning::atoms) {
    if (!p.exact) throw std::logic_error("u_statistics: exact joint required in atoms mode");
    for (const auto& [J, qJ] : p.q) {
      double acc = 0.0;
      for (const auto& [w, jumps] : p.joint) {
        double pw = p.w_prob.at(w);
        auto it = jumps.find(J);
        double qcond = it == jumps.end() ? 0.0 : it->second / pw;
        acc += pw * std::abs(qcond - qJ);
      }
      out.u[J] = acc / qJ;
    }
  } else {
    if (p.partition.empty())
      throw std::logic_error("u_statistics: no partition backend available");
    for (const auto& [J, qJ] : p.q) {
      double acc = 0.0;
      for (const auto& [weight, cond] : p.partition) {
        auto it = cond.find(J);
        double c = it == cond.end() ? 0.0 : it->second;
        acc += weight * std::abs(c - qJ);
      }
      out.u[J] = acc / qJ;
    }
  }
  for (const auto& [J, u] : out.u) {
    (void)J;
    out.u_star = std::max(out.u_star, u);
  }

  out.chains = find_chains(p.jump_set(), p.dim, opt);
  out.u_tilde.assign(p.dim, std::nullopt);
  bool all = true;
  double ustar_tilde = 0.0;
  for (int j = 0; j < p.dim; ++j) {
    if (!out.chains.chains[j]) {
      all = false;
      continue;
    }
    double s = 0.0;
    bool ok = true;
    for (const auto& J : *out.chains.chains[j]) {
      auto it = out.u.find(J);
      auto itn = out.u.find(-J);
      if (it == out.u.end() || itn == out.u.end()) {
        ok = false;
        break;
      }
      s += it->second + itn->second;
    }
    if (ok) {
      out.u_tilde[j] = s;
      ustar_tilde = std::max(ustar_tilde, s);
    } else {
      all = false;
    }
  }
  if (all) out.u_tilde_star = ustar_tilde;
  return out;
}

// --- translate TV diagnostics -----------------------------------------------

struct TranslateTvDiag {
  std::vector<double> eps1_axis;       // d_TV(L(W), L(W + e_j))
  double eps1 = 0.0;                   // max over axes
  std::map<LatticePoint, double> eps1_xi;  // per jump: max_j conditional TV
  double eps1_xi_max = 0.0;
  double xi3_eps1 = 0.0;               // E{ |xi|^3 eps1(xi) }

  // slack of the u-statistic bounds (negative slack = violation)
  std::vector<std::optional<double>> axis_slack;  // u~_j - eps1_j
  double min_axis_slack = 0.0;
  double min_cond_slack = 0.0;  // min over (j, J) of u~_j + 2 u^J - condTV
  double r2_bound_slack = 0.0;  // d Tr(sigma2) u* - E||R2||_1
  bool bounds_checked = false;
};

inline TranslateTvDiag translate_tv_diagnostics(const PairLaw& p, const UStats* us = nullptr,
                                                const ConditionalCovResidual* cc = nullptr) {
  if (!p.exact) throw std::logic_error("translate_tv_diagnostics: exact joint required");
  TranslateTvDiag out;
  LatticePmf w = p.w_marginal();
  out.eps1_axis.resize(p.dim);
  for (int j = 0; j < p.dim; ++j) {
    out.eps1_axis[j] = tv_distance(w, translate(w, LatticePoint::unit(p.dim, j)));
    out.eps1 = std::max(out.eps1, out.eps1_axis[j]);
  }
  for (const auto& [J, qJ] : p.q) {
    (void)qJ;
    LatticePmf cond = p.w_conditional(J);
    double m = 0.0;
    for (int j = 0; j < p.dim; ++j)
      m = std::max(m, tv_distance(cond, translate(cond, LatticePoint::unit(p.dim, j))));
    out.eps1_xi[J] = m;
    out.eps1_xi_max = std::max(out.eps1_xi_max, m);
  }
  for (const auto& [J, qJ] : p.q) {
    double j3 = std::pow(to_vector(J).norm(), 3.0);
    out.xi3_eps1 += qJ * j3 * out.eps1_xi.at(J);
  }

  if (us) {
    out.bounds_checked = true;
    out.axis_slack.assign(p.dim, std::nullopt);
    double min_axis = std::numeric_limits<double>::infinity();
    double min_cond = std::numeric_limits<double>::infinity();
    for (int j = 0; j < p.dim; ++j) {
      if (!us->u_tilde[j]) continue;
      double slack = *us->u_tilde[j] - out.eps1_axis[j];
      out.axis_slack[j] = slack;
      min_axis = std::min(min_axis, slack);
      for (const auto& [J, qJ] : p.q) {
        (void)qJ;
        LatticePmf cond = p.w_conditional(J);
        double ctv = tv_distance(cond, translate(cond, LatticePoint::unit(p.dim, j)));
        min_cond = std::min(min_cond, *us->u_tilde[j] + 2.0 * us->u.at(J) - ctv);
      }
    }
    out.min_axis_slack = std::isfinite(min_axis) ? min_axis : 0.0;
    out.min_cond_slack = std::isfinite(min_cond) ? min_cond : 0.0;
    if (cc) {
      double tr = cc->sigma2.trace();
      out.r2_bound_slack = p.dim * tr * us->u_star - cc->l1_mean;
    }
  }
  return out;
}

// --- standardization and Z moments ------------------------------------------

struct Standardized {
  double n_tilde = 0.0;        // n / ||A||
  Eigen::MatrixXd A_tilde;     // A / ||A||
  Eigen::MatrixXd Sigma_hat;   // n Sigma, the asymptotic Var W
  Eigen::MatrixXd Sigma_tilde; // Sigma_hat / n_tilde
};

inline Standardized standardize(double n, const Eigen::MatrixXd& A, const Eigen::MatrixXd& sigma2) {
  Standardized s;
  Eigen::MatrixXd Sigma = lyapunov_solve(A, sigma2);
  double na = spectral_norm(A);
  s.n_tilde = n / na;
  s.A_tilde = A / na;
  s.Sigma_hat = n * Sigma;
  s.Sigma_tilde = s.Sigma_hat / s.n_tilde;
  return s;
}

struct ZMomentReport {
  double z2 = 0.0, z3 = 0.0;
  double m3 = 0.0;
  double nu = 0.0, alpha1 = 0.0;
  double chi = 0.0, chi_sigma = 0.0;
  double L = 0.0, L_sigma = 0.0;
  double trace_s2s = 0.0;  // Tr(sigma2_Sigma)
  double cond11_lhs = 0.0, cond11_rhs = 0.0;
  double cond12_lhs = 0.0, cond12_rhs = 0.0;
  double simpler_lhs = 0.0, simpler_rhs = 0.0;
  bool cond11_ok = false, cond12_ok = false, simpler_ok = false;
  bool n_alpha_ok = false;
  bool z2_ok = false, z3_ok = false;
};

// Exact moments of Z = (n d nu)^{-1/2} Sigma^{-1/2} (W - mu) plus the
// regression-residual conditions that gate the moment bounds.
inline ZMomentReport z_moments_check(const PairLaw& p, const SteinTriple& t) {
  if (!p.exact) throw std::logic_error("z_moments_check: exact joint required");
  ZMomentReport r;
  const int d = p.dim;
  Eigen::MatrixXd R = inv_sqrt(t.Sigma);  // Sigma^{-1/2}
  Eigen::MatrixXd s2s = R * t.sigma2 * R;
  r.trace_s2s = s2s.trace();
  r.alpha1 = 0.5 * t.lambda_min_Sigma;
  r.nu = r.trace_s2s / (d * r.alpha1);

  for (const auto& [J, qJ] : p.q) {
    Eigen::VectorXd v = to_vector(J);
    r.chi += qJ * std::pow(v.norm(), 3.0);
    r.chi_sigma += qJ * std::pow((R * v).norm(), 3.0);
  }
  double ratio = t.norm_A / t.n;
  r.L = std::sqrt(ratio) * r.chi * std::pow(t.sigma2.trace(), -1.5);
  r.L_sigma = std::sqrt(ratio) * r.chi_sigma * std::pow(r.trace_s2s, -1.5);
  r.m3 = 2.0 * (1.0 + 10.0 * r.chi_sigma / std::pow(r.trace_s2s, 1.5));

  double zscale = 1.0 / std::sqrt(t.n * d * r.nu);
  RegressionResidual reg = fit_regression(p, t.n, t.A);
  double e_1z_r = 0.0, e_z1z_r = 0.0, e_r3 = 0.0;
  for (const auto& [w, pw] : p.w_prob) {
    Eigen::VectorXd z = zscale * (R * (to_vector(w) - p.mu));
    double az = z.norm();
    r.z2 += pw * az * az;
    r.z3 += pw * az * az * az;
    double rs = (R * reg.r1.at(w)).norm();
    e_1z_r += pw * (1.0 + az) * rs;
    e_z1z_r += pw * az * (1.0 + az) * rs;
    e_r3 += pw * rs * rs * rs;
  }

  double root = std::sqrt(t.norm_A / r.alpha1);
  r.cond11_lhs = root * e_1z_r;
  r.cond11_rhs = 0.5 * std::sqrt(r.trace_s2s) * (1.0 + r.z2);
  r.cond11_ok = r.cond11_lhs <= r.cond11_rhs;
  r.cond12_lhs = root * e_z1z_r;
  r.cond12_rhs = 0.25 * std::sqrt(r.trace_s2s) * (1.0 + r.z3);
  r.cond12_ok = r.cond12_lhs <= r.cond12_rhs;
  r.simpler_lhs = std::cbrt(e_r3);
  r.simpler_rhs = 0.125 * std::sqrt(r.alpha1 * r.trace_s2s / t.norm_A);
  r.simpler_ok = r.simpler_lhs <= r.simpler_rhs;
  r.n_alpha_ok = t.n / r.alpha1 >= 1.0;
  r.z2_ok = r.z2 <= 2.0;
  r.z3_ok = r.z3 <= r.m3;
  return r;
}

// --- full diagnostics ---------------------------------------------------------

struct DiagnosticsReport {
  int dim = 0;
  double n = 0.0;
  Eigen::MatrixXd A, A_hat, sigma2;
  Standardized std_form;

  double r1_mean_abs = 0.0, r1_max_abs = 0.0;
  double r1_sigma_moment3 = 0.0;  // E |Sigma^{-1/2} R1(W)|^3
  double r2_l1_mean = 0.0;
  double r1_mean_norm = 0.0, r2_mean_norm = 0.0;  // |E R1|, ||E R2||

  UStats u_atoms;
  std::optional<UStats> u_partition;

  TranslateTvDiag ttv;
  ZMomentReport zm;

  double exch_identity_gap = 0.0;  // ||E xi xi' + 2 E{E(xi|W)(W-mu)'}||
  double lyap_cov_residual = 0.0;  // ||A^ Cov(W) + Cov(W) A^' + sigma2||
  double marginal_gap = 0.0;
  bool exchangeable = false;
  double v_ratio = 0.0;  // E ||W - mu||_Sigma^2 / (d n)
  std::string provenance = "exact";
};

inline DiagnosticsReport diagnose(const PairLaw& p, double n, const Eigen::MatrixXd& A) {
  if (!p.exact) throw std::logic_error("diagnose: exact joint required");
  DiagnosticsReport rep;
  rep.dim = p.dim;
  rep.n = n;
  rep.A = A;
  rep.A_hat = A / n;
  rep.marginal_gap = p.marginal_gap;
  rep.exchangeable = p.exchangeable;

  ConditionalCovResidual cc = conditional_cov_residual(p);
  rep.sigma2 = cc.sigma2;
  rep.r2_l1_mean = cc.l1_mean;
  rep.r2_mean_norm = cc.mean.norm();
  rep.std_form = standardize(n, A, cc.sigma2);

  SteinTriple t = make_stein_triple(n, p.mu / n, A, cc.sigma2);

  RegressionResidual reg = fit_regression(p, n, A);
  rep.r1_mean_abs = reg.mean_abs;
  rep.r1_max_abs = reg.max_abs;
  rep.r1_mean_norm = reg.mean.norm();
  Eigen::MatrixXd R = inv_sqrt(t.Sigma);
  for (const auto& [w, pw] : p.w_prob)
    rep.r1_sigma_moment3 += pw * std::pow((R * reg.r1.at(w)).norm(), 3.0);

  rep.u_atoms = u_statistics(p, Conditioning::atoms);
  if (!p.partition.empty()) rep.u_partition = u_statistics(p, Conditioning::partition);

  rep.ttv = translate_tv_diagnostics(p, &rep.u_atoms, &cc);
  rep.zm = z_moments_check(p, t);

  // exchangeable identity: E xi xi' = -2 E{ E(xi|W) (W-mu)' }
  Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(p.dim, p.dim);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(p.dim, p.dim);
  double v2 = 0.0;
  for (const auto& [w, jumps] : p.joint) {
    Eigen::VectorXd u = to_vector(w) - p.mu;
    for (const auto& [J, pr] : jumps) cross += pr * to_vector(J) * u.transpose();
    double pw = p.w_prob.at(w);
    cov += pw * u * u.transpose();
    v2 += pw * t.snorm.squared(u);
  }
  rep.exch_identity_gap = spectral_norm(cc.sigma2 + 2.0 * cross);
  rep.lyap_cov_residual =
      spectral_norm(rep.A_hat * cov + cov * rep.A_hat.transpose() + cc.sigma2);
  rep.v_ratio = v2 / (p.dim * n);
  return rep;
}

}  // namespace dnstein
