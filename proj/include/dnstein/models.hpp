#pragma once

// Concrete model instantiations: sums of independent integer vectors with
// the resampling pair and the Mineka coupling, and the monochrome-edges
// colouring model on r-regular graphs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dnstein/lattice.hpp"
#include "dnstein/pairs.hpp"

namespace dnstein {

// --- sums of independent integer vectors -------------------------------------

struct IndependentSumModel {
  std::vector<LatticePmf> summands;
  int m = 0;
  int dim = 0;

  std::vector<Eigen::VectorXd> mu_i;
  std::vector<Eigen::MatrixXd> S_i;
  std::vector<double> gamma_i;  // E |Y_i - mu_i|^3
  std::vector<double> u_i;      // min_j (1 - d_TV(L(Y_i), L(Y_i + e_j)))
  double Gamma = 0.0;
  double s_m = 0.0;
  double s_tilde_m = 0.0;  // s_m - max_i u_i

  Eigen::VectorXd mu;  // E W
  Eigen::MatrixXd S;   // Var W

  LatticePmf w_law;
  LatticePmf xi_law;
  double n = 0.0;          // regression scale: n = m, A = -I
  Eigen::MatrixXd A;
  Eigen::MatrixXd sigma2;  // 2 S / m

  bool pair_built = false;
  PairLaw pair;
  double eps_tilde1 = 0.0;  // max_{i,j} d_TV(L(W^(i)), L(W^(i) + e_j))

  IndependentSumModel() : w_law(LatticePmf::delta(LatticePoint{0})), xi_law(w_law) {}
};

inline IndependentSumModel build_sum_model(const std::vector<LatticePmf>& summands,
                                           bool with_pair = true,
                                           std::size_t joint_cap = std::size_t(1) << 22) {
  if (summands.empty()) throw std::invalid_argument("build_sum_model: no summands");
  const int d = summands.front().dim();
  for (const auto& s : summands)
    if (s.dim() != d) throw std::invalid_argument("build_sum_model: dimension mismatch");

  IndependentSumModel mod;
  mod.summands = summands;
  mod.m = static_cast<int>(summands.size());
  mod.dim = d;
  mod.mu = Eigen::VectorXd::Zero(d);
  mod.S = Eigen::MatrixXd::Zero(d, d);

  double max_u = 0.0;
  for (const auto& s : summands) {
    MomentTable t = moments(s, Eigen::VectorXd::Zero(d), nullptr, 0);
    MomentTable tc = moments(s, t.mean, nullptr, 3);
    mod.mu_i.push_back(t.mean);
    mod.S_i.push_back(t.cov);
    mod.gamma_i.push_back(tc.abs_central[3]);
    mod.Gamma += tc.abs_central[3];
    double u = 1.0;
    for (int j = 0; j < d; ++j)
      u = std::min(u, 1.0 - tv_distance(s, translate(s, LatticePoint::unit(d, j))));
    mod.u_i.push_back(u);
    mod.s_m += u;
    max_u = std::max(max_u, u);
    mod.mu += t.mean;
    mod.S += t.cov;
  }
  mod.s_tilde_m = mod.s_m - max_u;

  bool identical = std::all_of(summands.begin(), summands.end(), [&](const LatticePmf& s) {
    return s.support() == summands.front().support();
  });
  mod.w_law = identical ? convolve_power(summands.front(), mod.m)
                        : std::accumulate(summands.begin() + 1, summands.end(),
                                          summands.front(),
                                          [](const LatticePmf& a, const LatticePmf& b) {
                                            return convolve(a, b);
                                          });

  mod.n = mod.m;
  mod.A = -Eigen::MatrixXd::Identity(d, d);
  mod.sigma2 = 2.0 * mod.S / mod.m;

  // jump law: L(xi) = m^{-1} sum_i L(Y_i' - Y_i)
  {
    LatticePmf::Support acc;
    for (const auto& s : summands) {
      LatticePmf refl(d, [&] {
        LatticePmf::Support r;
        for (const auto& [x, w] : s.support()) r[-x] = w;
        return r;
      }(), s.tolerance());
      LatticePmf diff = convolve(s, refl);
      for (const auto& [x, w] : diff.support()) acc[x] += w / mod.m;
    }
    mod.xi_law = LatticePmf(d, std::move(acc), 1e-9);
  }

  if (with_pair) {
    // leave-one-out laws
    std::vector<LatticePmf> loo;
    if (identical && mod.m >= 2) {
      loo.assign(1, convolve_power(summands.front(), mod.m - 1));
    } else if (mod.m == 1) {
      loo.assign(1, LatticePmf::delta(LatticePoint::zero(d)));
    } else {
      std::vector<LatticePmf> pre, suf;
      pre.push_back(LatticePmf::delta(LatticePoint::zero(d)));
      for (int i = 0; i + 1 < mod.m; ++i) pre.push_back(convolve(pre.back(), summands[i]));
      suf.assign(mod.m, LatticePmf::delta(LatticePoint::zero(d)));
      for (int i = mod.m - 2; i >= 0; --i) suf[i] = convolve(suf[i + 1], summands[i + 1]);
      for (int i = 0; i < mod.m; ++i) loo.push_back(convolve(pre[i], suf[i]));
    }

    std::size_t atoms_bound = mod.w_law.support().size() * mod.xi_law.support().size();
    if (atoms_bound <= joint_cap) {
      std::map<LatticePoint, std::map<LatticePoint, double>> joint;
      for (int i = 0; i < mod.m; ++i) {
        const LatticePmf& rest = identical ? loo[0] : loo[i];
        const LatticePmf& yi = summands[i];
        double wi = 1.0 / mod.m;
        for (const auto& [y, py] : yi.support()) {
          for (const auto& [yp, pyp] : yi.support()) {
            LatticePoint J = yp - y;
            double pj = wi * py * pyp;
            for (const auto& [w0, pw0] : rest.support()) joint[w0 + y][J] += pj * pw0;
          }
        }
        if (identical) {
          // all m terms are equal; scale once
          for (auto& [w, jumps] : joint)
            for (auto& [J, pr] : jumps) pr *= mod.m;
          break;
        }
      }
      mod.pair = make_pair_law(d, std::move(joint));
      mod.pair_built = true;
    }

    for (const auto& w0 : loo) {
      for (int j = 0; j < d; ++j)
        mod.eps_tilde1 =
            std::max(mod.eps_tilde1, tv_distance(w0, translate(w0, LatticePoint::unit(d, j))));
    }
  }
  return mod;
}

// --- Mineka coupling ----------------------------------------------------------

struct MinekaTail {
  std::vector<double> beta;  // per-step move probability of the lazy walk
  std::vector<double> tail;  // tail[k] = P[tau > k], k = 0..m
  bool frozen = false;       // all beta = 0: the walk never moves
};

namespace detail {

// Exact hitting-time tail of level +1 for the lazy symmetric walk with
// per-step move probabilities beta[i], by dynamic programming on the
// position (kept as -index <= 0).
inline MinekaTail mineka_dp(std::vector<double> beta) {
  const std::size_t m = beta.size();
  MinekaTail out;
  out.beta = std::move(beta);
  out.tail.assign(m + 1, 1.0);
  out.frozen = std::all_of(out.beta.begin(), out.beta.end(), [](double b) { return b == 0.0; });
  if (out.frozen) return out;

  std::vector<double> f(m + 2, 0.0);  // f[k] = P[walk alive at position -k]
  f[0] = 1.0;
  double absorbed = 0.0;
  std::vector<double> g(m + 2, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double b = out.beta[i];
    std::size_t reach = i + 1;
    std::fill(g.begin(), g.begin() + static_cast<std::ptrdiff_t>(reach) + 1, 0.0);
    absorbed += b * f[0];
    for (std::size_t k = 0; k <= reach; ++k) {
      double v = (1.0 - 2.0 * b) * f[k];
      if (k + 1 <= reach) v += b * f[k + 1];
      if (k >= 1) v += b * f[k - 1];
      g[k] = v;
    }
    std::swap(f, g);
    out.tail[i + 1] = std::max(0.0, 1.0 - absorbed);
  }
  return out;
}

}  // namespace detail

// Coupling step probabilities beta_i = (1 - d_TV(L(Y_i), L(Y_i + e_j))) / 2
// and the exact tail P[tau > k] of the first passage to +1.
inline MinekaTail mineka_tau_tail(const std::vector<LatticePmf>& summands, int axis) {
  if (summands.empty()) throw std::invalid_argument("mineka_tau_tail: no summands");
  const int d = summands.front().dim();
  std::vector<double> beta;
  beta.reserve(summands.size());
  for (const auto& s : summands) {
    double tv = tv_distance(s, translate(s, LatticePoint::unit(d, axis)));
    beta.push_back(0.5 * (1.0 - tv));
  }
  return detail::mineka_dp(std::move(beta));
}

inline MinekaTail mineka_tau_tail_iid(const LatticePmf& summand, int m, int axis) {
  double tv = tv_distance(summand, translate(summand, LatticePoint::unit(summand.dim(), axis)));
  return detail::mineka_dp(std::vector<double>(static_cast<std::size_t>(m), 0.5 * (1.0 - tv)));
}

// --- regular graphs -----------------------------------------------------------

struct Graph {
  int n = 0;
  int r = 0;
  std::vector<std::vector<int>> adj;
  std::vector<std::pair<int, int>> edges;
};

inline Graph circulant_graph(int n, int r) {
  if (r >= n || r < 1) throw std::invalid_argument("circulant_graph: need 1 <= r < n");
  if ((static_cast<long long>(n) * r) % 2 != 0)
    throw std::invalid_argument("circulant_graph: n r must be even");
  Graph g;
  g.n = n;
  g.r = r;
  g.adj.assign(n, {});
  auto link = [&](int a, int b) {
    g.adj[a].push_back(b);
    g.adj[b].push_back(a);
    g.edges.emplace_back(std::min(a, b), std::max(a, b));
  };
  // offsets 1..r/2 never collide for r < n, so every (i, k) is a new edge
  int half = r / 2;
  for (int i = 0; i < n; ++i)
    for (int k = 1; k <= half; ++k) link(i, (i + k) % n);
  if (r % 2 == 1) {
    if (n % 2 != 0) throw std::invalid_argument("circulant_graph: odd r needs even n");
    for (int i = 0; i < n / 2; ++i) link(i, i + n / 2);
  }
  for (int i = 0; i < n; ++i)
    if (static_cast<int>(g.adj[i].size()) != r)
      throw std::logic_error("circulant_graph: degree check failed");
  return g;
}

// configuration model with rejection of self-loops and multi-edges
inline Graph pairing_graph(int n, int r, std::uint64_t seed, int retry_cap = 1000) {
  if (r >= n || r < 1) throw std::invalid_argument("pairing_graph: need 1 <= r < n");
  if ((static_cast<long long>(n) * r) % 2 != 0)
    throw std::invalid_argument("pairing_graph: n r must be even");
  std::mt19937_64 rng(seed);
  for (int attempt = 0; attempt < retry_cap; ++attempt) {
    std::vector<int> stubs;
    stubs.reserve(static_cast<std::size_t>(n) * r);
    for (int v = 0; v < n; ++v)
      for (int k = 0; k < r; ++k) stubs.push_back(v);
    std::shuffle(stubs.begin(), stubs.end(), rng);
    std::set<std::pair<int, int>> seen;
    bool ok = true;
    Graph g;
    g.n = n;
    g.r = r;
    g.adj.assign(n, {});
    for (std::size_t i = 0; i < stubs.size(); i += 2) {
      int a = stubs[i], b = stubs[i + 1];
      if (a == b) {
        ok = false;
        break;
      }
      auto e = std::minmax(a, b);
      if (!seen.insert({e.first, e.second}).second) {
        ok = false;
        break;
      }
      g.adj[a].push_back(b);
      g.adj[b].push_back(a);
      g.edges.emplace_back(e.first, e.second);
    }
    if (ok) return g;
  }
  throw std::runtime_error("pairing_graph: retry cap exceeded");
}

enum class GraphKind { circulant, pairing };

inline Graph regular_graph(int n, int r, GraphKind kind, std::uint64_t seed = 0) {
  return kind == GraphKind::circulant ? circulant_graph(n, r) : pairing_graph(n, r, seed);
}

// --- colouring model ----------------------------------------------------------

// Regression matrix of the recolouring pair, dimension (2m-1) x (2m-1):
// rows 1..m couple M_l to N_l (or to all N's for l = m), rows m+1..2m-1 are
// the -1 drift of the N block. Eigenvalues: -2 (x m) and -1 (x (m-1)).
inline Eigen::MatrixXd colouring_A_matrix(int m, int r, const Eigen::VectorXd& p) {
  if (m < 2) throw std::invalid_argument("colouring_A_matrix: need m >= 2");
  const int d = 2 * m - 1;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(d, d);
  for (int l = 0; l < m - 1; ++l) {
    A(l, l) = -2.0;
    A(l, m + l) = r * p[l];
  }
  A(m - 1, m - 1) = -2.0;
  for (int t = 0; t < m - 1; ++t) A(m - 1, m + t) = -r * p[m - 1];
  for (int l = m; l < d; ++l) A(l, l) = -1.0;
  return A;
}

namespace detail {

// jump of W = (M_1..M_m, N_1..N_{m-1}) when a vertex of colour i0 whose
// neighbour profile contains a vertices of colour i0 and b of colour i1 is
// recoloured to i1 (0-based colours)
inline LatticePoint colouring_jump(int m, int i0, int a, int b, int i1) {
  LatticePoint J = LatticePoint::zero(2 * m - 1);
  if (i1 == i0) return J;
  J[i1] += b;
  J[i0] -= a;
  if (i1 < m - 1) J[m + i1] += 1;
  if (i0 < m - 1) J[m + i0] -= 1;
  return J;
}

inline void colouring_statistic(const Graph& g, const std::vector<int>& colour, int m,
                                LatticePoint& W) {
  for (int i = 0; i < W.dim(); ++i) W[i] = 0;
  for (const auto& [u, v] : g.edges)
    if (colour[u] == colour[v]) W[colour[u]] += 1;
  for (int v = 0; v < g.n; ++v)
    if (colour[v] < m - 1) W[m + colour[v]] += 1;
}

}  // namespace detail

struct ColouringOptions {
  std::size_t enum_cap = std::size_t(1) << 22;  // max #colourings for exact mode
  std::size_t partition_cap = 20000;            // max #colourings to store the partition
  bool build_pair = true;
  std::uint64_t seed = 1;
};

struct ColouringModel {
  Graph graph;
  int m = 0;
  Eigen::VectorXd p;
  int dim = 0;  // 2m - 1
  bool exact = false;

  Eigen::MatrixXd A;        // regression matrix, with n = graph.n
  double n = 0.0;
  Eigen::VectorXd mean_formula;      // (n r p_i^2/2, n p_i)
  Eigen::MatrixXd cov_formula;       // the closed-form covariance table
  Eigen::MatrixXd sigma2_listed;     // the closed-form jump second moments as listed
  std::map<LatticePoint, double> q_formula;  // exact q^J from the profile sum

  LatticePmf w_law;   // exact mode
  PairLaw pair;       // exact mode (optionally with partition backend)
  bool pair_built = false;
  double max_jump_sq = 0.0;  // observed max |xi|^2; must be <= 2(r^2+1)

  std::function<std::pair<LatticePoint, LatticePoint>(std::mt19937_64&)> sampler;

  ColouringModel() : w_law(LatticePmf::delta(LatticePoint{0})) {}
};

namespace detail {

inline Eigen::VectorXd colouring_mean_formula(const Graph& g, int m, const Eigen::VectorXd& p) {
  Eigen::VectorXd mu(2 * m - 1);
  for (int i = 0; i < m; ++i) mu[i] = g.n * g.r * p[i] * p[i] / 2.0;
  for (int i = 0; i < m - 1; ++i) mu[m + i] = g.n * p[i];
  return mu;
}

inline Eigen::MatrixXd colouring_cov_formula(const Graph& g, int m, const Eigen::VectorXd& p) {
  const int d = 2 * m - 1;
  const double n = g.n, r = g.r;
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < m; ++i) {
    V(i, i) = 0.5 * n * r * p[i] * p[i] * (1.0 - p[i]) * (1.0 + (2.0 * r - 1.0) * p[i]);
    for (int l = 0; l < m; ++l)
      if (l != i) V(i, l) = -0.5 * n * r * (2.0 * r - 1.0) * p[i] * p[i] * p[l] * p[l];
  }
  for (int i = 0; i < m - 1; ++i) {
    V(m + i, m + i) = n * p[i] * (1.0 - p[i]);
    for (int l = 0; l < m - 1; ++l)
      if (l != i) V(m + i, m + l) = -n * p[i] * p[l];
  }
  for (int i = 0; i < m; ++i) {
    for (int l = 0; l < m - 1; ++l) {
      double c = (i == l) ? n * r * p[i] * p[i] * (1.0 - p[i]) : -n * r * p[i] * p[i] * p[l];
      V(i, m + l) = c;
      V(m + l, i) = c;
    }
  }
  return V;
}

// second moments of the jump exactly as listed (the E xi_{m+l}^2 diagonal is
// known to disagree with enumeration; the builder logs the comparison)
inline Eigen::MatrixXd colouring_sigma2_listed(int m, int r, const Eigen::VectorXd& p) {
  const int d = 2 * m - 1;
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(d, d);
  for (int l = 0; l < m; ++l) {
    s(l, l) = 2.0 * p[l] * p[l] * (1.0 - p[l]) * (r * (r - 1.0) * p[l] + r);
    for (int lp = 0; lp < m; ++lp)
      if (lp != l) s(l, lp) = -2.0 * r * (r - 1.0) * p[l] * p[l] * p[lp] * p[lp];
    if (l < m - 1) {
      s(l, m + l) = 2.0 * r * p[l] * p[l] * (1.0 - p[l]);
      s(m + l, l) = s(l, m + l);
    }
    for (int lp = 0; lp < m - 1; ++lp)
      if (lp != l) {
        s(l, m + lp) = -2.0 * r * p[l] * p[l] * p[lp];
        s(m + lp, l) = s(l, m + lp);
      }
  }
  for (int l = 0; l < m - 1; ++l) {
    s(m + l, m + l) = 2.0 * p[l];
    for (int lp = 0; lp < m - 1; ++lp)
      if (lp != l) s(m + l, m + lp) = -2.0 * p[l] * p[lp];
  }
  return s;
}

// q^J by summing over (own colour, neighbour profile restricted to the two
// relevant counts, new colour); valid for every r-regular graph because
// vertex colours are iid.
inline std::map<LatticePoint, double> colouring_q_formula(int m, int r,
                                                          const Eigen::VectorXd& p) {
  std::map<LatticePoint, double> q;
  auto binom = [](int n, int k) {
    double v = 1.0;
    for (int i = 1; i <= k; ++i) v = v * (n - k + i) / i;
    return v;
  };
  for (int i0 = 0; i0 < m; ++i0) {
    for (int i1 = 0; i1 < m; ++i1) {
      if (i1 == i0) {
        q[LatticePoint::zero(2 * m - 1)] += p[i0] * p[i0];
        continue;
      }
      double prest = 1.0 - p[i0] - p[i1];
      for (int a = 0; a <= r; ++a) {
        for (int b = 0; a + b <= r; ++b) {
          double w = binom(r, a) * binom(r - a, b) * std::pow(p[i0], a) * std::pow(p[i1], b) *
                     std::pow(prest, r - a - b);
          if (w == 0.0) continue;
          q[colouring_jump(m, i0, a, b, i1)] += p[i0] * p[i1] * w;
        }
      }
    }
  }
  for (auto it = q.begin(); it != q.end();)
    it = it->second <= 0.0 ? q.erase(it) : std::next(it);
  return q;
}

}  // namespace detail

inline ColouringModel build_colouring_model(const Graph& g, int m, const Eigen::VectorXd& p,
                                            const ColouringOptions& opt = {}) {
  if (m < 2) throw std::invalid_argument("build_colouring_model: need m >= 2");
  if (p.size() != m) throw std::invalid_argument("build_colouring_model: p has wrong length");
  double psum = 0.0;
  for (int i = 0; i < m; ++i) {
    if (p[i] <= 0.0) throw std::invalid_argument("build_colouring_model: probabilities must be positive");
    psum += p[i];
  }
  if (std::abs(psum - 1.0) > 1e-12)
    throw std::invalid_argument("build_colouring_model: p must sum to 1");
  for (int v = 0; v < g.n; ++v)
    if (static_cast<int>(g.adj[v].size()) != g.r)
      throw std::invalid_argument("build_colouring_model: graph is not r-regular");

  ColouringModel mod;
  mod.graph = g;
  mod.m = m;
  mod.p = p;
  mod.dim = 2 * m - 1;
  mod.n = g.n;
  mod.A = colouring_A_matrix(m, g.r, p);
  mod.mean_formula = detail::colouring_mean_formula(g, m, p);
  mod.cov_formula = detail::colouring_cov_formula(g, m, p);
  mod.sigma2_listed = detail::colouring_sigma2_listed(m, g.r, p);
  mod.q_formula = detail::colouring_q_formula(m, g.r, p);

  double colourings = std::pow(static_cast<double>(m), g.n);
  mod.exact = colourings <= static_cast<double>(opt.enum_cap);

  const double jump_cap = 2.0 * (static_cast<double>(g.r) * g.r + 1.0);

  if (mod.exact) {
    std::size_t count = static_cast<std::size_t>(std::llround(colourings));
    bool with_partition = opt.build_pair && count <= opt.partition_cap;
    std::vector<int> colour(g.n, 0);
    LatticePoint W = LatticePoint::zero(mod.dim);
    LatticePmf::Support wsupp;
    std::map<LatticePoint, std::map<LatticePoint, double>> joint;
    std::vector<std::pair<double, std::map<LatticePoint, double>>> partition;
    std::vector<int> profile(m, 0);

    for (;;) {
      double prob = 1.0;
      for (int v = 0; v < g.n; ++v) prob *= p[colour[v]];
      detail::colouring_statistic(g, colour, m, W);
      wsupp[W] += prob;

      if (opt.build_pair) {
        std::map<LatticePoint, double> cond;
        for (int v = 0; v < g.n; ++v) {
          std::fill(profile.begin(), profile.end(), 0);
          for (int u : g.adj[v]) profile[colour[u]] += 1;
          int i0 = colour[v];
          for (int i1 = 0; i1 < m; ++i1) {
            LatticePoint J = detail::colouring_jump(m, i0, profile[i0], profile[i1], i1);
            double sq = to_vector(J).squaredNorm();
            mod.max_jump_sq = std::max(mod.max_jump_sq, sq);
            if (sq > jump_cap + 1e-9)
              throw std::logic_error("build_colouring_model: jump bound violated");
            double pr = prob * p[i1] / g.n;
            joint[W][J] += pr;
            if (with_partition) cond[J] += p[i1] / g.n;
          }
        }
        if (with_partition) partition.emplace_back(prob, std::move(cond));
      }

      // odometer
      int v = g.n - 1;
      while (v >= 0 && ++colour[v] == m) colour[v--] = 0;
      if (v < 0) break;
    }
    mod.w_law = LatticePmf(mod.dim, std::move(wsupp), 1e-9);
    if (opt.build_pair) {
      mod.pair = make_pair_law(mod.dim, std::move(joint));
      mod.pair.partition = std::move(partition);
      mod.pair_built = true;
    }
  }

  // seeded sampler, available in both modes
  {
    Graph graph = g;
    Eigen::VectorXd pv = p;
    int mm = m;
    mod.sampler = [graph, pv, mm](std::mt19937_64& rng) {
      thread_local std::vector<int> colour, profile;
      colour.resize(graph.n);
      profile.assign(mm, 0);
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      auto draw = [&] {
        double u = unif(rng), acc = 0.0;
        for (int i = 0; i < mm; ++i) {
          acc += pv[i];
          if (u <= acc) return i;
        }
        return mm - 1;
      };
      for (int v = 0; v < graph.n; ++v) colour[v] = draw();
      LatticePoint W = LatticePoint::zero(2 * mm - 1);
      detail::colouring_statistic(graph, colour, mm, W);
      int K = static_cast<int>(rng() % static_cast<std::uint64_t>(graph.n));
      std::fill(profile.begin(), profile.end(), 0);
      for (int u : graph.adj[K]) profile[colour[u]] += 1;
      int c1 = draw();
      int i0 = colour[K];
      LatticePoint J = detail::colouring_jump(mm, i0, profile[i0], profile[c1], c1);
      return std::make_pair(W, J);
    };
    if (!mod.exact) {
      mod.pair.dim = mod.dim;
      mod.pair.exact = false;
      mod.pair.q = mod.q_formula;
      mod.pair.sampler = mod.sampler;
    }
  }
  return mod;
}

// --- u-statistic bounds through the per-vertex profile partition ---------------

struct PartitionURow {
  LatticePoint J;
  double q = 0.0;
  double u_bound = 0.0;       // E |P[xi=J | F] - q^J| / q^J (exact or estimate)
  double u_bound_half_ci = 0.0;
  double var = 0.0;           // Var{ P[xi=J | F] }
  double var_half_ci = 0.0;
  std::size_t replicates = 0;
  bool exact = false;
};

// Exact (enumeration) or replicate-MC evaluation of the conditional jump
// probabilities given the per-vertex colour/profile events.
inline std::vector<PartitionURow> colouring_partition_u(const ColouringModel& mod, bool exact_mode,
                                                        std::size_t replicates = 100000,
                                                        std::uint64_t seed = 1) {
  const int m = mod.m;
  const Graph& g = mod.graph;
  std::vector<PartitionURow> rows;

  if (exact_mode) {
    if (!mod.pair_built || mod.pair.partition.empty())
      throw std::logic_error("colouring_partition_u: exact mode needs the partition backend");
    for (const auto& [J, qJ] : mod.pair.q) {
      PartitionURow row;
      row.J = J;
      row.q = qJ;
      double acc = 0.0, second = 0.0;
      for (const auto& [w, cond] : mod.pair.partition) {
        auto it = cond.find(J);
        double c = it == cond.end() ? 0.0 : it->second;
        acc += w * std::abs(c - qJ);
        second += w * (c - qJ) * (c - qJ);
      }
      row.u_bound = acc / qJ;
      row.var = second;
      row.exact = true;
      rows.push_back(std::move(row));
    }
    return rows;
  }

  // MC over independent colouring replicates
  std::vector<LatticePoint> jumps;
  std::vector<double> qv;
  for (const auto& [J, qJ] : mod.q_formula) {
    jumps.push_back(J);
    qv.push_back(qJ);
  }
  const int nj = static_cast<int>(jumps.size());

  // (i0, a, b, i1) -> row index, so a replicate never touches a map
  const int r = g.r;
  const int stride_b = m, stride_a = (r + 1) * m, stride_i0 = (r + 1) * (r + 1) * m;
  std::vector<int> table(static_cast<std::size_t>(m) * stride_i0, -1);
  {
    std::map<LatticePoint, int> index;
    for (int i = 0; i < nj; ++i) index[jumps[i]] = i;
    for (int i0 = 0; i0 < m; ++i0)
      for (int a = 0; a <= r; ++a)
        for (int b = 0; b <= r; ++b)
          for (int i1 = 0; i1 < m; ++i1) {
            auto it = index.find(detail::colouring_jump(m, i0, a, b, i1));
            if (it != index.end())
              table[static_cast<std::size_t>(i0) * stride_i0 + a * stride_a + b * stride_b + i1] =
                  it->second;
          }
  }

  std::vector<double> s_abs(nj, 0.0), s1(nj, 0.0), s2(nj, 0.0), s3(nj, 0.0), s4(nj, 0.0),
      s_abs2(nj, 0.0);
  std::vector<double> cond(nj, 0.0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<int> colour(g.n), profile(m);

  for (std::size_t rep = 0; rep < replicates; ++rep) {
    for (int v = 0; v < g.n; ++v) {
      double u = unif(rng), acc = 0.0;
      int c = m - 1;
      for (int i = 0; i < m; ++i) {
        acc += mod.p[i];
        if (u <= acc) {
          c = i;
          break;
        }
      }
      colour[v] = c;
    }
    std::fill(cond.begin(), cond.end(), 0.0);
    for (int v = 0; v < g.n; ++v) {
      std::fill(profile.begin(), profile.end(), 0);
      for (int u : g.adj[v]) profile[colour[u]] += 1;
      int i0 = colour[v];
      std::size_t base = static_cast<std::size_t>(i0) * stride_i0 + profile[i0] * stride_a;
      for (int i1 = 0; i1 < m; ++i1) {
        int idx = table[base + profile[i1] * stride_b + i1];
        if (idx >= 0) cond[idx] += mod.p[i1] / g.n;
      }
    }
    for (int i = 0; i < nj; ++i) {
      double c = cond[i];
      double dev = std::abs(c - qv[i]);
      s_abs[i] += dev;
      s_abs2[i] += dev * dev;
      s1[i] += c;
      s2[i] += c * c;
      s3[i] += c * c * c;
      s4[i] += c * c * c * c;
    }
  }

  const double R = static_cast<double>(replicates);
  for (int i = 0; i < nj; ++i) {
    PartitionURow row;
    row.J = jumps[i];
    row.q = qv[i];
    row.replicates = replicates;
    row.u_bound = s_abs[i] / R / qv[i];
    double var_abs = std::max(0.0, s_abs2[i] / R - (s_abs[i] / R) * (s_abs[i] / R));
    row.u_bound_half_ci = 1.96 * std::sqrt(var_abs / R) / qv[i];
    double mean = s1[i] / R;
    double var = std::max(0.0, s2[i] / R - mean * mean) * R / std::max(1.0, R - 1.0);
    row.var = var;
    // delta-method CI for the variance via the centred fourth moment
    double m2 = s2[i] / R - mean * mean;
    double m4 = s4[i] / R - 4.0 * mean * s3[i] / R + 6.0 * mean * mean * s2[i] / R -
                3.0 * mean * mean * mean * mean;
    double varvar = std::max(0.0, m4 - m2 * m2) / R;
    row.var_half_ci = 1.96 * std::sqrt(varvar);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace dnstein
