// Acceptance suite: one check per headline property, one PASS/FAIL line
// each, exit code 0 iff everything passed. All tolerances are pinned here.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "dnstein/dnstein.hpp"

using namespace dnstein;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Outcome {
  int id;
  std::string name;
  bool pass;
  double seconds;
  std::string detail;
};

std::vector<Outcome> results;

class Timer {
 public:
  Timer() : t0(std::chrono::steady_clock::now()) {}
  double secs() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

 private:
  std::chrono::steady_clock::time_point t0;
};

void report(int id, const std::string& name, bool pass, double secs, const std::string& detail) {
  results.push_back({id, name, pass, secs, detail});
  std::printf("[%2d] %s  %-28s %6.2fs  %s\n", id, pass ? "PASS" : "FAIL", name.c_str(), secs,
              detail.c_str());
  std::fflush(stdout);
}

MatrixXd random_spd(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> g(0.0, 1.0);
  MatrixXd G(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) G(i, j) = g(rng);
  return G * G.transpose() + 0.05 * MatrixXd::Identity(d, d);
}

MatrixXd random_hurwitz(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> g(0.0, 1.0);
  MatrixXd M(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) M(i, j) = g(rng);
  Eigen::EigenSolver<MatrixXd> es(M);
  return M - (es.eigenvalues().real().maxCoeff() + 0.5) * MatrixXd::Identity(d, d);
}

// --- criterion 1 --------------------------------------------------------------

void criterion_lyapunov() {
  Timer t;
  std::mt19937_64 rng(20240901);
  int ok = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    int d = 1 + static_cast<int>(rng() % 8);
    MatrixXd A = random_hurwitz(rng, d);
    MatrixXd s2 = random_spd(rng, d);
    try {
      MatrixXd Sigma = lyapunov_solve(A, s2);  // residual + SPD checked inside
      double rel = spectral_norm(A * Sigma + Sigma * A.transpose() + s2) / spectral_norm(s2);
      worst = std::max(worst, rel);
      ++ok;
    } catch (const std::exception&) {
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d/100 pairs, worst residual %.2e (cap 1e-10)", ok, worst);
  report(1, "lyapunov-random-pairs", ok == 100 && t.secs() < 5.0, t.secs(), buf);
}

// --- criterion 2 --------------------------------------------------------------

void criterion_dn_moments() {
  Timer t;
  int checks = 0, failures = 0, skipped = 0;
  for (int d : {1, 2}) {
    std::vector<MatrixXd> sigmas;
    if (d == 1) {
      sigmas.push_back(MatrixXd::Identity(1, 1));
      sigmas.push_back(4.0 * MatrixXd::Identity(1, 1));
    } else {
      sigmas.push_back(MatrixXd::Identity(2, 2));
      MatrixXd D = MatrixXd::Identity(2, 2);
      D(1, 1) = 4.0;
      sigmas.push_back(D);
    }
    for (const MatrixXd& Sigma : sigmas) {
      for (double n : {4.0, 16.0, 64.0}) {
        DiscreteNormal dn = dn_build(n, VectorXd::Zero(d), Sigma, 1e-10);
        for (const auto& row : dn_moment_check(dn, 4)) {
          if (!row.precondition_ok) {
            ++skipped;
            continue;
          }
          ++checks;
          if (row.margin < 0.0) ++failures;
        }
      }
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d inequalities, %d violations, %d precondition-skipped",
                checks, failures, skipped);
  report(2, "dn-moment-bounds", failures == 0 && checks > 0 && t.secs() < 30.0, t.secs(), buf);
}

// --- criterion 3 --------------------------------------------------------------

void criterion_ibp() {
  Timer t;
  int checks = 0, failures = 0, skipped = 0;
  for (int d : {1, 2}) {
    for (double n : {64.0, 256.0}) {
      SteinTriple tr = make_stein_triple(n, VectorXd::Zero(d), -MatrixXd::Identity(d, d),
                                         2.0 * MatrixXd::Identity(d, d));
      DiscreteNormal dn = dn_build(n, tr.c, tr.Sigma, 1e-10);
      for (double delta : {0.5, 1.0}) {
        for (std::uint64_t fseed = 1; fseed <= 20; ++fseed) {
          TestFunction f = TestFunction::tabulated(d, 1000 * static_cast<std::uint64_t>(d) + fseed);
          // deterministic pseudo-random b and B from a companion function
          TestFunction bgen = TestFunction::tabulated(1, 77000 + fseed);
          VectorXd b(d);
          MatrixXd B(d, d);
          for (int i = 0; i < d; ++i) {
            b[i] = bgen(LatticePoint{static_cast<Coord>(i)});
            for (int j = 0; j < d; ++j)
              B(i, j) = bgen(LatticePoint{static_cast<Coord>(10 + i * d + j)});
          }
          IbpReport ra = ibp_vector_check(dn, tr, f, b, delta);
          IbpReport rb = ibp_matrix_check(dn, tr, f, B, delta, IbpPart::matrix_entrywise);
          IbpReport rc = ibp_matrix_check(dn, tr, f, B, delta, IbpPart::matrix_rowwise);
          for (const IbpReport& r : {ra, rb, rc}) {
            if (!r.n_ok) {
              ++skipped;
              continue;
            }
            ++checks;
            if (r.margin < 0.0) ++failures;
          }
        }
      }
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d margins, %d negative, %d gated by the n-threshold", checks,
                failures, skipped);
  report(3, "discrete-ibp-bounds", failures == 0 && checks > 0 && t.secs() < 120.0, t.secs(), buf);
}

// --- criterion 4 --------------------------------------------------------------

void criterion_translate_rate() {
  Timer t;
  std::vector<double> scaled;
  for (double n : {16.0, 64.0, 256.0}) {
    DiscreteNormal dn = dn_build(n, VectorXd::Zero(1), MatrixXd::Identity(1, 1), 1e-10);
    scaled.push_back(dn_translate_tv(dn, 0).value * std::sqrt(n));
  }
  std::vector<double> sorted = scaled;
  std::sort(sorted.begin(), sorted.end());
  double median = sorted[1];
  double width = sorted[2] - sorted[0];
  bool pass = width <= 0.30 * median;
  char buf[160];
  std::snprintf(buf, sizeof buf, "sqrt(n)*tv = {%.4f, %.4f, %.4f}, band %.3f of median", scaled[0],
                scaled[1], scaled[2], width / median);
  report(4, "translate-tv-rate", pass && t.secs() < 10.0, t.secs(), buf);
}

// --- criterion 5 --------------------------------------------------------------

void criterion_pair_exactness() {
  Timer t;
  bool pass = true;
  std::string detail;

  auto check_pair = [&](const PairLaw& pair, double n, const MatrixXd& A, const char* tag) {
    RegressionResidual reg = fit_regression(pair, n, A);
    ConditionalCovResidual cc = conditional_cov_residual(pair);
    MatrixXd cov = MatrixXd::Zero(pair.dim, pair.dim);
    for (const auto& [w, pw] : pair.w_prob) {
      VectorXd u = to_vector(w) - pair.mu;
      cov += pw * u * u.transpose();
    }
    MatrixXd Ah = A / n;
    double resid = spectral_norm(Ah * cov + cov * Ah.transpose() + cc.sigma2);
    bool ok = reg.max_abs <= 1e-12 && cc.mean.cwiseAbs().maxCoeff() <= 1e-10 && resid <= 1e-10;
    if (!ok) pass = false;
    char buf[120];
    std::snprintf(buf, sizeof buf, " %s(R1max %.1e, covres %.1e)%s", tag, reg.max_abs, resid,
                  ok ? "" : "!");
    detail += buf;
  };

  // three mixed product summands on Z^2
  auto prod = [](std::vector<std::pair<std::pair<Coord, Coord>, double>> atoms) {
    LatticePmf::Support s;
    for (auto& [xy, w] : atoms) s[LatticePoint{xy.first, xy.second}] = w;
    return LatticePmf(2, std::move(s));
  };
  LatticePmf s1 = prod({{{0, 0}, 0.25}, {{1, 0}, 0.25}, {{0, 1}, 0.25}, {{1, 1}, 0.25}});
  LatticePmf s2 = prod({{{0, 0}, 0.5}, {{1, 1}, 0.5}});
  LatticePmf s3 = prod({{{-1, 0}, 1.0 / 3}, {{0, 0}, 1.0 / 3}, {{1, 0}, 1.0 / 3}});
  IndependentSumModel sum = build_sum_model({s1, s2, s3});
  check_pair(sum.pair, sum.n, sum.A, "sum3");

  VectorXd p = VectorXd::Constant(3, 1.0 / 3.0);
  ColouringModel k3 = build_colouring_model(circulant_graph(3, 2), 3, p);
  check_pair(k3.pair, k3.n, k3.A, "K3");
  ColouringModel c4 = build_colouring_model(circulant_graph(4, 2), 3, p);
  check_pair(c4.pair, c4.n, c4.A, "C4");

  report(5, "pair-exactness", pass && t.secs() < 30.0, t.secs(), detail);
}

// --- criterion 6 --------------------------------------------------------------

// independent enumeration of mean/covariance/jump moments of the colouring
struct Enumerated {
  VectorXd mean;
  MatrixXd cov;
  MatrixXd xi2;
};

Enumerated enumerate_colouring(const Graph& g, int m, const VectorXd& p) {
  const int d = 2 * m - 1;
  Enumerated e{VectorXd::Zero(d), MatrixXd::Zero(d, d), MatrixXd::Zero(d, d)};
  MatrixXd raw2 = MatrixXd::Zero(d, d);
  std::vector<int> c(g.n, 0);
  for (;;) {
    double prob = 1.0;
    for (int v = 0; v < g.n; ++v) prob *= p[c[v]];
    VectorXd W = VectorXd::Zero(d);
    for (const auto& [a, b] : g.edges)
      if (c[a] == c[b]) W[c[a]] += 1.0;
    for (int v = 0; v < g.n; ++v)
      if (c[v] < m - 1) W[m + c[v]] += 1.0;
    e.mean += prob * W;
    raw2 += prob * W * W.transpose();
    for (int K = 0; K < g.n; ++K) {
      std::vector<int> prof(m, 0);
      for (int u : g.adj[K]) prof[c[u]] += 1;
      for (int i1 = 0; i1 < m; ++i1) {
        if (i1 == c[K]) continue;
        VectorXd xi = VectorXd::Zero(d);
        xi[i1] += prof[i1];
        xi[c[K]] -= prof[c[K]];
        if (i1 < m - 1) xi[m + i1] += 1.0;
        if (c[K] < m - 1) xi[m + c[K]] -= 1.0;
        e.xi2 += (prob * p[i1] / g.n) * xi * xi.transpose();
      }
    }
    int v = g.n - 1;
    while (v >= 0 && ++c[v] == m) c[v--] = 0;
    if (v < 0) break;
  }
  e.cov = raw2 - e.mean * e.mean.transpose();
  return e;
}

void criterion_colouring_covariance() {
  Timer t;
  bool pass = true;
  int entries = 0;
  int expected_discrepancies = 0;
  double worst = 0.0;

  VectorXd uni = VectorXd::Constant(3, 1.0 / 3.0);
  VectorXd skew(3);
  skew << 0.5, 0.3, 0.2;
  std::vector<Graph> graphs{circulant_graph(3, 2), circulant_graph(4, 2), circulant_graph(4, 3)};

  ColouringOptions light;
  light.build_pair = false;
  for (const Graph& g : graphs) {
    for (const VectorXd* p : {&uni, &skew}) {
      Enumerated e = enumerate_colouring(g, 3, *p);
      ColouringModel mod = build_colouring_model(g, 3, *p, light);
      const int d = 5, m = 3;
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          ++entries;
          double gap_mean = i == j ? std::abs(e.mean[i] - mod.mean_formula[i]) : 0.0;
          double gap_cov = std::abs(e.cov(i, j) - mod.cov_formula(i, j));
          worst = std::max({worst, gap_mean, gap_cov});
          if (gap_mean > 1e-12 || gap_cov > 1e-12) pass = false;

          double gap_xi = std::abs(e.xi2(i, j) - mod.sigma2_listed(i, j));
          if (i == j && i >= m) {
            // listed diagonal reads 2 p_l; enumeration gives 2 p_l (1 - p_l)
            double pl = (*p)[i - m];
            if (std::abs(e.xi2(i, i) - 2.0 * pl * (1.0 - pl)) > 1e-12) pass = false;
            if (gap_xi > 1e-12) ++expected_discrepancies;
          } else if (gap_xi > 1e-12) {
            pass = false;
          }
        }
    }
  }
  char buf[220];
  std::snprintf(buf, sizeof buf,
                "%d entries over 6 model instances, worst gap %.1e; %d expected jump-diagonal "
                "discrepancies (enumeration wins)",
                entries, worst, expected_discrepancies);
  report(6, "colouring-covariance-table", pass && expected_discrepancies == 12 && t.secs() < 60.0,
         t.secs(), buf);
}

// --- criterion 7 --------------------------------------------------------------

void criterion_translate_bounds() {
  Timer t;
  bool pass = true;
  double min_slack = 1e9;
  VectorXd p(3);
  p << 0.4, 0.35, 0.25;
  for (int n : {3, 4}) {
    Graph g = circulant_graph(n, 2);
    ColouringModel mod = build_colouring_model(g, 3, p);
    UStats u = u_statistics(mod.pair);
    if (!u.chains.all_found) {
      pass = false;
      continue;
    }
    ConditionalCovResidual cc = conditional_cov_residual(mod.pair);
    TranslateTvDiag d = translate_tv_diagnostics(mod.pair, &u, &cc);
    min_slack = std::min({min_slack, d.min_axis_slack, d.min_cond_slack, d.r2_bound_slack});
    if (d.min_axis_slack < -1e-12 || d.min_cond_slack < -1e-12 || d.r2_bound_slack < -1e-12)
      pass = false;
  }
  char buf[120];
  std::snprintf(buf, sizeof buf, "K3 and C4 (m=3): smallest slack %.3e", min_slack);
  report(7, "translate-tv-u-bounds", pass && t.secs() < 60.0, t.secs(), buf);
}

// --- criterion 8 --------------------------------------------------------------

void criterion_z_moments() {
  Timer t;
  bool pass = true;
  std::string detail;
  auto check = [&](const PairLaw& pair, double n, const MatrixXd& A, const char* tag) {
    SteinTriple tr = make_stein_triple(n, pair.mu / n, A, conditional_cov_residual(pair).sigma2);
    ZMomentReport z = z_moments_check(pair, tr);
    bool ok = z.cond11_ok && z.cond12_ok && z.n_alpha_ok && z.z2_ok && z.z3_ok;
    if (!ok) pass = false;
    char buf[120];
    std::snprintf(buf, sizeof buf, " %s(z2 %.3f<=2, z3 %.3f<=%.3f)%s", tag, z.z2, z.z3, z.m3,
                  ok ? "" : "!");
    detail += buf;
  };

  LatticePmf coin = LatticePmf::line(0, {0.5, 0.5});
  LatticePmf u3 = LatticePmf::line(-1, {1. / 3, 1. / 3, 1. / 3});
  LatticePmf tri = LatticePmf::line(0, {0.25, 0.5, 0.25});
  IndependentSumModel sum = build_sum_model({coin, u3, tri});
  check(sum.pair, sum.n, sum.A, "sum3");

  VectorXd p = VectorXd::Constant(3, 1.0 / 3.0);
  ColouringModel k3 = build_colouring_model(circulant_graph(3, 2), 3, p);
  check(k3.pair, k3.n, k3.A, "K3");
  ColouringModel c4 = build_colouring_model(circulant_graph(4, 2), 3, p);
  check(c4.pair, c4.n, c4.A, "C4");

  report(8, "standardized-z-moments", pass && t.secs() < 30.0, t.secs(), detail);
}

// --- criterion 9 --------------------------------------------------------------

void criterion_mineka() {
  Timer t;
  LatticePmf coin = LatticePmf::line(0, {0.5, 0.5});
  bool pass = true;
  std::string detail;
  for (int m : {100, 1000, 10000}) {
    MinekaTail tail = mineka_tau_tail_iid(coin, m, 0);
    double s_m = 0.5 * m;  // u_i = 1/2 for the fair coin
    double scaled = tail.tail[m] * std::sqrt(s_m);
    if (scaled > 2.0) pass = false;
    char buf[80];
    std::snprintf(buf, sizeof buf, " m=%d: tail*sqrt(s_m)=%.3f", m, scaled);
    detail += buf;
  }
  for (int m : {64, 128, 256, 512}) {
    LatticePmf w = convolve_power(coin, m);
    double eps1 = tv_distance(w, translate(w, LatticePoint{1}));
    MinekaTail tail = mineka_tau_tail_iid(coin, m, 0);
    if (eps1 > tail.tail[m] + 1e-14) pass = false;
  }
  detail += " ; eps1 <= P[tau>m] at m in {64..512}";
  report(9, "mineka-coupling-tail", pass && t.secs() < 30.0, t.secs(), detail);
}

// --- criterion 10 -------------------------------------------------------------

void criterion_headline_rate() {
  Timer t;
  LatticePmf u3 = LatticePmf::line(-1, {1. / 3, 1. / 3, 1. / 3});
  ConvergenceCurve c1 = tv_curve_indep_sum(u3, {64, 128, 256, 512}, 1e-10);
  double r1a = c1.rows[0].tv / c1.rows[2].tv;
  double r1b = c1.rows[1].tv / c1.rows[3].tv;
  bool d1_ok = r1a >= 1.6 && r1a <= 2.5 && r1b >= 1.6 && r1b <= 2.5;

  // skewed product summand on Z^2 (Bern(0.3) x Bern(0.3))
  LatticePmf::Support s;
  s[LatticePoint{0, 0}] = 0.49;
  s[LatticePoint{0, 1}] = 0.21;
  s[LatticePoint{1, 0}] = 0.21;
  s[LatticePoint{1, 1}] = 0.09;
  LatticePmf prod(2, std::move(s));
  ConvergenceCurve c2 = tv_curve_indep_sum(prod, {32, 64, 128, 256}, 1e-10);
  double r2a = c2.rows[0].tv / c2.rows[2].tv;
  double r2b = c2.rows[1].tv / c2.rows[3].tv;
  bool d2_ok = r2a >= 1.6 && r2a <= 2.5 && r2b >= 1.6 && r2b <= 2.5;

  char buf[300];
  std::snprintf(buf, sizeof buf,
                "d1 uniform{-1,0,1} ratios {%.3f, %.3f} vs [1.6, 2.5]%s; d2 skewed product ratios "
                "{%.3f, %.3f}%s",
                r1a, r1b,
                d1_ok ? ""
                      : " OUT OF BAND (symmetric summand: the third cumulant vanishes, the "
                        "distance decays like 1/m, so quadrupling m divides it by ~4)",
                r2a, r2b, d2_ok ? "" : " OUT OF BAND");
  report(10, "headline-convergence-band", d1_ok && d2_ok && t.secs() < 180.0, t.secs(), buf);
}

// --- criterion 11 -------------------------------------------------------------

void criterion_sublattice() {
  Timer t;
  LatticePmf even = LatticePmf::line(0, {0.5, 0.0, 0.5});  // uniform{0, 2}
  ConvergenceCurve c = tv_curve_indep_sum(even, {4, 16, 64, 256}, 1e-10);
  bool plateau = true;
  double min_tv = 1.0;
  for (const auto& r : c.rows) {
    min_tv = std::min(min_tv, r.tv);
    if (r.tv < 0.4) plateau = false;
  }

  VectorXd p2 = VectorXd::Constant(2, 0.5);
  ColouringModel m2 = build_colouring_model(circulant_graph(4, 2), 2, p2);
  UStats u = u_statistics(m2.pair);
  bool chains_fail = !u.chains.chains[0].has_value() && !u.chains.chains[1].has_value();

  char buf[160];
  std::snprintf(buf, sizeof buf, "2Z summand: min tv %.3f >= 0.4; m=2 colouring M-axis chains %s",
                min_tv, chains_fail ? "fail as required" : "unexpectedly found");
  report(11, "sublattice-obstruction", plateau && chains_fail && t.secs() < 60.0, t.secs(), buf);
}

// --- criterion 12 -------------------------------------------------------------

void criterion_partition_variance() {
  Timer t;
  VectorXd p = VectorXd::Constant(3, 1.0 / 3.0);
  bool pass = true;
  double worst = 0.0;
  // theory: n Var{P[xi=J|F]} <= (1 + r + r^2)/4 = 1.75 for r = 2; cap 2.0
  const double cap = 2.0;
  for (int n : {8, 16, 32, 64}) {
    ColouringOptions opt;
    opt.build_pair = false;
    ColouringModel mod = build_colouring_model(circulant_graph(n, 2), 3, p, opt);
    auto rows = colouring_partition_u(mod, false, 100000, 424200 + n);
    for (const auto& row : rows) {
      double upper = n * (row.var + row.var_half_ci);
      worst = std::max(worst, upper);
      if (upper > cap) pass = false;
    }
  }
  char buf[120];
  std::snprintf(buf, sizeof buf, "max over (J, n) of n*(Var + CI) = %.3f, cap %.2f", worst, cap);
  report(12, "partition-variance-scaling", pass && t.secs() < 120.0, t.secs(), buf);
}

}  // namespace

int main() {
  std::printf("acceptance suite\n----------------\n");
  criterion_lyapunov();
  criterion_dn_moments();
  criterion_ibp();
  criterion_translate_rate();
  criterion_pair_exactness();
  criterion_colouring_covariance();
  criterion_translate_bounds();
  criterion_z_moments();
  criterion_mineka();
  criterion_headline_rate();
  criterion_sublattice();
  criterion_partition_variance();

  int failed = 0;
  for (const auto& r : results)
    if (!r.pass) ++failed;
  std::printf("----------------\n%zu criteria, %d failed\n", results.size(), failed);
  return failed == 0 ? 0 : 1;
}
