// dnstein: command-line front end. Subcommands build discrete-normal pmfs,
// verify the moment / integration-by-parts bounds, run model diagnostics,
// and produce convergence curves and bound reports. Exit code 0 iff every
// requested check passed.

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dnstein/dnstein.hpp"
#include "dnstein/report_json.hpp"

using namespace dnstein;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

std::vector<double> parse_reals(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
  return out;
}

std::vector<int> parse_ints(const std::string& csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
  return out;
}

MatrixXd read_matrix(const std::string& path, int dim) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open matrix file " + path);
  MatrixXd M(dim, dim);
  for (int i = 0; i < dim; ++i) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("matrix file too short: " + path);
    for (char& ch : line)
      if (ch == ',' || ch == ';') ch = ' ';
    std::stringstream ss(line);
    for (int j = 0; j < dim; ++j)
      if (!(ss >> M(i, j))) throw std::runtime_error("bad matrix row in " + path);
  }
  return M;
}

LatticePmf load_summand(const std::string& spec) {
  if (spec == "builtin:uniform3") return LatticePmf::line(-1, {1. / 3, 1. / 3, 1. / 3});
  if (spec == "builtin:coin") return LatticePmf::line(0, {0.5, 0.5});
  if (spec == "builtin:uniform02") return LatticePmf::line(0, {0.5, 0.0, 0.5});
  std::ifstream in(spec);
  if (!in) throw std::runtime_error("cannot open pmf file " + spec);
  return read_pmf_csv(in);
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file " + path);
  out << text;
}

// key = value model description files
std::map<std::string, std::string> read_model_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      auto a = s.find_first_not_of(" \t\r");
      auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

struct ModelHandle {
  std::string kind;  // "indep_sum" or "colouring"
  IndependentSumModel sum;
  ColouringModel col;
};

ModelHandle build_model(const std::map<std::string, std::string>& kv, std::uint64_t seed,
                        bool with_pair = true) {
  ModelHandle h;
  auto need = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw std::runtime_error("model file: missing key '" + key + "'");
    return it->second;
  };
  h.kind = need("model");
  if (h.kind == "indep_sum") {
    std::vector<LatticePmf> summands;
    std::stringstream ss(need("summands"));
    std::string tok;
    while (std::getline(ss, tok, ',')) summands.push_back(load_summand(tok));
    if (kv.count("m")) {
      int m = std::stoi(kv.at("m"));
      std::vector<LatticePmf> cycled;
      for (int i = 0; i < m; ++i) cycled.push_back(summands[i % summands.size()]);
      summands = std::move(cycled);
    }
    h.sum = build_sum_model(summands, with_pair);
  } else if (h.kind == "colouring") {
    int n = std::stoi(need("n"));
    int r = std::stoi(need("r"));
    int m = std::stoi(need("m"));
    std::vector<double> pv = parse_reals(need("p"));
    if (static_cast<int>(pv.size()) != m) throw std::runtime_error("model file: p must list m entries");
    VectorXd p(m);
    for (int i = 0; i < m; ++i) p[i] = pv[i];
    GraphKind kind = GraphKind::circulant;
    if (kv.count("kind") && kv.at("kind") == "pairing") kind = GraphKind::pairing;
    std::uint64_t gseed = kv.count("seed") ? std::stoull(kv.at("seed")) : seed;
    ColouringOptions opt;
    opt.build_pair = with_pair;
    opt.seed = gseed;
    h.col = build_colouring_model(regular_graph(n, r, kind, gseed), m, p, opt);
  } else {
    throw std::runtime_error("model file: unknown model '" + h.kind + "'");
  }
  return h;
}

// --- subcommand bodies ---------------------------------------------------------

int run_build_dn(int dim, double n, const std::string& c_csv, const std::string& sigma_file,
                 double tail_tol, const std::string& out) {
  VectorXd c = VectorXd::Zero(dim);
  if (!c_csv.empty()) {
    auto vals = parse_reals(c_csv);
    if (static_cast<int>(vals.size()) != dim) throw std::runtime_error("--c must list dim entries");
    for (int i = 0; i < dim; ++i) c[i] = vals[i];
  }
  MatrixXd Sigma =
      sigma_file.empty() ? MatrixXd::Identity(dim, dim) : read_matrix(sigma_file, dim);
  DiscreteNormal dn = dn_build(n, c, Sigma, tail_tol);
  std::ostringstream os;
  write_pmf_csv(dn.pmf, os);
  write_text(out, os.str());
  std::cerr << "dn: " << dn.pmf.support().size() << " support points, discarded mass "
            << dn.discarded_mass << "\n";
  return 0;
}

int run_verify(const std::string& lemma, int dim, double n, double delta, int trials,
               std::uint64_t seed, const std::string& out) {
  SteinTriple tr = make_stein_triple(n, VectorXd::Zero(dim), -MatrixXd::Identity(dim, dim),
                                     2.0 * MatrixXd::Identity(dim, dim));
  json rep;
  rep["check"] = lemma;
  rep["dim"] = dim;
  rep["n"] = n;
  rep["delta"] = delta;
  bool pass = true;

  if (lemma == "2.1") {
    DiscreteNormal dn = dn_build(n, tr.c, tr.Sigma, 1e-10);
    json rows = json::array();
    for (const auto& row : dn_moment_check(dn, 4)) {
      rows.push_back({{"name", row.name},
                      {"lhs", row.lhs},
                      {"rhs", row.rhs},
                      {"margin", row.margin},
                      {"precondition_ok", row.precondition_ok}});
      if (row.precondition_ok && row.margin < 0.0) pass = false;
    }
    rep["rows"] = rows;
  } else if (lemma == "2.2a" || lemma == "2.2b" || lemma == "2.2c") {
    DiscreteNormal dn = dn_build(n, tr.c, tr.Sigma, 1e-10);
    json rows = json::array();
    for (int trial = 0; trial < trials; ++trial) {
      std::uint64_t fs = seed + 1000 * static_cast<std::uint64_t>(trial);
      TestFunction f = TestFunction::tabulated(dim, fs);
      TestFunction gen = TestFunction::tabulated(1, fs ^ 0xabcdef);
      IbpReport r;
      if (lemma == "2.2a") {
        VectorXd b(dim);
        for (int i = 0; i < dim; ++i) b[i] = gen(LatticePoint{static_cast<Coord>(i)});
        r = ibp_vector_check(dn, tr, f, b, delta);
      } else {
        MatrixXd B(dim, dim);
        for (int i = 0; i < dim; ++i)
          for (int j = 0; j < dim; ++j)
            B(i, j) = gen(LatticePoint{static_cast<Coord>(10 + i * dim + j)});
        r = ibp_matrix_check(dn, tr, f, B, delta,
                             lemma == "2.2b" ? IbpPart::matrix_entrywise : IbpPart::matrix_rowwise);
      }
      rows.push_back({{"trial", trial},
                      {"lhs", r.lhs},
                      {"rhs", r.rhs},
                      {"margin", r.margin},
                      {"n_ok", r.n_ok},
                      {"lhs_error_bar", r.lhs_error_bar}});
      if (r.n_ok && r.margin < 0.0) pass = false;
    }
    rep["rows"] = rows;
  } else if (lemma == "2.1iii") {
    DiscreteNormal dn = dn_build(n, tr.c, tr.Sigma, 1e-10);
    json rows = json::array();
    for (int trial = 0; trial < trials; ++trial) {
      TestFunction h = TestFunction::tabulated(dim, seed + 7000 + trial);
      OperatorBracketReport r = operator_bracket_check(dn, tr, h, delta);
      rows.push_back({{"trial", trial}, {"lhs", r.lhs}, {"bracket", r.bracket}, {"ratio", r.ratio}});
      if (!std::isfinite(r.ratio)) pass = false;
    }
    rep["rows"] = rows;
  } else {
    throw std::runtime_error("unknown --lemma value: " + lemma);
  }

  rep["pass"] = pass;
  write_text(out, rep.dump(2) + "\n");
  return pass ? 0 : 1;
}

int run_diagnose(const std::string& model_file, const std::string& mode, std::size_t samples,
                 std::uint64_t seed, const std::string& out) {
  auto kv = read_model_spec(model_file);
  ModelHandle h = build_model(kv, seed);
  json rep;
  if (mode == "exact") {
    const PairLaw* pair = nullptr;
    double n = 0.0;
    MatrixXd A;
    if (h.kind == "indep_sum") {
      if (!h.sum.pair_built) throw std::runtime_error("joint law too large for exact mode");
      pair = &h.sum.pair;
      n = h.sum.n;
      A = h.sum.A;
    } else {
      if (!h.col.pair_built) throw std::runtime_error("colouring too large for exact mode; use --mode mc");
      pair = &h.col.pair;
      n = h.col.n;
      A = h.col.A;
    }
    DiagnosticsReport d = diagnose(*pair, n, A);
    rep = to_json(d);
    rep["model"] = h.kind;
  } else if (mode == "mc") {
    if (h.kind != "colouring")
      throw std::runtime_error("mc mode is implemented for colouring models");
    const ColouringModel& mod = h.col;
    auto rows = colouring_partition_u(mod, false, samples, seed);
    double u_star_bound = 0.0;
    json jrows = json::array();
    for (const auto& row : rows) {
      u_star_bound = std::max(u_star_bound, row.u_bound + row.u_bound_half_ci);
      jrows.push_back({{"J", to_json(row.J)},
                       {"q", row.q},
                       {"u_bound", row.u_bound},
                       {"u_half_ci", row.u_bound_half_ci},
                       {"var", row.var},
                       {"var_half_ci", row.var_half_ci},
                       {"replicates", row.replicates}});
    }
    // chains over the closed-form jump set; u~ assembled from partition bounds
    std::vector<LatticePoint> jumps;
    for (const auto& [J, q] : mod.q_formula) jumps.push_back(J);
    ChainResult chains = find_chains(jumps, mod.dim);
    std::map<LatticePoint, double> ubound;
    for (const auto& row : rows) ubound[row.J] = row.u_bound + row.u_bound_half_ci;
    json jchains = json::array();
    double eps1_bound_max = 0.0;
    bool all_chains = chains.all_found;
    for (int a = 0; a < mod.dim; ++a) {
      json e;
      e["axis"] = a + 1;
      if (chains.chains[a]) {
        double s = 0.0;
        for (const auto& J : *chains.chains[a]) s += ubound.at(J) + ubound.at(-J);
        e["u_tilde_bound"] = s;
        eps1_bound_max = std::max(eps1_bound_max, s);
      } else {
        e["chain_failed"] = true;
      }
      jchains.push_back(e);
    }
    rep["model"] = h.kind;
    rep["mode"] = "mc";
    rep["provenance"] = "mc";
    rep["replicates"] = samples;
    rep["u_partition_rows"] = jrows;
    rep["u_star_bound"] = u_star_bound;
    rep["chains"] = jchains;
    rep["all_chains_found"] = all_chains;
    if (all_chains) rep["eps1_bound"] = eps1_bound_max;  // Lemma-style bound, not an estimate
    rep["r2_l1_bound"] = mod.dim * mod.sigma2_listed.trace() * u_star_bound;
    rep["r1_mean_abs"] = 0.0;  // the recolouring regression is exact
  } else {
    throw std::runtime_error("--mode must be exact or mc");
  }
  write_text(out, rep.dump(2) + "\n");
  return 0;
}

int run_colouring(int n, int r, int m, const std::string& p_csv, const std::string& kind_s,
                  std::uint64_t seed, const std::string& out) {
  auto pv = parse_reals(p_csv);
  if (static_cast<int>(pv.size()) != m) throw std::runtime_error("--p must list m entries");
  VectorXd p(m);
  for (int i = 0; i < m; ++i) p[i] = pv[i];
  GraphKind kind = kind_s == "pairing" ? GraphKind::pairing : GraphKind::circulant;
  ColouringModel mod = build_colouring_model(regular_graph(n, r, kind, seed), m, p);

  json rep;
  rep["n"] = n;
  rep["r"] = r;
  rep["m"] = m;
  rep["dim"] = mod.dim;
  rep["kind"] = kind_s;
  rep["exact"] = mod.exact;
  rep["A"] = to_json(mod.A);
  rep["mean_formula"] = to_json(mod.mean_formula);
  rep["cov_formula"] = to_json(mod.cov_formula);
  rep["sigma2_listed"] = to_json(mod.sigma2_listed);
  json q = json::array();
  for (const auto& [J, val] : mod.q_formula) q.push_back({{"J", to_json(J)}, {"q", val}});
  rep["jump_law"] = q;
  if (mod.exact && mod.pair_built) {
    ConditionalCovResidual cc = conditional_cov_residual(mod.pair);
    rep["sigma2_enumerated"] = to_json(cc.sigma2);
    rep["sigma2_listed_gap"] =
        (cc.sigma2 - mod.sigma2_listed).cwiseAbs().maxCoeff();  // expected on the N diagonal
    rep["max_jump_sq"] = mod.max_jump_sq;
    MomentTable mt = moments(mod.w_law, VectorXd::Zero(mod.dim), nullptr, 0);
    rep["mean_enumerated"] = to_json(mt.mean);
    rep["cov_enumerated"] = to_json(mt.cov);
  }
  write_text(out, rep.dump(2) + "\n");
  return 0;
}

int run_tv_curve(const std::string& model_file, const std::string& sizes_csv, double tail_tol,
                 std::size_t mc_samples, std::uint64_t seed, const std::string& out,
                 const std::string& plot) {
  auto kv = read_model_spec(model_file);
  std::vector<int> sizes = parse_ints(sizes_csv);
  ConvergenceCurve curve;
  if (kv.at("model") == "indep_sum") {
    LatticePmf summand = load_summand(kv.at("summands"));
    curve = tv_curve_indep_sum(summand, sizes, tail_tol);
  } else if (kv.at("model") == "colouring") {
    ColouringCurveSpec spec;
    spec.r = std::stoi(kv.at("r"));
    spec.m = std::stoi(kv.at("m"));
    auto pv = parse_reals(kv.at("p"));
    spec.p = VectorXd(spec.m);
    for (int i = 0; i < spec.m; ++i) spec.p[i] = pv[i];
    spec.sizes = sizes;
    spec.tail_tol = tail_tol;
    spec.mc_samples = mc_samples;
    spec.seed = seed;
    if (kv.count("kind") && kv.at("kind") == "pairing") spec.kind = GraphKind::pairing;
    if (kv.count("reduced_pair")) spec.reduced_pair = kv.at("reduced_pair") == "true";
    curve = tv_curve_colouring(spec);
  } else {
    throw std::runtime_error("model file: unknown model");
  }
  std::ostringstream os;
  write_curve_csv(curve, os);
  write_text(out, os.str());
  if (!plot.empty()) {
    std::ostringstream gp;
    gp << "# size tv err\n";
    gp.precision(12);
    for (const auto& r : curve.rows) gp << r.size << " " << r.tv << " " << r.err << "\n";
    write_text(plot, gp.str());
  }
  return 0;
}

int run_bound_report(const std::string& model_file, std::uint64_t seed, const std::string& out) {
  auto kv = read_model_spec(model_file);
  ModelHandle h = build_model(kv, seed);
  DiagnosticsReport d;
  std::string id;
  if (h.kind == "indep_sum") {
    if (!h.sum.pair_built) throw std::runtime_error("joint law too large for the exact bound report");
    d = diagnose(h.sum.pair, h.sum.n, h.sum.A);
    id = "indep_sum_m" + std::to_string(h.sum.m);
  } else {
    if (!h.col.pair_built) throw std::runtime_error("colouring too large for the exact bound report");
    d = diagnose(h.col.pair, h.col.n, h.col.A);
    id = "colouring_n" + std::to_string(h.col.graph.n);
  }
  BoundReport rep = bound_report(d, id);
  write_text(out, to_json(rep).dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"discrete normal approximation toolkit"};
  app.require_subcommand(1);

  std::uint64_t seed = 1;
  int threads = 0;
  app.add_option("--seed", seed, "global RNG seed");
  app.add_option("--threads", threads, "worker threads (0 = auto)");

  // build-dn
  auto* bd = app.add_subcommand("build-dn", "discretized Gaussian pmf over Z^d");
  int bd_dim = 1;
  double bd_n = 16.0, bd_tail = 1e-10;
  std::string bd_c, bd_sigma, bd_out = "-";
  bd->add_option("--dim", bd_dim)->required();
  bd->add_option("--n", bd_n)->required();
  bd->add_option("--c", bd_c, "centre / n, comma separated (default 0)");
  bd->add_option("--sigma-file", bd_sigma, "d x d matrix file (default identity)");
  bd->add_option("--tail-tol", bd_tail);
  bd->add_option("--out", bd_out);

  // verify-lemma
  auto* vl = app.add_subcommand("verify-lemma", "run one bound-verification family");
  std::string vl_lemma, vl_out = "-";
  int vl_dim = 1, vl_trials = 20;
  double vl_n = 64.0, vl_delta = 1.0;
  vl->add_option("--lemma", vl_lemma, "one of 2.1, 2.2a, 2.2b, 2.2c, 2.1iii")->required();
  vl->add_option("--dim", vl_dim);
  vl->add_option("--n", vl_n);
  vl->add_option("--delta", vl_delta);
  vl->add_option("--trials", vl_trials);
  vl->add_option("--out", vl_out);

  // diagnose
  auto* dg = app.add_subcommand("diagnose", "pair diagnostics for a model file");
  std::string dg_model, dg_mode = "exact", dg_out = "-";
  std::size_t dg_samples = 100000;
  dg->add_option("--model", dg_model)->required();
  dg->add_option("--mode", dg_mode, "exact or mc");
  dg->add_option("--samples", dg_samples);
  dg->add_option("--out", dg_out);

  // colouring
  auto* cl = app.add_subcommand("colouring", "build a colouring model and report its structure");
  int cl_n = 4, cl_r = 2, cl_m = 3;
  std::string cl_p = "0.3333333333333333,0.3333333333333333,0.3333333333333334";
  std::string cl_kind = "circulant", cl_out = "-";
  cl->add_option("--n", cl_n)->required();
  cl->add_option("--r", cl_r)->required();
  cl->add_option("--m", cl_m)->required();
  cl->add_option("--p", cl_p, "colour probabilities, comma separated");
  cl->add_option("--kind", cl_kind, "circulant or pairing");
  cl->add_option("--out", cl_out);

  // tv-curve
  auto* tc = app.add_subcommand("tv-curve", "distance-to-DN convergence curve");
  std::string tc_model, tc_sizes = "64,128,256,512", tc_out = "-", tc_plot;
  double tc_tail = 1e-10;
  std::size_t tc_samples = 200000;
  tc->add_option("--model", tc_model)->required();
  tc->add_option("--sizes", tc_sizes);
  tc->add_option("--tail-tol", tc_tail);
  tc->add_option("--samples", tc_samples, "MC samples for non-enumerable rows");
  tc->add_option("--out", tc_out);
  tc->add_option("--plot", tc_plot, "also write a gnuplot-style data file");

  // bound-report
  auto* br = app.add_subcommand("bound-report", "assembled error-bound brackets");
  std::string br_model, br_out = "-";
  br->add_option("--model", br_model)->required();
  br->add_option("--out", br_out);

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();
  CLI11_PARSE(app, argc, argv);
  if (threads > 0) detail::set_threads(threads);

  try {
    if (bd->parsed()) return run_build_dn(bd_dim, bd_n, bd_c, bd_sigma, bd_tail, bd_out);
    if (vl->parsed()) return run_verify(vl_lemma, vl_dim, vl_n, vl_delta, vl_trials, seed, vl_out);
    if (dg->parsed()) return run_diagnose(dg_model, dg_mode, dg_samples, seed, dg_out);
    if (cl->parsed()) return run_colouring(cl_n, cl_r, cl_m, cl_p, cl_kind, seed, cl_out);
    if (tc->parsed()) return run_tv_curve(tc_model, tc_sizes, tc_tail, tc_samples, seed, tc_out, tc_plot);
    if (br->parsed()) return run_bound_report(br_model, seed, br_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
