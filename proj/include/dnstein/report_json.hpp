#pragma once

// JSON serializers for the report structs; the diagnostics report mirrors
// the struct field-for-field.

#include <json.hpp>

#include "dnstein/bench.hpp"
#include "dnstein/pairs.hpp"

namespace dnstein {

inline nlohmann::json to_json(const LatticePoint& p) {
  nlohmann::json a = nlohmann::json::array();
  for (int i = 0; i < p.dim(); ++i) a.push_back(p[i]);
  return a;
}

inline nlohmann::json to_json(const Eigen::MatrixXd& M) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline nlohmann::json to_json(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline nlohmann::json to_json(const UStats& u) {
  nlohmann::json j;
  j["mode"] = u.mode == Conditioning::atoms ? "atoms" : "partition";
  nlohmann::json table = nlohmann::json::array();
  for (const auto& [J, val] : u.u) table.push_back({{"J", to_json(J)}, {"u", val}});
  j["u_table"] = table;
  j["u_star"] = u.u_star;
  nlohmann::json tildes = nlohmann::json::array();
  for (std::size_t a = 0; a < u.u_tilde.size(); ++a) {
    nlohmann::json e;
    e["axis"] = a + 1;
    if (u.u_tilde[a]) {
      e["u_tilde"] = *u.u_tilde[a];
      nlohmann::json chain = nlohmann::json::array();
      for (const auto& J : *u.chains.chains[a]) chain.push_back(to_json(J));
      e["chain"] = chain;
    } else {
      e["chain_failed"] = true;
    }
    tildes.push_back(e);
  }
  j["u_tilde"] = tildes;
  if (u.u_tilde_star) j["u_tilde_star"] = *u.u_tilde_star;
  else j["u_tilde_star"] = nullptr;
  return j;
}

inline nlohmann::json to_json(const DiagnosticsReport& r) {
  nlohmann::json j;
  j["dim"] = r.dim;
  j["n"] = r.n;
  j["A"] = to_json(r.A);
  j["A_hat"] = to_json(r.A_hat);
  j["sigma2"] = to_json(r.sigma2);
  j["standardized"] = {{"n_tilde", r.std_form.n_tilde},
                       {"A_tilde", to_json(r.std_form.A_tilde)},
                       {"Sigma_hat", to_json(r.std_form.Sigma_hat)},
                       {"Sigma_tilde", to_json(r.std_form.Sigma_tilde)}};
  j["r1_mean_abs"] = r.r1_mean_abs;
  j["r1_max_abs"] = r.r1_max_abs;
  j["r1_sigma_moment3"] = r.r1_sigma_moment3;
  j["r2_l1_mean"] = r.r2_l1_mean;
  j["r1_mean_norm"] = r.r1_mean_norm;
  j["r2_mean_norm"] = r.r2_mean_norm;
  j["u_atoms"] = to_json(r.u_atoms);
  if (r.u_partition) j["u_partition"] = to_json(*r.u_partition);
  nlohmann::json eps1_axis = nlohmann::json::array();
  for (double e : r.ttv.eps1_axis) eps1_axis.push_back(e);
  j["eps1_axis"] = eps1_axis;
  j["eps1"] = r.ttv.eps1;
  nlohmann::json exi = nlohmann::json::array();
  for (const auto& [J, e] : r.ttv.eps1_xi) exi.push_back({{"J", to_json(J)}, {"eps1", e}});
  j["eps1_xi"] = exi;
  j["eps1_xi_max"] = r.ttv.eps1_xi_max;
  j["xi3_eps1"] = r.ttv.xi3_eps1;
  j["translate_bounds"] = {{"min_axis_slack", r.ttv.min_axis_slack},
                           {"min_cond_slack", r.ttv.min_cond_slack},
                           {"r2_bound_slack", r.ttv.r2_bound_slack},
                           {"checked", r.ttv.bounds_checked}};
  j["L"] = r.zm.L;
  j["L_sigma"] = r.zm.L_sigma;
  j["chi"] = r.zm.chi;
  j["chi_sigma"] = r.zm.chi_sigma;
  j["nu"] = r.zm.nu;
  j["alpha1"] = r.zm.alpha1;
  j["m3"] = r.zm.m3;
  j["z2"] = r.zm.z2;
  j["z3"] = r.zm.z3;
  j["condition_flags"] = {{"cond11_lhs", r.zm.cond11_lhs}, {"cond11_rhs", r.zm.cond11_rhs},
                          {"cond11_ok", r.zm.cond11_ok},   {"cond12_lhs", r.zm.cond12_lhs},
                          {"cond12_rhs", r.zm.cond12_rhs}, {"cond12_ok", r.zm.cond12_ok},
                          {"simpler_lhs", r.zm.simpler_lhs}, {"simpler_rhs", r.zm.simpler_rhs},
                          {"simpler_ok", r.zm.simpler_ok}, {"n_alpha_ok", r.zm.n_alpha_ok},
                          {"z2_ok", r.zm.z2_ok},           {"z3_ok", r.zm.z3_ok}};
  j["exch_identity_gap"] = r.exch_identity_gap;
  j["lyap_cov_residual"] = r.lyap_cov_residual;
  j["marginal_gap"] = r.marginal_gap;
  j["exchangeable"] = r.exchangeable;
  j["v_ratio"] = r.v_ratio;
  j["provenance"] = r.provenance;
  return j;
}

inline nlohmann::json to_json(const BoundReport& r) {
  nlohmann::json j;
  j["model"] = r.model_id;
  j["dim"] = r.dim;
  j["n"] = r.n;
  j["n_tilde"] = r.n_tilde;
  j["L"] = r.L;
  j["u_star"] = r.u_star;
  if (r.u_tilde_star) j["u_tilde_star"] = *r.u_tilde_star;
  else j["u_tilde_star"] = nullptr;
  j["eps1"] = r.eps1;
  j["eps1_xi_max"] = r.eps1_xi_max;
  j["r1_mean_abs"] = r.r1_mean_abs;
  j["r2_l1_mean"] = r.r2_l1_mean;
  j["xi3_eps1"] = r.xi3_eps1;
  j["v"] = r.v;
  auto terms = [](const std::vector<BoundTerm>& ts) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& t : ts) a.push_back({{"name", t.name}, {"value", t.value}, {"provenance", t.provenance}});
    return a;
  };
  j["exchangeable_bracket"] = {{"total", r.exchangeable_bracket}, {"terms", terms(r.exchangeable_terms)}};
  j["regression_bracket"] = {{"total", r.regression_bracket}, {"terms", terms(r.regression_terms)}};
  return j;
}

}  // namespace dnstein
