#pragma once

// Solution reports: allocation + duals + residuals + market metrics, with
// JSON and CSV emission. CSV numbers are printed with 17 significant digits
// so a reloaded report reproduces residuals bit-for-bit.

#include "pmkt/cvx.hpp"
#include "pmkt/model.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace pmkt {

struct NodalPriceRow {
  int node = 0, scenario = 0;
  double lambda = 0;        // solved nodal price
  double lambda0 = 0;       // root price
  double xi_in = 0;         // capacity dual on flow 0->n
  double xi_out = 0;        // capacity dual on flow n->0
  double pref_gap = 0;      // p_w (b_{0n} - b_{n0})
  double asym_term = 0;     // p2p only: p_w a (q_{0n} - q_{n0})
  double reconstructed = 0;
  double residual = 0;
};

struct NodalPriceTable {
  std::vector<NodalPriceRow> rows;
  double max_residual = 0;
};

struct RegimeWitness {
  double threshold_lo = 0;  // min_n p_w/(1-chi_n)
  double threshold_hi = 0;  // max_n p_w/(1-chi_n)
  double gamma = 0;
  double alpha = 0;
  double max_J = 0;
  int max_J_node = -1;
  int min_chi_node = -1;
  double tau_aligned = 0;       // common tau value
  double tau_spread = 0;        // max pairwise tau difference
  double sign_min = 0, sign_max = 0;  // extremes of Pi - W - J - eta across nodes
};

struct RegimeLabel {
  int scenario = 0;
  std::string branch;  // "1a","1b","2a","2b","2c","3a","3b"
  bool boundary = false;
  bool consistent = true;
  std::string diagnostics;
  RegimeWitness witness;
};

struct ContractBook {
  Eigen::VectorXd W, J;           // ns(n,w)
  std::vector<double> alpha;      // per scenario
  std::vector<double> gamma;      // per scenario
  std::vector<double> phi;        // per scenario (balance dual)
  Eigen::VectorXd sigma;          // ns(n,w)
  double alpha_recovery_residual = 0;  // max |alpha - (tau_n - phi)|
  double balance_residual = 0;         // max |sum_n (W + J)|
  double sigma_uniformity = 0;         // max |sigma_n - (gamma - alpha)|
};

struct SweepTrace {
  int sweeps = 0;
  bool converged = false;
  std::vector<double> displacement;  // per sweep
  std::vector<double> potential;     // per sweep
};

struct EquilibriumReport {
  std::string mode;
  cvx::SolveStatus status = cvx::SolveStatus::max_iter;
  std::string failure;  // named certificate when not optimal
  double objective = 0;
  double tolerance = 0;
  Allocation alloc;
  DualBundle duals;
  cvx::KktResiduals kkt;
  std::vector<double> sc_per_scenario;
  double expected_sc = 0;
  std::vector<double> node_expected_cost;
  // risk-averse extras
  std::vector<double> node_cvar;
  std::vector<double> canonical_eta;  // smallest optimal VaR per node
  // contract extras
  std::optional<ContractBook> book;
  std::vector<RegimeLabel> regimes;
  // distributed extras
  std::optional<SweepTrace> trace;
  std::optional<NodalPriceTable> prices;

  bool optimal() const { return status == cvx::SolveStatus::optimal; }
};

// Common market metrics (costs per node/scenario, expectations).
inline void fill_cost_summary(EquilibriumReport& rep, const MarketInstance& inst) {
  const int S = inst.num_scenarios();
  rep.sc_per_scenario.assign(S, 0.0);
  for (int w = 0; w < S; ++w) rep.sc_per_scenario[w] = social_cost(inst, rep.alloc, w);
  rep.expected_sc = 0;
  for (int w = 0; w < S; ++w) rep.expected_sc += inst.scenarios.p(w) * rep.sc_per_scenario[w];
  rep.node_expected_cost.assign(inst.num_nodes(), 0.0);
  for (int n = 0; n < inst.num_nodes(); ++n) {
    for (int w = 0; w < S; ++w) {
      rep.node_expected_cost[n] += inst.scenarios.p(w) * prosumer_cost(inst, rep.alloc, n, w);
    }
  }
}

namespace io_detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline nlohmann::json vec_json(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

}  // namespace io_detail

inline nlohmann::json report_to_json(const EquilibriumReport& rep, const MarketInstance& inst) {
  using nlohmann::json;
  using io_detail::vec_json;
  json j;
  j["mode"] = rep.mode;
  j["status"] = cvx::to_string(rep.status);
  if (!rep.failure.empty()) j["failure"] = rep.failure;
  j["objective"] = rep.objective;
  j["tolerance"] = rep.tolerance;
  j["kkt"] = {{"stationarity", rep.kkt.stationarity},
              {"feasibility", rep.kkt.feasibility},
              {"complementarity", rep.kkt.complementarity}};
  j["expected_sc"] = rep.expected_sc;
  j["sc_per_scenario"] = rep.sc_per_scenario;
  j["node_expected_cost"] = rep.node_expected_cost;
  if (!rep.node_cvar.empty()) j["node_cvar"] = rep.node_cvar;
  if (!rep.canonical_eta.empty()) j["canonical_eta"] = rep.canonical_eta;
  json alloc;
  alloc["D"] = vec_json(rep.alloc.D);
  alloc["G"] = vec_json(rep.alloc.G);
  alloc["q"] = vec_json(rep.alloc.q);
  if (rep.alloc.has_cvar) {
    alloc["eta"] = vec_json(rep.alloc.eta);
    alloc["u"] = vec_json(rep.alloc.u);
  }
  if (rep.alloc.has_contracts) {
    alloc["W"] = vec_json(rep.alloc.W);
    alloc["J"] = vec_json(rep.alloc.J);
  }
  j["allocation"] = alloc;
  json duals;
  duals["lambda"] = vec_json(rep.duals.lambda);
  duals["mu_lo"] = vec_json(rep.duals.mu_lo);
  duals["mu_hi"] = vec_json(rep.duals.mu_hi);
  duals["nu_lo"] = vec_json(rep.duals.nu_lo);
  duals["nu_hi"] = vec_json(rep.duals.nu_hi);
  duals["xi"] = vec_json(rep.duals.xi);
  duals["zeta"] = vec_json(rep.duals.zeta);
  if (rep.duals.has_cvar) {
    duals["tau"] = vec_json(rep.duals.tau);
    duals["pi"] = vec_json(rep.duals.pi);
  }
  if (rep.duals.has_contracts) {
    duals["sigma"] = vec_json(rep.duals.sigma);
    duals["phi"] = vec_json(rep.duals.phi);
  }
  j["duals"] = duals;
  if (rep.prices) {
    json rows = json::array();
    for (const auto& r : rep.prices->rows) {
      rows.push_back({{"node", r.node},
                      {"scenario", r.scenario},
                      {"lambda", r.lambda},
                      {"lambda0", r.lambda0},
                      {"xi_in", r.xi_in},
                      {"xi_out", r.xi_out},
                      {"pref_gap", r.pref_gap},
                      {"asym_term", r.asym_term},
                      {"reconstructed", r.reconstructed},
                      {"residual", r.residual}});
    }
    j["nodal_prices"] = {{"rows", rows}, {"max_residual", rep.prices->max_residual}};
  }
  if (rep.book) {
    const auto& b = *rep.book;
    json c;
    c["alpha"] = b.alpha;
    c["gamma"] = b.gamma;
    c["phi"] = b.phi;
    c["W"] = vec_json(b.W);
    c["J"] = vec_json(b.J);
    c["sigma"] = vec_json(b.sigma);
    c["alpha_recovery_residual"] = b.alpha_recovery_residual;
    c["balance_residual"] = b.balance_residual;
    c["sigma_uniformity"] = b.sigma_uniformity;
    json regs = json::array();
    for (const auto& r : rep.regimes) {
      regs.push_back({{"scenario", r.scenario},
                      {"branch", r.branch},
                      {"boundary", r.boundary},
                      {"consistent", r.consistent},
                      {"diagnostics", r.diagnostics}});
    }
    c["regimes"] = regs;
    j["contracts"] = c;
  }
  if (rep.trace) {
    j["gauss_seidel"] = {{"sweeps", rep.trace->sweeps},
                         {"converged", rep.trace->converged},
                         {"displacement", rep.trace->displacement},
                         {"potential", rep.trace->potential}};
  }
  j["instance"] = {{"name", inst.name},
                   {"nodes", inst.num_nodes()},
                   {"scenarios", inst.num_scenarios()}};
  return j;
}

// allocation.csv: one row per node x scenario with primal values, costs and
// the per-node dual families.
inline void write_allocation_csv(std::ostream& os, const EquilibriumReport& rep,
                                 const MarketInstance& inst) {
  using io_detail::fmt;
  os << "node,scenario,D,G,Q,cost,eta,u,W,J,lambda,mu_lo,mu_hi,nu_lo,nu_hi,tau,pi,sigma\n";
  for (int n = 0; n < inst.num_nodes(); ++n) {
    for (int w = 0; w < inst.num_scenarios(); ++w) {
      const int m = inst.ns(n, w);
      const auto& a = rep.alloc;
      os << n << "," << inst.scenarios.scenarios[w].id << "," << fmt(a.D[m]) << "," << fmt(a.G[m])
         << "," << fmt(a.net_import(inst, n, w)) << "," << fmt(prosumer_cost(inst, a, n, w))
         << "," << (a.has_cvar ? fmt(a.eta[n]) : "") << "," << (a.has_cvar ? fmt(a.u[m]) : "")
         << "," << (a.has_contracts ? fmt(a.W[m]) : "")
         << "," << (a.has_contracts ? fmt(a.J[m]) : "") << "," << fmt(rep.duals.lambda[m]) << ","
         << fmt(rep.duals.mu_lo[m]) << "," << fmt(rep.duals.mu_hi[m]) << ","
         << fmt(rep.duals.nu_lo[m]) << "," << fmt(rep.duals.nu_hi[m]) << ","
         << (rep.duals.has_cvar ? fmt(rep.duals.tau[m]) : "")
         << "," << (rep.duals.has_cvar ? fmt(rep.duals.pi[m]) : "")
         << "," << (rep.duals.has_contracts ? fmt(rep.duals.sigma[m]) : "") << "\n";
    }
  }
}

// trades.csv: one row per ordered edge x scenario.
inline void write_trades_csv(std::ostream& os, const EquilibriumReport& rep,
                             const MarketInstance& inst) {
  using io_detail::fmt;
  os << "from,to,scenario,q,xi,zeta\n";
  for (int f = 0; f < inst.num_flows(); ++f) {
    for (int w = 0; w < inst.num_scenarios(); ++w) {
      const int m = inst.fs(f, w);
      os << inst.flow(f).from << "," << inst.flow(f).to << ","
         << inst.scenarios.scenarios[w].id << "," << fmt(rep.alloc.q[m]) << ","
         << fmt(rep.duals.xi[m]) << "," << fmt(rep.duals.zeta[m]) << "\n";
    }
  }
}

inline void write_prices_csv(std::ostream& os, const EquilibriumReport& rep,
                             const MarketInstance& inst) {
  using io_detail::fmt;
  os << "node,scenario,lambda,lambda0,xi_in,xi_out,pref_gap,asym_term,reconstructed,residual\n";
  if (!rep.prices) return;
  for (const auto& r : rep.prices->rows) {
    os << r.node << "," << inst.scenarios.scenarios[r.scenario].id << "," << fmt(r.lambda) << ","
       << fmt(r.lambda0) << "," << fmt(r.xi_in) << "," << fmt(r.xi_out) << "," << fmt(r.pref_gap)
       << "," << fmt(r.asym_term) << "," << fmt(r.reconstructed) << "," << fmt(r.residual)
       << "\n";
  }
}

// contracts.csv mirrors the financial-contracts table layout: per-node
// position rows followed by per-scenario price rows.
inline void write_contracts_csv(std::ostream& os, const EquilibriumReport& rep,
                                const MarketInstance& inst) {
  using io_detail::fmt;
  os << "row_type,node,scenario,W,J,alpha,gamma,phi,tau,regime\n";
  if (!rep.book) return;
  const auto& b = *rep.book;
  for (int n = 0; n < inst.num_nodes(); ++n) {
    for (int w = 0; w < inst.num_scenarios(); ++w) {
      const int m = inst.ns(n, w);
      os << "position," << n << "," << inst.scenarios.scenarios[w].id << "," << fmt(b.W[m]) << ","
         << fmt(b.J[m]) << ",,,," << fmt(rep.duals.has_cvar ? rep.duals.tau[m] : 0.0) << ",\n";
    }
  }
  for (int w = 0; w < inst.num_scenarios(); ++w) {
    const RegimeLabel* lab = nullptr;
    for (const auto& r : rep.regimes) {
      if (r.scenario == w) lab = &r;
    }
    os << "price,," << inst.scenarios.scenarios[w].id << ",,," << fmt(b.alpha[w]) << ","
       << fmt(b.gamma[w]) << "," << fmt(b.phi[w]) << ",," << (lab ? lab->branch : "") << "\n";
  }
}

inline void write_kkt_txt(std::ostream& os, const EquilibriumReport& rep) {
  using io_detail::fmt;
  os << "mode " << rep.mode << "\n"
     << "status " << cvx::to_string(rep.status) << "\n"
     << "objective " << fmt(rep.objective) << "\n"
     << "stationarity " << fmt(rep.kkt.stationarity) << "\n"
     << "feasibility " << fmt(rep.kkt.feasibility) << "\n"
     << "complementarity " << fmt(rep.kkt.complementarity) << "\n";
}

// Reload of allocation.csv + trades.csv into an Allocation/DualBundle pair
// (used by the CSV round-trip checks).
inline std::pair<Allocation, DualBundle> read_allocation_csv(std::istream& alloc_csv,
                                                             std::istream& trades_csv,
                                                             const MarketInstance& inst) {
  Allocation a = Allocation::zeros(inst);
  DualBundle d;
  detail_read_alloc(alloc_csv, inst, a, d);
  detail_read_trades(trades_csv, inst, a, d);
  return {a, d};
}

namespace io_detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline int scenario_index(const MarketInstance& inst, const std::string& id) {
  for (int w = 0; w < inst.num_scenarios(); ++w) {
    if (inst.scenarios.scenarios[w].id == id) return w;
  }
  throw std::out_of_range("unknown scenario id in CSV: " + id);
}

}  // namespace io_detail

inline void detail_read_alloc(std::istream& in, const MarketInstance& inst, Allocation& a,
                              DualBundle& d) {
  detail::ensure_duals_decl(inst, d);
  std::string line;
  std::getline(in, line);  // header
  auto header = io_detail::split_csv(line);
  bool cvar = false, contracts = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = io_detail::split_csv(line);
    int n = std::stoi(f[0]);
    int w = io_detail::scenario_index(inst, f[1]);
    int m = inst.ns(n, w);
    a.D[m] = std::stod(f[2]);
    a.G[m] = std::stod(f[3]);
    if (!f[6].empty()) {
      if (!cvar) {
        cvar = true;
        a.has_cvar = true;
        a.eta = Eigen::VectorXd::Zero(inst.num_nodes());
        a.u = Eigen::VectorXd::Zero(a.D.size());
        d.has_cvar = true;
        d.tau = Eigen::VectorXd::Zero(a.D.size());
        d.pi = Eigen::VectorXd::Zero(a.D.size());
      }
      a.eta[n] = std::stod(f[6]);
      a.u[m] = std::stod(f[7]);
      d.tau[m] = std::stod(f[15]);
      d.pi[m] = std::stod(f[16]);
    }
    if (!f[8].empty()) {
      if (!contracts) {
        contracts = true;
        a.has_contracts = true;
        a.W = Eigen::VectorXd::Zero(a.D.size());
        a.J = Eigen::VectorXd::Zero(a.D.size());
        d.has_contracts = true;
        d.sigma = Eigen::VectorXd::Zero(a.D.size());
        d.phi = Eigen::VectorXd::Zero(inst.num_scenarios());
      }
      a.W[m] = std::stod(f[8]);
      a.J[m] = std::stod(f[9]);
      d.sigma[m] = std::stod(f[17]);
    }
    d.lambda[m] = std::stod(f[10]);
    d.mu_lo[m] = std::stod(f[11]);
    d.mu_hi[m] = std::stod(f[12]);
    d.nu_lo[m] = std::stod(f[13]);
    d.nu_hi[m] = std::stod(f[14]);
  }
}

inline void detail_read_trades(std::istream& in, const MarketInstance& inst, Allocation& a,
                               DualBundle& d) {
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = io_detail::split_csv(line);
    int fl = inst.flow_index(std::stoi(f[0]), std::stoi(f[1]));
    int w = io_detail::scenario_index(inst, f[2]);
    int m = inst.fs(fl, w);
    a.q[m] = std::stod(f[3]);
    d.xi[m] = std::stod(f[4]);
    d.zeta[m] = std::stod(f[5]);
  }
}

namespace detail {
inline void ensure_duals_decl(const MarketInstance& inst, DualBundle& d) {
  const int NS = inst.num_nodes() * inst.num_scenarios();
  const int FS = inst.num_flows() * inst.num_scenarios();
  d.mu_lo = Eigen::VectorXd::Zero(NS);
  d.mu_hi = Eigen::VectorXd::Zero(NS);
  d.nu_lo = Eigen::VectorXd::Zero(NS);
  d.nu_hi = Eigen::VectorXd::Zero(NS);
  d.lambda = Eigen::VectorXd::Zero(NS);
  d.xi = Eigen::VectorXd::Zero(FS);
  d.zeta = Eigen::VectorXd::Zero(FS);
}
}  // namespace detail

}  // namespace pmkt
