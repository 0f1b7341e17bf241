#pragma once

// Prosumer network domain types: scenario data, node and edge parameters,
// allocations, dual bundles, cost functions and feasibility checks.
//
// Conventions:
//  - node ids are dense 0..N-1 with node 0 the root; node 0 trades with
//    every other node.
//  - a directed "flow" (m -> n) is the trade q_{mn} decided by importer n;
//    its price intercept is the edge's b for that direction, and its
//    capacity dual is attached to the constraint q <= kappa.
//  - net import Q_n is always recomputed from the incident flows.

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pmkt {

struct Scenario {
  std::string id;
  double p = 0.0;   // probability
  double p0 = 0.0;  // import price on the balancing market
};

struct ScenarioSet {
  std::vector<Scenario> scenarios;
  int size() const { return static_cast<int>(scenarios.size()); }
  double p(int w) const { return scenarios[w].p; }
  double p0(int w) const { return scenarios[w].p0; }
};

struct ProsumerParams {
  int id = 0;
  double D_lo = 0, D_hi = 0;
  double G_lo = 0, G_hi = 0;
  double a = 0, b = 0, d = 0;        // production cost 1/2 a G^2 + b G + d
  double a_tilde = 0, b_tilde = 0;   // usage benefit -a~ (D - D*)^2 + b~
  double chi = 0.0;                  // risk attitude in [0,1)
  std::vector<double> Dstar;         // target demand per scenario
  std::vector<double> dG;            // RES generation per scenario
};

struct EdgeParams {
  int u = 0, v = 0;   // unordered pair, u < v
  double kappa = 0;   // symmetric capacity
  double a = 0;       // congestion slope, shared by both directions
  double b_uv = 0;    // intercept on flow u -> v (importer v pays)
  double b_vu = 0;    // intercept on flow v -> u (importer u pays)
};

struct Flow {
  int from = 0, to = 0;
  int edge = 0;  // index into edges
};

class MarketInstance {
 public:
  std::string name;
  std::vector<ProsumerParams> nodes;
  std::vector<EdgeParams> edges;
  ScenarioSet scenarios;
  std::optional<std::vector<double>> gamma;  // exogenous contract price per scenario

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_scenarios() const { return scenarios.size(); }
  int num_flows() const { return static_cast<int>(flows_.size()); }
  const std::vector<Flow>& flows() const { return flows_; }
  const Flow& flow(int f) const { return flows_[f]; }

  int ns(int n, int w) const { return n * num_scenarios() + w; }
  int fs(int f, int w) const { return f * num_scenarios() + w; }

  int flow_index(int from, int to) const {
    auto it = flow_index_.find({from, to});
    if (it == flow_index_.end()) {
      throw std::out_of_range("no flow " + std::to_string(from) + "->" + std::to_string(to));
    }
    return it->second;
  }
  int reverse_flow(int f) const { return f ^ 1; }
  bool has_edge(int u, int v) const { return flow_index_.count({u, v}) > 0; }

  // price intercept paid by the importer of flow f
  double flow_b(int f) const {
    const Flow& fl = flows_[f];
    const EdgeParams& e = edges[fl.edge];
    return fl.from == e.u ? e.b_uv : e.b_vu;
  }
  double flow_a(int f) const { return edges[flows_[f].edge].a; }
  double flow_kappa(int f) const { return edges[flows_[f].edge].kappa; }

  const std::vector<int>& flows_into(int n) const { return flows_into_[n]; }
  const std::vector<int>& neighbors(int n) const { return neighbors_[n]; }

  // generation bound tightened by the incident interconnection capacities
  double effective_G_hi(int n) const {
    double g = nodes[n].G_hi;
    for (int m : neighbors_[n]) {
      g = std::min(g, edges[edge_of(n, m)].kappa);
    }
    return g;
  }

  int edge_of(int u, int v) const { return flows_[flow_index(u, v)].edge; }

  // builds flow tables; callers must invoke after filling nodes/edges
  void finalize() {
    flows_.clear();
    flow_index_.clear();
    flows_into_.assign(nodes.size(), {});
    neighbors_.assign(nodes.size(), {});
    for (int e = 0; e < static_cast<int>(edges.size()); ++e) {
      const auto& ed = edges[e];
      int f_uv = static_cast<int>(flows_.size());
      flows_.push_back({ed.u, ed.v, e});
      flows_.push_back({ed.v, ed.u, e});
      flow_index_[{ed.u, ed.v}] = f_uv;
      flow_index_[{ed.v, ed.u}] = f_uv + 1;
      flows_into_[ed.v].push_back(f_uv);
      flows_into_[ed.u].push_back(f_uv + 1);
      neighbors_[ed.u].push_back(ed.v);
      neighbors_[ed.v].push_back(ed.u);
    }
  }

 private:
  std::vector<Flow> flows_;
  std::map<std::pair<int, int>, int> flow_index_;
  std::vector<std::vector<int>> flows_into_;
  std::vector<std::vector<int>> neighbors_;
};

// Validates instance invariants; returns human-readable problems, empty if ok.
inline std::vector<std::string> validate_instance(const MarketInstance& inst) {
  std::vector<std::string> bad;
  auto fail = [&](const std::string& s) { bad.push_back(s); };
  const int N = inst.num_nodes();
  const int S = inst.num_scenarios();
  if (N < 1) fail("nodes: at least one node (the root, id 0) is required");
  if (S < 1) fail("scenarios: at least one scenario is required");
  double psum = 0;
  std::map<std::string, int> seen;
  for (int w = 0; w < S; ++w) {
    const auto& sc = inst.scenarios.scenarios[w];
    if (sc.p <= 0) fail("scenarios[" + std::to_string(w) + "].p: probability must be > 0");
    psum += sc.p;
    if (seen.count(sc.id)) fail("scenarios[" + std::to_string(w) + "].id: duplicate id " + sc.id);
    seen[sc.id] = w;
  }
  if (S >= 1 && std::abs(psum - 1.0) > 1e-12) {
    fail("scenarios: probabilities sum to " + std::to_string(psum) + ", expected 1 within 1e-12");
  }
  for (int n = 0; n < N; ++n) {
    const auto& nd = inst.nodes[n];
    std::string at = "nodes[" + std::to_string(n) + "]";
    if (nd.id != n) fail(at + ".id: ids must be dense 0..N-1 in order");
    if (!(0 <= nd.D_lo && nd.D_lo <= nd.D_hi)) fail(at + ": need 0 <= D_lo <= D_hi");
    if (!(0 <= nd.G_lo && nd.G_lo <= nd.G_hi)) fail(at + ": need 0 <= G_lo <= G_hi");
    if (!(nd.a > 0)) fail(at + ".a: production curvature must be > 0");
    if (nd.b < 0 || nd.d < 0) fail(at + ": production b, d must be >= 0");
    if (!(nd.a_tilde > 0)) fail(at + ".a_tilde: utility curvature must be > 0");
    if (!(nd.chi >= 0 && nd.chi < 1)) fail(at + ".chi: risk attitude must be in [0,1)");
    if (static_cast<int>(nd.Dstar.size()) != S) fail(at + ".Dstar: needs one value per scenario");
    if (static_cast<int>(nd.dG.size()) != S) fail(at + ".dG: needs one value per scenario");
    for (double g : nd.dG) {
      if (g < 0) fail(at + ".dG: RES generation must be >= 0");
    }
  }
  std::map<std::pair<int, int>, int> epairs;
  for (int e = 0; e < static_cast<int>(inst.edges.size()); ++e) {
    const auto& ed = inst.edges[e];
    std::string at = "edges[" + std::to_string(e) + "]";
    if (!(0 <= ed.u && ed.u < N && 0 <= ed.v && ed.v < N)) fail(at + ": node out of range");
    if (ed.u >= ed.v) fail(at + ": expected u < v (one record per unordered pair)");
    if (epairs.count({ed.u, ed.v})) fail(at + ": duplicate edge");
    epairs[{ed.u, ed.v}] = e;
    if (ed.kappa < 0) fail(at + ".kappa: capacity must be >= 0");
    if (ed.a < 0) fail(at + ".a: congestion slope must be >= 0");
    if (!(ed.b_uv > 0) || !(ed.b_vu > 0)) fail(at + ": trade intercepts must be > 0");
  }
  for (int n = 1; n < N; ++n) {
    if (!epairs.count({0, n})) {
      fail("edges: node 0 must belong to every neighborhood (missing edge {0," +
           std::to_string(n) + "})");
    }
  }
  if (inst.gamma) {
    if (static_cast<int>(inst.gamma->size()) != S) fail("gamma: needs one value per scenario");
    for (double g : *inst.gamma) {
      if (g > 1.0) fail("gamma: contract prices must satisfy gamma <= 1");
    }
  }
  return bad;
}

struct Allocation {
  Eigen::VectorXd D, G;  // indexed ns(n,w)
  Eigen::VectorXd q;     // indexed fs(f,w)
  // risk-averse extras
  bool has_cvar = false;
  Eigen::VectorXd eta;   // per node
  Eigen::VectorXd u;     // ns(n,w)
  // contract extras
  bool has_contracts = false;
  Eigen::VectorXd W, J;  // ns(n,w)

  static Allocation zeros(const MarketInstance& inst) {
    Allocation a;
    a.D = Eigen::VectorXd::Zero(inst.num_nodes() * inst.num_scenarios());
    a.G = a.D;
    a.q = Eigen::VectorXd::Zero(inst.num_flows() * inst.num_scenarios());
    return a;
  }

  double net_import(const MarketInstance& inst, int n, int w) const {
    double Q = 0;
    for (int f : inst.flows_into(n)) Q += q[inst.fs(f, w)];
    return Q;
  }
};

struct DualBundle {
  Eigen::VectorXd mu_lo, mu_hi;  // demand bounds, ns(n,w)
  Eigen::VectorXd nu_lo, nu_hi;  // generation bounds, ns(n,w)
  Eigen::VectorXd lambda;        // balance, ns(n,w)
  Eigen::VectorXd xi;            // capacity, fs(f,w)
  Eigen::VectorXd zeta;          // reciprocity, fs(f,w); aligned pairs at a VE
  bool has_cvar = false;
  Eigen::VectorXd tau, pi;       // epigraph and u>=0, ns(n,w)
  bool has_contracts = false;
  Eigen::VectorXd sigma;         // J>=0, ns(n,w)
  Eigen::VectorXd phi;           // risk balance, per scenario
};

// --- cost functions ---

inline double production_cost(const ProsumerParams& p, double G) {
  return 0.5 * p.a * G * G + p.b * G + p.d;
}

inline double usage_benefit(const ProsumerParams& p, double D, double Dstar) {
  double dd = D - Dstar;
  return -p.a_tilde * dd * dd + p.b_tilde;
}

// single-edge trading cost seen by the importer: (a (q_own + q_rev) + b) q_own
inline double edge_trading_cost(double a, double b_own, double q_own, double q_rev) {
  return (a * (q_own + q_rev) + b_own) * q_own;
}

inline double trading_cost(const MarketInstance& inst, const Allocation& alloc, int n, int w) {
  double total = 0;
  for (int f : inst.flows_into(n)) {
    double q_own = alloc.q[inst.fs(f, w)];
    double q_rev = alloc.q[inst.fs(inst.reverse_flow(f), w)];
    total += edge_trading_cost(inst.flow_a(f), inst.flow_b(f), q_own, q_rev);
  }
  return total;
}

inline double prosumer_cost(const MarketInstance& inst, const Allocation& alloc, int n, int w) {
  const auto& nd = inst.nodes[n];
  double Q = alloc.net_import(inst, n, w);
  return production_cost(nd, alloc.G[inst.ns(n, w)]) + trading_cost(inst, alloc, n, w) +
         inst.scenarios.p0(w) * Q -
         usage_benefit(nd, alloc.D[inst.ns(n, w)], nd.Dstar[w]);
}

inline double social_cost(const MarketInstance& inst, const Allocation& alloc, int w) {
  double sc = 0;
  for (int n = 0; n < inst.num_nodes(); ++n) sc += prosumer_cost(inst, alloc, n, w);
  return sc;
}

inline double expected_social_cost(const MarketInstance& inst, const Allocation& alloc) {
  double sc = 0;
  for (int w = 0; w < inst.num_scenarios(); ++w) sc += inst.scenarios.p(w) * social_cost(inst, alloc, w);
  return sc;
}

// --- feasibility ---

struct Violation {
  std::string constraint;
  std::string where;
  double magnitude = 0;
};

struct FeasibilityReport {
  std::vector<Violation> violations;
  bool feasible() const { return violations.empty(); }
};

inline FeasibilityReport validate_feasible(const MarketInstance& inst, const Allocation& alloc,
                                           double tol) {
  FeasibilityReport rep;
  auto flag = [&](const std::string& c, const std::string& at, double mag) {
    if (mag > tol) rep.violations.push_back({c, at, mag});
  };
  const int S = inst.num_scenarios();
  for (int w = 0; w < S; ++w) {
    std::string sw = inst.scenarios.scenarios[w].id;
    for (int n = 0; n < inst.num_nodes(); ++n) {
      const auto& nd = inst.nodes[n];
      double D = alloc.D[inst.ns(n, w)], G = alloc.G[inst.ns(n, w)];
      std::string at = "node " + std::to_string(n) + ", scenario " + sw;
      flag("demand lower bound", at, nd.D_lo - D);
      flag("demand upper bound", at, D - nd.D_hi);
      flag("generation lower bound", at, nd.G_lo - G);
      flag("generation upper bound", at, G - nd.G_hi);
      double bal = D - G - nd.dG[w] - alloc.net_import(inst, n, w);
      flag("supply-demand balance", at, std::abs(bal));
      for (int m : inst.neighbors(n)) {
        flag("generation vs interconnection capacity",
             at + ", edge {" + std::to_string(n) + "," + std::to_string(m) + "}",
             G - inst.edges[inst.edge_of(n, m)].kappa);
      }
    }
    for (int f = 0; f < inst.num_flows(); ++f) {
      const Flow& fl = inst.flow(f);
      std::string at = "flow " + std::to_string(fl.from) + "->" + std::to_string(fl.to) +
                       ", scenario " + sw;
      flag("trade capacity", at, alloc.q[inst.fs(f, w)] - inst.flow_kappa(f));
      if (fl.from < fl.to) {
        flag("trade reciprocity", at,
             alloc.q[inst.fs(f, w)] + alloc.q[inst.fs(inst.reverse_flow(f), w)]);
      }
    }
  }
  return rep;
}

}  // namespace pmkt
