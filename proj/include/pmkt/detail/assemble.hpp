#pragma once

// Shared assembly of market programs over the ConvexProgram IR, plus
// extraction of solver output into Allocation / DualBundle.
//
// Constraint families and their duals:
//   mu_lo / mu_hi   demand bounds          member ns(n,w)
//   nu_lo / nu_hi   generation bounds      member ns(n,w)   (upper bound is
//                   min(G_hi, incident kappas); see MarketInstance)
//   xi              trade capacity         member fs(f,w)
//   zeta            reciprocity, one row per unordered pair, member
//                   fs(forward flow, w)
//   lambda          supply-demand balance  member ns(n,w)   (equality)
//   pi              u >= 0                 member ns(n,w)
//   tau             CVaR epigraph          member ns(n,w)   (quadratic)
//   sigma           J >= 0                 member ns(n,w)
//   phi             risk trading balance   member w         (equality)

#include "pmkt/ipm.hpp"
#include "pmkt/model.hpp"

namespace pmkt::detail {

struct MarketLayout {
  std::vector<int> scen;  // covered global scenario indices
  int N = 0, F = 0;
  int D0 = -1, G0 = -1, q0 = -1, eta0 = -1, u0 = -1, W0 = -1, J0 = -1;
  int S() const { return static_cast<int>(scen.size()); }
  int iD(int n, int k) const { return D0 + n * S() + k; }
  int iG(int n, int k) const { return G0 + n * S() + k; }
  int iq(int f, int k) const { return q0 + f * S() + k; }
  int ieta(int n) const { return eta0 + n; }
  int iu(int n, int k) const { return u0 + n * S() + k; }
  int iW(int n, int k) const { return W0 + n * S() + k; }
  int iJ(int n, int k) const { return J0 + n * S() + k; }
};

inline MarketLayout add_market_vars(cvx::ConvexProgram& prog, const MarketInstance& inst,
                                    std::vector<int> scen, bool cvar, bool contracts) {
  MarketLayout L;
  L.scen = std::move(scen);
  L.N = inst.num_nodes();
  L.F = inst.num_flows();
  const int S = L.S();
  L.D0 = prog.add_block("D", L.N * S);
  L.G0 = prog.add_block("G", L.N * S);
  if (L.F > 0) L.q0 = prog.add_block("q", L.F * S);
  if (cvar) {
    L.eta0 = prog.add_block("eta", L.N);
    L.u0 = prog.add_block("u", L.N * S);
  }
  if (contracts) {
    L.W0 = prog.add_block("W", L.N * S);
    L.J0 = prog.add_block("J", L.N * S);
  }
  return L;
}

inline std::vector<int> all_scenarios(const MarketInstance& inst) {
  std::vector<int> v(inst.num_scenarios());
  for (int w = 0; w < inst.num_scenarios(); ++w) v[w] = w;
  return v;
}

inline void add_energy_constraints(cvx::ConvexProgram& prog, const MarketInstance& inst,
                                   const MarketLayout& L) {
  for (int k = 0; k < L.S(); ++k) {
    const int w = L.scen[k];
    for (int n = 0; n < L.N; ++n) {
      const auto& nd = inst.nodes[n];
      const int m = inst.ns(n, w);
      auto& lo = prog.add_ineq("mu_lo", m);
      lo.terms = {{L.iD(n, k), -1.0}};
      lo.rhs = -nd.D_lo;
      auto& hi = prog.add_ineq("mu_hi", m);
      hi.terms = {{L.iD(n, k), 1.0}};
      hi.rhs = nd.D_hi;
      auto& glo = prog.add_ineq("nu_lo", m);
      glo.terms = {{L.iG(n, k), -1.0}};
      glo.rhs = -nd.G_lo;
      auto& ghi = prog.add_ineq("nu_hi", m);
      ghi.terms = {{L.iG(n, k), 1.0}};
      ghi.rhs = inst.effective_G_hi(n);
    }
    for (int f = 0; f < L.F; ++f) {
      auto& cap = prog.add_ineq("xi", inst.fs(f, w));
      cap.terms = {{L.iq(f, k), 1.0}};
      cap.rhs = inst.flow_kappa(f);
      if (inst.flow(f).from < inst.flow(f).to) {
        auto& rec = prog.add_ineq("zeta", inst.fs(f, w));
        rec.terms = {{L.iq(f, k), 1.0}, {L.iq(inst.reverse_flow(f), k), 1.0}};
        rec.rhs = 0.0;
      }
    }
    for (int n = 0; n < L.N; ++n) {
      auto& bal = prog.add_eq("lambda", inst.ns(n, w));
      bal.terms.push_back({L.iD(n, k), 1.0});
      bal.terms.push_back({L.iG(n, k), -1.0});
      for (int f : inst.flows_into(n)) bal.terms.push_back({L.iq(f, k), -1.0});
      bal.rhs = inst.nodes[n].dG[w];
    }
  }
}

// Expected-cost objective. With `p2p_potential` the pairwise congestion term
// is a(q_f^2 + q_r^2 + q_f q_r); the centralized social cost carries
// a(q_f + q_r)^2. Both coincide for a = 0.
inline void add_neutral_objective(cvx::ConvexProgram& prog, const MarketInstance& inst,
                                  const MarketLayout& L, bool p2p_potential) {
  for (int k = 0; k < L.S(); ++k) {
    const int w = L.scen[k];
    const double p = inst.scenarios.p(w);
    const double p0 = inst.scenarios.p0(w);
    for (int n = 0; n < L.N; ++n) {
      const auto& nd = inst.nodes[n];
      prog.obj_curvature(L.iG(n, k), L.iG(n, k), 0.5 * p * nd.a);
      prog.obj_linear(L.iG(n, k), p * nd.b);
      prog.obj_curvature(L.iD(n, k), L.iD(n, k), p * nd.a_tilde);
      prog.obj_linear(L.iD(n, k), -2.0 * p * nd.a_tilde * nd.Dstar[w]);
      prog.obj_const(p * (nd.d + nd.a_tilde * nd.Dstar[w] * nd.Dstar[w] - nd.b_tilde));
    }
    for (int f = 0; f < L.F; ++f) {
      prog.obj_linear(L.iq(f, k), p * (inst.flow_b(f) + p0));
      if (inst.flow(f).from < inst.flow(f).to) {
        const double a = inst.flow_a(f);
        if (a != 0.0) {
          const int r = inst.reverse_flow(f);
          prog.obj_curvature(L.iq(f, k), L.iq(f, k), p * a);
          prog.obj_curvature(L.iq(r, k), L.iq(r, k), p * a);
          prog.obj_curvature(L.iq(f, k), L.iq(r, k), p * a * (p2p_potential ? 1.0 : 2.0));
        }
      }
    }
  }
}

inline void require_constant_trade_prices(const MarketInstance& inst, const char* what) {
  for (const auto& e : inst.edges) {
    if (e.a != 0.0) {
      throw std::invalid_argument(std::string(what) +
                                  " requires a_nm = 0 on every edge (edge {" +
                                  std::to_string(e.u) + "," + std::to_string(e.v) + "} has a = " +
                                  std::to_string(e.a) + ")");
    }
  }
}

// CVaR objective sum_n eta_n + sum_w p_w/(1-chi_n) u_n^w.
inline void add_cvar_objective(cvx::ConvexProgram& prog, const MarketInstance& inst,
                               const MarketLayout& L) {
  for (int n = 0; n < L.N; ++n) {
    prog.obj_linear(L.ieta(n), 1.0);
    for (int k = 0; k < L.S(); ++k) {
      const int w = L.scen[k];
      prog.obj_linear(L.iu(n, k), inst.scenarios.p(w) / (1.0 - inst.nodes[n].chi));
    }
  }
}

// u >= 0 rows (family pi) and the epigraph rows (family tau):
//   Pi_n(w) - (W + J) - eta_n - u <= 0, quadratic through C_n and U_n.
// Requires a = 0 edges so that Pi_n is jointly convex.
inline void add_epigraph(cvx::ConvexProgram& prog, const MarketInstance& inst,
                         const MarketLayout& L) {
  require_constant_trade_prices(inst, "the CVaR epigraph reformulation");
  for (int k = 0; k < L.S(); ++k) {
    const int w = L.scen[k];
    const double p0 = inst.scenarios.p0(w);
    for (int n = 0; n < L.N; ++n) {
      const auto& nd = inst.nodes[n];
      const int m = inst.ns(n, w);
      auto& upos = prog.add_ineq("pi", m);
      upos.terms = {{L.iu(n, k), -1.0}};
      upos.rhs = 0.0;
      auto& epi = prog.add_quad_ineq("tau", m);
      cvx::ConvexProgram::quad_curvature(epi, L.iG(n, k), L.iG(n, k), 0.5 * nd.a);
      cvx::ConvexProgram::quad_curvature(epi, L.iD(n, k), L.iD(n, k), nd.a_tilde);
      epi.lin.push_back({L.iG(n, k), nd.b});
      epi.lin.push_back({L.iD(n, k), -2.0 * nd.a_tilde * nd.Dstar[w]});
      for (int f : inst.flows_into(n)) {
        epi.lin.push_back({L.iq(f, k), inst.flow_b(f) + p0});
      }
      epi.lin.push_back({L.ieta(n), -1.0});
      epi.lin.push_back({L.iu(n, k), -1.0});
      if (L.W0 >= 0) {
        epi.lin.push_back({L.iW(n, k), -1.0});
        epi.lin.push_back({L.iJ(n, k), -1.0});
      }
      epi.rhs = nd.b_tilde - nd.d - nd.a_tilde * nd.Dstar[w] * nd.Dstar[w];
    }
  }
}

// J >= 0 rows (family sigma), the per-scenario risk trading balance (family
// phi) and the payment terms alpha W + gamma J.
inline void add_contract_constraints(cvx::ConvexProgram& prog, const MarketInstance& inst,
                                     const MarketLayout& L, const std::vector<double>& alpha,
                                     const std::vector<double>& gamma) {
  for (int k = 0; k < L.S(); ++k) {
    const int w = L.scen[k];
    for (int n = 0; n < L.N; ++n) {
      auto& jn = prog.add_ineq("sigma", inst.ns(n, w));
      jn.terms = {{L.iJ(n, k), -1.0}};
      jn.rhs = 0.0;
      prog.obj_linear(L.iW(n, k), alpha[w]);
      prog.obj_linear(L.iJ(n, k), gamma[w]);
    }
    auto& bal = prog.add_eq("phi", w);
    for (int n = 0; n < L.N; ++n) {
      bal.terms.push_back({L.iW(n, k), 1.0});
      bal.terms.push_back({L.iJ(n, k), 1.0});
    }
    bal.rhs = 0.0;
  }
}

// --- extraction ---

inline void ensure_allocation(Allocation& a, const MarketInstance& inst, bool cvar,
                              bool contracts) {
  const int NS = inst.num_nodes() * inst.num_scenarios();
  if (a.D.size() != NS) {
    a.D = Eigen::VectorXd::Zero(NS);
    a.G = Eigen::VectorXd::Zero(NS);
    a.q = Eigen::VectorXd::Zero(inst.num_flows() * inst.num_scenarios());
  }
  if (cvar && !a.has_cvar) {
    a.has_cvar = true;
    a.eta = Eigen::VectorXd::Zero(inst.num_nodes());
    a.u = Eigen::VectorXd::Zero(NS);
  }
  if (contracts && !a.has_contracts) {
    a.has_contracts = true;
    a.W = Eigen::VectorXd::Zero(NS);
    a.J = Eigen::VectorXd::Zero(NS);
  }
}

inline void ensure_duals(DualBundle& d, const MarketInstance& inst, bool cvar, bool contracts) {
  const int NS = inst.num_nodes() * inst.num_scenarios();
  const int FS = inst.num_flows() * inst.num_scenarios();
  if (d.lambda.size() != NS) {
    d.mu_lo = Eigen::VectorXd::Zero(NS);
    d.mu_hi = Eigen::VectorXd::Zero(NS);
    d.nu_lo = Eigen::VectorXd::Zero(NS);
    d.nu_hi = Eigen::VectorXd::Zero(NS);
    d.lambda = Eigen::VectorXd::Zero(NS);
    d.xi = Eigen::VectorXd::Zero(FS);
    d.zeta = Eigen::VectorXd::Zero(FS);
  }
  if (cvar && !d.has_cvar) {
    d.has_cvar = true;
    d.tau = Eigen::VectorXd::Zero(NS);
    d.pi = Eigen::VectorXd::Zero(NS);
  }
  if (contracts && !d.has_contracts) {
    d.has_contracts = true;
    d.sigma = Eigen::VectorXd::Zero(NS);
    d.phi = Eigen::VectorXd::Zero(inst.num_scenarios());
  }
}

inline void extract_solution(const cvx::ConvexProgram& prog, const cvx::SolveResult& res,
                             const MarketInstance& inst, const MarketLayout& L, Allocation& alloc,
                             DualBundle& duals) {
  const bool cvar = L.u0 >= 0;
  const bool contracts = L.W0 >= 0;
  ensure_allocation(alloc, inst, cvar, contracts);
  ensure_duals(duals, inst, cvar, contracts);
  for (int k = 0; k < L.S(); ++k) {
    const int w = L.scen[k];
    for (int n = 0; n < L.N; ++n) {
      const int m = inst.ns(n, w);
      alloc.D[m] = res.x[L.iD(n, k)];
      alloc.G[m] = res.x[L.iG(n, k)];
      duals.mu_lo[m] = res.ineq_dual(prog, "mu_lo", m);
      duals.mu_hi[m] = res.ineq_dual(prog, "mu_hi", m);
      duals.nu_lo[m] = res.ineq_dual(prog, "nu_lo", m);
      duals.nu_hi[m] = res.ineq_dual(prog, "nu_hi", m);
      duals.lambda[m] = res.eq_dual(prog, "lambda", m);
      if (cvar) {
        alloc.eta[n] = res.x[L.ieta(n)];
        alloc.u[m] = res.x[L.iu(n, k)];
        duals.tau[m] = res.quad_dual(prog, "tau", m);
        duals.pi[m] = res.ineq_dual(prog, "pi", m);
      }
      if (contracts) {
        alloc.W[m] = res.x[L.iW(n, k)];
        alloc.J[m] = res.x[L.iJ(n, k)];
        duals.sigma[m] = res.ineq_dual(prog, "sigma", m);
      }
    }
    for (int f = 0; f < L.F; ++f) {
      alloc.q[inst.fs(f, w)] = res.x[L.iq(f, k)];
      duals.xi[inst.fs(f, w)] = res.ineq_dual(prog, "xi", inst.fs(f, w));
    }
    for (int f = 0; f < L.F; ++f) {
      if (inst.flow(f).from < inst.flow(f).to) {
        double z = res.ineq_dual(prog, "zeta", inst.fs(f, w));
        duals.zeta[inst.fs(f, w)] = z;
        duals.zeta[inst.fs(inst.reverse_flow(f), w)] = z;
      }
    }
    if (contracts) duals.phi[w] = res.eq_dual(prog, "phi", w);
  }
}

// Quick necessary-condition screen for infeasible instances; returns the
// name of a violated condition or empty.
inline std::string infeasibility_screen(const MarketInstance& inst) {
  for (int w = 0; w < inst.num_scenarios(); ++w) {
    for (int n = 0; n < inst.num_nodes(); ++n) {
      const auto& nd = inst.nodes[n];
      double import_cap = 0;
      for (int f : inst.flows_into(n)) import_cap += inst.flow_kappa(f);
      double supply_max = inst.effective_G_hi(n) + nd.dG[w] + import_cap;
      if (nd.D_lo > supply_max + 1e-12) {
        return "demand lower bound exceeds maximum supply at node " + std::to_string(n) +
               ", scenario " + inst.scenarios.scenarios[w].id + " (D_lo = " +
               std::to_string(nd.D_lo) + " > G_hi + dG + sum kappa = " +
               std::to_string(supply_max) + ")";
      }
      if (nd.G_lo > inst.effective_G_hi(n) + 1e-12) {
        return "generation lower bound exceeds interconnection-capped upper bound at node " +
               std::to_string(n);
      }
    }
  }
  return {};
}

}  // namespace pmkt::detail
