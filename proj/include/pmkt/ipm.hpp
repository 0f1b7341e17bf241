#pragma once

// Primal-dual interior-point solver for the ConvexProgram IR (convex QCQP).
// Infeasible-start Mehrotra predictor-corrector; the Newton system is reduced
// to the quasidefinite form
//   [ H + Dg' S^-1 Z Dg + dI   A' ] [dx]   [rhs_x]
//   [ A                       -dI ] [dy] = [rhs_y]
// and factorized with SparseLU. Deterministic for fixed inputs.

#include "pmkt/cvx.hpp"

#include <Eigen/SparseLU>

#include <limits>

namespace pmkt::cvx {

struct SolveOptions {
  double tol = 1e-8;
  int max_iter = 200;
  std::optional<Eigen::VectorXd> x0;  // warm start for the primal iterate
  double reg = 1e-11;                 // static KKT regularization
  bool validate = true;
};

namespace detail {

struct IneqData {
  // rows of Dg for the current x, values g(x)
  SpMat G;                  // linear part (fixed)
  Eigen::VectorXd h;
  std::vector<SpMat> Q;     // quadratic constraint matrices
  std::vector<Eigen::VectorXd> q;
  Eigen::VectorXd r;
  int m_lin = 0, m_quad = 0;

  int m() const { return m_lin + m_quad; }

  Eigen::VectorXd values(const Eigen::VectorXd& x) const {
    Eigen::VectorXd g(m());
    if (m_lin) g.head(m_lin) = G * x - h;
    for (int k = 0; k < m_quad; ++k) {
      g[m_lin + k] = 0.5 * x.dot(Q[k] * x) + q[k].dot(x) - r[k];
    }
    return g;
  }

  SpMat jacobian(const Eigen::VectorXd& x) const {
    std::vector<Triplet> t;
    for (int i = 0; i < G.outerSize(); ++i) {
      for (SpMat::InnerIterator it(G, i); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
    }
    for (int k = 0; k < m_quad; ++k) {
      Eigen::VectorXd row = Q[k] * x + q[k];
      for (int j = 0; j < row.size(); ++j) {
        if (row[j] != 0.0) t.emplace_back(m_lin + k, j, row[j]);
      }
    }
    SpMat J(m(), x.size());
    J.setFromTriplets(t.begin(), t.end());
    return J;
  }
};

inline double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv, double frac) {
  double a = 1.0;
  for (int i = 0; i < v.size(); ++i) {
    if (dv[i] < 0) a = std::min(a, -frac * v[i] / dv[i]);
  }
  return a;
}

}  // namespace detail

inline SolveResult solve(const ConvexProgram& prog, const SolveOptions& opts = {}) {
  if (opts.validate) prog.validate();
  const int n = prog.num_vars();
  const SpMat P = prog.P();
  const Eigen::VectorXd c = prog.c();
  const SpMat A = prog.A();
  const Eigen::VectorXd b = prog.b();
  const int m_eq = static_cast<int>(prog.eq_rows().size());

  detail::IneqData ineq;
  ineq.G = prog.G();
  ineq.h = prog.h();
  ineq.m_lin = static_cast<int>(prog.ineq_rows().size());
  ineq.m_quad = static_cast<int>(prog.quad_rows().size());
  ineq.r.resize(ineq.m_quad);
  for (int k = 0; k < ineq.m_quad; ++k) {
    ineq.Q.push_back(prog.quad_Q(k));
    ineq.q.push_back(prog.quad_q(k));
    ineq.r[k] = prog.quad_rows()[k].rhs;
  }
  const int m = ineq.m();

  SolveResult res;
  auto finish = [&](SolveStatus st, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                    const Eigen::VectorXd& z, int iters) {
    res.status = st;
    res.x = x;
    res.y = y;
    res.z_lin = z.head(ineq.m_lin);
    res.z_quad = z.tail(ineq.m_quad);
    res.objective = prog.objective(x);
    res.residuals = kkt_residuals(prog, res);
    res.iterations = iters;
    double L = res.objective;
    if (m_eq) L += y.dot(A * x - b);
    if (m) L += z.dot(ineq.values(x));
    res.dual_objective = L;
    return res;
  };

  // initial point
  Eigen::VectorXd x;
  if (opts.x0) {
    x = *opts.x0;
    if (x.size() != n) throw std::invalid_argument("x0 has wrong dimension");
  } else if (m_eq > 0) {
    // min-norm solution of Ax = b
    std::vector<Triplet> t;
    for (int i = 0; i < n; ++i) t.emplace_back(i, i, 1.0);
    for (int i = 0; i < A.outerSize(); ++i) {
      for (SpMat::InnerIterator it(A, i); it; ++it) {
        t.emplace_back(n + it.row(), it.col(), it.value());
        t.emplace_back(it.col(), n + it.row(), it.value());
      }
    }
    for (int i = 0; i < m_eq; ++i) t.emplace_back(n + i, n + i, -1e-12);
    SpMat K(n + m_eq, n + m_eq);
    K.setFromTriplets(t.begin(), t.end());
    Eigen::SparseLU<SpMat> lu(K);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + m_eq);
    rhs.tail(m_eq) = b;
    x = lu.solve(rhs).head(n);
  } else {
    x = Eigen::VectorXd::Zero(n);
  }

  if (m == 0) {
    // equality-constrained QP: one Newton/KKT solve
    std::vector<Triplet> t;
    for (int i = 0; i < P.outerSize(); ++i) {
      for (SpMat::InnerIterator it(P, i); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
    }
    for (int i = 0; i < n; ++i) t.emplace_back(i, i, opts.reg);
    for (int i = 0; i < A.outerSize(); ++i) {
      for (SpMat::InnerIterator it(A, i); it; ++it) {
        t.emplace_back(n + it.row(), it.col(), it.value());
        t.emplace_back(it.col(), n + it.row(), it.value());
      }
    }
    for (int i = 0; i < m_eq; ++i) t.emplace_back(n + i, n + i, -opts.reg);
    SpMat K(n + m_eq, n + m_eq);
    K.setFromTriplets(t.begin(), t.end());
    Eigen::SparseLU<SpMat> lu(K);
    if (lu.info() != Eigen::Success) return finish(SolveStatus::unbounded, x, Eigen::VectorXd::Zero(m_eq), Eigen::VectorXd::Zero(0), 0);
    Eigen::VectorXd rhs(n + m_eq);
    rhs.head(n) = -c;
    rhs.tail(m_eq) = b;
    Eigen::VectorXd sol = lu.solve(rhs);
    // one refinement pass
    Eigen::VectorXd resid = rhs - K * sol;
    sol += lu.solve(resid);
    auto r = finish(SolveStatus::optimal, sol.head(n), sol.tail(m_eq), Eigen::VectorXd::Zero(0), 1);
    if (r.residuals.max() > std::max(opts.tol, 1e-6)) r.status = SolveStatus::unbounded;
    return r;
  }

  Eigen::VectorXd g0 = ineq.values(x);
  Eigen::VectorXd s(m), z(m);
  for (int i = 0; i < m; ++i) {
    s[i] = std::max(1.0, std::abs(g0[i]) * 1.5);
    z[i] = 1.0;
  }
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m_eq);

  const double obj_scale = std::max(1.0, c.cwiseAbs().size() ? c.cwiseAbs().maxCoeff() : 1.0);
  double best_err = std::numeric_limits<double>::infinity();
  Eigen::VectorXd bx = x, by = y, bz = z;
  int stall = 0;

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    SpMat Dg = ineq.jacobian(x);
    Eigen::VectorXd g = ineq.values(x);
    Eigen::VectorXd r_d = P * x + c + Dg.transpose() * z;
    if (m_eq) r_d += A.transpose() * y;
    Eigen::VectorXd r_p = m_eq ? Eigen::VectorXd(A * x - b) : Eigen::VectorXd(0);
    Eigen::VectorXd r_g = g + s;
    double mu = s.dot(z) / m;

    double viol = 0.0;
    for (int i = 0; i < m; ++i) viol = std::max(viol, g[i]);
    if (m_eq) viol = std::max(viol, r_p.cwiseAbs().maxCoeff());
    double comp = 0.0;
    for (int i = 0; i < m; ++i) comp = std::max(comp, std::abs(z[i] * g[i]));
    double stat = r_d.cwiseAbs().maxCoeff();

    res.trace.emplace_back(prog.objective(x), s.dot(z));

    double err = std::max({stat, viol, comp});
    if (err < best_err) {
      best_err = err;
      bx = x; by = y; bz = z;
      stall = 0;
    } else if (++stall > 12) {
      break;
    }
    if (stat <= opts.tol && viol <= opts.tol && comp <= opts.tol) {
      return finish(SolveStatus::optimal, x, y, z, iter);
    }

    // divergence heuristics
    double dual_norm = z.lpNorm<Eigen::Infinity>() + (m_eq ? y.lpNorm<Eigen::Infinity>() : 0.0);
    if (mu < 1e-10 * obj_scale && viol > std::max(1e-6, 1e3 * opts.tol) && dual_norm > 1e8) {
      auto r = finish(SolveStatus::infeasible, x, y, z, iter);
      return r;
    }
    if (x.lpNorm<Eigen::Infinity>() > 1e12) {
      return finish(prog.objective(x) < -1e12 ? SolveStatus::unbounded : SolveStatus::infeasible,
                    x, y, z, iter);
    }

    // assemble reduced KKT
    Eigen::VectorXd w(m);
    for (int i = 0; i < m; ++i) w[i] = z[i] / s[i];
    SpMat H = P;
    for (int k = 0; k < ineq.m_quad; ++k) {
      if (z[ineq.m_lin + k] != 0.0) H = H + SpMat(z[ineq.m_lin + k] * ineq.Q[k]);
    }
    SpMat DgW = w.asDiagonal() * Dg;
    SpMat M = H + SpMat(Dg.transpose() * DgW);
    std::vector<Triplet> t;
    t.reserve(M.nonZeros() + 2 * A.nonZeros() + n + m_eq);
    for (int i = 0; i < M.outerSize(); ++i) {
      for (SpMat::InnerIterator it(M, i); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
    }
    double dreg = opts.reg * std::max(1.0, mu);
    for (int i = 0; i < n; ++i) t.emplace_back(i, i, dreg);
    for (int i = 0; i < A.outerSize(); ++i) {
      for (SpMat::InnerIterator it(A, i); it; ++it) {
        t.emplace_back(n + it.row(), it.col(), it.value());
        t.emplace_back(it.col(), n + it.row(), it.value());
      }
    }
    for (int i = 0; i < m_eq; ++i) t.emplace_back(n + i, n + i, -dreg);
    SpMat K(n + m_eq, n + m_eq);
    K.setFromTriplets(t.begin(), t.end());
    Eigen::SparseLU<SpMat> lu(K);
    if (lu.info() != Eigen::Success) break;

    auto newton = [&](const Eigen::VectorXd& r_c) {
      // r_c = S z - t where t is the complementarity target
      Eigen::VectorXd rzs(m);
      for (int i = 0; i < m; ++i) rzs[i] = w[i] * r_g[i] - r_c[i] / s[i];
      Eigen::VectorXd rhs(n + m_eq);
      rhs.head(n) = -r_d - Dg.transpose() * rzs;
      if (m_eq) rhs.tail(m_eq) = -r_p;
      Eigen::VectorXd sol = lu.solve(rhs);
      sol += lu.solve(rhs - K * sol);  // refinement
      Eigen::VectorXd dx = sol.head(n);
      Eigen::VectorXd dy = sol.tail(m_eq);
      Eigen::VectorXd ds = -r_g - Dg * dx;
      Eigen::VectorXd dz(m);
      for (int i = 0; i < m; ++i) dz[i] = -(r_c[i] + z[i] * ds[i]) / s[i];
      return std::make_tuple(dx, dy, ds, dz);
    };

    // predictor
    Eigen::VectorXd r_c_aff = s.cwiseProduct(z);
    auto [dxa, dya, dsa, dza] = newton(r_c_aff);
    double ap = detail::max_step(s, dsa, 1.0);
    double ad = detail::max_step(z, dza, 1.0);
    double a_aff = std::min(ap, ad);
    double mu_aff = (s + a_aff * dsa).dot(z + a_aff * dza) / m;
    double sigma = std::pow(std::max(0.0, mu_aff / mu), 3.0);
    sigma = std::min(0.99, std::max(sigma, 1e-8));

    // corrector
    Eigen::VectorXd r_c = s.cwiseProduct(z) + dsa.cwiseProduct(dza);
    r_c.array() -= sigma * mu;
    auto [dx, dy, ds, dz] = newton(r_c);

    double frac = 0.995;
    double alpha_p = detail::max_step(s, ds, frac);
    double alpha_d = detail::max_step(z, dz, frac);
    // keep x and s consistent for nonlinear constraints
    double alpha = std::min(alpha_p, alpha_d);
    if (ineq.m_quad == 0) {
      x += alpha_p * dx;
      s += alpha_p * ds;
      if (m_eq) y += alpha_d * dy;
      z += alpha_d * dz;
    } else {
      x += alpha * dx;
      s += alpha * ds;
      if (m_eq) y += alpha * dy;
      z += alpha * dz;
    }
  }

  auto r = finish(SolveStatus::max_iter, bx, by, bz, opts.max_iter);
  return r;
}

// Recovers a KKT-consistent dual vector at a given (near-optimal) primal point
// by least squares on the stationarity residual, with inactive inequality
// duals pinned to zero. Used to verify fixed points produced outside the
// interior-point path.
inline SolveResult recover_duals(const ConvexProgram& prog, const Eigen::VectorXd& x,
                                 double act_tol = 1e-6) {
  const int n = prog.num_vars();
  const int m_eq = static_cast<int>(prog.eq_rows().size());
  const int m_lin = static_cast<int>(prog.ineq_rows().size());
  const int m_quad = static_cast<int>(prog.quad_rows().size());
  Eigen::VectorXd g = prog.ineq_values(x);

  std::vector<int> active;
  for (int i = 0; i < m_lin + m_quad; ++i) {
    if (g[i] > -act_tol) active.push_back(i);
  }
  const int ma = static_cast<int>(active.size());

  // rows of the constraint Jacobian entering stationarity
  Eigen::MatrixXd J(m_eq + ma, n);
  J.setZero();
  if (m_eq) J.topRows(m_eq) = Eigen::MatrixXd(prog.A());
  Eigen::MatrixXd Gd(prog.G());
  for (int r = 0; r < ma; ++r) {
    int i = active[r];
    if (i < m_lin) {
      J.row(m_eq + r) = Gd.row(i);
    } else {
      J.row(m_eq + r) = (prog.quad_Q(i - m_lin) * x + prog.quad_q(i - m_lin)).transpose();
    }
  }
  Eigen::VectorXd r0 = prog.P() * x + prog.c();

  // min ||J'u + r0||^2  s.t. u_i >= 0 for inequality rows
  ConvexProgram ls;
  ls.add_block("u", std::max(1, m_eq + ma));
  Eigen::MatrixXd Pls = J * J.transpose();
  for (int i = 0; i < m_eq + ma; ++i) {
    for (int j = i; j < m_eq + ma; ++j) {
      if (Pls(i, j) != 0.0) ls.obj_curvature(i, j, (i == j ? 0.5 : 1.0) * Pls(i, j));
    }
  }
  Eigen::VectorXd cls = J * r0;
  for (int i = 0; i < m_eq + ma; ++i) ls.obj_linear(i, cls[i]);
  for (int r = 0; r < ma; ++r) {
    auto& row = ls.add_ineq("nonneg", r);
    row.terms = {{m_eq + r, -1.0}};
    row.rhs = 0.0;
  }
  SolveOptions lo;
  lo.tol = 1e-10;
  lo.validate = false;
  SolveResult ures = solve(ls, lo);

  SolveResult out;
  out.x = x;
  out.y = Eigen::VectorXd::Zero(m_eq);
  out.z_lin = Eigen::VectorXd::Zero(m_lin);
  out.z_quad = Eigen::VectorXd::Zero(m_quad);
  for (int i = 0; i < m_eq; ++i) out.y[i] = ures.x[i];
  for (int r = 0; r < ma; ++r) {
    int i = active[r];
    double v = std::max(0.0, ures.x[m_eq + r]);
    if (i < m_lin) out.z_lin[i] = v;
    else out.z_quad[i - m_lin] = v;
  }
  out.objective = prog.objective(x);
  out.residuals = kkt_residuals(prog, out);
  out.status = SolveStatus::optimal;
  out.iterations = ures.iterations;
  return out;
}

}  // namespace pmkt::cvx
