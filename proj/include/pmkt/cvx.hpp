#pragma once

// Convex quadratically-constrained program IR with named variable blocks and
// tagged constraint rows, plus KKT residual evaluation.
//
// Canonical form:
//   min  1/2 x'Px + c'x + c0
//   s.t. Ax = b                      (equality rows, free duals y)
//        Gx <= h                     (linear inequality rows, duals z >= 0)
//        1/2 x'Q_k x + q_k'x <= r_k  (quadratic inequality rows, duals z >= 0)
//
// Lagrangian sign convention: L = f + y'(Ax - b) + z'(g(x)), z >= 0.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pmkt::cvx {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

enum class SolveStatus { optimal, infeasible, unbounded, max_iter };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::max_iter: return "max-iter";
  }
  return "?";
}

struct VarBlock {
  std::string name;
  int offset = 0;
  int size = 0;
};

struct LinearRow {
  std::vector<std::pair<int, double>> terms;
  double rhs = 0.0;
  std::string family;
  int member = 0;
};

struct QuadRow {
  std::vector<Triplet> quad;  // symmetric curvature terms, see add_curvature
  std::vector<std::pair<int, double>> lin;
  double rhs = 0.0;
  std::string family;
  int member = 0;
};

struct KktResiduals {
  double stationarity = 0.0;   // inf-norm of grad_x L
  double feasibility = 0.0;    // max equality |Ax-b| and inequality violation
  double complementarity = 0.0;  // max |z_i * g_i(x)|
  double max() const { return std::max(stationarity, std::max(feasibility, complementarity)); }
};

class ConvexProgram {
 public:
  // --- variables ---
  int add_block(const std::string& name, int size) {
    if (size <= 0) throw std::invalid_argument("block size must be positive: " + name);
    VarBlock b{name, n_, size};
    block_index_[name] = static_cast<int>(blocks_.size());
    blocks_.push_back(b);
    n_ += size;
    return b.offset;
  }
  int num_vars() const { return n_; }
  const std::vector<VarBlock>& blocks() const { return blocks_; }
  const VarBlock& block(const std::string& name) const {
    auto it = block_index_.find(name);
    if (it == block_index_.end()) throw std::out_of_range("no block named " + name);
    return blocks_[it->second];
  }

  // --- objective ---
  // adds the term v * x_i * x_j to the objective
  void obj_curvature(int i, int j, double v) {
    if (i == j) {
      pq_.emplace_back(i, i, 2.0 * v);
    } else {
      pq_.emplace_back(i, j, v);
      pq_.emplace_back(j, i, v);
    }
  }
  void obj_linear(int i, double v) { clin_.emplace_back(i, v); }
  void obj_const(double v) { c0_ += v; }

  // --- constraints ---
  LinearRow& add_eq(const std::string& family, int member = 0) {
    eqs_.push_back(LinearRow{{}, 0.0, family, member});
    return eqs_.back();
  }
  LinearRow& add_ineq(const std::string& family, int member = 0) {
    ineqs_.push_back(LinearRow{{}, 0.0, family, member});
    return ineqs_.back();
  }
  QuadRow& add_quad_ineq(const std::string& family, int member = 0) {
    qineqs_.push_back(QuadRow{{}, {}, 0.0, family, member});
    return qineqs_.back();
  }
  // adds the term v * x_i * x_j to the constraint's quadratic part
  static void quad_curvature(QuadRow& row, int i, int j, double v) {
    if (i == j) {
      row.quad.emplace_back(i, i, 2.0 * v);
    } else {
      row.quad.emplace_back(i, j, v);
      row.quad.emplace_back(j, i, v);
    }
  }

  const std::vector<LinearRow>& eq_rows() const { return eqs_; }
  const std::vector<LinearRow>& ineq_rows() const { return ineqs_; }
  const std::vector<QuadRow>& quad_rows() const { return qineqs_; }

  int find_eq(const std::string& family, int member = 0) const {
    return find_tag(eqs_, family, member);
  }
  int find_ineq(const std::string& family, int member = 0) const {
    return find_tag(ineqs_, family, member);
  }
  int find_quad(const std::string& family, int member = 0) const {
    return find_tag(qineqs_, family, member);
  }

  // --- assembled views ---
  SpMat P() const {
    SpMat P(n_, n_);
    P.setFromTriplets(pq_.begin(), pq_.end());
    return P;
  }
  Eigen::VectorXd c() const {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(n_);
    for (auto& [i, v] : clin_) c[i] += v;
    return c;
  }
  double c0() const { return c0_; }

  SpMat A() const { return lin_matrix(eqs_); }
  Eigen::VectorXd b() const { return lin_rhs(eqs_); }
  SpMat G() const { return lin_matrix(ineqs_); }
  Eigen::VectorXd h() const { return lin_rhs(ineqs_); }

  SpMat quad_Q(int k) const {
    SpMat Q(n_, n_);
    Q.setFromTriplets(qineqs_[k].quad.begin(), qineqs_[k].quad.end());
    return Q;
  }
  Eigen::VectorXd quad_q(int k) const {
    Eigen::VectorXd q = Eigen::VectorXd::Zero(n_);
    for (auto& [i, v] : qineqs_[k].lin) q[i] += v;
    return q;
  }

  double objective(const Eigen::VectorXd& x) const {
    return 0.5 * x.dot(P() * x) + c().dot(x) + c0_;
  }

  // inequality value g_i(x) (linear rows first, then quadratic rows)
  Eigen::VectorXd ineq_values(const Eigen::VectorXd& x) const {
    int m = static_cast<int>(ineqs_.size() + qineqs_.size());
    Eigen::VectorXd g(m);
    int r = 0;
    for (const auto& row : ineqs_) {
      double v = -row.rhs;
      for (auto& [i, cf] : row.terms) v += cf * x[i];
      g[r++] = v;
    }
    for (int k = 0; k < static_cast<int>(qineqs_.size()); ++k) {
      g[r++] = 0.5 * x.dot(quad_Q(k) * x) + quad_q(k).dot(x) - qineqs_[k].rhs;
    }
    return g;
  }

  // Validates PSD-ness of P and every Q_k (eigenvalue floor  >= -1e-10*scale)
  // and block layout. Throws std::invalid_argument on failure.
  void validate() const {
    check_psd(P(), "objective");
    for (int k = 0; k < static_cast<int>(qineqs_.size()); ++k) {
      check_psd(quad_Q(k), "quad constraint " + qineqs_[k].family);
    }
    int cover = 0;
    for (const auto& b : blocks_) {
      if (b.offset != cover) throw std::invalid_argument("block layout gap at " + b.name);
      cover += b.size;
    }
    if (cover != n_) throw std::invalid_argument("blocks do not cover variable vector");
  }

  // Plain-text dump (sparse triplets) for external cross-checking.
  void dump(std::ostream& os) const {
    os << "vars " << n_ << "\n";
    for (const auto& b : blocks_) os << "block " << b.name << " " << b.offset << " " << b.size << "\n";
    os << "P\n";
    for (const auto& t : pq_) os << t.row() << " " << t.col() << " " << t.value() << "\n";
    os << "c\n";
    for (auto& [i, v] : clin_) os << i << " " << v << "\n";
    os << "c0 " << c0_ << "\n";
    dump_lin(os, "eq", eqs_);
    dump_lin(os, "ineq", ineqs_);
    for (int k = 0; k < static_cast<int>(qineqs_.size()); ++k) {
      const auto& q = qineqs_[k];
      os << "quad " << k << " " << q.family << " " << q.member << " rhs " << q.rhs << "\n";
      for (const auto& t : q.quad) os << t.row() << " " << t.col() << " " << t.value() << "\n";
      os << "lin\n";
      for (auto& [i, v] : q.lin) os << i << " " << v << "\n";
    }
  }

 private:
  template <typename Rows>
  static int find_tag(const Rows& rows, const std::string& family, int member) {
    for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
      if (rows[i].member == member && rows[i].family == family) return i;
    }
    throw std::out_of_range("no constraint " + family + "[" + std::to_string(member) + "]");
  }
  SpMat lin_matrix(const std::vector<LinearRow>& rows) const {
    std::vector<Triplet> t;
    for (int r = 0; r < static_cast<int>(rows.size()); ++r) {
      for (auto& [i, v] : rows[r].terms) t.emplace_back(r, i, v);
    }
    SpMat m(static_cast<int>(rows.size()), n_);
    m.setFromTriplets(t.begin(), t.end());
    return m;
  }
  Eigen::VectorXd lin_rhs(const std::vector<LinearRow>& rows) const {
    Eigen::VectorXd v(rows.size());
    for (int r = 0; r < static_cast<int>(rows.size()); ++r) v[r] = rows[r].rhs;
    return v;
  }
  static void dump_lin(std::ostream& os, const char* kind, const std::vector<LinearRow>& rows) {
    for (int r = 0; r < static_cast<int>(rows.size()); ++r) {
      os << kind << " " << r << " " << rows[r].family << " " << rows[r].member
         << " rhs " << rows[r].rhs << "\n";
      for (auto& [i, v] : rows[r].terms) os << i << " " << v << "\n";
    }
  }
  static void check_psd(const SpMat& M, const std::string& what) {
    if (M.nonZeros() == 0) return;
    Eigen::MatrixXd D(M);
    double scale = std::max(1.0, D.cwiseAbs().maxCoeff());
    if ((D - D.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
      throw std::invalid_argument(what + ": quadratic form not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10 * scale) {
      throw std::invalid_argument(what + ": quadratic form not PSD (min eig " +
                                  std::to_string(es.eigenvalues().minCoeff()) + ")");
    }
  }

  int n_ = 0;
  std::vector<VarBlock> blocks_;
  std::map<std::string, int> block_index_;
  std::vector<Triplet> pq_;
  std::vector<std::pair<int, double>> clin_;
  double c0_ = 0.0;
  std::vector<LinearRow> eqs_, ineqs_;
  std::vector<QuadRow> qineqs_;
};

struct SolveResult {
  SolveStatus status = SolveStatus::max_iter;
  Eigen::VectorXd x;
  Eigen::VectorXd y;        // equality duals
  Eigen::VectorXd z_lin;    // linear inequality duals (>= 0)
  Eigen::VectorXd z_quad;   // quadratic inequality duals (>= 0)
  double objective = 0.0;
  double dual_objective = 0.0;  // Lagrangian value at the returned point
  KktResiduals residuals;
  int iterations = 0;
  // per-iterate (primal objective, duality-gap surrogate s'z) pairs
  std::vector<std::pair<double, double>> trace;

  double eq_dual(const ConvexProgram& p, const std::string& family, int member = 0) const {
    return y[p.find_eq(family, member)];
  }
  double ineq_dual(const ConvexProgram& p, const std::string& family, int member = 0) const {
    return z_lin[p.find_ineq(family, member)];
  }
  double quad_dual(const ConvexProgram& p, const std::string& family, int member = 0) const {
    return z_quad[p.find_quad(family, member)];
  }
};

// Stationarity / feasibility / complementarity of an arbitrary primal-dual
// pair under the sign convention above.
inline KktResiduals kkt_residuals(const ConvexProgram& p, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& y, const Eigen::VectorXd& z_lin,
                                  const Eigen::VectorXd& z_quad) {
  const int n = p.num_vars();
  if (x.size() != n || y.size() != static_cast<Eigen::Index>(p.eq_rows().size()) ||
      z_lin.size() != static_cast<Eigen::Index>(p.ineq_rows().size()) ||
      z_quad.size() != static_cast<Eigen::Index>(p.quad_rows().size())) {
    throw std::invalid_argument("kkt_residuals: dimension mismatch");
  }
  Eigen::VectorXd grad = p.P() * x + p.c();
  if (y.size() > 0) grad += p.A().transpose() * y;
  if (z_lin.size() > 0) grad += p.G().transpose() * z_lin;
  for (int k = 0; k < z_quad.size(); ++k) {
    grad += z_quad[k] * (p.quad_Q(k) * x + p.quad_q(k));
  }
  KktResiduals r;
  r.stationarity = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
  double feas = 0.0;
  if (y.size() > 0) feas = (p.A() * x - p.b()).cwiseAbs().maxCoeff();
  Eigen::VectorXd g = p.ineq_values(x);
  for (int i = 0; i < g.size(); ++i) feas = std::max(feas, g[i]);
  r.feasibility = feas;
  double comp = 0.0;
  int mlin = static_cast<int>(p.ineq_rows().size());
  for (int i = 0; i < g.size(); ++i) {
    double zi = i < mlin ? z_lin[i] : z_quad[i - mlin];
    comp = std::max(comp, std::abs(zi * g[i]));
  }
  r.complementarity = comp;
  return r;
}

inline KktResiduals kkt_residuals(const ConvexProgram& p, const SolveResult& res) {
  return kkt_residuals(p, res.x, res.y, res.z_lin, res.z_quad);
}

}  // namespace pmkt::cvx
