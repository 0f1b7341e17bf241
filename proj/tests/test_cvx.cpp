#include "pmkt/ipm.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <sstream>

using namespace pmkt;

namespace {

cvx::ConvexProgram bound_scalar_qp() {
  // min x^2  s.t.  x >= 1
  cvx::ConvexProgram p;
  p.add_block("x", 1);
  p.obj_curvature(0, 0, 1.0);
  auto& row = p.add_ineq("lb");
  row.terms = {{0, -1.0}};
  row.rhs = -1.0;
  return p;
}

}  // namespace

TEST_CASE("scalar QP with active bound") {
  auto p = bound_scalar_qp();
  auto res = cvx::solve(p);
  REQUIRE(res.status == cvx::SolveStatus::optimal);
  CHECK(res.x[0] == Catch::Approx(1.0).margin(1e-7));
  CHECK(res.z_lin[0] == Catch::Approx(2.0).margin(1e-6));
  CHECK(res.residuals.max() <= 1e-8);
}

TEST_CASE("interior optimum has zero dual") {
  // min (x-3)^2 s.t. x <= 10
  cvx::ConvexProgram p;
  p.add_block("x", 1);
  p.obj_curvature(0, 0, 1.0);
  p.obj_linear(0, -6.0);
  p.obj_const(9.0);
  auto& row = p.add_ineq("ub");
  row.terms = {{0, 1.0}};
  row.rhs = 10.0;
  auto res = cvx::solve(p);
  REQUIRE(res.status == cvx::SolveStatus::optimal);
  CHECK(res.x[0] == Catch::Approx(3.0).margin(1e-6));
  CHECK(res.z_lin[0] == Catch::Approx(0.0).margin(1e-6));
  CHECK(res.objective == Catch::Approx(0.0).margin(1e-8));
}

TEST_CASE("degenerate LP face: objective and duals") {
  // min x+y s.t. x+y = 1, x >= 0, y >= 0
  cvx::ConvexProgram p;
  p.add_block("xy", 2);
  p.obj_linear(0, 1.0);
  p.obj_linear(1, 1.0);
  auto& eq = p.add_eq("sum");
  eq.terms = {{0, 1.0}, {1, 1.0}};
  eq.rhs = 1.0;
  for (int i = 0; i < 2; ++i) {
    auto& row = p.add_ineq("nn", i);
    row.terms = {{i, -1.0}};
  }
  auto res = cvx::solve(p);
  REQUIRE(res.status == cvx::SolveStatus::optimal);
  CHECK(res.objective == Catch::Approx(1.0).margin(1e-7));
  CHECK(res.y[0] == Catch::Approx(-1.0).margin(1e-6));
  CHECK(res.residuals.max() <= 1e-8);
}

TEST_CASE("quadratic inequality constraint") {
  // min -x s.t. x^2/2 <= 1/2   -> x*=1, dual z: -1 + z*x = 0 => z=1
  cvx::ConvexProgram p;
  p.add_block("x", 1);
  p.obj_linear(0, -1.0);
  auto& q = p.add_quad_ineq("ball");
  cvx::ConvexProgram::quad_curvature(q, 0, 0, 0.5);
  q.rhs = 0.5;
  auto res = cvx::solve(p);
  REQUIRE(res.status == cvx::SolveStatus::optimal);
  CHECK(res.x[0] == Catch::Approx(1.0).margin(1e-6));
  CHECK(res.z_quad[0] == Catch::Approx(1.0).margin(1e-5));
}

TEST_CASE("infeasible program detected") {
  // x >= 1 and x <= 0
  cvx::ConvexProgram p;
  p.add_block("x", 1);
  p.obj_curvature(0, 0, 1.0);
  auto& lo = p.add_ineq("lb");
  lo.terms = {{0, -1.0}};
  lo.rhs = -1.0;
  auto& hi = p.add_ineq("ub");
  hi.terms = {{0, 1.0}};
  hi.rhs = 0.0;
  auto res = cvx::solve(p);
  CHECK(res.status != cvx::SolveStatus::optimal);
}

TEST_CASE("unbounded program detected") {
  // min x s.t. x <= 0
  cvx::ConvexProgram p;
  p.add_block("x", 1);
  p.obj_linear(0, 1.0);
  auto& row = p.add_ineq("ub");
  row.terms = {{0, 1.0}};
  auto res = cvx::solve(p);
  CHECK(res.status != cvx::SolveStatus::optimal);
}

TEST_CASE("kkt_residuals: perturbation grows linearly, bad duals flagged") {
  auto p = bound_scalar_qp();
  auto res = cvx::solve(p);
  REQUIRE(res.status == cvx::SolveStatus::optimal);

  auto base = cvx::kkt_residuals(p, res);
  CHECK(base.max() <= 1e-8);

  for (double d : {1e-4, 1e-3}) {
    Eigen::VectorXd xp = res.x;
    xp[0] += d;
    auto r = cvx::kkt_residuals(p, xp, res.y, res.z_lin, res.z_quad);
    CHECK(r.stationarity >= 0.5 * d);
    CHECK(r.stationarity <= 10.0 * d);
  }

  // zero dual on the active bound leaves a nonzero gradient
  Eigen::VectorXd z0 = Eigen::VectorXd::Zero(1);
  auto bad = cvx::kkt_residuals(p, res.x, res.y, z0, res.z_quad);
  CHECK(bad.stationarity >= 1.0);
}

TEST_CASE("kkt_residuals rejects dimension mismatch") {
  auto p = bound_scalar_qp();
  Eigen::VectorXd x(2);
  x.setZero();
  CHECK_THROWS_AS(cvx::kkt_residuals(p, x, Eigen::VectorXd(0), Eigen::VectorXd(1), Eigen::VectorXd(0)),
                  std::invalid_argument);
}

TEST_CASE("objective scaling: duals scale, argmin does not move") {
  for (double k : {1.0, 7.5}) {
    cvx::ConvexProgram p;
    p.add_block("x", 2);
    p.obj_curvature(0, 0, k * 1.0);
    p.obj_curvature(1, 1, k * 2.0);
    p.obj_linear(0, k * -2.0);
    auto& row = p.add_ineq("cap");
    row.terms = {{0, 1.0}, {1, 1.0}};
    row.rhs = 0.5;
    auto res = cvx::solve(p);
    REQUIRE(res.status == cvx::SolveStatus::optimal);
    static Eigen::VectorXd x_ref;
    static double z_ref;
    if (k == 1.0) {
      x_ref = res.x;
      z_ref = res.z_lin[0];
    } else {
      CHECK((res.x - x_ref).lpNorm<Eigen::Infinity>() <= 1e-6);
      CHECK(res.z_lin[0] == Catch::Approx(k * z_ref).margin(1e-6 * k));
    }
  }
}

TEST_CASE("weak duality at returned point") {
  auto p = bound_scalar_qp();
  auto res = cvx::solve(p);
  CHECK(res.dual_objective <= res.objective + 1e-9);
  // the traced gap surrogate is nonnegative throughout
  for (auto& [obj, gap] : res.trace) CHECK(gap >= -1e-12);
}

TEST_CASE("deterministic resolve") {
  auto p = bound_scalar_qp();
  auto a = cvx::solve(p);
  auto b = cvx::solve(p);
  REQUIRE(a.status == b.status);
  CHECK(a.x == b.x);
  CHECK(a.z_lin == b.z_lin);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("warm starts converge to the same optimum") {
  auto p = bound_scalar_qp();
  auto base = cvx::solve(p);
  for (double x0 : {-5.0, 0.3, 9.0}) {
    cvx::SolveOptions o;
    o.x0 = Eigen::VectorXd::Constant(1, x0);
    auto res = cvx::solve(p, o);
    REQUIRE(res.status == cvx::SolveStatus::optimal);
    CHECK(std::abs(res.x[0] - base.x[0]) <= 1e-7);
  }
}

TEST_CASE("recover_duals reproduces multipliers at an optimum") {
  auto p = bound_scalar_qp();
  auto res = cvx::solve(p);
  auto rec = cvx::recover_duals(p, res.x);
  CHECK(rec.residuals.stationarity <= 1e-6);
  CHECK(rec.z_lin[0] == Catch::Approx(2.0).margin(1e-5));
}

TEST_CASE("program validation rejects indefinite forms") {
  cvx::ConvexProgram p;
  p.add_block("x", 2);
  p.obj_curvature(0, 1, 1.0);  // pure cross term, eigenvalues +-1
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("dump emits triplet text") {
  auto p = bound_scalar_qp();
  std::ostringstream os;
  p.dump(os);
  CHECK(os.str().find("vars 1") != std::string::npos);
  CHECK(os.str().find("ineq 0 lb") != std::string::npos);
}
