#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "../support.hpp"
#include "feaspath/errors.hpp"
#include "feaspath/restriction.hpp"

using namespace feaspath;

namespace {

OperatingPoint start_point(const Model& m, const std::string& name) {
  const VectorXd u = name == "case2_twobus"
                         ? file_control(m)
                         : dispatch_control(m, read_dispatch(testing::fixture(name, "start")));
  return solve_pf(m, u, file_state(m));
}

// Membership of bus-2 injections (p, q) in the two-bus restriction around
// zero transfer.
bool twobus_contains(double p, double q) {
  const Network net = testing::load("case2_twobus");
  const Model m = make_model(net);
  const OperatingPoint base = start_point(m, "case2_twobus");
  RestrictionOptions opts;
  opts.objective = ObjectiveMode::None;
  VectorXd u(3);
  u << p, 1.0, q;
  opts.fixed_u = u;
  const Restriction r = build_restriction(net, base, opts);
  return solve(r.program).status == SolveStatus::Optimal;
}

}  // namespace

TEST_CASE("two-bus restriction contains (0.1, 0.05)") { CHECK(twobus_contains(0.1, 0.05)); }

TEST_CASE("two-bus restriction excludes (0.6, 0)") {
  // p^2 - q = 0.36 > 1/4: outside the solvability boundary.
  CHECK_FALSE(twobus_contains(0.6, 0.0));
}

TEST_CASE("restriction contains its base with a tight box") {
  for (const std::string& name :
       {"case2_twobus", "pglib_opf_case5_pjm", "pglib_opf_case14_ieee", "case9_fixed_v"}) {
    CAPTURE(name);
    const Network net = testing::load(name);
    const Model m = make_model(net);
    const OperatingPoint base = start_point(m, name);
    RestrictionOptions opts;
    opts.objective = ObjectiveMode::None;
    opts.fixed_u = base.u;
    const Restriction r = build_restriction(net, base, opts);
    ConicProgram p = r.program;
    const VectorXd phi0 = angle_differences(m, base.x);
    for (std::size_t l = 0; l < r.vars.phi_hi.size(); ++l) {
      p.set_bounds(r.vars.phi_hi[l], phi0[static_cast<Eigen::Index>(l)], phi0[static_cast<Eigen::Index>(l)]);
      p.set_bounds(r.vars.phi_lo[l], phi0[static_cast<Eigen::Index>(l)], phi0[static_cast<Eigen::Index>(l)]);
    }
    const auto nns = static_cast<Eigen::Index>(m.ix.n_ns());
    for (std::size_t i = 0; i < r.vars.v_hi.size(); ++i) {
      const double v = base.x[nns + static_cast<Eigen::Index>(i)];
      p.set_bounds(r.vars.v_hi[i], v, v);
      p.set_bounds(r.vars.v_lo[i], v, v);
    }
    const SolveResult res = solve(p);
    REQUIRE(res.status == SolveStatus::Optimal);
    CHECK(p.max_violation(res.x) < 1e-7);
  }
}

TEST_CASE("K splits into nonnegative and nonpositive parts") {
  for (const std::string& name : {"pglib_opf_case5_pjm", "pglib_opf_case30_ieee"}) {
    CAPTURE(name);
    const Network net = testing::load(name);
    const Model m = make_model(net);
    const Restriction r = build_restriction(net, start_point(m, name));
    const Eigen::MatrixXd K = r.K, Kp = r.Kpos, Kn = r.Kneg;
    CHECK(Kp.minCoeff() >= 0.0);
    CHECK(Kn.maxCoeff() <= 0.0);
    CHECK((Kp + Kn - K).cwiseAbs().maxCoeff() == 0.0);
    CHECK(K.cwiseAbs().maxCoeff() > 0.0);
  }
}

TEST_CASE("K equals -A J^-1 Meq computed with a dense inverse") {
  const Network net = testing::load("pglib_opf_case14_ieee");
  const Model m = make_model(net);
  const OperatingPoint base = start_point(m, "pglib_opf_case14_ieee");
  const Restriction r = build_restriction(net, base);
  const Eigen::MatrixXd J = Eigen::MatrixXd(r.model.Meq * jacobian_psi(r.model, base.x, base.u));
  const Eigen::MatrixXd A = Eigen::MatrixXd(state_selection(r.model));
  const Eigen::MatrixXd Kref = -A * J.inverse() * Eigen::MatrixXd(r.model.Meq);
  CHECK((Eigen::MatrixXd(r.K) - Kref).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("quadratic row count stays within 30 n_l + 4 n_b + 4 n_g") {
  for (const std::string& name : testing::all_cases()) {
    CAPTURE(name);
    const Network net = testing::load(name);
    const Model m = make_model(net);
    const Restriction r = build_restriction(net, start_point(m, name));
    const std::size_t limit = 30 * net.n_branches() + 4 * net.n_buses() + 4 * net.n_generators();
    CHECK(r.quadratic_row_count() <= limit);
    CHECK(r.diagnostics.empty());
  }
}

TEST_CASE("cost over-estimator at the base is at least the true cost") {
  for (const std::string& name :
       {"pglib_opf_case3_lmbd", "pglib_opf_case5_pjm", "pglib_opf_case24_ieee_rts"}) {
    CAPTURE(name);
    const Network net = testing::load(name);
    const Model m = make_model(net);
    const OperatingPoint base = start_point(m, name);
    RestrictionOptions opts;
    opts.fixed_u = base.u;
    const Restriction r = build_restriction(net, base, opts);
    const SolveResult res = solve(r.program);
    REQUIRE(res.status == SolveStatus::Optimal);
    const double truth = generation_cost(m, base.x, base.u);
    CAPTURE(res.objective - truth);
    CHECK(res.objective >= truth * (1.0 - 1e-7));
    // The over-estimate is tight when the box shrinks to the base.
    CHECK(res.objective == doctest::Approx(truth).epsilon(1e-4));
  }
}

TEST_CASE("distance objective with target at the base has optimum zero") {
  const Network net = testing::load("pglib_opf_case5_pjm");
  const Model m = make_model(net);
  const OperatingPoint base = start_point(m, "pglib_opf_case5_pjm");
  RestrictionOptions opts;
  opts.objective = ObjectiveMode::Distance;
  opts.target = base.u;
  const Restriction r = build_restriction(net, base, opts);
  const RestrictionSolution s = solve_restriction(r);
  REQUIRE(s.result.status == SolveStatus::Optimal);
  // The optimum sits at a zero-width box, where the interior point method
  // only converges linearly and stops at reduced accuracy.
  CHECK(std::abs(s.result.objective) < 1e-5);
  CHECK((s.u - base.u).norm() < 1e-3);
}

TEST_CASE("distance target of the wrong length is rejected") {
  const Network net = testing::load("pglib_opf_case5_pjm");
  const Model m = make_model(net);
  RestrictionOptions opts;
  opts.objective = ObjectiveMode::Distance;
  opts.target = VectorXd::Zero(2);
  CHECK_THROWS_AS(build_restriction(net, start_point(m, "pglib_opf_case5_pjm"), opts), ConfigError);
  opts.target = start_point(m, "pglib_opf_case5_pjm").u;
  opts.lambda = 0.0;
  CHECK_THROWS_AS(build_restriction(net, start_point(m, "pglib_opf_case5_pjm"), opts), ConfigError);
}

TEST_CASE("singular Jacobian at the base is reported") {
  const Network net = testing::load("case2_twobus");
  const Model m = make_model(net);
  OperatingPoint op;
  op.u = file_control(m);
  op.x = VectorXd::Zero(2);  // v = 0 zeroes the angle column
  op.solved = true;
  CHECK_THROWS_AS(build_restriction(net, op), SingularJacobianError);
}

TEST_CASE("the solved control lands in its polytope and the segment is feasible") {
  const Network net = testing::load("pglib_opf_case5_pjm");
  const Model m = make_model(net);
  const OperatingPoint base = start_point(m, "pglib_opf_case5_pjm");
  const Restriction r = build_restriction(net, base);
  const RestrictionSolution s = solve_restriction(r);
  REQUIRE(s.result.status == SolveStatus::Optimal);
  for (int k = 0; k <= 10; ++k) {
    const double a = k / 10.0;
    const VectorXd u = (1 - a) * base.u + a * s.u;
    const OperatingPoint op = solve_pf(m, u, base.x);
    if (k == 10) CHECK(in_polytope(r.model, op.x, s.b, 1e-7));
    CHECK(check_feasibility(m, op, 1e-6).feasible());
  }
}
