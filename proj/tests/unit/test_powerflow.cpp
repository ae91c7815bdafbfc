#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "../support.hpp"

using namespace feaspath;

namespace {

// Two-bus control: u = [p of generator 2, v of the slack, q of generator 2].
VectorXd twobus_control(double p_load, double q_load) {
  VectorXd u(3);
  u << -p_load, 1.0, -q_load;
  return u;
}

// Independent Newton-Raphson on the complex injection equations with a
// finite-difference Jacobian. Unknowns: angles at non-slack buses, magnitudes
// at PQ buses. Scheduled injections come straight from the case data.
void oracle_pf(const Network& net, VectorXd& theta, VectorXd& v) {
  const auto nb = static_cast<Eigen::Index>(net.n_buses());
  VectorXd ps = VectorXd::Zero(nb), qs = VectorXd::Zero(nb);
  for (Eigen::Index k = 0; k < nb; ++k) {
    ps[k] = -net.buses[static_cast<std::size_t>(k)].p_load;
    qs[k] = -net.buses[static_cast<std::size_t>(k)].q_load;
  }
  theta = VectorXd::Zero(nb);
  v = VectorXd::Ones(nb);
  for (const Generator& g : net.generators) {
    const auto k = static_cast<Eigen::Index>(net.bus_index(g.bus));
    ps[k] += g.p_setpoint;
    qs[k] += g.q_setpoint;
    if (net.buses[static_cast<std::size_t>(k)].kind != BusKind::PQ) v[k] = g.v_setpoint;
  }
  std::vector<Eigen::Index> ang, mag;
  for (Eigen::Index k = 0; k < nb; ++k) {
    const BusKind kind = net.buses[static_cast<std::size_t>(k)].kind;
    if (kind != BusKind::Slack) ang.push_back(k);
    if (kind == BusKind::PQ) mag.push_back(k);
  }
  const auto n = static_cast<Eigen::Index>(ang.size() + mag.size());
  auto residual = [&](const VectorXd& z) {
    VectorXd th = theta, vv = v;
    for (std::size_t i = 0; i < ang.size(); ++i) th[ang[i]] = z[static_cast<Eigen::Index>(i)];
    for (std::size_t i = 0; i < mag.size(); ++i) vv[mag[i]] = z[static_cast<Eigen::Index>(ang.size() + i)];
    const Eigen::VectorXcd s = testing::complex_injections(net, th, vv);
    VectorXd r(n);
    for (std::size_t i = 0; i < ang.size(); ++i) r[static_cast<Eigen::Index>(i)] = s[ang[i]].real() - ps[ang[i]];
    for (std::size_t i = 0; i < mag.size(); ++i) r[static_cast<Eigen::Index>(ang.size() + i)] = s[mag[i]].imag() - qs[mag[i]];
    return r;
  };
  VectorXd z(n);
  for (std::size_t i = 0; i < ang.size(); ++i) z[static_cast<Eigen::Index>(i)] = 0.0;
  for (std::size_t i = 0; i < mag.size(); ++i) z[static_cast<Eigen::Index>(ang.size() + i)] = 1.0;
  for (int it = 0; it < 30; ++it) {
    const VectorXd r = residual(z);
    if (r.lpNorm<Eigen::Infinity>() < 1e-12) break;
    Eigen::MatrixXd J(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      VectorXd zp = z, zm = z;
      zp[j] += 1e-7;
      zm[j] -= 1e-7;
      J.col(j) = (residual(zp) - residual(zm)) / 2e-7;
    }
    z -= J.partialPivLu().solve(r);
  }
  for (std::size_t i = 0; i < ang.size(); ++i) theta[ang[i]] = z[static_cast<Eigen::Index>(i)];
  for (std::size_t i = 0; i < mag.size(); ++i) v[mag[i]] = z[static_cast<Eigen::Index>(ang.size() + i)];
}

}  // namespace

TEST_CASE("two-bus zero transfer gives the flat state") {
  const Model m = make_model(testing::load("case2_twobus"));
  const OperatingPoint op = solve_pf(m, twobus_control(0.0, 0.0), flat_start(m));
  CHECK(op.x[0] == doctest::Approx(0.0));
  CHECK(op.x[1] == doctest::Approx(1.0));
  const IntermediateVars iv = intermediates(m, op.x, op.u);
  CHECK(std::abs(iv.p_slack_inj) < 1e-12);
  CHECK(std::abs(iv.q_slack_inj) < 1e-12);
}

TEST_CASE("two-bus (p, q) = (0.2, 0) against a bisection oracle") {
  // With z = j1 and q = 0: v = cos(phi), p = sin(2 phi) / 2.
  double lo = 0.0, hi = M_PI / 4.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (std::sin(2.0 * mid) / 2.0 < 0.2 ? lo : hi) = mid;
  }
  const double phi = 0.5 * (lo + hi);
  const Model m = make_model(testing::load("case2_twobus"));
  const OperatingPoint op = solve_pf(m, twobus_control(0.2, 0.0), flat_start(m));
  CHECK(-op.x[0] == doctest::Approx(phi).epsilon(1e-9));
  CHECK(op.x[1] == doctest::Approx(std::cos(phi)).epsilon(1e-9));
  CHECK(phi == doctest::Approx(0.2058).epsilon(1e-3));
}

TEST_CASE("two-bus (p, q) = (0.6, 0) has no solution") {
  const Model m = make_model(testing::load("case2_twobus"));
  CHECK_THROWS_AS(solve_pf(m, twobus_control(0.6, 0.0), flat_start(m)), DivergenceError);
}

TEST_CASE("case14 file dispatch matches the complex-arithmetic oracle") {
  const Network net = testing::load("pglib_opf_case14_ieee");
  const Model m = make_model(net);
  const OperatingPoint op = solve_pf(m, file_control(m), flat_start(m));
  VectorXd theta, v;
  full_state<double>(m, op.x, op.u, theta, v);
  VectorXd theta_ref, v_ref;
  oracle_pf(net, theta_ref, v_ref);
  CHECK((theta - theta_ref).lpNorm<Eigen::Infinity>() < 1e-6);
  CHECK((v - v_ref).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("analytic Jacobian against central differences") {
  std::mt19937 rng(17);
  for (const std::string& name : {"pglib_opf_case5_pjm", "pglib_opf_case14_ieee"}) {
    CAPTURE(name);
    const Network net = testing::load(name);
    for (int trial = 0; trial < 20; ++trial) {
      VectorXd phi0(static_cast<Eigen::Index>(net.n_branches()));
      std::uniform_real_distribution<double> a(-0.2, 0.2);
      for (auto& p : phi0) p = a(rng);
      const Model m = make_model(net, phi0);
      const VectorXd x = testing::random_state(m, rng);
      const VectorXd u = testing::random_control(m, rng);
      const Eigen::MatrixXd J = jacobian(m, x, u);
      Eigen::MatrixXd Jfd(J.rows(), J.cols());
      const double h = 1e-6;
      for (Eigen::Index j = 0; j < x.size(); ++j) {
        VectorXd xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        Jfd.col(j) = (mismatch(m, xp, u) - mismatch(m, xm, u)) / (2.0 * h);
      }
      CHECK((J - Jfd).norm() / J.norm() < 1e-6);
    }
  }
}

TEST_CASE("two-bus Jacobian at the flat state") {
  const Model m = make_model(testing::load("case2_twobus"));
  VectorXd x(2);
  x << 0.0, 1.0;
  const Eigen::MatrixXd J = jacobian(m, x, twobus_control(0.0, 0.0));
  CHECK(std::abs(J(0, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(J(1, 1)) == doctest::Approx(1.0));
  CHECK(std::abs(J(0, 1)) < 1e-15);
  CHECK(std::abs(J(1, 0)) < 1e-15);
}

TEST_CASE("psiQ does not depend on angles") {
  const Model m = make_model(testing::load("pglib_opf_case30_ieee"));
  std::mt19937 rng(2);
  const Eigen::MatrixXd Jp =
      jacobian_psi(m, testing::random_state(m, rng), testing::random_control(m, rng));
  const auto nl = static_cast<Eigen::Index>(m.ix.n_line);
  const auto nb = static_cast<Eigen::Index>(m.ix.n_bus);
  const auto nns = static_cast<Eigen::Index>(m.ix.n_ns());
  CHECK(Jp.block(2 * nl, 0, nb, nns).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("power balance: generation minus load equals network losses") {
  for (const std::string& name : {"pglib_opf_case14_ieee", "pglib_opf_case39_epri"}) {
    CAPTURE(name);
    const Network net = testing::load(name);
    const Model m = make_model(net);
    const OperatingPoint op =
        solve_pf(m, dispatch_control(m, read_dispatch(testing::fixture(name, "start"))),
                 file_state(m));
    VectorXd theta, v;
    full_state<double>(m, op.x, op.u, theta, v);
    Eigen::VectorXcd sf, st;
    testing::complex_flows(m, theta, v, sf, st);
    double losses = (sf + st).real().sum();
    for (std::size_t k = 0; k < net.n_buses(); ++k) {
      losses += net.buses[k].shunt_g * v[static_cast<Eigen::Index>(k)] * v[static_cast<Eigen::Index>(k)];
    }
    const IntermediateVars iv = intermediates(m, op.x, op.u);
    double load = 0.0;
    for (const Bus& b : net.buses) load += b.p_load;
    CHECK(iv.p_gen.sum() - load == doctest::Approx(losses).epsilon(1e-9));
  }
}

TEST_CASE("OPF dispatches solve to feasible operating points") {
  for (const std::string& name :
       {"pglib_opf_case3_lmbd", "pglib_opf_case5_pjm", "pglib_opf_case14_ieee",
        "pglib_opf_case24_ieee_rts", "pglib_opf_case30_ieee", "pglib_opf_case39_epri",
        "pglib_opf_case57_ieee", "pglib_opf_case118_ieee", "case9_fixed_v"}) {
    CAPTURE(name);
    const Network net = testing::load(name);
    const Model m = make_model(net);
    for (const char* tag : {"start", "opt"}) {
      CAPTURE(tag);
      const OperatingPoint op = solve_pf(
          m, dispatch_control(m, read_dispatch(testing::fixture(name, tag))), file_state(m));
      const FeasibilityReport rep = check_feasibility(m, op, 1e-6);
      CHECK(rep.feasible());
    }
  }
}

TEST_CASE("case file setpoints of case57 violate known limits") {
  const Model m = make_model(testing::load("pglib_opf_case57_ieee"));
  const OperatingPoint op = solve_pf(m, file_control(m), file_state(m));
  const FeasibilityReport rep = check_feasibility(m, op);
  CHECK_FALSE(rep.feasible());
  const auto v = rep.violated();
  CHECK(std::find(v.begin(), v.end(), LimitClass::ActivePower) != v.end());
}

TEST_CASE("voltage exactly at its limit is feasible with zero margin") {
  Network net = testing::load("case2_twobus");
  Model m = make_model(net);
  const OperatingPoint op = solve_pf(m, twobus_control(0.1, 0.0), flat_start(m));
  net.buses[1].v_min = op.x[1];
  m = make_model(net);
  const FeasibilityReport rep = check_feasibility(m, op, 0.0);
  CHECK(rep.feasible());
  CHECK(rep.margin[static_cast<int>(LimitClass::Voltage)] == 0.0);
}

TEST_CASE("control layout covers every generator setting once") {
  const Model m = make_model(testing::load("pglib_opf_case118_ieee"));
  CHECK(m.ctl.n_p() == m.ix.n_gen - 1);
  CHECK(m.ctl.n_v == m.ix.gbus.size());
  CHECK(m.ctl.n_q() == 0);
  VectorXd lo, hi;
  control_limits(m, lo, hi);
  CHECK((lo.array() <= hi.array()).all());
}
