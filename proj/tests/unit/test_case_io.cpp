#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "../support.hpp"

using namespace feaspath;

namespace {

// Three-bus text with a configurable branch table and gencost block.
std::string three_bus(const std::string& branches, const std::string& gencost,
                      const std::string& bus_extra = "") {
  std::ostringstream os;
  os << "function mpc = tiny\n"
        "mpc.version = '2';\n"
        "mpc.baseMVA = 100;\n"
        "mpc.bus = [\n"
        "\t1\t3\t0\t0\t0\t0\t1\t1.02\t0\t135\t1\t1.1\t0.9;\n"
        "\t2\t2\t50\t10\t0\t0\t1\t1\t-3\t135\t1\t1.1\t0.9;\n"
        "\t3\t1\t80\t30\t0\t19\t1\t1\t-5\t135\t1\t1.1\t0.9;\n"
     << bus_extra
     << "];\n"
        "mpc.gen = [\n"
        "\t1\t100\t0\t100\t-100\t1.02\t100\t1\t300\t0;\n"
        "\t2\t40\t0\t50\t-50\t1\t100\t1\t200\t0;\n"
        "\t2\t0\t0\t50\t-50\t1\t100\t0\t200\t0;\n"
        "];\n"
        "mpc.branch = [\n"
     << branches
     << "];\n"
     << gencost;
  return os.str();
}

const std::string kBranches =
    "\t1\t2\t0.01\t0.1\t0.02\t250\t0\t0\t0\t0\t1\t-30\t30;\n"
    "\t2\t3\t0.02\t0.2\t0\t0\t0\t0\t1.05\t2\t1\t-360\t360;\n"
    "\t1\t3\t0.02\t0.2\t0\t100\t0\t0\t0\t0\t0\t-30\t30;\n";

const std::string kGencost =
    "mpc.gencost = [\n"
    "\t2\t0\t0\t3\t0.01\t20\t5;\n"
    "\t2\t0\t0\t2\t30\t0;\n"
    "\t2\t0\t0\t2\t30\t0;\n"
    "];\n";

}  // namespace

TEST_CASE("case3_lmbd parses with 3 buses and 3 generators") {
  const Network net = testing::load("pglib_opf_case3_lmbd");
  CHECK(net.n_buses() == 3);
  CHECK(net.n_generators() == 3);
  CHECK(net.n_branches() == 3);
  CHECK(net.name == "pglib_opf_case3_lmbd");
  CHECK(net.buses[net.slack_bus()].kind == BusKind::Slack);
}

TEST_CASE("two-bus model: slack plus controllable injection through z = j1") {
  const Network net = testing::load("case2_twobus");
  REQUIRE(net.n_buses() == 2);
  REQUIRE(net.n_branches() == 1);
  const Branch& br = net.branches[0];
  CHECK(br.r == 0.0);
  CHECK(br.x == 1.0);
  CHECK_FALSE(br.s_max.has_value());
  CHECK(net.buses[1].kind == BusKind::PQ);
  CHECK(net.buses[1].v_min == doctest::Approx(0.9));
  CHECK(net.buses[1].v_max == doctest::Approx(1.1));
}

TEST_CASE("per-unit conversion and element filtering") {
  const Network net = parse_case(three_bus(kBranches, kGencost), "tiny");
  CHECK(net.n_generators() == 2);  // out-of-service generator dropped
  CHECK(net.n_branches() == 2);    // out-of-service branch dropped
  CHECK(net.buses[1].p_load == doctest::Approx(0.5));
  CHECK(net.buses[1].q_load == doctest::Approx(0.1));
  CHECK(net.buses[2].shunt_b == doctest::Approx(0.19));
  CHECK(net.buses[1].theta_init == doctest::Approx(-3.0 * M_PI / 180.0));
  CHECK(net.generators[0].p_max == doctest::Approx(3.0));
  CHECK(net.generators[0].p_setpoint == doctest::Approx(1.0));
  // Cost in per unit: c2 * base^2, c1 * base.
  CHECK(net.generators[0].cost.c2 == doctest::Approx(100.0));
  CHECK(net.generators[0].cost.c1 == doctest::Approx(2000.0));
  CHECK(net.generators[0].cost.c0 == doctest::Approx(5.0));
  CHECK(net.generators[0].cost(1.0) == doctest::Approx(0.01 * 1e4 + 20 * 100 + 5));

  const Branch& b0 = net.branches[0];
  CHECK(b0.tap == 1.0);  // zero ratio means nominal
  CHECK(b0.s_max.value() == doctest::Approx(2.5));
  CHECK(b0.phi_max == doctest::Approx(M_PI / 6.0));
  const Branch& b1 = net.branches[1];
  CHECK(b1.tap == doctest::Approx(1.05));
  CHECK(b1.shift == doctest::Approx(2.0 * M_PI / 180.0));
  CHECK_FALSE(b1.s_max.has_value());
  // +/-360 degrees is the unbounded convention.
  CHECK(b1.phi_max == doctest::Approx(M_PI / 3.0));
  CHECK(b1.phi_min == doctest::Approx(-M_PI / 3.0));
}

TEST_CASE("missing gencost gives every generator cost p per MW") {
  const Network net = parse_case(three_bus(kBranches, ""), "tiny");
  for (const Generator& g : net.generators) {
    CHECK(g.cost.c2 == 0.0);
    CHECK(g.cost.c1 == doctest::Approx(net.base_mva));
  }
}

TEST_CASE("zero branches is a validation error") {
  CHECK_THROWS_AS(parse_case(three_bus("", kGencost)), ValidationError);
}

TEST_CASE("two slack buses is a validation error") {
  const std::string extra = "\t4\t3\t0\t0\t0\t0\t1\t1\t0\t135\t1\t1.1\t0.9;\n";
  const std::string br = kBranches + "\t3\t4\t0.01\t0.1\t0\t0\t0\t0\t0\t0\t1\t-30\t30;\n";
  CHECK_THROWS_AS(parse_case(three_bus(br, kGencost, extra)), ValidationError);
}

TEST_CASE("piecewise-linear cost is unsupported") {
  const std::string pwl =
      "mpc.gencost = [\n"
      "\t1\t0\t0\t2\t0\t0\t100\t2000;\n"
      "\t1\t0\t0\t2\t0\t0\t100\t2000;\n"
      "\t1\t0\t0\t2\t0\t0\t100\t2000;\n"
      "];\n";
  CHECK_THROWS_AS(parse_case(three_bus(kBranches, pwl)), UnsupportedCostError);
}

TEST_CASE("malformed table reports the line number") {
  std::string text = three_bus(kBranches, kGencost);
  const auto pos = text.find("\t2\t3\t0.02");
  text.replace(pos, 9, "\t2\t3\tabc!");
  try {
    parse_case(text);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    // Line 16 holds the second branch row.
    CHECK(e.line() == 16);
  }
}

TEST_CASE("every shipped case parses and validates") {
  for (const std::string& name : testing::all_cases()) {
    CAPTURE(name);
    const Network net = testing::load(name);
    CHECK_NOTHROW(validate(net));
    CHECK(net.n_branches() > 0);
  }
}

TEST_CASE("write_case round-trips the network") {
  for (const std::string& name : {"pglib_opf_case5_pjm", "pglib_opf_case30_ieee"}) {
    CAPTURE(name);
    const Network a = testing::load(name);
    const Network b = parse_case(write_case(a), a.name);
    REQUIRE(a.n_buses() == b.n_buses());
    REQUIRE(a.n_branches() == b.n_branches());
    REQUIRE(a.n_generators() == b.n_generators());
    for (std::size_t i = 0; i < a.n_buses(); ++i) {
      CHECK(a.buses[i].p_load == doctest::Approx(b.buses[i].p_load).epsilon(1e-12));
      CHECK(a.buses[i].v_max == doctest::Approx(b.buses[i].v_max));
      CHECK(a.buses[i].kind == b.buses[i].kind);
    }
    for (std::size_t l = 0; l < a.n_branches(); ++l) {
      CHECK(a.branches[l].x == doctest::Approx(b.branches[l].x).epsilon(1e-12));
      CHECK(a.branches[l].phi_max == doctest::Approx(b.branches[l].phi_max));
      CHECK(a.branches[l].s_max.has_value() == b.branches[l].s_max.has_value());
    }
    for (std::size_t g = 0; g < a.n_generators(); ++g) {
      CHECK(a.generators[g].cost.c2 == doctest::Approx(b.generators[g].cost.c2));
      CHECK(a.generators[g].cost.c1 == doctest::Approx(b.generators[g].cost.c1));
    }
  }
}

// ---------------------------------------------------------------- documents

TEST_CASE("dispatch documents round-trip and map to controls") {
  const Network net = testing::load("pglib_opf_case5_pjm");
  const Model m = make_model(net);
  const Dispatch d = read_dispatch(testing::fixture("pglib_opf_case5_pjm", "start"));
  CHECK(d.p_mw.size() == static_cast<Eigen::Index>(net.n_generators()));
  const Dispatch back = parse_dispatch(write_dispatch(d));
  CHECK(back.p_mw == d.p_mw);
  CHECK(back.v_pu == d.v_pu);
  CHECK(back.cost == d.cost);

  const VectorXd u = dispatch_control(m, d);
  CHECK(u.size() == static_cast<Eigen::Index>(m.n_u()));
  // The slack generator's p is not a control.
  std::size_t k = 0;
  for (std::size_t g : m.ctl.p_gens) {
    CHECK(u[static_cast<Eigen::Index>(k++)] == doctest::Approx(d.p_mw[static_cast<Eigen::Index>(g)] / 100.0));
  }

  Dispatch short_d = d;
  short_d.p_mw.conservativeResize(2);
  short_d.v_pu.conservativeResize(2);
  CHECK_THROWS_AS(dispatch_control(m, short_d), ConfigError);
}

TEST_CASE("dispatch schema mismatch is a parse error") {
  CHECK_THROWS_AS(parse_dispatch(R"({"schema": "other/1", "p_mw": [], "v_pu": []})"), ParseError);
  CHECK_THROWS_AS(parse_dispatch("{not json"), ParseError);
}

namespace {

FeasiblePath sample_path(int points) {
  FeasiblePath p;
  p.case_name = "demo";
  p.objective = ObjectiveMode::Distance;
  p.lambda = 0.1;
  p.epsilon = 0.01;
  p.termination = kConverged;
  std::mt19937 rng(7);
  std::normal_distribution<double> N;
  for (int k = 0; k < points; ++k) {
    VectorXd u(4);
    for (int i = 0; i < 4; ++i) u[i] = N(rng);
    p.setpoints.push_back(u);
    p.costs.push_back(100.0 + N(rng));
    if (k == 0) continue;
    IterationRecord r;
    r.iteration = k;
    r.cost = p.costs.back();
    r.restriction_objective = N(rng);
    r.step_norm = std::abs(N(rng));
    r.solve_time = 0.5;
    r.solver_iterations = 12;
    p.records.push_back(r);
    PolytopeBounds b;
    b.phi_hi = VectorXd::Constant(3, 0.2);
    b.phi_lo = VectorXd::Constant(3, -std::numeric_limits<double>::infinity());
    b.v_hi = VectorXd::Constant(2, 1.1);
    b.v_lo = VectorXd::Constant(2, 0.9);
    p.bounds.push_back(b);
  }
  return p;
}

}  // namespace

TEST_CASE("path documents round-trip losslessly") {
  const FeasiblePath p = sample_path(4);
  const FeasiblePath q = parse_path(write_path(p));
  CHECK(q.case_name == p.case_name);
  CHECK(q.objective == p.objective);
  CHECK(q.lambda == p.lambda);
  CHECK(q.termination == p.termination);
  REQUIRE(q.setpoints.size() == p.setpoints.size());
  for (std::size_t k = 0; k < p.setpoints.size(); ++k) {
    CHECK(q.setpoints[k] == p.setpoints[k]);
    CHECK(q.costs[k] == p.costs[k]);
  }
  REQUIRE(q.records.size() == p.records.size());
  for (std::size_t k = 0; k < p.records.size(); ++k) {
    CHECK(q.records[k].step_norm == p.records[k].step_norm);
    CHECK(q.records[k].solver_iterations == p.records[k].solver_iterations);
    CHECK(q.bounds[k].phi_hi == p.bounds[k].phi_hi);
    CHECK(std::isinf(q.bounds[k].phi_lo[0]));
  }
  // Writing again gives the same bytes.
  CHECK(write_path(q) == write_path(p));
}

TEST_CASE("single-point path has zero segments") {
  const FeasiblePath p = sample_path(1);
  const std::string doc = write_path(p);
  CHECK(doc.find("\"segments\": 0") != std::string::npos);
  CHECK(parse_path(doc).iterations() == 0);
}

TEST_CASE("timing fields live in the stats block only") {
  FeasiblePath a = sample_path(3), b = a;
  b.records[0].solve_time = 99.0;
  std::string da = write_path(a), db = write_path(b);
  da.erase(da.find("\"stats\""));
  db.erase(db.find("\"stats\""));
  CHECK(da == db);
}

TEST_CASE("path schema mismatch is a parse error") {
  std::string doc = write_path(sample_path(2));
  doc.replace(doc.find("feaspath.path/1"), 15, "feaspath.path/9");
  CHECK_THROWS_AS(parse_path(doc), ParseError);
}
