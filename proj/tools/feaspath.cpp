// feaspath: feasible transition paths for AC OPF via sequential convex restriction.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "feaspath/case_io.hpp"
#include "feaspath/path_io.hpp"
#include "feaspath/sequential.hpp"

namespace {

using namespace feaspath;

enum Exit { kOk = 0, kUsage = 1, kParse = 2, kPowerFlow = 3, kSolver = 4, kCertification = 5 };

int verbosity = 0;

void log(int level, const std::string& msg) {
  if (verbosity >= level) std::cerr << msg << '\n';
}

void write_output(const std::string& file, const std::string& text) {
  if (file.empty() || file == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + file);
  out << text;
}

struct SolverFlags {
  double feastol = 1e-8, reltol = 1e-8, time_limit = 300.0;
  int solver_max_iter = 150;
  double pf_tolerance = 1e-8, feas_tolerance = 1e-6;

  void add(CLI::App* app) {
    app->add_option("--feastol", feastol, "conic solver feasibility tolerance");
    app->add_option("--reltol", reltol, "conic solver relative gap");
    app->add_option("--time-limit", time_limit, "seconds per conic solve");
    app->add_option("--solver-max-iter", solver_max_iter, "conic solver iteration cap");
    app->add_option("--pf-tolerance", pf_tolerance, "power-flow mismatch tolerance");
    app->add_option("--feas-tolerance", feas_tolerance, "limit violation tolerance");
  }
  SolverSettings solver() const {
    SolverSettings s;
    s.feastol = feastol;
    s.abstol = reltol;
    s.reltol = reltol;
    s.time_limit = time_limit;
    s.max_iterations = solver_max_iter;
    s.verbosity = verbosity >= 3 ? 1 : 0;
    return s;
  }
  PowerFlowOptions pf() const {
    PowerFlowOptions o;
    o.tolerance = pf_tolerance;
    return o;
  }
};

// ---------------------------------------------------------------- solve-path

struct SolvePathArgs {
  std::string case_file, objective = "cost", start, target, out;
  double lambda = 1.0, epsilon = 0.01;
  int max_iter = 50, certify_samples = 11;
  std::optional<double> reference;
  SolverFlags flags;
};

std::string fmt(double v, int prec = 2) {
  if (!std::isfinite(v)) return "-";
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

int solve_path(const SolvePathArgs& a) {
  const Network net = read_case(a.case_file);
  const Model m = make_model(net);
  RunConfig cfg;
  if (a.objective == "distance") {
    if (a.target.empty()) throw CLI::ValidationError("--target", "required with --objective distance");
    cfg.objective = ObjectiveMode::Distance;
    cfg.target = dispatch_control(m, read_dispatch(a.target));
  }
  cfg.lambda = a.lambda;
  cfg.epsilon = a.epsilon;
  cfg.max_iterations = a.max_iter;
  cfg.solver = a.flags.solver();
  cfg.pf = a.flags.pf();
  cfg.feasibility_tolerance = a.flags.feas_tolerance;
  const VectorXd u0 =
      a.start.empty() ? file_control(m) : dispatch_control(m, read_dispatch(a.start));

  const FeasiblePath path = run(net, u0, cfg, [](const IterationRecord& r) {
    log(1, "iter " + std::to_string(r.iteration) + ": cost " + fmt(r.cost) + ", step " +
               fmt(r.step_norm, 6) + ", solve " + fmt(r.solve_time, 3) + " s");
  });

  std::optional<CertificationReport> cert;
  if (a.certify_samples > 0) {
    cert = certify_path(net, path.setpoints, a.certify_samples, cfg.feasibility_tolerance,
                        cfg.pf);
  }
  write_output(a.out, write_path(path, cert ? &*cert : nullptr));

  double solve_time = 0.0;
  for (const IterationRecord& r : path.records) solve_time += r.solve_time;
  const double first = path.costs.size() > 1 ? path.costs[1] : path.costs[0];
  const double final_cost = path.costs.back();
  std::ostream& os = a.out.empty() || a.out == "-" ? std::cerr : std::cout;
  os << std::left << std::setw(28) << "case" << std::right << std::setw(12) << "initial"
     << std::setw(12) << "first" << std::setw(12) << "final" << std::setw(6) << "iter"
     << std::setw(10) << "gap1 %" << std::setw(10) << "gap %" << std::setw(10) << "time s"
     << '\n';
  os << std::left << std::setw(28) << net.name << std::right << std::setw(12)
     << fmt(path.costs.front()) << std::setw(12) << fmt(first) << std::setw(12)
     << fmt(final_cost) << std::setw(6) << path.iterations() << std::setw(10)
     << (a.reference ? fmt(100.0 * optimality_gap(first, *a.reference)) : "-")
     << std::setw(10)
     << (a.reference ? fmt(100.0 * optimality_gap(final_cost, *a.reference)) : "-")
     << std::setw(10) << fmt(solve_time) << '\n';
  os << "termination: " << path.termination << '\n';
  if (cert) os << cert->summary() << '\n';

  if (path.termination.rfind("solver_", 0) == 0) return kSolver;
  if (path.termination.rfind("power_flow", 0) == 0 ||
      path.termination.rfind("singular", 0) == 0) {
    return kPowerFlow;
  }
  if (path.termination.rfind("certificate", 0) == 0) return kCertification;
  if (cert && !cert->certified) return kCertification;
  return kOk;
}

// ------------------------------------------------------------------- certify

struct CertifyArgs {
  std::string case_file, path_file, out;
  int samples = 11;
  SolverFlags flags;
};

int certify(const CertifyArgs& a) {
  const Network net = read_case(a.case_file);
  const FeasiblePath path = read_path(a.path_file);
  const CertificationReport rep =
      certify_path(net, path.setpoints, a.samples, a.flags.feas_tolerance, a.flags.pf());
  if (!a.out.empty()) write_output(a.out, write_path(path, &rep));
  std::cout << rep.summary() << '\n';
  return rep.certified ? kOk : kCertification;
}

// -------------------------------------------------------------- region-slice

struct SliceArgs {
  std::string case_file, axes, base, out;
  int grid = 41;
  std::vector<double> x_range, y_range;
  bool restriction = false;
  int threads = 0;
  SolverFlags flags;
};

// Axis "p3", "q3" or "v3": quantity of the 1-based generator index.
struct Axis {
  std::string name;
  Eigen::Index index = 0;
  double lo = 0.0, hi = 0.0;
};

Axis parse_axis(const Model& m, const std::string& s) {
  if (s.size() < 2 || (s[0] != 'p' && s[0] != 'q' && s[0] != 'v')) {
    throw ConfigError("axis \"" + s + "\" must look like p<k>, q<k> or v<k>");
  }
  std::size_t g = 0;
  try {
    std::size_t pos = 0;
    g = std::stoul(s.substr(1), &pos);
    if (pos != s.size() - 1) throw std::invalid_argument(s);
  } catch (const std::exception&) {
    throw ConfigError("axis \"" + s + "\" has no generator number");
  }
  if (g == 0 || g > m.ix.n_gen) throw ConfigError("axis \"" + s + "\": no such generator");
  --g;
  Axis a;
  a.name = s;
  VectorXd lo, hi;
  control_limits(m, lo, hi);
  auto find = [&](const std::vector<std::size_t>& v) {
    auto it = std::find(v.begin(), v.end(), g);
    return it == v.end() ? -1 : static_cast<Eigen::Index>(it - v.begin());
  };
  if (s[0] == 'p') {
    if (g == m.ix.slack_gen) {
      throw ConfigError("axis \"" + s + "\" is the slack active power, which is not a control");
    }
    a.index = find(m.ctl.p_gens);
  } else if (s[0] == 'q') {
    a.index = find(m.ctl.q_gens);
    if (a.index < 0) {
      throw ConfigError("axis \"" + s + "\": reactive power is only a control at PQ buses");
    }
    a.index += static_cast<Eigen::Index>(m.ctl.q_offset());
  } else {
    a.index = static_cast<Eigen::Index>(m.ctl.v_offset()) + m.ix.gbus_pos[m.ix.gen_bus[g]];
  }
  a.lo = lo[a.index];
  a.hi = hi[a.index];
  return a;
}

int region_slice(const SliceArgs& a) {
  if (a.grid <= 0) throw CLI::ValidationError("--grid", "must be positive");
  const Network net = read_case(a.case_file);
  const Model m = make_model(net);
  const auto comma = a.axes.find(',');
  if (comma == std::string::npos) throw ConfigError("--axes needs two comma-separated axes");
  Axis ax = parse_axis(m, a.axes.substr(0, comma));
  Axis ay = parse_axis(m, a.axes.substr(comma + 1));
  if (ax.index == ay.index) throw ConfigError("--axes must name two different controls");
  if (a.x_range.size() == 2) ax.lo = a.x_range[0], ax.hi = a.x_range[1];
  if (a.y_range.size() == 2) ay.lo = a.y_range[0], ay.hi = a.y_range[1];

  const VectorXd u_base =
      a.base.empty() ? file_control(m) : dispatch_control(m, read_dispatch(a.base));
  const PowerFlowOptions pf = a.flags.pf();
  VectorXd x_base = flat_start(m);
  try {
    x_base = solve_pf(m, u_base, file_state(m), pf).x;
  } catch (const std::exception&) {
    x_base = solve_pf(m, u_base, flat_start(m), pf).x;
  }
  const OperatingPoint base{u_base, x_base, true, 0};
  std::optional<Restriction> restr;
  if (a.restriction) {
    RestrictionOptions ro;
    ro.objective = ObjectiveMode::None;
    restr = build_restriction(net, base, ro);
  }

  auto coord = [](const Axis& ax, int i, int n) {
    return n == 1 ? ax.lo : ax.lo + (ax.hi - ax.lo) * i / (n - 1);
  };
  const int n = a.grid;
  std::vector<int> feasible(static_cast<std::size_t>(n * n)),
      solved(feasible.size()), inside(feasible.size());
  const SolverSettings settings = a.flags.solver();

  auto work = [&](int first, int stride) {
    for (int k = first; k < n * n; k += stride) {
      const int i = k % n, j = k / n;
      VectorXd u = u_base;
      u[ax.index] = coord(ax, i, n);
      u[ay.index] = coord(ay, j, n);
      OperatingPoint op;
      bool ok = false;
      for (const VectorXd& x0 : {x_base, flat_start(m)}) {
        try {
          op = solve_pf(m, u, x0, pf);
          ok = true;
          break;
        } catch (const std::exception&) {
        }
      }
      solved[k] = ok;
      feasible[k] = ok && check_feasibility(m, op, a.flags.feas_tolerance).feasible();
      if (restr) {
        Restriction r = *restr;
        for (Eigen::Index c = 0; c < u.size(); ++c) {
          const int var = r.vars.u[static_cast<std::size_t>(c)];
          r.program.set_bounds(var, u[c], u[c]);
        }
        inside[k] = solve(r.program, settings).status == SolveStatus::Optimal;
      }
    }
  };
  const int nt = std::max(1, a.threads > 0 ? a.threads
                                           : static_cast<int>(std::thread::hardware_concurrency()));
  std::vector<std::thread> pool;
  for (int t = 0; t < nt; ++t) pool.emplace_back(work, t, nt);
  for (std::thread& t : pool) t.join();

  using nlohmann::json;
  json xs = json::array(), ys = json::array(), points = json::array();
  for (int i = 0; i < n; ++i) xs.push_back(coord(ax, i, n));
  for (int j = 0; j < n; ++j) ys.push_back(coord(ay, j, n));
  for (int k = 0; k < n * n; ++k) {
    json p = {{"i", k % n}, {"j", k / n}, {"solved", bool(solved[k])},
              {"feasible", bool(feasible[k])}};
    if (restr) p["in_restriction"] = bool(inside[k]);
    points.push_back(std::move(p));
  }
  json doc = {{"schema", "feaspath.slice/1"},
              {"case", net.name},
              {"axes", {ax.name, ay.name}},
              {"x", xs},
              {"y", ys},
              {"base_u", std::vector<double>(u_base.data(), u_base.data() + u_base.size())},
              {"points", points}};
  write_output(a.out, doc.dump(1) + "\n");
  int nf = 0, nr = 0;
  for (int k = 0; k < n * n; ++k) nf += feasible[k], nr += inside[k];
  log(1, std::to_string(nf) + " of " + std::to_string(n * n) + " grid points feasible" +
             (restr ? ", " + std::to_string(nr) + " inside the restriction" : ""));
  return kOk;
}

// ------------------------------------------------------------------------ pf

struct PfArgs {
  std::string case_file, dispatch;
  double load_scale = 1.0;
  SolverFlags flags;
};

int power_flow(const PfArgs& a) {
  Network net = read_case(a.case_file);
  for (Bus& b : net.buses) {
    b.p_load *= a.load_scale;
    b.q_load *= a.load_scale;
  }
  const Model m = make_model(net);
  const VectorXd u =
      a.dispatch.empty() ? file_control(m) : dispatch_control(m, read_dispatch(a.dispatch));
  OperatingPoint op;
  try {
    op = solve_pf(m, u, file_state(m), a.flags.pf());
  } catch (const DivergenceError&) {
    op = solve_pf(m, u, flat_start(m), a.flags.pf());
  }
  VectorXd theta, v;
  full_state<double>(m, op.x, op.u, theta, v);
  const IntermediateVars iv = intermediates(m, op.x, op.u);
  std::cout << "converged in " << op.iterations << " iterations\n\n";
  std::cout << std::setw(6) << "bus" << std::setw(10) << "v pu" << std::setw(10) << "deg\n";
  for (std::size_t i = 0; i < net.n_buses(); ++i) {
    std::cout << std::setw(6) << net.buses[i].id << std::setw(10) << fmt(v[i], 4)
              << std::setw(10) << fmt(theta[i] * 180.0 / M_PI, 3) << '\n';
  }
  std::cout << '\n' << std::setw(6) << "gen" << std::setw(6) << "bus" << std::setw(12) << "p MW"
            << '\n';
  for (std::size_t g = 0; g < net.n_generators(); ++g) {
    std::cout << std::setw(6) << g + 1 << std::setw(6) << net.generators[g].bus
              << std::setw(12) << fmt(iv.p_gen[g] * net.base_mva, 3) << '\n';
  }
  std::cout << "\ncost " << fmt(generation_cost(m, op.x, op.u), 4) << '\n';
  const FeasibilityReport rep = check_feasibility(m, op, a.flags.feas_tolerance);
  std::cout << "\nworst margin per limit class\n";
  for (int c = 0; c < kLimitClassCount; ++c) {
    std::cout << "  " << std::left << std::setw(16) << to_string(static_cast<LimitClass>(c))
              << std::right << std::setw(14) << rep.margin[c] << "  " << rep.where[c] << '\n';
  }
  std::cout << (rep.feasible() ? "feasible" : "INFEASIBLE") << '\n';
  return rep.feasible() ? kOk : kCertification;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feasible transition paths for AC optimal power flow"};
  app.require_subcommand(1, 1);
  app.set_config("--config", "", "TOML/INI file with option defaults (flags override it)")
      ->envname("FEASPATH_CONFIG");
  app.add_flag("-v,--verbose", verbosity, "more output (repeatable)");

  SolvePathArgs sp;
  CLI::App* cmd_sp = app.add_subcommand("solve-path", "run the sequential restriction");
  cmd_sp->add_option("case", sp.case_file, "MATPOWER case file")->required()->check(CLI::ExistingFile);
  cmd_sp->add_option("--objective", sp.objective)->check(CLI::IsMember({"cost", "distance"}));
  cmd_sp->add_option("--start", sp.start, "start dispatch (default: case file setpoints)");
  cmd_sp->add_option("--target", sp.target, "target dispatch for distance mode");
  cmd_sp->add_option("--lambda", sp.lambda)->check(CLI::PositiveNumber);
  cmd_sp->add_option("--epsilon", sp.epsilon)->check(CLI::PositiveNumber);
  cmd_sp->add_option("--max-iter", sp.max_iter)->check(CLI::NonNegativeNumber);
  cmd_sp->add_option("--certify-samples", sp.certify_samples, "0 skips certification");
  cmd_sp->add_option("--reference", sp.reference, "reference optimal cost for the gap");
  cmd_sp->add_option("-o,--out", sp.out, "path document (default: stdout)");
  sp.flags.add(cmd_sp);

  CertifyArgs ce;
  CLI::App* cmd_ce = app.add_subcommand("certify", "sample a path and check every point");
  cmd_ce->add_option("case", ce.case_file)->required()->check(CLI::ExistingFile);
  cmd_ce->add_option("path", ce.path_file)->required()->check(CLI::ExistingFile);
  cmd_ce->add_option("--samples", ce.samples, "samples per segment")->check(CLI::Range(2, 100000));
  cmd_ce->add_option("-o,--out", ce.out, "write the path with certificates");
  ce.flags.add(cmd_ce);

  SliceArgs sl;
  CLI::App* cmd_sl = app.add_subcommand("region-slice", "classify a 2-D grid of controls");
  cmd_sl->add_option("case", sl.case_file)->required()->check(CLI::ExistingFile);
  cmd_sl->add_option("--axes", sl.axes, "two controls, e.g. p2,q2")->required();
  cmd_sl->add_option("--grid", sl.grid, "points per axis");
  cmd_sl->add_option("--x-range", sl.x_range, "lo hi (per unit)")->expected(2);
  cmd_sl->add_option("--y-range", sl.y_range, "lo hi (per unit)")->expected(2);
  cmd_sl->add_option("--base", sl.base, "base dispatch (default: case file setpoints)");
  cmd_sl->add_flag("--restriction", sl.restriction, "also test restriction membership");
  cmd_sl->add_option("--threads", sl.threads);
  cmd_sl->add_option("-o,--out", sl.out);
  sl.flags.add(cmd_sl);

  PfArgs pa;
  CLI::App* cmd_pf = app.add_subcommand("pf", "solve one power flow and check limits");
  cmd_pf->add_option("case", pa.case_file)->required()->check(CLI::ExistingFile);
  cmd_pf->add_option("--dispatch", pa.dispatch, "dispatch file (default: case file setpoints)");
  cmd_pf->add_option("--load-scale", pa.load_scale, "multiply every load");
  pa.flags.add(cmd_pf);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (cmd_sp->parsed()) return solve_path(sp);
    if (cmd_ce->parsed()) return certify(ce);
    if (cmd_sl->parsed()) return region_slice(sl);
    return power_flow(pa);
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kParse;
  } catch (const ValidationError& e) {
    std::cerr << "invalid case: " << e.what() << '\n';
    return kParse;
  } catch (const UnsupportedCostError& e) {
    std::cerr << "unsupported cost: " << e.what() << '\n';
    return kParse;
  } catch (const DivergenceError& e) {
    std::cerr << "power flow did not converge: " << e.what() << '\n';
    return kPowerFlow;
  } catch (const SingularJacobianError& e) {
    std::cerr << "singular Jacobian: " << e.what() << '\n';
    return kPowerFlow;
  } catch (const InfeasibleStartError& e) {
    std::cerr << "infeasible start: " << e.what() << '\n';
    return kCertification;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
}
