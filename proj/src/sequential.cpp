#include "feaspath/sequential.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace feaspath {

namespace {

// Solves from the warm start, falling back to a flat start.
OperatingPoint solve_with_fallback(const Model& m, const VectorXd& u,
                                   const VectorXd* warm, const PowerFlowOptions& pf) {
  if (warm) {
    try {
      return solve_pf(m, u, *warm, pf);
    } catch (const DivergenceError&) {
    } catch (const SingularJacobianError&) {
    }
  }
  return solve_pf(m, u, flat_start(m), pf);
}

std::string describe_violations(const FeasibilityReport& r) {
  std::string s;
  for (LimitClass c : r.violated()) {
    const int i = static_cast<int>(c);
    if (!s.empty()) s += ", ";
    s += std::string(to_string(c)) + " at " + r.where[i] + " (margin " +
         std::to_string(r.margin[i]) + ")";
  }
  return s;
}

}  // namespace

FeasiblePath run(const Network& net, const VectorXd& start_u, const RunConfig& cfg,
                 const ProgressFn& progress) {
  if (!(cfg.epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (cfg.objective == ObjectiveMode::Distance && !(cfg.lambda > 0.0)) {
    throw ConfigError("lambda must be positive");
  }
  const Model m0 = make_model(net);
  if (start_u.size() != static_cast<Eigen::Index>(m0.n_u())) {
    throw ConfigError("start control has length " + std::to_string(start_u.size()) +
                      ", expected " + std::to_string(m0.n_u()));
  }
  if (cfg.objective == ObjectiveMode::Distance &&
      cfg.target.size() != static_cast<Eigen::Index>(m0.n_u())) {
    throw ConfigError("distance mode needs a target control of length " +
                      std::to_string(m0.n_u()));
  }

  FeasiblePath path;
  path.case_name = net.name;
  path.objective = cfg.objective;
  path.lambda = cfg.lambda;
  path.epsilon = cfg.epsilon;

  const VectorXd file_x = file_state(m0);
  OperatingPoint op = solve_with_fallback(m0, start_u, &file_x, cfg.pf);
  const FeasibilityReport start_report = check_feasibility(m0, op, cfg.feasibility_tolerance);
  if (!start_report.feasible()) {
    throw InfeasibleStartError("start point violates limits: " +
                               describe_violations(start_report));
  }
  path.setpoints.push_back(start_u);
  path.costs.push_back(generation_cost(m0, op.x, op.u));

  RestrictionOptions ropts;
  ropts.objective = cfg.objective;
  ropts.lambda = cfg.lambda;
  ropts.target = cfg.target;

  for (int k = 0;; ++k) {
    if (k >= cfg.max_iterations) {
      path.termination = kIterationLimit;
      break;
    }
    RestrictionSolution sol;
    try {
      Restriction r = build_restriction(net, op, ropts);
      sol = solve_restriction(r, cfg.solver);
      if (sol.result.status == SolveStatus::NumericalFailure) {
        // Retry once with a coarser cleanup of tiny fixed-point coefficients.
        RestrictionOptions retry = ropts;
        retry.drop_tolerance = 1e-9;
        Restriction r2 = build_restriction(net, op, retry);
        sol = solve_restriction(r2, cfg.solver);
      }
    } catch (const SingularJacobianError& e) {
      path.termination = std::string("singular_jacobian: ") + e.what();
      break;
    }
    if (sol.result.status != SolveStatus::Optimal) {
      path.termination = std::string("solver_") + to_string(sol.result.status) + ": " +
                         sol.result.message;
      break;
    }
    OperatingPoint next;
    try {
      next = solve_with_fallback(m0, sol.u, &op.x, cfg.pf);
    } catch (const std::exception& e) {
      path.termination = std::string("power_flow_failed: ") + e.what();
      break;
    }
    const FeasibilityReport rep = check_feasibility(m0, next, cfg.feasibility_tolerance);
    if (!rep.feasible()) {
      path.termination = "certificate_violated: " + describe_violations(rep);
      break;
    }
    IterationRecord rec;
    rec.iteration = k + 1;
    rec.cost = generation_cost(m0, next.x, next.u);
    rec.restriction_objective = sol.result.objective;
    rec.step_norm = (sol.u - op.u).norm();
    rec.solve_time = sol.result.solve_time;
    rec.solver_iterations = sol.result.iterations;
    path.setpoints.push_back(sol.u);
    path.costs.push_back(rec.cost);
    path.records.push_back(rec);
    path.bounds.push_back(sol.b);
    if (progress) progress(rec);
    op = next;
    if (rec.step_norm <= cfg.epsilon) {
      path.termination = kConverged;
      break;
    }
  }
  return path;
}

std::string CertificationReport::summary() const {
  std::ostringstream os;
  os << (certified ? "certified" : "NOT certified") << ": " << samples << " samples over "
     << segments.size() << " segments, worst margin " << worst_margin;
  for (const SegmentCertificate& s : segments) {
    if (!s.ok) {
      os << "; segment " << s.segment << " fails at alpha=" << s.failed_alpha << " ("
         << s.failure << ")";
      break;
    }
  }
  return os.str();
}

CertificationReport certify_path(const Network& net,
                                 const std::vector<VectorXd>& setpoints,
                                 int samples_per_segment, double tolerance,
                                 const PowerFlowOptions& pf) {
  if (setpoints.empty()) throw ConfigError("cannot certify an empty path");
  if (samples_per_segment < 2) throw ConfigError("need at least 2 samples per segment");
  const Model m = make_model(net);
  CertificationReport rep;
  rep.worst_margin = std::numeric_limits<double>::infinity();

  auto check = [&](const VectorXd& u, VectorXd& warm, SegmentCertificate& seg,
                   double alpha) {
    ++seg.samples;
    ++rep.samples;
    OperatingPoint op;
    try {
      op = solve_with_fallback(m, u, &warm, pf);
    } catch (const std::exception&) {
      if (seg.ok) {
        seg.ok = false;
        seg.failed_alpha = alpha;
        seg.failure = "power flow did not converge";
      }
      rep.worst_margin = -std::numeric_limits<double>::infinity();
      return;
    }
    warm = op.x;
    const FeasibilityReport f = check_feasibility(m, op, tolerance);
    for (int c = 0; c < kLimitClassCount; ++c) {
      seg.worst_margin[static_cast<std::size_t>(c)] =
          std::min(seg.worst_margin[static_cast<std::size_t>(c)], f.margin[c]);
    }
    rep.worst_margin = std::min(rep.worst_margin, f.worst());
    if (!f.feasible() && seg.ok) {
      seg.ok = false;
      seg.failed_alpha = alpha;
      seg.failure = std::string(to_string(f.worst_class())) + " at " +
                    f.where[static_cast<int>(f.worst_class())];
    }
  };

  VectorXd warm = file_state(m);
  if (setpoints.size() == 1) {
    SegmentCertificate seg;
    seg.worst_margin.fill(std::numeric_limits<double>::infinity());
    check(setpoints[0], warm, seg, 0.0);
    rep.certified = seg.ok;
    rep.segments.push_back(seg);
    return rep;
  }
  for (std::size_t k = 0; k + 1 < setpoints.size(); ++k) {
    SegmentCertificate seg;
    seg.segment = static_cast<int>(k);
    seg.worst_margin.fill(std::numeric_limits<double>::infinity());
    for (int i = 0; i < samples_per_segment; ++i) {
      // alpha runs from 1 (at u(k)) to 0 (at u(k+1)).
      const double alpha = 1.0 - static_cast<double>(i) / (samples_per_segment - 1);
      const VectorXd u = alpha * setpoints[k] + (1.0 - alpha) * setpoints[k + 1];
      check(u, warm, seg, alpha);
    }
    rep.certified = rep.certified && seg.ok;
    rep.segments.push_back(seg);
  }
  return rep;
}

double optimality_gap(double cost, double reference) {
  if (!(reference > 0.0)) throw ConfigError("reference cost must be positive");
  return (cost - reference) / reference;
}

std::vector<SweepResult> lambda_sweep(const Network& net, const VectorXd& start_u,
                                      const VectorXd& target,
                                      const std::vector<double>& lambdas,
                                      RunConfig cfg) {
  const Model m = make_model(net);
  cfg.objective = ObjectiveMode::Distance;
  cfg.target = target;
  std::vector<SweepResult> out;
  for (double lambda : lambdas) {
    cfg.lambda = lambda;
    SweepResult s;
    s.lambda = lambda;
    s.path = run(net, start_u, cfg);
    const VectorXd d = s.path.setpoints.back() - target;
    const auto nv = static_cast<Eigen::Index>(m.ctl.n_v);
    const auto np = static_cast<Eigen::Index>(m.ctl.n_p());
    const auto nq = static_cast<Eigen::Index>(m.ctl.n_q());
    s.p_distance = std::max(np ? d.head(np).lpNorm<Eigen::Infinity>() : 0.0,
                            nq ? d.tail(nq).lpNorm<Eigen::Infinity>() : 0.0);
    s.v_distance = nv ? d.segment(np, nv).lpNorm<Eigen::Infinity>() : 0.0;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace feaspath
