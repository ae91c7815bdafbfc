#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "feaspath/restriction.hpp"

namespace feaspath {

struct RunConfig {
  ObjectiveMode objective = ObjectiveMode::Cost;
  double lambda = 1.0;
  double epsilon = 0.01;
  int max_iterations = 50;
  int samples_per_segment = 11;
  VectorXd target;  // distance mode
  SolverSettings solver;
  PowerFlowOptions pf;
  double feasibility_tolerance = 1e-6;
};

/// Per-iteration progress record.
struct IterationRecord {
  int iteration = 0;
  double cost = 0.0;                    // true generation cost after power flow
  double restriction_objective = 0.0;   // optimal value of the restriction
  double step_norm = 0.0;
  double solve_time = 0.0;              // seconds, conic solve
  int solver_iterations = 0;
};

struct FeasiblePath {
  std::string case_name;
  ObjectiveMode objective = ObjectiveMode::Cost;
  double lambda = 1.0;
  double epsilon = 0.01;
  std::vector<VectorXd> setpoints;       // u(0) ... u(N)
  std::vector<double> costs;             // per setpoint
  std::vector<IterationRecord> records;  // per restriction solve (N entries)
  std::vector<PolytopeBounds> bounds;    // per restriction solve
  std::string termination;

  int iterations() const { return static_cast<int>(records.size()); }
};

/// Termination reasons written to FeasiblePath::termination.
inline constexpr const char* kConverged = "converged";
inline constexpr const char* kIterationLimit = "iteration_limit";

using ProgressFn = std::function<void(const IterationRecord&)>;

/**
 * Sequential convex restriction from `start_u`.
 * @throws InfeasibleStartError when the start is not a feasible operating point.
 * @throws DivergenceError / SingularJacobianError from the initial power flow.
 * Failures after the first point end the run with a partial path and a
 * termination reason instead of throwing.
 */
FeasiblePath run(const Network& net, const VectorXd& start_u, const RunConfig& cfg,
                 const ProgressFn& progress = {});

struct SegmentCertificate {
  int segment = 0;
  int samples = 0;
  std::array<double, kLimitClassCount> worst_margin{};
  bool ok = true;
  double failed_alpha = 0.0;
  std::string failure;  // constraint class or "power flow did not converge"
};

struct CertificationReport {
  bool certified = true;
  int samples = 0;
  double worst_margin = 0.0;
  std::vector<SegmentCertificate> segments;
  std::string summary() const;
};

/**
 * Samples every segment at `samples_per_segment` evenly spaced points
 * (endpoints included), solves the power flow and checks all limits.
 */
CertificationReport certify_path(const Network& net,
                                 const std::vector<VectorXd>& setpoints,
                                 int samples_per_segment = 11,
                                 double tolerance = 1e-6,
                                 const PowerFlowOptions& pf = {});

/// (cost - reference) / reference.
/// @throws ConfigError if reference <= 0.
double optimality_gap(double cost, double reference);

struct SweepResult {
  double lambda = 0.0;
  FeasiblePath path;
  double p_distance = 0.0;  // infinity-norm over the power components of u
  double v_distance = 0.0;  // infinity-norm over the voltage components
};

/// Distance-mode runs for each lambda.
std::vector<SweepResult> lambda_sweep(const Network& net, const VectorXd& start_u,
                                      const VectorXd& target,
                                      const std::vector<double>& lambdas,
                                      RunConfig cfg);

}  // namespace feaspath
