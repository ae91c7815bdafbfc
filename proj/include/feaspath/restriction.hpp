#pragma once

#include <optional>
#include <string>
#include <vector>

#include "feaspath/conic.hpp"
#include "feaspath/envelopes.hpp"
#include "feaspath/powerflow.hpp"

namespace feaspath {

/// Cost: generation-cost over-estimator. Distance: weighted squared distance
/// to a target control. None: empty objective, for callers that add their own.
enum class ObjectiveMode { Cost, Distance, None };

struct RestrictionOptions {
  ObjectiveMode objective = ObjectiveMode::Cost;
  double lambda = 1.0;          // distance mode: weight on power components
  VectorXd target;              // distance mode: target control vector
  double drop_tolerance = 1e-12;
  std::optional<VectorXd> fixed_u;  // pin the controls (membership queries)
};

/// Affine expression sum(coef * var) + constant over program variables.
struct Affine {
  Terms terms;
  double constant = 0.0;
};

/// Program variable indices of the restriction.
struct RestrictionVars {
  std::vector<int> u;
  std::vector<int> phi_hi, phi_lo;  // per line
  std::vector<int> v_hi, v_lo;      // per PQ bus (pq order)
  std::vector<int> w_hi, w_lo, phi_sq;
  std::vector<int> gc_hi, gc_lo, gs_hi, gs_lo;  // per line
  std::vector<int> gq_hi;                        // per bus
  int p_slack_hi = -1;
};

/// Convex restriction of the feasible set around a solved base point.
struct Restriction {
  Model model;             // phase-adjusted at the base angle differences
  OperatingPoint base;
  std::vector<env::LineData<double>> lines;
  SpMat K, Kpos, Kneg;     // -A J^-1 Meq and its sign split
  Eigen::MatrixXd AJinvT;  // A J^-1 T
  VectorXd AJinv_tau0;     // A J^-1 tau0
  ConicProgram program;
  RestrictionVars vars;
  std::vector<std::string> diagnostics;

  /// Rows bounded by the scalability limit 30 n_l + 4 n_b + 4 n_g.
  std::size_t quadratic_row_count() const { return program.nonlinear_row_count(); }
};

/// State-selection matrix A: x -> [phi per line; v per PQ bus].
SpMat state_selection(const Model& m);

/**
 * Builds the restriction around `base` (solved on any model of `net`).
 * @throws SingularJacobianError if the Jacobian at the base is singular.
 * @throws ConfigError on a malformed distance target.
 */
Restriction build_restriction(const Network& net, const OperatingPoint& base,
                              const RestrictionOptions& opts = {});

struct PolytopeBounds {
  VectorXd phi_hi, phi_lo;  // per line
  VectorXd v_hi, v_lo;      // per PQ bus
};

struct RestrictionSolution {
  SolveResult result;
  VectorXd u;
  PolytopeBounds b;
};

RestrictionSolution extract_solution(const Restriction& r, const SolveResult& res);

/// Solves the program and extracts controls and polytope bounds.
RestrictionSolution solve_restriction(const Restriction& r,
                                      const SolverSettings& settings = {});

/// Whether a state lies in P(b) (with tolerance).
bool in_polytope(const Model& m, const VectorXd& x, const PolytopeBounds& b,
                 double tol = 1e-9);

}  // namespace feaspath
