#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace feaspath {

/// Sparse linear form: (variable index, coefficient) pairs. Duplicates add.
using Terms = std::vector<std::pair<int, double>>;

struct QuadTerm {
  int i, j;
  double value;  // contributes value * z_i * z_j (i != j counted once)
};

/// lo <= a^T z <= hi
struct LinearRow {
  Terms a;
  double lo, hi;
  std::string name;
};

/// z^T Q z + a^T z + c <= 0 with Q positive semidefinite.
struct QuadraticRow {
  std::vector<QuadTerm> Q;
  Terms a;
  double c = 0.0;
  std::string name;
};

/// || (A_1 z + b_1, ..., A_k z + b_k) ||_2 <= t^T z + d
struct SocRow {
  std::vector<Terms> A;
  std::vector<double> b;
  Terms t;
  double d = 0.0;
  std::string name;
};

/**
 * Solver-agnostic convex QCQP:
 *   minimize   c^T z + z^T Q z + c0
 *   subject to linear, convex quadratic and second-order-cone rows and
 *              variable bounds.
 */
class ConicProgram {
 public:
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  int add_variable(std::string name, double lb = -kInf, double ub = kInf);
  void set_bounds(int var, double lb, double ub);

  void add_linear(Terms a, double lo, double hi, std::string name = {});
  void add_quadratic(std::vector<QuadTerm> Q, Terms a, double c,
                     std::string name = {});
  void add_soc(std::vector<Terms> A, std::vector<double> b, Terms t, double d,
               std::string name = {});

  void add_objective_linear(int var, double coef);
  void add_objective_quadratic(int i, int j, double coef);
  void add_objective_constant(double c) { obj_const_ += c; }

  int num_variables() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<double>& lower() const { return lb_; }
  const std::vector<double>& upper() const { return ub_; }
  const std::vector<LinearRow>& linear_rows() const { return lin_; }
  const std::vector<QuadraticRow>& quadratic_rows() const { return quad_; }
  const std::vector<SocRow>& soc_rows() const { return soc_; }
  const Terms& objective_linear() const { return obj_lin_; }
  const std::vector<QuadTerm>& objective_quadratic() const { return obj_quad_; }
  double objective_constant() const { return obj_const_; }

  /// Objective value at z.
  double objective(const Eigen::VectorXd& z) const;

  /// Largest constraint violation (rows and bounds) at z.
  double max_violation(const Eigen::VectorXd& z) const;

  /// Quadratic plus cone rows; the quantity bounded by the row-count limit.
  std::size_t nonlinear_row_count() const { return quad_.size() + soc_.size(); }

 private:
  std::vector<std::string> names_;
  std::vector<double> lb_, ub_;
  std::vector<LinearRow> lin_;
  std::vector<QuadraticRow> quad_;
  std::vector<SocRow> soc_;
  Terms obj_lin_;
  std::vector<QuadTerm> obj_quad_;
  double obj_const_ = 0.0;
};

/// Dense symmetric matrix of a quadratic form over the listed variables.
Eigen::MatrixXd dense_quadratic(const std::vector<QuadTerm>& Q,
                                const std::vector<int>& support);

/// Structural problems: non-PSD quadratic parts, non-finite coefficients,
/// variables used nowhere. Empty when the program is well formed.
std::vector<std::string> validate(const ConicProgram& prog);

enum class SolveStatus { Optimal, Infeasible, NumericalFailure, TimeLimit };
const char* to_string(SolveStatus s);

struct SolverSettings {
  double feastol = 1e-8;
  double abstol = 1e-8;
  double reltol = 1e-8;
  int max_iterations = 150;
  double time_limit = 300.0;  // seconds
  int verbosity = 0;
};

struct SolveResult {
  SolveStatus status = SolveStatus::NumericalFailure;
  Eigen::VectorXd x;  // empty unless optimal
  double objective = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  double solve_time = 0.0;
  double primal_residual = 0.0, dual_residual = 0.0, gap = 0.0;
  std::string message;
};

/// Primal-dual interior point method on the homogeneous self-dual embedding
/// with Nesterov-Todd scaling. Quadratic rows are lowered to second-order
/// cones internally.
SolveResult solve(const ConicProgram& prog, const SolverSettings& settings = {});

/// Writes the lowered program (linear objective, equality rows, cones) in
/// the Conic Benchmark Format for cross-checking with other solvers.
void write_cbf(const ConicProgram& prog, std::ostream& out);

}  // namespace feaspath
