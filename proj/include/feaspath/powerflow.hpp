#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "feaspath/matrices.hpp"

namespace feaspath {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/**
 * Layout of the control vector u = [p; v; q].
 *
 * p: active power of every generator except the designated slack generator.
 * v: voltage magnitude of every generator bus (slack and PV), ascending bus
 *    index.
 * q: reactive power of generators sitting at PQ buses (dispatchable
 *    injections).
 */
struct ControlLayout {
  std::vector<std::size_t> p_gens;
  std::vector<std::size_t> q_gens;
  std::size_t n_v = 0;

  std::size_t n_p() const { return p_gens.size(); }
  std::size_t n_q() const { return q_gens.size(); }
  std::size_t size() const { return n_p() + n_v + n_q(); }
  std::size_t v_offset() const { return n_p(); }
  std::size_t q_offset() const { return n_p() + n_v; }
};

/**
 * Network plus every base-point dependent matrix of the phase-adjusted
 * formulation. The basis vector is stacked as psi = [psiC; psiS; psiQ].
 */
struct Model {
  Network net;
  Indexing ix;
  IncidenceSet inc;
  AdmittanceSet adm;
  ControlLayout ctl;
  SpMat Meq;    // (n_ns + n_pq) x n_psi
  SpMat Mineq;  // [slack P; slack Q; PV Q] x n_psi
  SpMat Lf, Lt; // [p rows; q rows] x n_psi, 2 n_line rows each
  SpMat T;      // tau(u) = T u + tau0
  VectorXd tau0;

  std::size_t n_psi() const { return 2 * ix.n_line + ix.n_bus; }
  std::size_t n_x() const { return ix.n_ns() + ix.n_pq(); }
  std::size_t n_u() const { return ctl.size(); }
};

Model make_model(const Network& net, const VectorXd& phi0);
inline Model make_model(const Network& net) {
  return make_model(net, VectorXd::Zero(static_cast<Eigen::Index>(net.n_branches())));
}

/// Expands (x, u) into full bus angle and magnitude vectors.
template <typename Scalar>
void full_state(const Model& m, const Vec<Scalar>& x, const Vec<Scalar>& u,
                Vec<Scalar>& theta, Vec<Scalar>& v) {
  const auto nb = static_cast<Eigen::Index>(m.ix.n_bus);
  theta = Vec<Scalar>::Zero(nb);
  v = Vec<Scalar>::Zero(nb);
  const auto nns = static_cast<Eigen::Index>(m.ix.n_ns());
  for (Eigen::Index i = 0; i < nns; ++i) theta[m.ix.ns[i]] = x[i];
  for (std::size_t i = 0; i < m.ix.n_pq(); ++i) {
    v[m.ix.pq[i]] = x[nns + static_cast<Eigen::Index>(i)];
  }
  const auto off = static_cast<Eigen::Index>(m.ctl.v_offset());
  for (std::size_t i = 0; i < m.ix.gbus.size(); ++i) {
    v[m.ix.gbus[i]] = u[off + static_cast<Eigen::Index>(i)];
  }
}

/// Basis functions [v_f v_t cos(phi - phi0); v_f v_t sin(phi - phi0); v^2].
template <typename Scalar>
Vec<Scalar> basis(const Model& m, const Vec<Scalar>& theta,
                  const Vec<Scalar>& v) {
  using std::cos;
  using std::sin;
  const auto nl = static_cast<Eigen::Index>(m.ix.n_line);
  const auto nb = static_cast<Eigen::Index>(m.ix.n_bus);
  Vec<Scalar> psi(2 * nl + nb);
  for (Eigen::Index l = 0; l < nl; ++l) {
    const auto f = m.ix.from[l], t = m.ix.to[l];
    const Scalar w = v[f] * v[t];
    const Scalar d = theta[f] - theta[t] - m.adm.phi0[l];
    psi[l] = w * cos(d);
    psi[nl + l] = w * sin(d);
  }
  psi.tail(nb) = v.array().square().matrix();
  return psi;
}

template <typename Scalar>
Vec<Scalar> basis_xu(const Model& m, const Vec<Scalar>& x,
                     const Vec<Scalar>& u) {
  Vec<Scalar> theta, v;
  full_state(m, x, u, theta, v);
  return basis(m, theta, v);
}

/// Power-flow residual f(x, u) = tau(u) + Meq psi.
VectorXd mismatch(const Model& m, const VectorXd& x, const VectorXd& u);

/// Partial derivatives of psi with respect to x (n_psi x n_x).
SpMat jacobian_psi(const Model& m, const VectorXd& x, const VectorXd& u);

/// J_f = Meq J_psi.
SpMat jacobian(const Model& m, const VectorXd& x, const VectorXd& u);

struct OperatingPoint {
  VectorXd u;
  VectorXd x;
  bool solved = false;
  int iterations = 0;
};

struct PowerFlowOptions {
  double tolerance = 1e-8;
  int max_iterations = 50;
};

/// Flat start: zero angles, unit PQ voltages.
VectorXd flat_start(const Model& m);

/// State stored in the case file (initial angles and magnitudes).
VectorXd file_state(const Model& m);

/**
 * Newton-Raphson with full steps and sparse LU.
 * @throws DivergenceError, SingularJacobianError
 */
OperatingPoint solve_pf(const Model& m, const VectorXd& u,
                        const VectorXd& x_init,
                        const PowerFlowOptions& opts = {});

struct IntermediateVars {
  double p_slack_inj = 0.0;     // net injection at the slack bus
  double q_slack_inj = 0.0;
  VectorXd q_pv_inj;            // net injection at non-slack generator buses
  VectorXd sf_p, sf_q;          // per line, from end
  VectorXd st_p, st_q;          // per line, to end
  VectorXd p_gen;               // all generators, slack generator resolved
  VectorXd q_bus_gen;           // total generator q per generator bus (gbus order)
};

IntermediateVars intermediates(const Model& m, const VectorXd& x,
                               const VectorXd& u);

enum class LimitClass { ActivePower, ReactivePower, Voltage, Angle, Flow };
inline constexpr int kLimitClassCount = 5;
const char* to_string(LimitClass c);

struct FeasibilityReport {
  // Worst margin (>= 0 means satisfied) and the element it belongs to.
  double margin[kLimitClassCount];
  std::string where[kLimitClassCount];
  double tolerance = 0.0;

  double worst() const;
  LimitClass worst_class() const;
  bool feasible() const { return worst() >= -tolerance; }
  std::vector<LimitClass> violated() const;
};

FeasibilityReport check_feasibility(const Model& m, const OperatingPoint& op,
                                    double tol = 1e-6);

/// Control vector from a full per-generator dispatch (p for all
/// generators, v for all generators, q for all generators; per-unit).
VectorXd control_from_dispatch(const Model& m, const VectorXd& p_gen,
                               const VectorXd& v_gen, const VectorXd& q_gen);

/// Control vector holding the setpoints stored in the case file.
VectorXd file_control(const Model& m);

/// Lower and upper control limits.
void control_limits(const Model& m, VectorXd& lo, VectorXd& hi);

/// Angle differences phi = E^T theta for a state.
VectorXd angle_differences(const Model& m, const VectorXd& x);

/// Total generation cost for a solved point.
double generation_cost(const Model& m, const VectorXd& x, const VectorXd& u);

}  // namespace feaspath
