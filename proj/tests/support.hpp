#pragma once

// Shared fixtures and independent oracles for the test binaries.

#include <complex>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "feaspath/case_io.hpp"
#include "feaspath/path_io.hpp"
#include "feaspath/powerflow.hpp"

namespace testing {

using feaspath::VectorXd;
using Complex = std::complex<double>;

inline std::filesystem::path data_dir() { return FEASPATH_DATA_DIR; }

inline std::filesystem::path case_path(const std::string& name) {
  return data_dir() / "cases" / (name + ".m");
}

inline feaspath::Network load(const std::string& name) {
  return feaspath::read_case(case_path(name));
}

inline std::string fixture(const std::string& name, const std::string& tag) {
  return (data_dir() / "fixtures" / (name + "." + tag + ".json")).string();
}

inline std::vector<std::string> all_cases() {
  return {"case2_twobus",           "pglib_opf_case3_lmbd",   "pglib_opf_case5_pjm",
          "case9_fixed_v",          "pglib_opf_case14_ieee",  "pglib_opf_case24_ieee_rts",
          "pglib_opf_case30_ieee",  "pglib_opf_case39_epri",  "pglib_opf_case57_ieee",
          "pglib_opf_case118_ieee"};
}

/// Random state near flat: angles within +/-0.3 rad, PQ voltages in [0.9, 1.1].
inline VectorXd random_state(const feaspath::Model& m, std::mt19937& rng) {
  std::uniform_real_distribution<double> ang(-0.3, 0.3), mag(0.9, 1.1);
  VectorXd x(static_cast<Eigen::Index>(m.n_x()));
  const auto nns = static_cast<Eigen::Index>(m.ix.n_ns());
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = i < nns ? ang(rng) : mag(rng);
  return x;
}

/// Control vector with random generator-bus voltages in [0.95, 1.05].
inline VectorXd random_control(const feaspath::Model& m, std::mt19937& rng) {
  std::uniform_real_distribution<double> mag(0.95, 1.05), pw(-1.0, 1.0);
  VectorXd u(static_cast<Eigen::Index>(m.n_u()));
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    u[i] = (k >= m.ctl.v_offset() && k < m.ctl.q_offset()) ? mag(rng) : pw(rng);
  }
  return u;
}

/// Complex power injections diag(V) conj(Ybus V).
inline Eigen::VectorXcd complex_injections(const feaspath::Network& net,
                                           const VectorXd& theta, const VectorXd& v) {
  const auto Y = feaspath::build_ybus(net);
  Eigen::VectorXcd V(theta.size());
  for (Eigen::Index k = 0; k < theta.size(); ++k) V[k] = std::polar(v[k], theta[k]);
  const Eigen::VectorXcd I = Y * V;
  return V.cwiseProduct(I.conjugate());
}

/// Injections from the phase-adjusted real matrices and the basis vector.
inline void basis_injections(const feaspath::Model& m, const VectorXd& psi, VectorXd& p,
                             VectorXd& q) {
  const auto nl = static_cast<Eigen::Index>(m.ix.n_line);
  const auto nb = static_cast<Eigen::Index>(m.ix.n_bus);
  const VectorXd pc = psi.head(nl), ps = psi.segment(nl, nl), pq = psi.tail(nb);
  const auto& a = m.adm;
  p = a.Gc * pc + a.Bs * ps + a.Gd.cwiseProduct(pq);
  q = -(a.Bc * pc) + a.Gs * ps - a.Bd.cwiseProduct(pq);
}

/// Complex line flows from both ends, in per unit.
inline void complex_flows(const feaspath::Model& m, const VectorXd& theta, const VectorXd& v,
                          Eigen::VectorXcd& sf, Eigen::VectorXcd& st) {
  const auto nl = static_cast<Eigen::Index>(m.ix.n_line);
  sf.resize(nl);
  st.resize(nl);
  for (Eigen::Index l = 0; l < nl; ++l) {
    const auto f = m.ix.from[static_cast<std::size_t>(l)];
    const auto t = m.ix.to[static_cast<std::size_t>(l)];
    const Complex Vf = std::polar(v[f], theta[f]), Vt = std::polar(v[t], theta[t]);
    const Complex If = m.adm.Yff[l] * Vf + m.adm.Yft[l] * Vt;
    const Complex It = m.adm.Ytf[l] * Vf + m.adm.Ytt[l] * Vt;
    sf[l] = Vf * std::conj(If);
    st[l] = Vt * std::conj(It);
  }
}

}  // namespace testing
