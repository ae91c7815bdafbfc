#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "feaspath/network.hpp"

namespace feaspath {

using SpMat = Eigen::SparseMatrix<double>;
using Eigen::VectorXd;
using Eigen::VectorXcd;

/// Positional layout of buses, lines and generators derived from a Network.
struct Indexing {
  std::size_t n_bus = 0, n_line = 0, n_gen = 0;
  std::vector<std::size_t> from, to;  // bus index per line
  std::vector<std::size_t> gen_bus;   // bus index per generator
  std::size_t slack = 0;              // slack bus index
  std::size_t slack_gen = 0;          // designated slack generator
  std::vector<std::size_t> ns, pq;    // non-slack and PQ bus indices
  std::vector<std::size_t> gbus;      // slack and PV buses, ascending
  std::vector<int> ns_pos, pq_pos, gbus_pos;  // bus -> position or -1

  std::size_t n_ns() const { return ns.size(); }
  std::size_t n_pq() const { return pq.size(); }
  bool is_pq(std::size_t bus) const { return pq_pos[bus] >= 0; }
};

Indexing build_indexing(const Network& net);

/// 0/1 structure matrices.
struct IncidenceSet {
  SpMat Ef, Et;  // n_bus x n_line
  SpMat E;       // Ef - Et
  SpMat Ens;     // rows of E for non-slack buses
  SpMat C;       // n_bus x n_gen
};

IncidenceSet build_incidence(const Network& net);

/// Line and bus admittances plus the real phase-adjusted matrices for a
/// given base angle-difference vector phi0.
struct AdmittanceSet {
  VectorXcd Yff, Ytt, Yft, Ytf;  // per line
  VectorXcd Yft_hat, Ytf_hat;    // per line, rotated by phi0
  VectorXcd Ysh;                 // per bus
  SpMat Gc, Gs, Bc, Bs;          // n_bus x n_line
  VectorXd Gd, Bd;               // diagonal of the n_bus x n_bus matrices
  VectorXd phi0;

  SpMat Gd_matrix() const;
  SpMat Bd_matrix() const;
};

AdmittanceSet build_admittances(const Network& net, const VectorXd& phi0);

/// Standard complex bus admittance matrix (MATPOWER convention).
Eigen::SparseMatrix<std::complex<double>> build_ybus(const Network& net);

}  // namespace feaspath
