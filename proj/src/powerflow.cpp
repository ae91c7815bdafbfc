#include "feaspath/powerflow.hpp"

#include <cmath>
#include <limits>

#include <Eigen/SparseLU>

namespace feaspath {

using Triplet = Eigen::Triplet<double>;

namespace {

int I(std::size_t v) { return static_cast<int>(v); }

using RowMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

void append_row(std::vector<Triplet>& out, int out_row, const RowMat& m,
                std::size_t bus, int col_off, double scale) {
  for (RowMat::InnerIterator it(m, I(bus)); it; ++it) {
    if (it.value() != 0.0) {
      out.emplace_back(out_row, col_off + I(it.col()), scale * it.value());
    }
  }
}

}  // namespace

Model make_model(const Network& net, const VectorXd& phi0) {
  Model m;
  m.net = net;
  m.ix = build_indexing(net);
  m.inc = build_incidence(net);
  m.adm = build_admittances(net, phi0);

  const Indexing& ix = m.ix;
  for (std::size_t g = 0; g < ix.n_gen; ++g) {
    if (g != ix.slack_gen) m.ctl.p_gens.push_back(g);
    if (ix.is_pq(ix.gen_bus[g])) m.ctl.q_gens.push_back(g);
  }
  m.ctl.n_v = ix.gbus.size();

  const int nl = I(ix.n_line);
  const int nb = I(ix.n_bus);
  const int nns = I(ix.n_ns());
  const int npq = I(ix.n_pq());
  const int n_psi = 2 * nl + nb;
  const AdmittanceSet& ad = m.adm;
  struct {
    RowMat Gc, Gs, Bc, Bs;
    const VectorXd& Gd;
    const VectorXd& Bd;
  } a{ad.Gc, ad.Gs, ad.Bc, ad.Bs, ad.Gd, ad.Bd};

  // Per-bus row of [Gc Bs Gd] style blocks.
  auto block_row = [&](std::vector<Triplet>& t, int row, std::size_t bus,
                       const RowMat& c_block, double c_sign, const RowMat& s_block,
                       double s_sign, double diag) {
    append_row(t, row, c_block, bus, 0, c_sign);
    append_row(t, row, s_block, bus, nl, s_sign);
    if (diag != 0.0) t.emplace_back(row, 2 * nl + I(bus), diag);
  };

  std::vector<Triplet> t;
  for (int i = 0; i < nns; ++i) {
    const std::size_t k = ix.ns[i];
    block_row(t, i, k, a.Gc, -1.0, a.Bs, -1.0, -a.Gd[I(k)]);
  }
  for (int i = 0; i < npq; ++i) {
    const std::size_t k = ix.pq[i];
    block_row(t, nns + i, k, a.Bc, 1.0, a.Gs, -1.0, a.Bd[I(k)]);
  }
  m.Meq.resize(nns + npq, n_psi);
  m.Meq.setFromTriplets(t.begin(), t.end());

  t.clear();
  block_row(t, 0, ix.slack, a.Gc, 1.0, a.Bs, 1.0, a.Gd[I(ix.slack)]);
  block_row(t, 1, ix.slack, a.Bc, -1.0, a.Gs, 1.0, -a.Bd[I(ix.slack)]);
  int row = 2;
  for (std::size_t k : ix.gbus) {
    if (k == ix.slack) continue;
    block_row(t, row++, k, a.Bc, -1.0, a.Gs, 1.0, -a.Bd[I(k)]);
  }
  m.Mineq.resize(row, n_psi);
  m.Mineq.setFromTriplets(t.begin(), t.end());

  std::vector<Triplet> lf, lt;
  for (int l = 0; l < nl; ++l) {
    const auto yf = ad.Yft_hat[l], yt = ad.Ytf_hat[l];
    const auto yff = ad.Yff[l], ytt = ad.Ytt[l];
    const int f = I(ix.from[l]), to = I(ix.to[l]);
    lf.emplace_back(l, l, yf.real());
    lf.emplace_back(l, nl + l, yf.imag());
    lf.emplace_back(l, 2 * nl + f, yff.real());
    lf.emplace_back(nl + l, l, -yf.imag());
    lf.emplace_back(nl + l, nl + l, yf.real());
    lf.emplace_back(nl + l, 2 * nl + f, -yff.imag());
    lt.emplace_back(l, l, yt.real());
    lt.emplace_back(l, nl + l, -yt.imag());
    lt.emplace_back(l, 2 * nl + to, ytt.real());
    lt.emplace_back(nl + l, l, -yt.imag());
    lt.emplace_back(nl + l, nl + l, -yt.real());
    lt.emplace_back(nl + l, 2 * nl + to, -ytt.imag());
  }
  m.Lf.resize(2 * nl, n_psi);
  m.Lt.resize(2 * nl, n_psi);
  m.Lf.setFromTriplets(lf.begin(), lf.end());
  m.Lt.setFromTriplets(lt.begin(), lt.end());

  t.clear();
  for (std::size_t i = 0; i < m.ctl.n_p(); ++i) {
    const std::size_t bus = ix.gen_bus[m.ctl.p_gens[i]];
    if (ix.ns_pos[bus] >= 0) t.emplace_back(ix.ns_pos[bus], I(i), 1.0);
  }
  for (std::size_t i = 0; i < m.ctl.n_q(); ++i) {
    const std::size_t bus = ix.gen_bus[m.ctl.q_gens[i]];
    t.emplace_back(nns + ix.pq_pos[bus], I(m.ctl.q_offset() + i), 1.0);
  }
  m.T.resize(nns + npq, I(m.ctl.size()));
  m.T.setFromTriplets(t.begin(), t.end());
  m.tau0.resize(nns + npq);
  for (int i = 0; i < nns; ++i) m.tau0[i] = -net.buses[ix.ns[i]].p_load;
  for (int i = 0; i < npq; ++i) m.tau0[nns + i] = -net.buses[ix.pq[i]].q_load;
  return m;
}

VectorXd mismatch(const Model& m, const VectorXd& x, const VectorXd& u) {
  return m.T * u + m.tau0 + m.Meq * basis_xu<double>(m, x, u);
}

SpMat jacobian_psi(const Model& m, const VectorXd& x, const VectorXd& u) {
  VectorXd theta, v;
  full_state<double>(m, x, u, theta, v);
  const Indexing& ix = m.ix;
  const int nl = I(ix.n_line);
  const int nns = I(ix.n_ns());
  std::vector<Triplet> t;
  t.reserve(8 * ix.n_line + ix.n_bus);
  auto vcol = [&](std::size_t bus) {
    return ix.pq_pos[bus] >= 0 ? nns + ix.pq_pos[bus] : -1;
  };
  for (int l = 0; l < nl; ++l) {
    const std::size_t f = ix.from[l], to = ix.to[l];
    const double d = theta[I(f)] - theta[I(to)] - m.adm.phi0[l];
    const double c = std::cos(d), s = std::sin(d);
    const double w = v[I(f)] * v[I(to)];
    if (ix.ns_pos[f] >= 0) {
      t.emplace_back(l, ix.ns_pos[f], -w * s);
      t.emplace_back(nl + l, ix.ns_pos[f], w * c);
    }
    if (ix.ns_pos[to] >= 0) {
      t.emplace_back(l, ix.ns_pos[to], w * s);
      t.emplace_back(nl + l, ix.ns_pos[to], -w * c);
    }
    if (int col = vcol(f); col >= 0) {
      t.emplace_back(l, col, v[I(to)] * c);
      t.emplace_back(nl + l, col, v[I(to)] * s);
    }
    if (int col = vcol(to); col >= 0) {
      t.emplace_back(l, col, v[I(f)] * c);
      t.emplace_back(nl + l, col, v[I(f)] * s);
    }
  }
  for (std::size_t k = 0; k < ix.n_bus; ++k) {
    if (int col = vcol(k); col >= 0) {
      t.emplace_back(2 * nl + I(k), col, 2.0 * v[I(k)]);
    }
  }
  SpMat j(I(m.n_psi()), I(m.n_x()));
  j.setFromTriplets(t.begin(), t.end());
  return j;
}

SpMat jacobian(const Model& m, const VectorXd& x, const VectorXd& u) {
  return (m.Meq * jacobian_psi(m, x, u)).pruned();
}

VectorXd flat_start(const Model& m) {
  VectorXd x = VectorXd::Zero(I(m.n_x()));
  x.tail(I(m.ix.n_pq())).setOnes();
  return x;
}

VectorXd file_state(const Model& m) {
  VectorXd x(I(m.n_x()));
  const auto nns = I(m.ix.n_ns());
  for (int i = 0; i < nns; ++i) x[i] = m.net.buses[m.ix.ns[i]].theta_init;
  for (std::size_t i = 0; i < m.ix.n_pq(); ++i) {
    x[nns + I(i)] = m.net.buses[m.ix.pq[i]].v_init;
  }
  return x;
}

OperatingPoint solve_pf(const Model& m, const VectorXd& u,
                        const VectorXd& x_init, const PowerFlowOptions& opts) {
  if (u.size() != I(m.n_u()) || x_init.size() != I(m.n_x())) {
    throw ConfigError("solve_pf: dimension mismatch");
  }
  OperatingPoint op;
  op.u = u;
  op.x = x_init;
  Eigen::SparseLU<SpMat> lu;
  for (int it = 0;; ++it) {
    VectorXd f = mismatch(m, op.x, u);
    const double norm = f.size() ? f.lpNorm<Eigen::Infinity>() : 0.0;
    if (!std::isfinite(norm)) {
      throw DivergenceError("power flow diverged (non-finite mismatch)");
    }
    if (norm < opts.tolerance) {
      op.solved = true;
      op.iterations = it;
      return op;
    }
    if (it >= opts.max_iterations) {
      throw DivergenceError("power flow did not converge in " +
                            std::to_string(opts.max_iterations) +
                            " iterations (mismatch " + std::to_string(norm) +
                            ")");
    }
    SpMat j = jacobian(m, op.x, u);
    j.makeCompressed();
    lu.compute(j);
    if (lu.info() != Eigen::Success) {
      throw SingularJacobianError("power flow Jacobian is singular");
    }
    VectorXd dx = lu.solve(f);
    if (lu.info() != Eigen::Success || !dx.allFinite()) {
      throw SingularJacobianError("power flow Jacobian solve failed");
    }
    op.x -= dx;
  }
}

IntermediateVars intermediates(const Model& m, const VectorXd& x,
                               const VectorXd& u) {
  const Indexing& ix = m.ix;
  const VectorXd psi = basis_xu<double>(m, x, u);
  const VectorXd zeta = m.Mineq * psi;
  const VectorXd sf = m.Lf * psi, st = m.Lt * psi;
  const int nl = I(ix.n_line);

  IntermediateVars out;
  out.p_slack_inj = zeta[0];
  out.q_slack_inj = zeta[1];
  out.q_pv_inj = zeta.tail(zeta.size() - 2);
  out.sf_p = sf.head(nl);
  out.sf_q = sf.tail(nl);
  out.st_p = st.head(nl);
  out.st_q = st.tail(nl);

  out.p_gen = VectorXd::Zero(I(ix.n_gen));
  double others = 0.0;
  for (std::size_t i = 0; i < m.ctl.n_p(); ++i) {
    const std::size_t g = m.ctl.p_gens[i];
    out.p_gen[I(g)] = u[I(i)];
    if (ix.gen_bus[g] == ix.slack) others += u[I(i)];
  }
  out.p_gen[I(ix.slack_gen)] =
      out.p_slack_inj + m.net.buses[ix.slack].p_load - others;

  out.q_bus_gen.resize(I(ix.gbus.size()));
  int pv_row = 0;
  for (std::size_t i = 0; i < ix.gbus.size(); ++i) {
    const std::size_t k = ix.gbus[i];
    const double inj = k == ix.slack ? out.q_slack_inj : out.q_pv_inj[pv_row++];
    out.q_bus_gen[I(i)] = inj + m.net.buses[k].q_load;
  }
  return out;
}

const char* to_string(LimitClass c) {
  switch (c) {
    case LimitClass::ActivePower: return "active_power";
    case LimitClass::ReactivePower: return "reactive_power";
    case LimitClass::Voltage: return "voltage";
    case LimitClass::Angle: return "angle";
    case LimitClass::Flow: return "flow";
  }
  return "unknown";
}

double FeasibilityReport::worst() const {
  double w = std::numeric_limits<double>::infinity();
  for (double v : margin) w = std::min(w, v);
  return w;
}

LimitClass FeasibilityReport::worst_class() const {
  int best = 0;
  for (int i = 1; i < kLimitClassCount; ++i) {
    if (margin[i] < margin[best]) best = i;
  }
  return static_cast<LimitClass>(best);
}

std::vector<LimitClass> FeasibilityReport::violated() const {
  std::vector<LimitClass> out;
  for (int i = 0; i < kLimitClassCount; ++i) {
    if (margin[i] < -tolerance) out.push_back(static_cast<LimitClass>(i));
  }
  return out;
}

FeasibilityReport check_feasibility(const Model& m, const OperatingPoint& op,
                                    double tol) {
  FeasibilityReport r;
  r.tolerance = tol;
  for (double& v : r.margin) v = std::numeric_limits<double>::infinity();
  auto note = [&](LimitClass c, double margin, const std::string& where) {
    const int i = static_cast<int>(c);
    if (margin < r.margin[i]) {
      r.margin[i] = margin;
      r.where[i] = where;
    }
  };
  const Network& net = m.net;
  const Indexing& ix = m.ix;
  const IntermediateVars iv = intermediates(m, op.x, op.u);

  for (std::size_t g = 0; g < ix.n_gen; ++g) {
    const Generator& gen = net.generators[g];
    const double p = iv.p_gen[I(g)];
    note(LimitClass::ActivePower, std::min(p - gen.p_min, gen.p_max - p),
         "generator " + std::to_string(g) + " p");
  }
  for (std::size_t i = 0; i < ix.gbus.size(); ++i) {
    const std::size_t k = ix.gbus[i];
    double lo = 0.0, hi = 0.0;
    for (std::size_t g = 0; g < ix.n_gen; ++g) {
      if (ix.gen_bus[g] != k) continue;
      lo += net.generators[g].q_min;
      hi += net.generators[g].q_max;
    }
    const double q = iv.q_bus_gen[I(i)];
    note(LimitClass::ReactivePower, std::min(q - lo, hi - q),
         "bus " + std::to_string(net.buses[k].id) + " q");
  }
  for (std::size_t i = 0; i < m.ctl.n_q(); ++i) {
    const Generator& gen = net.generators[m.ctl.q_gens[i]];
    const double q = op.u[I(m.ctl.q_offset() + i)];
    note(LimitClass::ReactivePower, std::min(q - gen.q_min, gen.q_max - q),
         "generator " + std::to_string(m.ctl.q_gens[i]) + " q");
  }

  VectorXd theta, v;
  full_state<double>(m, op.x, op.u, theta, v);
  for (std::size_t k = 0; k < ix.n_bus; ++k) {
    const Bus& b = net.buses[k];
    note(LimitClass::Voltage, std::min(v[I(k)] - b.v_min, b.v_max - v[I(k)]),
         "bus " + std::to_string(b.id) + " v");
  }
  for (std::size_t l = 0; l < ix.n_line; ++l) {
    const Branch& br = net.branches[l];
    const double phi = theta[I(ix.from[l])] - theta[I(ix.to[l])];
    note(LimitClass::Angle, std::min(phi - br.phi_min, br.phi_max - phi),
         "line " + std::to_string(l) + " angle");
    if (br.s_max) {
      const double sf = std::hypot(iv.sf_p[I(l)], iv.sf_q[I(l)]);
      const double st = std::hypot(iv.st_p[I(l)], iv.st_q[I(l)]);
      note(LimitClass::Flow, *br.s_max - std::max(sf, st),
           "line " + std::to_string(l) + " flow");
    }
  }
  return r;
}

VectorXd control_from_dispatch(const Model& m, const VectorXd& p_gen,
                               const VectorXd& v_gen, const VectorXd& q_gen) {
  const Indexing& ix = m.ix;
  if (p_gen.size() != I(ix.n_gen) || v_gen.size() != I(ix.n_gen) ||
      q_gen.size() != I(ix.n_gen)) {
    throw ConfigError("dispatch length must equal the generator count (" +
                      std::to_string(ix.n_gen) + ")");
  }
  VectorXd u(I(m.n_u()));
  for (std::size_t i = 0; i < m.ctl.n_p(); ++i) u[I(i)] = p_gen[I(m.ctl.p_gens[i])];
  for (std::size_t i = 0; i < ix.gbus.size(); ++i) {
    for (std::size_t g = 0; g < ix.n_gen; ++g) {
      if (ix.gen_bus[g] == ix.gbus[i]) {
        u[I(m.ctl.v_offset() + i)] = v_gen[I(g)];
        break;
      }
    }
  }
  for (std::size_t i = 0; i < m.ctl.n_q(); ++i) {
    u[I(m.ctl.q_offset() + i)] = q_gen[I(m.ctl.q_gens[i])];
  }
  return u;
}

VectorXd file_control(const Model& m) {
  const auto ng = I(m.ix.n_gen);
  VectorXd p(ng), v(ng), q(ng);
  for (int g = 0; g < ng; ++g) {
    p[g] = m.net.generators[g].p_setpoint;
    v[g] = m.net.generators[g].v_setpoint;
    q[g] = m.net.generators[g].q_setpoint;
  }
  return control_from_dispatch(m, p, v, q);
}

void control_limits(const Model& m, VectorXd& lo, VectorXd& hi) {
  lo.resize(I(m.n_u()));
  hi.resize(I(m.n_u()));
  for (std::size_t i = 0; i < m.ctl.n_p(); ++i) {
    const Generator& g = m.net.generators[m.ctl.p_gens[i]];
    lo[I(i)] = g.p_min;
    hi[I(i)] = g.p_max;
  }
  for (std::size_t i = 0; i < m.ix.gbus.size(); ++i) {
    const Bus& b = m.net.buses[m.ix.gbus[i]];
    lo[I(m.ctl.v_offset() + i)] = b.v_min;
    hi[I(m.ctl.v_offset() + i)] = b.v_max;
  }
  for (std::size_t i = 0; i < m.ctl.n_q(); ++i) {
    const Generator& g = m.net.generators[m.ctl.q_gens[i]];
    lo[I(m.ctl.q_offset() + i)] = g.q_min;
    hi[I(m.ctl.q_offset() + i)] = g.q_max;
  }
}

VectorXd angle_differences(const Model& m, const VectorXd& x) {
  VectorXd theta = VectorXd::Zero(I(m.ix.n_bus));
  for (std::size_t i = 0; i < m.ix.n_ns(); ++i) theta[I(m.ix.ns[i])] = x[I(i)];
  return m.inc.E.transpose() * theta;
}

double generation_cost(const Model& m, const VectorXd& x, const VectorXd& u) {
  const IntermediateVars iv = intermediates(m, x, u);
  double c = 0.0;
  for (std::size_t g = 0; g < m.ix.n_gen; ++g) {
    c += m.net.generators[g].cost(iv.p_gen[I(g)]);
  }
  return c;
}

}  // namespace feaspath
