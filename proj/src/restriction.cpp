#include "feaspath/restriction.hpp"

#include <cmath>

#include <Eigen/SparseLU>

namespace feaspath {

using Eigen::MatrixXd;
using Triplet = Eigen::Triplet<double>;

namespace {

int I(std::size_t v) { return static_cast<int>(v); }
constexpr double kInf = ConicProgram::kInf;

Affine var(int v, double coef = 1.0) { return {{{v, coef}}, 0.0}; }
Affine constant(double c) { return {{}, c}; }

Affine& add_to(Affine& a, const Affine& b, double scale = 1.0) {
  for (const auto& [i, v] : b.terms) a.terms.emplace_back(i, scale * v);
  a.constant += scale * b.constant;
  return a;
}

Affine sum(std::initializer_list<std::pair<double, Affine>> parts) {
  Affine out;
  for (const auto& [s, a] : parts) add_to(out, a, s);
  return out;
}

// Convex quadratic expression assembled from weighted squares of affine terms.
struct QuadExpr {
  std::vector<QuadTerm> Q;
  Affine lin;

  QuadExpr& square(double coef, const Affine& e) {
    const auto& t = e.terms;
    for (std::size_t i = 0; i < t.size(); ++i) {
      for (std::size_t j = i; j < t.size(); ++j) {
        const double v = coef * t[i].second * t[j].second * (i == j ? 1.0 : 2.0);
        if (v != 0.0) Q.push_back({t[i].first, t[j].first, v});
      }
      lin.terms.emplace_back(t[i].first, 2.0 * coef * e.constant * t[i].second);
    }
    lin.constant += coef * e.constant * e.constant;
    return *this;
  }
  QuadExpr& plus(const Affine& e, double scale = 1.0) {
    add_to(lin, e, scale);
    return *this;
  }
};

void add_le_zero(ConicProgram& prog, const QuadExpr& q, const std::string& name) {
  prog.add_quadratic(q.Q, q.lin.terms, q.lin.constant, name);
}

void add_le_zero(ConicProgram& prog, const Affine& a, const std::string& name) {
  prog.add_linear(a.terms, -kInf, -a.constant, name);
}

struct EndVoltage {
  bool pq;
  int lo, hi;  // program variables (equal for generator buses)
  double v0;
};

}  // namespace

SpMat state_selection(const Model& m) {
  const Indexing& ix = m.ix;
  const int nl = I(ix.n_line), nns = I(ix.n_ns());
  std::vector<Triplet> t;
  for (int l = 0; l < nl; ++l) {
    if (ix.ns_pos[ix.from[l]] >= 0) t.emplace_back(l, ix.ns_pos[ix.from[l]], 1.0);
    if (ix.ns_pos[ix.to[l]] >= 0) t.emplace_back(l, ix.ns_pos[ix.to[l]], -1.0);
  }
  for (std::size_t i = 0; i < ix.n_pq(); ++i) {
    t.emplace_back(nl + I(i), nns + I(i), 1.0);
  }
  SpMat a(nl + I(ix.n_pq()), I(m.n_x()));
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

Restriction build_restriction(const Network& net, const OperatingPoint& base,
                              const RestrictionOptions& opts) {
  Restriction r;
  r.base = base;
  {
    const Model m0 = make_model(net);
    r.model = make_model(net, angle_differences(m0, base.x));
  }
  const Model& m = r.model;
  const Indexing& ix = m.ix;
  const ControlLayout& ctl = m.ctl;
  const int nl = I(ix.n_line), nb = I(ix.n_bus), npq = I(ix.n_pq());
  const int nu = I(m.n_u());

  VectorXd theta0, v0;
  full_state<double>(m, base.x, base.u, theta0, v0);

  // Fixed-point data: K = -A J^-1 Meq, A J^-1 T, A J^-1 tau0.
  SpMat J = (m.Meq * jacobian_psi(m, base.x, base.u)).pruned();
  J.makeCompressed();
  Eigen::SparseLU<SpMat> lu;
  lu.compute(J);
  if (lu.info() != Eigen::Success) {
    throw SingularJacobianError("power flow Jacobian at the base point is singular");
  }
  const SpMat A = state_selection(m);
  const MatrixXd H = lu.solve(MatrixXd(m.Meq));
  const MatrixXd JinvT = lu.solve(MatrixXd(m.T));
  const VectorXd Jinv_tau0 = lu.solve(m.tau0);
  if (!H.allFinite() || !JinvT.allFinite() || !Jinv_tau0.allFinite()) {
    throw SingularJacobianError("power flow Jacobian at the base point is singular");
  }
  MatrixXd Kd = -(A * H);
  Kd = Kd.unaryExpr([&](double v) { return std::abs(v) < opts.drop_tolerance ? 0.0 : v; });
  r.K = Kd.sparseView();
  r.Kpos = Kd.cwiseMax(0.0).sparseView();
  r.Kneg = Kd.cwiseMin(0.0).sparseView();
  r.AJinvT = A * JinvT;
  r.AJinv_tau0 = A * Jinv_tau0;

  ConicProgram& prog = r.program;
  RestrictionVars& vars = r.vars;

  // Controls.
  VectorXd ulo, uhi;
  control_limits(m, ulo, uhi);
  if (opts.fixed_u) {
    if (opts.fixed_u->size() != nu) throw ConfigError("fixed control has wrong length");
    ulo = uhi = *opts.fixed_u;
  }
  for (int i = 0; i < nu; ++i) {
    vars.u.push_back(prog.add_variable("u[" + std::to_string(i) + "]", ulo[i], uhi[i]));
  }
  auto u_of_gbus = [&](std::size_t bus) {
    return vars.u[ctl.v_offset() + static_cast<std::size_t>(ix.gbus_pos[bus])];
  };

  // Polytope bounds b, limited by b_max.
  for (int l = 0; l < nl; ++l) {
    const Branch& br = net.branches[static_cast<std::size_t>(l)];
    const std::string s = "[" + std::to_string(l) + "]";
    vars.phi_hi.push_back(prog.add_variable("phi_hi" + s, -kInf, br.phi_max));
    vars.phi_lo.push_back(prog.add_variable("phi_lo" + s, br.phi_min, kInf));
  }
  for (int i = 0; i < npq; ++i) {
    const Bus& bus = net.buses[ix.pq[static_cast<std::size_t>(i)]];
    const std::string s = "[" + std::to_string(i) + "]";
    vars.v_hi.push_back(prog.add_variable("v_hi" + s, -kInf, bus.v_max));
    vars.v_lo.push_back(prog.add_variable("v_lo" + s, bus.v_min, kInf));
  }

  auto end_voltage = [&](std::size_t bus) {
    EndVoltage e;
    e.pq = ix.is_pq(bus);
    e.v0 = v0[I(bus)];
    if (e.pq) {
      e.lo = vars.v_lo[static_cast<std::size_t>(ix.pq_pos[bus])];
      e.hi = vars.v_hi[static_cast<std::size_t>(ix.pq_pos[bus])];
    } else {
      e.lo = e.hi = u_of_gbus(bus);
    }
    return e;
  };

  // Per-line envelope rows.
  std::vector<Affine> g_hi(static_cast<std::size_t>(2 * nl + nb)),
      g_lo(static_cast<std::size_t>(2 * nl + nb)),
      psi_hi(static_cast<std::size_t>(2 * nl + nb)),
      psi_lo(static_cast<std::size_t>(2 * nl + nb));
  for (int l = 0; l < nl; ++l) {
    const auto lu_ = static_cast<std::size_t>(l);
    const Branch& br = net.branches[lu_];
    const std::size_t fb = ix.from[lu_], tb = ix.to[lu_];
    const EndVoltage ef = end_voltage(fb), et = end_voltage(tb);
    env::LineData<double> d;
    d.vf0 = ef.v0;
    d.vt0 = et.v0;
    d.phi0 = m.adm.phi0[l];
    d.f_pq = ef.pq;
    d.t_pq = et.pq;
    d.w_max = net.buses[fb].v_max * net.buses[tb].v_max;
    d.trig = env::trig_envelopes(br.phi_min - d.phi0, br.phi_max - d.phi0);
    r.lines.push_back(d);
    const double w0 = d.w0();

    const std::string s = "[" + std::to_string(l) + "]";
    const int w_hi = prog.add_variable("w_hi" + s);
    const int w_lo = prog.add_variable("w_lo" + s);
    const int phi_sq = prog.add_variable("phi_sq" + s, 0.0, kInf);
    const int gc_hi = prog.add_variable("gc_hi" + s);
    const int gc_lo = prog.add_variable("gc_lo" + s);
    const int gs_hi = prog.add_variable("gs_hi" + s);
    const int gs_lo = prog.add_variable("gs_lo" + s);
    vars.w_hi.push_back(w_hi);
    vars.w_lo.push_back(w_lo);
    vars.phi_sq.push_back(phi_sq);
    vars.gc_hi.push_back(gc_hi);
    vars.gc_lo.push_back(gc_lo);
    vars.gs_hi.push_back(gs_hi);
    vars.gs_lo.push_back(gs_lo);

    std::vector<int> vf_c{ef.lo}, vt_c{et.lo};
    if (ef.hi != ef.lo) vf_c.push_back(ef.hi);
    if (et.hi != et.lo) vt_c.push_back(et.hi);
    for (int vf : vf_c) {
      for (int vt : vt_c) {
        // vf0 vt + vt0 vf - w0 and the PQ-masked linear part of psiC.
        const Affine lin = sum({{d.vf0, var(vt)}, {d.vt0, var(vf)}, {1.0, constant(-w0)}});
        Affine mask;
        if (d.f_pq) add_to(mask, var(vf), d.vt0);
        if (d.t_pq) add_to(mask, var(vt), d.vf0);
        const Affine plus_sq = sum({{1.0, var(vf)}, {1.0, var(vt)},
                                    {1.0, constant(-(d.vf0 + d.vt0))}});
        const Affine minus_sq = sum({{1.0, var(vf)}, {-1.0, var(vt)},
                                     {1.0, constant(-(d.vf0 - d.vt0))}});
        add_le_zero(prog, QuadExpr().square(0.25, plus_sq).plus(lin).plus(var(w_hi), -1.0),
                    "w_hi" + s);
        add_le_zero(prog, QuadExpr().square(0.25, minus_sq).plus(var(w_lo)).plus(lin, -1.0),
                    "w_lo" + s);
        add_le_zero(prog,
                    QuadExpr().square(0.25, plus_sq).plus(lin).plus(mask, -1.0)
                        .plus(var(gc_hi), -1.0),
                    "gc_hi" + s);
        add_le_zero(prog,
                    QuadExpr().square(0.25, minus_sq).plus(var(gc_lo)).plus(lin, -1.0)
                        .plus(mask).plus(var(phi_sq), d.w_max),
                    "gc_lo" + s);
      }
    }
    for (int phi : {vars.phi_lo[lu_], vars.phi_hi[lu_]}) {
      const Affine t = sum({{1.0, var(phi)}, {1.0, constant(-d.phi0)}});
      add_le_zero(prog, QuadExpr().square(0.5, t).plus(var(phi_sq), -1.0), "phi_sq" + s);
      for (int w : {w_lo, w_hi}) {
        const Affine up = sum({{1.0, var(w)}, {1.0, t}, {1.0, constant(-w0)}});
        const Affine dn = sum({{1.0, var(w)}, {-1.0, t}, {1.0, constant(-w0)}});
        QuadExpr over;
        over.square(0.25, up).plus(constant(-w0 * d.phi0)).plus(var(gs_hi), -1.0);
        if (d.trig.a_over > 0.0) over.square(d.w_max * d.trig.a_over, t);
        add_le_zero(prog, over, "gs_hi" + s);
        QuadExpr under;
        under.square(0.25, dn).plus(var(gs_lo)).plus(constant(w0 * d.phi0));
        if (d.trig.a_under < 0.0) under.square(-d.w_max * d.trig.a_under, t);
        add_le_zero(prog, under, "gs_lo" + s);
      }
    }

    g_hi[lu_] = var(gc_hi);
    g_lo[lu_] = var(gc_lo);
    g_hi[lu_ + static_cast<std::size_t>(nl)] = var(gs_hi);
    g_lo[lu_ + static_cast<std::size_t>(nl)] = var(gs_lo);
    Affine mask_hi, mask_lo;
    if (d.f_pq) {
      add_to(mask_hi, var(ef.hi), d.vt0);
      add_to(mask_lo, var(ef.lo), d.vt0);
    }
    if (d.t_pq) {
      add_to(mask_hi, var(et.hi), d.vf0);
      add_to(mask_lo, var(et.lo), d.vf0);
    }
    psi_hi[lu_] = sum({{1.0, var(gc_hi)}, {1.0, mask_hi}});
    psi_lo[lu_] = sum({{1.0, var(gc_lo)}, {1.0, mask_lo}});
    psi_hi[lu_ + static_cast<std::size_t>(nl)] =
        sum({{1.0, var(gs_hi)}, {w0, var(vars.phi_hi[lu_])}});
    psi_lo[lu_ + static_cast<std::size_t>(nl)] =
        sum({{1.0, var(gs_lo)}, {w0, var(vars.phi_lo[lu_])}});
  }

  // Per-bus rows.
  for (int k = 0; k < nb; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const std::size_t slot = static_cast<std::size_t>(2 * nl + k);
    const EndVoltage e = end_voltage(ku);
    const int gq_hi = prog.add_variable("gq_hi[" + std::to_string(k) + "]");
    vars.gq_hi.push_back(gq_hi);
    const std::string s = "gq_hi[" + std::to_string(k) + "]";
    if (e.pq) {
      for (int v : {e.lo, e.hi}) {
        add_le_zero(prog,
                    QuadExpr().square(1.0, var(v)).plus(var(v), -2.0 * e.v0)
                        .plus(var(gq_hi), -1.0),
                    s);
      }
      g_lo[slot] = constant(-e.v0 * e.v0);
      psi_hi[slot] = sum({{1.0, var(gq_hi)}, {2.0 * e.v0, var(e.hi)}});
      psi_lo[slot] = sum({{2.0 * e.v0, var(e.lo)}, {1.0, constant(-e.v0 * e.v0)}});
    } else {
      add_le_zero(prog, QuadExpr().square(1.0, var(e.lo)).plus(var(gq_hi), -1.0), s);
      g_lo[slot] = sum({{2.0 * e.v0, var(e.lo)}, {1.0, constant(-e.v0 * e.v0)}});
      psi_hi[slot] = var(gq_hi);
      psi_lo[slot] = g_lo[slot];
    }
    g_hi[slot] = var(gq_hi);
  }

  // Self-mapping rows.
  const int na = static_cast<int>(A.rows());
  for (int i = 0; i < na; ++i) {
    Affine base_part;
    base_part.constant = -r.AJinv_tau0[i];
    for (int j = 0; j < nu; ++j) {
      const double v = r.AJinvT(i, j);
      if (std::abs(v) >= opts.drop_tolerance) base_part.terms.emplace_back(vars.u[static_cast<std::size_t>(j)], -v);
    }
    Affine up = base_part, dn = base_part;
    for (int j = 0; j < Kd.cols(); ++j) {
      const double k = Kd(i, j);
      if (k == 0.0) continue;
      const auto ju = static_cast<std::size_t>(j);
      add_to(up, k > 0 ? g_hi[ju] : g_lo[ju], k);
      add_to(dn, k > 0 ? g_lo[ju] : g_hi[ju], k);
    }
    const bool is_line = i < nl;
    const auto idx = static_cast<std::size_t>(is_line ? i : i - nl);
    const int ub = is_line ? vars.phi_hi[idx] : vars.v_hi[idx];
    const int lb = is_line ? vars.phi_lo[idx] : vars.v_lo[idx];
    const std::string s = "[" + std::to_string(i) + "]";
    add_le_zero(prog, add_to(up, var(ub), -1.0), "self_map_hi" + s);
    Affine low = var(lb);
    add_le_zero(prog, add_to(low, dn, -1.0), "self_map_lo" + s);
  }

  // Interval bounds of a linear combination of psi.
  using RowMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;
  auto psi_range = [&](const RowMat& M, int row, Affine& hi, Affine& lo) {
    for (RowMat::InnerIterator it(M, row); it; ++it) {
      if (it.value() == 0.0) continue;
      const auto ju = static_cast<std::size_t>(it.col());
      const double c = it.value();
      add_to(hi, c > 0 ? psi_hi[ju] : psi_lo[ju], c);
      add_to(lo, c > 0 ? psi_lo[ju] : psi_hi[ju], c);
    }
  };

  const RowMat Mineq = m.Mineq;
  // Slack active power with its over-estimator.
  {
    const std::size_t sg = ix.slack_gen;
    const Generator& gen = net.generators[sg];
    Affine hi, lo;
    psi_range(Mineq, 0, hi, lo);
    Affine others = constant(net.buses[ix.slack].p_load);
    for (std::size_t i = 0; i < ctl.n_p(); ++i) {
      if (ix.gen_bus[ctl.p_gens[i]] == ix.slack) add_to(others, var(vars.u[i]), -1.0);
    }
    add_to(hi, others);
    add_to(lo, others);
    vars.p_slack_hi = prog.add_variable("p_slack_hi", -kInf, gen.p_max);
    add_le_zero(prog, add_to(hi, var(vars.p_slack_hi), -1.0), "p_slack_hi");
    Affine low = constant(gen.p_min);
    add_le_zero(prog, add_to(low, lo, -1.0), "p_slack_lo");
  }
  // Reactive power at generator buses.
  {
    int row = 1;
    std::vector<std::size_t> order{ix.slack};
    for (std::size_t k : ix.gbus) {
      if (k != ix.slack) order.push_back(k);
    }
    for (std::size_t k : order) {
      double qmin = 0.0, qmax = 0.0;
      for (std::size_t g = 0; g < ix.n_gen; ++g) {
        if (ix.gen_bus[g] != k) continue;
        qmin += net.generators[g].q_min;
        qmax += net.generators[g].q_max;
      }
      Affine hi, lo;
      psi_range(Mineq, row, hi, lo);
      const double qd = net.buses[k].q_load;
      const std::string s = "[" + std::to_string(net.buses[k].id) + "]";
      hi.constant += qd - qmax;
      add_le_zero(prog, hi, "q_hi" + s);
      Affine low = constant(qmin - qd);
      add_le_zero(prog, add_to(low, lo, -1.0), "q_lo" + s);
      ++row;
    }
  }
  // Line flow limits.
  {
    const RowMat Lf = m.Lf, Lt = m.Lt;
    for (int l = 0; l < nl; ++l) {
      const Branch& br = net.branches[static_cast<std::size_t>(l)];
      if (!br.s_max) continue;
      for (int end = 0; end < 2; ++end) {
        const RowMat& L = end == 0 ? Lf : Lt;
        const std::string s = std::string(end == 0 ? "f" : "t") + "[" + std::to_string(l) + "]";
        std::vector<int> mag;
        double coef_max = 0.0;
        for (int part = 0; part < 2; ++part) {
          const int row = part == 0 ? l : nl + l;
          for (RowMat::InnerIterator it(L, row); it; ++it) {
            coef_max = std::max(coef_max, std::abs(it.value()));
          }
          const int sv = prog.add_variable((part == 0 ? "sp_" : "sq_") + s, 0.0, kInf);
          mag.push_back(sv);
          Affine hi, lo;
          psi_range(L, row, hi, lo);
          add_le_zero(prog, add_to(hi, var(sv), -1.0), "flow_hi_" + s);
          Affine neg = var(sv, -1.0);
          add_le_zero(prog, add_to(neg, lo, -1.0), "flow_lo_" + s);
        }
        prog.add_soc({{{mag[0], 1.0}}, {{mag[1], 1.0}}}, {0.0, 0.0}, {}, *br.s_max,
                     "flow_cone_" + s);
        if (coef_max > 1e4 * std::max(*br.s_max, 1e-12)) {
          r.diagnostics.push_back("line " + std::to_string(l) +
                                  ": flow cone poorly conditioned (coefficient " +
                                  std::to_string(coef_max) + " vs limit " +
                                  std::to_string(*br.s_max) + ")");
        }
      }
    }
  }

  // Objective.
  if (opts.objective == ObjectiveMode::Cost) {
    auto add_cost = [&](int v, const CostPolynomial& c) {
      if (c.c2 != 0.0) prog.add_objective_quadratic(v, v, c.c2);
      if (c.c1 != 0.0) prog.add_objective_linear(v, c.c1);
      prog.add_objective_constant(c.c0);
    };
    for (std::size_t i = 0; i < ctl.n_p(); ++i) {
      add_cost(vars.u[i], net.generators[ctl.p_gens[i]].cost);
    }
    add_cost(vars.p_slack_hi, net.generators[ix.slack_gen].cost);
  } else if (opts.objective == ObjectiveMode::Distance) {
    if (opts.target.size() != nu) {
      throw ConfigError("distance target has length " + std::to_string(opts.target.size()) +
                        ", expected " + std::to_string(nu));
    }
    if (!(opts.lambda > 0.0)) throw ConfigError("lambda must be positive");
    for (int i = 0; i < nu; ++i) {
      const auto iu = static_cast<std::size_t>(i);
      const bool voltage = iu >= ctl.v_offset() && iu < ctl.q_offset();
      const double w = voltage ? 1.0 : opts.lambda;
      const int v = vars.u[iu];
      prog.add_objective_quadratic(v, v, w);
      prog.add_objective_linear(v, -2.0 * w * opts.target[i]);
      prog.add_objective_constant(w * opts.target[i] * opts.target[i]);
    }
    // Keep the slack over-estimator bounded and tight.
    prog.add_objective_linear(vars.p_slack_hi, 1e-6);
  }
  return r;
}

RestrictionSolution extract_solution(const Restriction& r, const SolveResult& res) {
  RestrictionSolution out;
  out.result = res;
  if (res.status != SolveStatus::Optimal) return out;
  auto gather = [&](const std::vector<int>& idx) {
    VectorXd v(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) v[I(i)] = res.x[idx[i]];
    return v;
  };
  out.u = gather(r.vars.u);
  out.b.phi_hi = gather(r.vars.phi_hi);
  out.b.phi_lo = gather(r.vars.phi_lo);
  out.b.v_hi = gather(r.vars.v_hi);
  out.b.v_lo = gather(r.vars.v_lo);
  return out;
}

RestrictionSolution solve_restriction(const Restriction& r, const SolverSettings& s) {
  return extract_solution(r, solve(r.program, s));
}

bool in_polytope(const Model& m, const VectorXd& x, const PolytopeBounds& b,
                 double tol) {
  const VectorXd phi = angle_differences(m, x);
  const VectorXd v = x.tail(I(m.ix.n_pq()));
  return (phi.array() <= b.phi_hi.array() + tol).all() &&
         (phi.array() >= b.phi_lo.array() - tol).all() &&
         (v.array() <= b.v_hi.array() + tol).all() &&
         (v.array() >= b.v_lo.array() - tol).all();
}

}  // namespace feaspath
