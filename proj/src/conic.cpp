#include "feaspath/conic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

namespace feaspath {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// ---------------------------------------------------------------------------
// Program container

int ConicProgram::add_variable(std::string name, double lb, double ub) {
  names_.push_back(std::move(name));
  lb_.push_back(lb);
  ub_.push_back(ub);
  return static_cast<int>(names_.size()) - 1;
}

void ConicProgram::set_bounds(int var, double lb, double ub) {
  lb_.at(static_cast<std::size_t>(var)) = lb;
  ub_.at(static_cast<std::size_t>(var)) = ub;
}

void ConicProgram::add_linear(Terms a, double lo, double hi, std::string name) {
  lin_.push_back({std::move(a), lo, hi, std::move(name)});
}

void ConicProgram::add_quadratic(std::vector<QuadTerm> Q, Terms a, double c,
                                 std::string name) {
  quad_.push_back({std::move(Q), std::move(a), c, std::move(name)});
}

void ConicProgram::add_soc(std::vector<Terms> A, std::vector<double> b, Terms t,
                           double d, std::string name) {
  if (A.size() != b.size()) throw std::invalid_argument("add_soc: size mismatch");
  soc_.push_back({std::move(A), std::move(b), std::move(t), d, std::move(name)});
}

void ConicProgram::add_objective_linear(int var, double coef) {
  obj_lin_.emplace_back(var, coef);
}

void ConicProgram::add_objective_quadratic(int i, int j, double coef) {
  obj_quad_.push_back({i, j, coef});
}

namespace {

double dot(const Terms& a, const VectorXd& z) {
  double s = 0.0;
  for (const auto& [i, v] : a) s += v * z[i];
  return s;
}

double quad_form(const std::vector<QuadTerm>& Q, const VectorXd& z) {
  double s = 0.0;
  for (const QuadTerm& q : Q) s += q.value * z[q.i] * z[q.j];
  return s;
}

std::vector<int> support_of(const std::vector<QuadTerm>& Q) {
  std::set<int> s;
  for (const QuadTerm& q : Q) {
    s.insert(q.i);
    s.insert(q.j);
  }
  return {s.begin(), s.end()};
}

}  // namespace

double ConicProgram::objective(const VectorXd& z) const {
  return dot(obj_lin_, z) + quad_form(obj_quad_, z) + obj_const_;
}

double ConicProgram::max_violation(const VectorXd& z) const {
  double worst = 0.0;
  for (std::size_t i = 0; i < lb_.size(); ++i) {
    worst = std::max({worst, lb_[i] - z[static_cast<Eigen::Index>(i)],
                      z[static_cast<Eigen::Index>(i)] - ub_[i]});
  }
  for (const LinearRow& r : lin_) {
    const double v = dot(r.a, z);
    worst = std::max({worst, r.lo - v, v - r.hi});
  }
  for (const QuadraticRow& r : quad_) {
    worst = std::max(worst, quad_form(r.Q, z) + dot(r.a, z) + r.c);
  }
  for (const SocRow& r : soc_) {
    double n2 = 0.0;
    for (std::size_t k = 0; k < r.A.size(); ++k) {
      const double v = dot(r.A[k], z) + r.b[k];
      n2 += v * v;
    }
    worst = std::max(worst, std::sqrt(n2) - dot(r.t, z) - r.d);
  }
  return worst;
}

MatrixXd dense_quadratic(const std::vector<QuadTerm>& Q,
                         const std::vector<int>& support) {
  std::map<int, int> pos;
  for (std::size_t k = 0; k < support.size(); ++k) {
    pos[support[k]] = static_cast<int>(k);
  }
  const auto n = static_cast<Eigen::Index>(support.size());
  MatrixXd d = MatrixXd::Zero(n, n);
  for (const QuadTerm& q : Q) {
    const int a = pos.at(q.i), b = pos.at(q.j);
    if (a == b) {
      d(a, a) += q.value;
    } else {
      d(a, b) += 0.5 * q.value;
      d(b, a) += 0.5 * q.value;
    }
  }
  return d;
}

std::vector<std::string> validate(const ConicProgram& prog) {
  std::vector<std::string> out;
  const int n = prog.num_variables();
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  auto label = [](const std::string& kind, std::size_t idx,
                  const std::string& name) {
    return kind + " " + std::to_string(idx) + (name.empty() ? "" : " (" + name + ")");
  };
  auto check_terms = [&](const Terms& a, const std::string& where) {
    for (const auto& [i, v] : a) {
      if (i < 0 || i >= n) {
        out.push_back(where + ": variable index out of range");
        continue;
      }
      if (!std::isfinite(v)) out.push_back(where + ": non-finite coefficient");
      used[static_cast<std::size_t>(i)] = true;
    }
  };
  auto check_quad = [&](const std::vector<QuadTerm>& Q, const std::string& where) {
    for (const QuadTerm& q : Q) {
      if (q.i < 0 || q.i >= n || q.j < 0 || q.j >= n) {
        out.push_back(where + ": variable index out of range");
        return;
      }
      if (!std::isfinite(q.value)) out.push_back(where + ": non-finite coefficient");
      used[static_cast<std::size_t>(q.i)] = used[static_cast<std::size_t>(q.j)] = true;
    }
    if (Q.empty()) return;
    const MatrixXd d = dense_quadratic(Q, support_of(Q));
    if (!d.allFinite()) return;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(d, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-9) {
      out.push_back(where + ": quadratic part is not positive semidefinite");
    }
  };

  for (int i = 0; i < n; ++i) {
    const double lb = prog.lower()[static_cast<std::size_t>(i)];
    const double ub = prog.upper()[static_cast<std::size_t>(i)];
    if (std::isnan(lb) || std::isnan(ub) || lb == ConicProgram::kInf ||
        ub == -ConicProgram::kInf) {
      out.push_back(label("variable", static_cast<std::size_t>(i),
                          prog.names()[static_cast<std::size_t>(i)]) +
                    ": invalid bound");
    }
  }
  const auto& lin = prog.linear_rows();
  for (std::size_t r = 0; r < lin.size(); ++r) {
    const std::string where = label("linear row", r, lin[r].name);
    check_terms(lin[r].a, where);
    if (std::isnan(lin[r].lo) || std::isnan(lin[r].hi)) {
      out.push_back(where + ": NaN bound");
    }
  }
  const auto& quad = prog.quadratic_rows();
  for (std::size_t r = 0; r < quad.size(); ++r) {
    const std::string where = label("quadratic row", r, quad[r].name);
    check_terms(quad[r].a, where);
    check_quad(quad[r].Q, where);
    if (!std::isfinite(quad[r].c)) out.push_back(where + ": non-finite constant");
  }
  const auto& soc = prog.soc_rows();
  for (std::size_t r = 0; r < soc.size(); ++r) {
    const std::string where = label("cone row", r, soc[r].name);
    for (const Terms& a : soc[r].A) check_terms(a, where);
    check_terms(soc[r].t, where);
    for (double b : soc[r].b) {
      if (!std::isfinite(b)) out.push_back(where + ": non-finite constant");
    }
    if (!std::isfinite(soc[r].d)) out.push_back(where + ": non-finite constant");
  }
  check_terms(prog.objective_linear(), "objective");
  check_quad(prog.objective_quadratic(), "objective");
  for (int i = 0; i < n; ++i) {
    if (!used[static_cast<std::size_t>(i)]) {
      out.push_back(label("variable", static_cast<std::size_t>(i),
                          prog.names()[static_cast<std::size_t>(i)]) +
                    ": dangling (appears in no row or objective)");
    }
  }
  return out;
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::NumericalFailure: return "numerical_failure";
    case SolveStatus::TimeLimit: return "time_limit";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Lowering to  min c^T x  s.t.  A x = b,  h - G x in K,
// K = R^l_+ x Q^{q_1} x ... x Q^{q_k}.

namespace {

struct StandardForm {
  int n = 0;              // variables (program variables plus epigraph)
  VectorXd c;
  double c0 = 0.0;
  SpMat A, G;
  VectorXd b, h;
  int l = 0;              // nonnegative orthant rows
  std::vector<int> soc;   // cone dimensions, after the orthant rows
  bool trivially_infeasible = false;
  std::string infeasible_reason;
};

struct Builder {
  std::vector<Triplet> at, gt;
  std::vector<double> bv, hv;
  int p = 0, m = 0;

  void eq(const Terms& a, double rhs) {
    for (const auto& [j, v] : a) at.emplace_back(p, j, v);
    bv.push_back(rhs);
    ++p;
  }
  // a^T x <= rhs
  void le(const Terms& a, double rhs) {
    for (const auto& [j, v] : a) gt.emplace_back(m, j, v);
    hv.push_back(rhs);
    ++m;
  }
};

Terms negate(Terms a) {
  for (auto& t : a) t.second = -t.second;
  return a;
}

// Low-rank factor F with Q = F^T F over the support variables.
std::vector<Terms> factor_psd(const std::vector<QuadTerm>& Q) {
  const std::vector<int> sup = support_of(Q);
  if (sup.empty()) return {};
  const MatrixXd d = dense_quadratic(Q, sup);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(d);
  const VectorXd& ev = es.eigenvalues();
  const double cut = 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  std::vector<Terms> rows;
  for (Eigen::Index k = 0; k < ev.size(); ++k) {
    if (ev[k] <= cut) continue;
    const double s = std::sqrt(ev[k]);
    Terms r;
    for (std::size_t i = 0; i < sup.size(); ++i) {
      const double v = s * es.eigenvectors()(static_cast<Eigen::Index>(i), k);
      if (v != 0.0) r.emplace_back(sup[i], v);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

StandardForm lower(const ConicProgram& prog) {
  StandardForm sf;
  const int nv = prog.num_variables();
  const bool epi = !prog.objective_quadratic().empty();
  sf.n = nv + (epi ? 1 : 0);
  sf.c = VectorXd::Zero(sf.n);
  for (const auto& [j, v] : prog.objective_linear()) sf.c[j] += v;
  sf.c0 = prog.objective_constant();

  Builder bld;
  for (int i = 0; i < nv; ++i) {
    const double lb = prog.lower()[static_cast<std::size_t>(i)];
    const double ub = prog.upper()[static_cast<std::size_t>(i)];
    if (lb > ub) {
      sf.trivially_infeasible = true;
      sf.infeasible_reason = "variable " + prog.names()[static_cast<std::size_t>(i)] +
                             " has lower bound above upper bound";
    }
    if (lb == ub) {
      bld.eq({{i, 1.0}}, lb);
      continue;
    }
    if (std::isfinite(lb)) bld.le({{i, -1.0}}, -lb);
    if (std::isfinite(ub)) bld.le({{i, 1.0}}, ub);
  }
  for (const LinearRow& r : prog.linear_rows()) {
    if (r.lo > r.hi) {
      sf.trivially_infeasible = true;
      sf.infeasible_reason = "linear row " + r.name + " has lo > hi";
    }
    if (r.lo == r.hi) {
      bld.eq(r.a, r.lo);
      continue;
    }
    if (std::isfinite(r.hi)) bld.le(r.a, r.hi);
    if (std::isfinite(r.lo)) bld.le(negate(r.a), -r.lo);
  }

  // Quadratic rows whose quadratic part vanishes stay in the orthant.
  struct Cone {
    std::vector<Terms> g;
    std::vector<double> h;
  };
  std::vector<Cone> cones;
  auto lower_quadratic = [&](const std::vector<QuadTerm>& Q, const Terms& a,
                             double c) {
    std::vector<Terms> F = factor_psd(Q);
    if (F.empty()) {
      bld.le(a, -c);
      return;
    }
    // ||F z||^2 <= -(a^T z + c)  <=>  ||(2 F z, 1 + a^T z + c)|| <= 1 - a^T z - c
    Cone k;
    k.g.push_back(a);
    k.h.push_back(1.0 - c);
    k.g.push_back(negate(a));
    k.h.push_back(1.0 + c);
    for (Terms& f : F) {
      for (auto& t : f) t.second *= -2.0;
      k.g.push_back(std::move(f));
      k.h.push_back(0.0);
    }
    cones.push_back(std::move(k));
  };
  for (const QuadraticRow& r : prog.quadratic_rows()) lower_quadratic(r.Q, r.a, r.c);
  if (epi) {
    sf.c[nv] = 1.0;
    lower_quadratic(prog.objective_quadratic(), {{nv, -1.0}}, 0.0);
  }
  for (const SocRow& r : prog.soc_rows()) {
    Cone k;
    k.g.push_back(negate(r.t));
    k.h.push_back(r.d);
    for (std::size_t i = 0; i < r.A.size(); ++i) {
      k.g.push_back(negate(r.A[i]));
      k.h.push_back(r.b[i]);
    }
    cones.push_back(std::move(k));
  }

  // Orthant rows: drop empty ones (checking consistency), scale the rest.
  std::vector<std::vector<std::pair<int, double>>> lp_rows(static_cast<std::size_t>(bld.m));
  for (const Triplet& t : bld.gt) lp_rows[static_cast<std::size_t>(t.row())].emplace_back(t.col(), t.value());
  std::vector<Triplet> gt;
  std::vector<double> hv;
  int row = 0;
  auto merged = [](std::vector<std::pair<int, double>> r) {
    std::sort(r.begin(), r.end());
    std::vector<std::pair<int, double>> out;
    for (const auto& e : r) {
      if (!out.empty() && out.back().first == e.first) {
        out.back().second += e.second;
      } else {
        out.push_back(e);
      }
    }
    out.erase(std::remove_if(out.begin(), out.end(),
                             [](const auto& e) { return e.second == 0.0; }),
              out.end());
    return out;
  };
  for (int r = 0; r < bld.m; ++r) {
    auto terms = merged(lp_rows[static_cast<std::size_t>(r)]);
    const double rhs = bld.hv[static_cast<std::size_t>(r)];
    double scale = 0.0;
    for (const auto& e : terms) scale = std::max(scale, std::abs(e.second));
    if (scale == 0.0) {
      if (rhs < -1e-12) {
        sf.trivially_infeasible = true;
        sf.infeasible_reason = "constant inequality row violated";
      }
      continue;
    }
    for (const auto& e : terms) gt.emplace_back(row, e.first, e.second / scale);
    hv.push_back(rhs / scale);
    ++row;
  }
  sf.l = row;
  for (Cone& k : cones) {
    double scale = 0.0;
    for (Terms& g : k.g) {
      g = merged(g);
      for (const auto& e : g) scale = std::max(scale, std::abs(e.second));
    }
    if (scale == 0.0) scale = 1.0;
    for (std::size_t i = 0; i < k.g.size(); ++i) {
      for (const auto& e : k.g[i]) gt.emplace_back(row, e.first, e.second / scale);
      hv.push_back(k.h[i] / scale);
      ++row;
    }
    sf.soc.push_back(static_cast<int>(k.g.size()));
  }
  sf.G.resize(row, sf.n);
  sf.G.setFromTriplets(gt.begin(), gt.end());
  sf.h = Eigen::Map<VectorXd>(hv.data(), static_cast<Eigen::Index>(hv.size()));

  std::vector<std::vector<std::pair<int, double>>> eq_rows(static_cast<std::size_t>(bld.p));
  for (const Triplet& t : bld.at) eq_rows[static_cast<std::size_t>(t.row())].emplace_back(t.col(), t.value());
  std::vector<Triplet> at;
  std::vector<double> bv;
  int erow = 0;
  for (int r = 0; r < bld.p; ++r) {
    auto terms = merged(eq_rows[static_cast<std::size_t>(r)]);
    const double rhs = bld.bv[static_cast<std::size_t>(r)];
    double scale = 0.0;
    for (const auto& e : terms) scale = std::max(scale, std::abs(e.second));
    if (scale == 0.0) {
      if (std::abs(rhs) > 1e-12) {
        sf.trivially_infeasible = true;
        sf.infeasible_reason = "constant equality row violated";
      }
      continue;
    }
    for (const auto& e : terms) at.emplace_back(erow, e.first, e.second / scale);
    bv.push_back(rhs / scale);
    ++erow;
  }
  sf.A.resize(erow, sf.n);
  sf.A.setFromTriplets(at.begin(), at.end());
  sf.b = Eigen::Map<VectorXd>(bv.data(), static_cast<Eigen::Index>(bv.size()));
  return sf;
}

// ---------------------------------------------------------------------------
// Cone algebra

struct ConeLayout {
  int l = 0;
  std::vector<int> start, dim;  // second-order cones
  int m = 0;
  int degree() const { return l + static_cast<int>(dim.size()); }
};

// Nesterov-Todd scaling of one second-order cone.
struct SocScaling {
  double eta = 1.0;
  VectorXd w;  // normalized scaling point, w^T J w = 1
};

struct Scaling {
  VectorXd lp_w;  // sqrt(s/z)
  std::vector<SocScaling> soc;
};

// u0^2 - |u1|^2, factored to limit cancellation near the boundary.
double soc_residual(const Eigen::Ref<const VectorXd>& u) {
  const double n1 = u.tail(u.size() - 1).norm();
  return (u[0] - n1) * (u[0] + n1);
}

// y = W x (inverse = false) or W^{-1} x.
VectorXd apply_w(const ConeLayout& cl, const Scaling& sc, const VectorXd& x,
                 bool inverse) {
  VectorXd y(x.size());
  for (int i = 0; i < cl.l; ++i) y[i] = inverse ? x[i] / sc.lp_w[i] : x[i] * sc.lp_w[i];
  for (std::size_t k = 0; k < cl.dim.size(); ++k) {
    const int s = cl.start[k], d = cl.dim[k];
    const SocScaling& q = sc.soc[k];
    const double a = q.w[0];
    const auto w1 = q.w.tail(d - 1);
    const auto x1 = x.segment(s + 1, d - 1);
    const double x0 = x[s];
    const double sgn = inverse ? -1.0 : 1.0;
    const double w1x1 = w1.dot(x1);
    const double f = inverse ? 1.0 / q.eta : q.eta;
    y[s] = f * (a * x0 + sgn * w1x1);
    y.segment(s + 1, d - 1) =
        f * (sgn * x0 * w1 + x1 + (w1x1 / (1.0 + a)) * w1);
  }
  return y;
}

VectorXd jordan_product(const ConeLayout& cl, const VectorXd& u, const VectorXd& v) {
  VectorXd r(u.size());
  for (int i = 0; i < cl.l; ++i) r[i] = u[i] * v[i];
  for (std::size_t k = 0; k < cl.dim.size(); ++k) {
    const int s = cl.start[k], d = cl.dim[k];
    r[s] = u.segment(s, d).dot(v.segment(s, d));
    r.segment(s + 1, d - 1) =
        u[s] * v.segment(s + 1, d - 1) + v[s] * u.segment(s + 1, d - 1);
  }
  return r;
}

// Solves lambda o x = b for x.
VectorXd jordan_divide(const ConeLayout& cl, const VectorXd& lambda, const VectorXd& b) {
  VectorXd x(b.size());
  for (int i = 0; i < cl.l; ++i) x[i] = b[i] / lambda[i];
  for (std::size_t k = 0; k < cl.dim.size(); ++k) {
    const int s = cl.start[k], d = cl.dim[k];
    const double l0 = lambda[s];
    const auto l1 = lambda.segment(s + 1, d - 1);
    const auto b1 = b.segment(s + 1, d - 1);
    const double det = l0 * l0 - l1.squaredNorm();
    const double x0 = (l0 * b[s] - l1.dot(b1)) / det;
    x[s] = x0;
    x.segment(s + 1, d - 1) = (b1 - x0 * l1) / l0;
  }
  return x;
}

VectorXd identity_element(const ConeLayout& cl) {
  VectorXd e = VectorXd::Zero(cl.m);
  e.head(cl.l).setOnes();
  for (int s : cl.start) e[s] = 1.0;
  return e;
}

// Largest alpha with u + alpha du in the cone (capped at `cap`).
double max_step(const ConeLayout& cl, const VectorXd& u, const VectorXd& du,
                double cap) {
  double alpha = cap;
  for (int i = 0; i < cl.l; ++i) {
    if (du[i] < 0.0) alpha = std::min(alpha, -u[i] / du[i]);
  }
  for (std::size_t k = 0; k < cl.dim.size(); ++k) {
    const int s = cl.start[k], d = cl.dim[k];
    const auto u0 = u.segment(s, d);
    const auto d0 = du.segment(s, d);
    // q(a) = qa a^2 + 2 qb a + qc, qc > 0
    const double qa = d0[0] * d0[0] - d0.tail(d - 1).squaredNorm();
    const double qb = u0[0] * d0[0] - u0.tail(d - 1).dot(d0.tail(d - 1));
    const double qc = std::max(soc_residual(u0), 0.0);
    double root = std::numeric_limits<double>::infinity();
    const double disc = qb * qb - qa * qc;
    if (std::abs(qa) < 1e-300) {
      if (qb < 0.0) root = -qc / (2.0 * qb);
    } else if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      const double qq = -(qb + std::copysign(sq, qb));
      for (double r : {qq / qa, qq != 0.0 ? qc / qq : std::numeric_limits<double>::infinity()}) {
        if (r > 0.0) root = std::min(root, r);
      }
    }
    alpha = std::min(alpha, root);
  }
  return std::max(alpha, 0.0);
}

// Shift into the interior: u + (1 + max(0, -min eig)) e when needed.
void push_interior(const ConeLayout& cl, VectorXd& u) {
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < cl.l; ++i) worst = std::max(worst, -u[i]);
  for (std::size_t k = 0; k < cl.dim.size(); ++k) {
    const int s = cl.start[k], d = cl.dim[k];
    worst = std::max(worst, u.segment(s + 1, d - 1).norm() - u[s]);
  }
  if (worst >= 0.0 || cl.m == 0) {
    u += (1.0 + std::max(worst, 0.0)) * identity_element(cl);
  }
}

Scaling nt_scaling(const ConeLayout& cl, const VectorXd& s, const VectorXd& z,
                   VectorXd& lambda, bool& ok) {
  Scaling sc;
  ok = true;
  sc.lp_w.resize(cl.l);
  lambda.resize(cl.m);
  for (int i = 0; i < cl.l; ++i) {
    sc.lp_w[i] = std::sqrt(s[i] / z[i]);
    lambda[i] = std::sqrt(s[i] * z[i]);
  }
  sc.soc.resize(cl.dim.size());
  for (std::size_t k = 0; k < cl.dim.size(); ++k) {
    const int st = cl.start[k], d = cl.dim[k];
    const VectorXd sk = s.segment(st, d), zk = z.segment(st, d);
    const double sres = soc_residual(sk), zres = soc_residual(zk);
    if (!(sres > 0.0) || !(zres > 0.0) || sk[0] <= 0.0 || zk[0] <= 0.0) {
      ok = false;
      return sc;
    }
    const double sn = std::sqrt(sres), zn = std::sqrt(zres);
    const VectorXd sb = sk / sn, zb = zk / zn;
    const double gamma = std::sqrt(0.5 * (1.0 + sb.dot(zb)));
    SocScaling& q = sc.soc[k];
    q.w.resize(d);
    q.w[0] = (sb[0] + zb[0]) / (2.0 * gamma);
    q.w.tail(d - 1) = (sb.tail(d - 1) - zb.tail(d - 1)) / (2.0 * gamma);
    q.eta = std::sqrt(sn / zn);
  }
  VectorXd wz = apply_w(cl, sc, z, false);
  lambda.tail(cl.m - cl.l) = wz.tail(cl.m - cl.l);
  return sc;
}

// ---------------------------------------------------------------------------
// KKT system  [reg I  A^T  G^T; A  -reg I  0; G  0  -W^2]
// is factorized in the scaled form  [reg I  A^T  Gs^T; A  -reg I  0; Gs  0  -I - reg I]
// with Gs = W^-1 G and v = W dz, which keeps the cone block well conditioned.

class Kkt {
 public:
  Kkt(const StandardForm& sf, const ConeLayout& cl, double reg)
      : sf_(sf), cl_(cl), reg_(reg) {
    n_ = sf.n;
    p_ = static_cast<int>(sf.A.rows());
    m_ = cl.m;
    const int o = n_ + p_;
    std::vector<Triplet> t;
    for (int i = 0; i < n_; ++i) t.emplace_back(i, i, reg_);
    for (int k = 0; k < sf.A.outerSize(); ++k) {
      for (SpMat::InnerIterator it(sf.A, k); it; ++it) {
        t.emplace_back(n_ + it.row(), it.col(), it.value());
      }
    }
    for (int i = 0; i < p_; ++i) t.emplace_back(n_ + i, n_ + i, -reg_);
    for (int i = 0; i < m_; ++i) t.emplace_back(o + i, o + i, -1.0 - reg_);

    // Orthant entries keep the pattern of G; each cone block becomes dense
    // over the union of its columns.
    std::vector<std::vector<std::pair<int, double>>> rows(static_cast<std::size_t>(m_));
    for (int k = 0; k < sf.G.outerSize(); ++k) {
      for (SpMat::InnerIterator it(sf.G, k); it; ++it) {
        rows[static_cast<std::size_t>(it.row())].emplace_back(static_cast<int>(it.col()), it.value());
      }
    }
    for (int i = 0; i < cl.l; ++i) {
      for (const auto& [j, v] : rows[static_cast<std::size_t>(i)]) {
        t.emplace_back(o + i, j, v);
        lp_entries_.push_back({i, j, v});
      }
    }
    blocks_.resize(cl.dim.size());
    for (std::size_t k = 0; k < cl.dim.size(); ++k) {
      const int s = cl.start[k], d = cl.dim[k];
      Block& bk = blocks_[k];
      for (int r = 0; r < d; ++r) {
        for (const auto& e : rows[static_cast<std::size_t>(s + r)]) bk.cols.push_back(e.first);
      }
      std::sort(bk.cols.begin(), bk.cols.end());
      bk.cols.erase(std::unique(bk.cols.begin(), bk.cols.end()), bk.cols.end());
      const auto nc = static_cast<Eigen::Index>(bk.cols.size());
      bk.G = MatrixXd::Zero(d, nc);
      for (int r = 0; r < d; ++r) {
        for (const auto& [j, v] : rows[static_cast<std::size_t>(s + r)]) {
          const auto c = std::lower_bound(bk.cols.begin(), bk.cols.end(), j) - bk.cols.begin();
          bk.G(r, c) += v;
        }
        for (Eigen::Index c = 0; c < nc; ++c) t.emplace_back(o + s + r, bk.cols[static_cast<std::size_t>(c)], 0.0);
      }
    }
    const int N = n_ + p_ + m_;
    K_.resize(N, N);
    K_.setFromTriplets(t.begin(), t.end());
    K_.makeCompressed();
    for (LpEntry& e : lp_entries_) e.pos = &K_.coeffRef(o + e.row, e.col) - K_.valuePtr();
    for (std::size_t k = 0; k < cl.dim.size(); ++k) {
      Block& bk = blocks_[k];
      for (int r = 0; r < cl.dim[k]; ++r) {
        for (int c : bk.cols) bk.pos.push_back(&K_.coeffRef(o + cl.start[k] + r, c) - K_.valuePtr());
      }
    }
    ldlt_.analyzePattern(K_);
  }

  bool factor(const Scaling& sc) {
    sc_ = &sc;
    double* v = K_.valuePtr();
    for (const LpEntry& e : lp_entries_) v[e.pos] = e.value / sc.lp_w[e.row];
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
      Block& bk = blocks_[k];
      const SocScaling& q = sc.soc[k];
      const int d = cl_.dim[k];
      // W^-1 = (1/eta) [[w0, -w1^T], [-w1, I + w1 w1^T / (1 + w0)]]
      const auto w1 = q.w.tail(d - 1);
      const Eigen::RowVectorXd w1G = w1.transpose() * bk.G.bottomRows(d - 1);
      MatrixXd Gs(d, bk.G.cols());
      Gs.row(0) = (q.w[0] * bk.G.row(0) - w1G) / q.eta;
      Gs.bottomRows(d - 1) =
          (bk.G.bottomRows(d - 1) - w1 * bk.G.row(0) + (w1 / (1.0 + q.w[0])) * w1G) / q.eta;
      std::size_t c = 0;
      for (Eigen::Index r = 0; r < d; ++r) {
        for (Eigen::Index j = 0; j < Gs.cols(); ++j) v[bk.pos[c++]] = Gs(r, j);
      }
    }
    ldlt_.factorize(K_);
    return ldlt_.info() == Eigen::Success;
  }

  // Solves the unregularized system with iterative refinement.
  VectorXd solve(const VectorXd& rhs) const {
    VectorXd d = scaled_solve(rhs);
    last_residual_ = 0.0;
    for (int it = 0; it < 8; ++it) {
      const VectorXd r = rhs - multiply(d);
      last_residual_ = r.lpNorm<Eigen::Infinity>() / (1.0 + rhs.lpNorm<Eigen::Infinity>());
      if (last_residual_ <= 1e-14) break;
      d += scaled_solve(r);
    }
    return d;
  }

  mutable double last_residual_ = 0.0;

 private:
  struct LpEntry {
    int row, col;
    double value;
    std::ptrdiff_t pos = 0;
  };
  struct Block {
    std::vector<int> cols;
    MatrixXd G;
    std::vector<std::ptrdiff_t> pos;
  };

  VectorXd scaled_solve(const VectorXd& rhs) const {
    VectorXd t = rhs;
    t.tail(m_) = apply_w(cl_, *sc_, rhs.tail(m_), true);
    VectorXd d = ldlt_.solve(t);
    d.tail(m_) = apply_w(cl_, *sc_, d.tail(m_), true);
    return d;
  }

  VectorXd multiply(const VectorXd& d) const {
    const auto x = d.head(n_), y = d.segment(n_, p_);
    const VectorXd z = d.tail(m_);
    VectorXd out(d.size());
    out.head(n_) = sf_.A.transpose() * y + sf_.G.transpose() * z;
    out.segment(n_, p_) = sf_.A * x;
    out.tail(m_) = sf_.G * x - apply_w(cl_, *sc_, apply_w(cl_, *sc_, z, false), false);
    return out;
  }

  const StandardForm& sf_;
  const ConeLayout& cl_;
  double reg_;
  int n_, p_, m_;
  SpMat K_;
  std::vector<LpEntry> lp_entries_;
  std::vector<Block> blocks_;
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower> ldlt_;
  const Scaling* sc_ = nullptr;
};

Scaling identity_scaling(const ConeLayout& cl) {
  Scaling sc;
  sc.lp_w = VectorXd::Ones(cl.l);
  for (int d : cl.dim) {
    SocScaling q;
    q.w = VectorXd::Zero(d);
    q.w[0] = 1.0;
    sc.soc.push_back(q);
  }
  return sc;
}

constexpr double kReducedTolerance = 5e-5;
constexpr double kAcceptViolation = 1e-7;

struct Direction {
  VectorXd x, y, z, s;
  double tau = 0.0, kappa = 0.0;
};

}  // namespace

SolveResult solve(const ConicProgram& prog, const SolverSettings& st) {
  const auto t_start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  };
  SolveResult res;
  StandardForm sf = lower(prog);
  if (sf.trivially_infeasible) {
    res.status = SolveStatus::Infeasible;
    res.message = sf.infeasible_reason;
    res.solve_time = elapsed();
    return res;
  }
  const double oscale = std::max(1.0, sf.c.lpNorm<Eigen::Infinity>());
  const VectorXd c = sf.c / oscale;
  const VectorXd& b = sf.b;
  const VectorXd& h = sf.h;
  const SpMat& A = sf.A;
  const SpMat& G = sf.G;

  ConeLayout cl;
  cl.l = sf.l;
  int pos = sf.l;
  for (int d : sf.soc) {
    cl.start.push_back(pos);
    cl.dim.push_back(d);
    pos += d;
  }
  cl.m = pos;
  const int n = sf.n, p = static_cast<int>(A.rows()), m = cl.m;
  const double D = cl.degree();

  Kkt kkt(sf, cl, 1e-8);
  Scaling sc = identity_scaling(cl);
  if (!kkt.factor(sc)) {
    res.message = "initial KKT factorization failed";
    res.solve_time = elapsed();
    return res;
  }
  VectorXd x, y, z, s;
  {
    VectorXd rhs(n + p + m);
    rhs << VectorXd::Zero(n), b, h;
    const VectorXd d = kkt.solve(rhs);
    x = d.head(n);
    s = -d.tail(m);
    push_interior(cl, s);
    rhs << -c, VectorXd::Zero(p), VectorXd::Zero(m);
    const VectorXd d2 = kkt.solve(rhs);
    y = d2.segment(n, p);
    z = d2.tail(m);
    push_interior(cl, z);
  }
  double tau = 1.0, kappa = 1.0;

  const double nb = std::max(1.0, b.norm()), nh = std::max(1.0, h.norm()),
               nc = std::max(1.0, c.norm());
  const VectorXd e = identity_element(cl);

  // Best iterate so far, used when the method stalls before full accuracy.
  VectorXd best_x;
  double best_score = std::numeric_limits<double>::infinity();
  double best_pres = 0.0, best_dres = 0.0, best_gap = 0.0;

  for (int it = 0;; ++it) {
    res.iterations = it;
    const VectorXd Aty_Gtz = A.transpose() * y + G.transpose() * z;
    const VectorXd Ax = A * x, Gx = G * x;
    const VectorXd rx = Aty_Gtz + c * tau;
    const VectorXd ry = Ax - b * tau;
    const VectorXd rz = s + Gx - h * tau;
    const double cx = c.dot(x), by = b.dot(y), hz = h.dot(z);
    const double rt = kappa + cx + by + hz;

    const double pcost = cx / tau, dcost = -(hz + by) / tau;
    const double pres = std::max(ry.norm() / nb, rz.norm() / nh) / tau;
    const double dres = rx.norm() / nc / tau;
    const double gap = s.dot(z) / (tau * tau);
    double relgap = std::numeric_limits<double>::infinity();
    if (pcost < 0.0) relgap = gap / -pcost;
    if (dcost > 0.0) relgap = gap / dcost;
    res.primal_residual = pres;
    res.dual_residual = dres;
    res.gap = gap;
    if (st.verbosity > 1) {
      std::fprintf(stderr, "ipm %3d pcost %+.6e dcost %+.6e gap %.2e pres %.2e dres %.2e tau %.2e kap %.2e\n",
                   it, pcost * oscale, dcost * oscale, gap, pres, dres, tau, kappa);
    }
    const double score = std::max({pres, dres, std::min(gap, relgap)});
    if (score < best_score && std::isfinite(score)) {
      best_score = score;
      best_x = x / tau;
      best_pres = pres;
      best_dres = dres;
      best_gap = gap;
    }
    if (pres < st.feastol && dres < st.feastol &&
        (gap < st.abstol || relgap < st.reltol)) {
      res.status = SolveStatus::Optimal;
      res.x = (x / tau).head(prog.num_variables());
      res.objective = prog.objective(res.x);
      res.message = "optimal";
      break;
    }
    const double hresx = Aty_Gtz.norm();
    const double hresy = Ax.norm(), hresz = (Gx + s).norm();
    if (hz + by < 0.0 && hresx / -(hz + by) < st.feastol) {
      res.status = SolveStatus::Infeasible;
      res.message = "primal infeasibility certificate found";
      break;
    }
    if (cx < 0.0 && std::max(hresy, hresz) / -cx < st.feastol) {
      res.status = SolveStatus::NumericalFailure;
      res.message = "problem is unbounded (dual infeasible)";
      break;
    }
    if (it >= st.max_iterations) {
      res.status = SolveStatus::NumericalFailure;
      res.message = "iteration limit reached";
      break;
    }
    if (elapsed() > st.time_limit) {
      res.status = SolveStatus::TimeLimit;
      res.message = "time limit reached";
      break;
    }

    VectorXd lambda;
    bool ok = true;
    sc = nt_scaling(cl, s, z, lambda, ok);
    if (!ok || !kkt.factor(sc)) {
      res.status = SolveStatus::NumericalFailure;
      res.message = "scaling or KKT factorization failed";
      break;
    }
    VectorXd rhs2(n + p + m);
    rhs2 << -c, b, h;
    const VectorXd d2 = kkt.solve(rhs2);
    const auto x2 = d2.head(n), y2 = d2.segment(n, p), z2 = d2.tail(m);
    const double den_const = c.dot(x2) + b.dot(y2) + h.dot(z2);

    auto direction = [&](const VectorXd& bx, const VectorXd& by_, const VectorXd& bz,
                         const VectorXd& bs, double bt, double bk) {
      const VectorXd u = jordan_divide(cl, lambda, bs);
      const VectorXd Wu = apply_w(cl, sc, u, false);
      VectorXd rhs(n + p + m);
      rhs << bx, -by_, -bz - Wu;
      const VectorXd d1 = kkt.solve(rhs);
      Direction dir;
      const auto x1 = d1.head(n), y1 = d1.segment(n, p), z1 = d1.tail(m);
      dir.tau = (bt + bk / tau + c.dot(x1) + b.dot(y1) + h.dot(z1)) /
                (kappa / tau - den_const);
      dir.x = x1 + dir.tau * x2;
      dir.y = y1 + dir.tau * y2;
      dir.z = z1 + dir.tau * z2;
      // ds = W (u - W dz)
      dir.s = apply_w(cl, sc, u - apply_w(cl, sc, dir.z, false), false);
      dir.kappa = (bk - kappa * dir.tau) / tau;
      return dir;
    };
    auto step_to_boundary = [&](const Direction& d) {
      double a = max_step(cl, s, d.s, 1.0);
      a = std::min(a, max_step(cl, z, d.z, 1.0));
      if (d.tau < 0.0) a = std::min(a, -tau / d.tau);
      if (d.kappa < 0.0) a = std::min(a, -kappa / d.kappa);
      return a;
    };

    const double mu = (s.dot(z) + tau * kappa) / (D + 1.0);
    const VectorXd ll = jordan_product(cl, lambda, lambda);
    const Direction aff = direction(-rx, ry, rz, -ll, rt, -tau * kappa);
    const double a_aff = step_to_boundary(aff);
    const double sigma = std::clamp(std::pow(1.0 - a_aff, 3.0), 0.0, 1.0);
    const VectorXd corr = jordan_product(cl, apply_w(cl, sc, aff.s, true),
                                         apply_w(cl, sc, aff.z, false));
    const double g1 = 1.0 - sigma;
    const Direction dir =
        direction(-g1 * rx, g1 * ry, g1 * rz, -ll - corr + sigma * mu * e, g1 * rt,
                  -tau * kappa - aff.tau * aff.kappa + sigma * mu);
    const double alpha = std::min(1.0, 0.99 * step_to_boundary(dir));
    if (st.verbosity > 1) {
      std::fprintf(stderr, "    a_aff %.3f sigma %.2e alpha %.3e kkt_res %.2e\n", a_aff, sigma, alpha,
                   kkt.last_residual_);
    }
    if (!(alpha > 1e-12) || !dir.x.allFinite()) {
      res.status = SolveStatus::NumericalFailure;
      res.message = "step length collapsed";
      break;
    }
    x += alpha * dir.x;
    y += alpha * dir.y;
    z += alpha * dir.z;
    s += alpha * dir.s;
    tau += alpha * dir.tau;
    kappa += alpha * dir.kappa;
  }
  if (res.status == SolveStatus::NumericalFailure && best_x.size() > 0 &&
      best_score < kReducedTolerance) {
    // Accept a stalled run when the recovered point checks out against the
    // original rows.
    const VectorXd cand = best_x.head(prog.num_variables());
    if (prog.max_violation(cand) <= kAcceptViolation) {
      res.status = SolveStatus::Optimal;
      res.x = cand;
      res.objective = prog.objective(cand);
      res.primal_residual = best_pres;
      res.dual_residual = best_dres;
      res.gap = best_gap;
      res.message = "optimal to reduced accuracy (" + res.message + ")";
    }
  }
  if (res.status != SolveStatus::Optimal) res.x.resize(0);
  res.solve_time = elapsed();
  return res;
}

void write_cbf(const ConicProgram& prog, std::ostream& out) {
  const StandardForm sf = lower(prog);
  out.precision(17);
  out << "VER\n3\n\nOBJSENSE\nMIN\n\nVAR\n" << sf.n << " 1\nF " << sf.n << "\n\n";
  const int m = static_cast<int>(sf.G.rows()), p = static_cast<int>(sf.A.rows());
  int groups = (sf.l > 0 ? 1 : 0) + static_cast<int>(sf.soc.size()) + (p > 0 ? 1 : 0);
  out << "CON\n" << m + p << " " << groups << "\n";
  if (sf.l > 0) out << "L+ " << sf.l << "\n";
  for (int d : sf.soc) out << "Q " << d << "\n";
  if (p > 0) out << "L= " << p << "\n";
  out << "\n";
  int nz = 0;
  for (Eigen::Index j = 0; j < sf.c.size(); ++j) nz += sf.c[j] != 0.0;
  out << "OBJACOORD\n" << nz << "\n";
  for (Eigen::Index j = 0; j < sf.c.size(); ++j) {
    if (sf.c[j] != 0.0) out << j << " " << sf.c[j] << "\n";
  }
  if (sf.c0 != 0.0) out << "\nOBJBCOORD\n" << sf.c0 << "\n";
  // Rows: h - G x in K, then A x - b = 0.
  out << "\nACOORD\n" << sf.G.nonZeros() + sf.A.nonZeros() << "\n";
  for (int k = 0; k < sf.G.outerSize(); ++k) {
    for (SpMat::InnerIterator it(sf.G, k); it; ++it) {
      out << it.row() << " " << it.col() << " " << -it.value() << "\n";
    }
  }
  for (int k = 0; k < sf.A.outerSize(); ++k) {
    for (SpMat::InnerIterator it(sf.A, k); it; ++it) {
      out << m + it.row() << " " << it.col() << " " << it.value() << "\n";
    }
  }
  int bnz = 0;
  for (int i = 0; i < m; ++i) bnz += sf.h[i] != 0.0;
  for (int i = 0; i < p; ++i) bnz += sf.b[i] != 0.0;
  out << "\nBCOORD\n" << bnz << "\n";
  for (int i = 0; i < m; ++i) {
    if (sf.h[i] != 0.0) out << i << " " << sf.h[i] << "\n";
  }
  for (int i = 0; i < p; ++i) {
    if (sf.b[i] != 0.0) out << m + i << " " << -sf.b[i] << "\n";
  }
}

}  // namespace feaspath
