#include "feaspath/matrices.hpp"

#include <cmath>

namespace feaspath {

using Complex = std::complex<double>;
using Triplet = Eigen::Triplet<double>;

Indexing build_indexing(const Network& net) {
  Indexing ix;
  ix.n_bus = net.n_buses();
  ix.n_line = net.n_branches();
  ix.n_gen = net.n_generators();
  ix.slack = net.slack_bus();

  auto index_of = [&](int id) { return net.bus_index(id); };
  for (const Branch& br : net.branches) {
    ix.from.push_back(index_of(br.from_bus));
    ix.to.push_back(index_of(br.to_bus));
  }
  bool slack_gen_found = false;
  for (std::size_t g = 0; g < ix.n_gen; ++g) {
    std::size_t b = index_of(net.generators[g].bus);
    ix.gen_bus.push_back(b);
    if (b == ix.slack && !slack_gen_found) {
      ix.slack_gen = g;
      slack_gen_found = true;
    }
  }
  if (!slack_gen_found) throw ValidationError("slack bus hosts no generator");

  ix.ns_pos.assign(ix.n_bus, -1);
  ix.pq_pos.assign(ix.n_bus, -1);
  ix.gbus_pos.assign(ix.n_bus, -1);
  for (std::size_t k = 0; k < ix.n_bus; ++k) {
    const BusKind kind = net.buses[k].kind;
    if (kind != BusKind::Slack) {
      ix.ns_pos[k] = static_cast<int>(ix.ns.size());
      ix.ns.push_back(k);
    }
    if (kind == BusKind::PQ) {
      ix.pq_pos[k] = static_cast<int>(ix.pq.size());
      ix.pq.push_back(k);
    } else {
      ix.gbus_pos[k] = static_cast<int>(ix.gbus.size());
      ix.gbus.push_back(k);
    }
  }
  return ix;
}

IncidenceSet build_incidence(const Network& net) {
  const Indexing ix = build_indexing(net);
  const auto nb = static_cast<Eigen::Index>(ix.n_bus);
  const auto nl = static_cast<Eigen::Index>(ix.n_line);
  std::vector<Triplet> ef, et, e, ens, c;
  for (std::size_t l = 0; l < ix.n_line; ++l) {
    const auto li = static_cast<int>(l);
    ef.emplace_back(ix.from[l], li, 1.0);
    et.emplace_back(ix.to[l], li, 1.0);
    e.emplace_back(ix.from[l], li, 1.0);
    e.emplace_back(ix.to[l], li, -1.0);
    if (ix.ns_pos[ix.from[l]] >= 0) ens.emplace_back(ix.ns_pos[ix.from[l]], li, 1.0);
    if (ix.ns_pos[ix.to[l]] >= 0) ens.emplace_back(ix.ns_pos[ix.to[l]], li, -1.0);
  }
  for (std::size_t g = 0; g < ix.n_gen; ++g) {
    c.emplace_back(ix.gen_bus[g], static_cast<int>(g), 1.0);
  }
  IncidenceSet inc;
  inc.Ef.resize(nb, nl);
  inc.Et.resize(nb, nl);
  inc.E.resize(nb, nl);
  inc.Ens.resize(static_cast<Eigen::Index>(ix.n_ns()), nl);
  inc.C.resize(nb, static_cast<Eigen::Index>(ix.n_gen));
  inc.Ef.setFromTriplets(ef.begin(), ef.end());
  inc.Et.setFromTriplets(et.begin(), et.end());
  inc.E.setFromTriplets(e.begin(), e.end());
  inc.Ens.setFromTriplets(ens.begin(), ens.end());
  inc.C.setFromTriplets(c.begin(), c.end());
  return inc;
}

SpMat AdmittanceSet::Gd_matrix() const {
  SpMat m(Gd.size(), Gd.size());
  m = Gd.asDiagonal();
  return m;
}

SpMat AdmittanceSet::Bd_matrix() const {
  SpMat m(Bd.size(), Bd.size());
  m = Bd.asDiagonal();
  return m;
}

AdmittanceSet build_admittances(const Network& net, const VectorXd& phi0) {
  const Indexing ix = build_indexing(net);
  if (static_cast<std::size_t>(phi0.size()) != ix.n_line) {
    throw std::invalid_argument("phi0 length must equal the line count");
  }
  const auto nl = static_cast<Eigen::Index>(ix.n_line);
  const auto nb = static_cast<Eigen::Index>(ix.n_bus);
  const Complex j(0.0, 1.0);

  AdmittanceSet a;
  a.phi0 = phi0;
  a.Yff.resize(nl);
  a.Ytt.resize(nl);
  a.Yft.resize(nl);
  a.Ytf.resize(nl);
  a.Yft_hat.resize(nl);
  a.Ytf_hat.resize(nl);
  a.Ysh.resize(nb);
  for (Eigen::Index l = 0; l < nl; ++l) {
    const Branch& br = net.branches[static_cast<std::size_t>(l)];
    const Complex y = 1.0 / Complex(br.r, br.x);
    const Complex ych = y + j * (br.charging / 2.0);
    const double tau = br.tap;
    a.Yff[l] = ych / (tau * tau);
    a.Ytt[l] = ych;
    a.Yft[l] = -y / (tau * std::exp(-j * br.shift));
    a.Ytf[l] = -y / (tau * std::exp(j * br.shift));
    a.Yft_hat[l] = a.Yft[l] * std::exp(-j * phi0[l]);
    a.Ytf_hat[l] = a.Ytf[l] * std::exp(j * phi0[l]);
  }
  for (Eigen::Index k = 0; k < nb; ++k) {
    const Bus& b = net.buses[static_cast<std::size_t>(k)];
    a.Ysh[k] = Complex(b.shunt_g, b.shunt_b);
  }

  std::vector<Triplet> gc, gs, bc, bs;
  VectorXcd yd = a.Ysh;
  for (Eigen::Index l = 0; l < nl; ++l) {
    const auto f = static_cast<int>(ix.from[static_cast<std::size_t>(l)]);
    const auto t = static_cast<int>(ix.to[static_cast<std::size_t>(l)]);
    const auto li = static_cast<int>(l);
    const Complex yf = a.Yft_hat[l], yt = a.Ytf_hat[l];
    gc.emplace_back(f, li, yf.real());
    gc.emplace_back(t, li, yt.real());
    bc.emplace_back(f, li, yf.imag());
    bc.emplace_back(t, li, yt.imag());
    gs.emplace_back(f, li, yf.real());
    gs.emplace_back(t, li, -yt.real());
    bs.emplace_back(f, li, yf.imag());
    bs.emplace_back(t, li, -yt.imag());
    yd[f] += a.Yff[l];
    yd[t] += a.Ytt[l];
  }
  a.Gc.resize(nb, nl);
  a.Gs.resize(nb, nl);
  a.Bc.resize(nb, nl);
  a.Bs.resize(nb, nl);
  a.Gc.setFromTriplets(gc.begin(), gc.end());
  a.Gs.setFromTriplets(gs.begin(), gs.end());
  a.Bc.setFromTriplets(bc.begin(), bc.end());
  a.Bs.setFromTriplets(bs.begin(), bs.end());
  a.Gd = yd.real();
  a.Bd = yd.imag();
  return a;
}

Eigen::SparseMatrix<Complex> build_ybus(const Network& net) {
  const Indexing ix = build_indexing(net);
  const AdmittanceSet a =
      build_admittances(net, VectorXd::Zero(static_cast<Eigen::Index>(ix.n_line)));
  std::vector<Eigen::Triplet<Complex>> t;
  for (std::size_t l = 0; l < ix.n_line; ++l) {
    const auto li = static_cast<Eigen::Index>(l);
    const auto f = static_cast<int>(ix.from[l]), to = static_cast<int>(ix.to[l]);
    t.emplace_back(f, f, a.Yff[li]);
    t.emplace_back(to, to, a.Ytt[li]);
    t.emplace_back(f, to, a.Yft[li]);
    t.emplace_back(to, f, a.Ytf[li]);
  }
  for (std::size_t k = 0; k < ix.n_bus; ++k) {
    t.emplace_back(static_cast<int>(k), static_cast<int>(k),
                   a.Ysh[static_cast<Eigen::Index>(k)]);
  }
  const auto nb = static_cast<Eigen::Index>(ix.n_bus);
  Eigen::SparseMatrix<Complex> y(nb, nb);
  y.setFromTriplets(t.begin(), t.end());
  return y;
}

}  // namespace feaspath
