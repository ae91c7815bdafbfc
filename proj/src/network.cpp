#include "feaspath/network.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <set>

namespace feaspath {

std::size_t Network::bus_index(int id) const {
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].id == id) return i;
  }
  throw std::out_of_range("unknown bus id " + std::to_string(id));
}

std::size_t Network::slack_bus() const {
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].kind == BusKind::Slack) return i;
  }
  throw ValidationError("network has no slack bus");
}

double Network::cost(const std::vector<double>& p_gen) const {
  double total = 0.0;
  for (std::size_t i = 0; i < generators.size(); ++i) {
    total += generators[i].cost(p_gen.at(i));
  }
  return total;
}

void validate(const Network& net) {
  if (net.base_mva <= 0.0) throw ValidationError("baseMVA must be positive");
  if (net.buses.empty()) throw ValidationError("network has no buses");

  std::map<int, std::size_t> index;
  std::size_t slack_count = 0;
  for (std::size_t i = 0; i < net.buses.size(); ++i) {
    const Bus& b = net.buses[i];
    if (!index.emplace(b.id, i).second) {
      throw ValidationError("duplicate bus id " + std::to_string(b.id));
    }
    if (!(b.v_min <= b.v_max)) {
      throw ValidationError("bus " + std::to_string(b.id) + ": v_min > v_max");
    }
    if (b.v_min <= 0.0) {
      throw ValidationError("bus " + std::to_string(b.id) +
                            ": v_min must be positive");
    }
    if (b.kind == BusKind::Slack) {
      ++slack_count;
      if (b.theta_init != 0.0) {
        throw ValidationError("slack bus reference angle must be zero");
      }
    }
  }
  if (slack_count != 1) {
    throw ValidationError("expected exactly one slack bus, found " +
                          std::to_string(slack_count));
  }

  std::vector<int> gens_at(net.buses.size(), 0);
  std::map<int, double> setpoint;
  for (const Generator& g : net.generators) {
    auto it = index.find(g.bus);
    if (it == index.end()) {
      throw ValidationError("generator at unknown bus " + std::to_string(g.bus));
    }
    if (!(g.p_min <= g.p_max) || !(g.q_min <= g.q_max)) {
      throw ValidationError("generator at bus " + std::to_string(g.bus) +
                            ": inverted limits");
    }
    if (g.cost.c1 < 0.0 || g.cost.c2 < 0.0) {
      throw UnsupportedCostError("generator at bus " + std::to_string(g.bus) +
                                 ": cost is not monotone increasing");
    }
    ++gens_at[it->second];
    const BusKind kind = net.buses[it->second].kind;
    if (kind != BusKind::PQ) {
      auto [sp, fresh] = setpoint.emplace(g.bus, g.v_setpoint);
      if (!fresh && sp->second != g.v_setpoint) {
        throw ValidationError("co-located generators at bus " +
                              std::to_string(g.bus) +
                              " disagree on voltage setpoint");
      }
    }
  }
  for (std::size_t i = 0; i < net.buses.size(); ++i) {
    if (net.buses[i].kind != BusKind::PQ && gens_at[i] == 0) {
      throw ValidationError("bus " + std::to_string(net.buses[i].id) +
                            " is PV/slack but hosts no generator");
    }
  }

  if (net.branches.empty() && net.buses.size() > 1) {
    throw ValidationError("network is disconnected (no branches)");
  }
  std::vector<std::size_t> parent(net.buses.size());
  for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = i;
  auto find = [&](std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (const Branch& br : net.branches) {
    auto f = index.find(br.from_bus), t = index.find(br.to_bus);
    if (f == index.end() || t == index.end()) {
      throw ValidationError("branch references unknown bus");
    }
    if (f->second == t->second) {
      throw ValidationError("branch is a self loop at bus " +
                            std::to_string(br.from_bus));
    }
    if (!(br.tap > 0.0)) throw ValidationError("branch tap ratio must be > 0");
    if (br.r == 0.0 && br.x == 0.0) {
      throw ValidationError("branch has zero impedance");
    }
    constexpr double pi = std::numbers::pi;
    if (!(br.phi_min >= -pi && br.phi_min <= 0.0 && br.phi_max >= 0.0 &&
          br.phi_max <= pi)) {
      throw ValidationError("branch angle limits outside [-pi, 0] x [0, pi]");
    }
    if (br.s_max && !(*br.s_max > 0.0)) {
      throw ValidationError("branch flow limit must be positive");
    }
    parent[find(f->second)] = find(t->second);
  }
  std::set<std::size_t> roots;
  for (std::size_t i = 0; i < parent.size(); ++i) roots.insert(find(i));
  if (roots.size() != 1) throw ValidationError("network is disconnected");
}

}  // namespace feaspath
