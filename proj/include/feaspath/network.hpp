#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "feaspath/errors.hpp"

namespace feaspath {

enum class BusKind { PQ, PV, Slack };

struct Bus {
  int id = 0;
  BusKind kind = BusKind::PQ;
  double p_load = 0.0;
  double q_load = 0.0;
  double v_min = 0.9;
  double v_max = 1.1;
  double shunt_g = 0.0;
  double shunt_b = 0.0;
  // Voltage magnitude and angle stored in the file; used as a warm start.
  double v_init = 1.0;
  double theta_init = 0.0;
  double base_kv = 0.0;
};

/// Polynomial cost c2*p^2 + c1*p + c0 with p in per-unit.
struct CostPolynomial {
  double c2 = 0.0;
  double c1 = 0.0;
  double c0 = 0.0;

  double operator()(double p) const { return (c2 * p + c1) * p + c0; }
  double derivative(double p) const { return 2.0 * c2 * p + c1; }
};

struct Generator {
  int bus = 0;  // bus id, not index
  double p_min = 0.0;
  double p_max = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;
  double v_setpoint = 1.0;
  // Dispatch stored in the file.
  double p_setpoint = 0.0;
  double q_setpoint = 0.0;
  CostPolynomial cost;

  bool fixed_reactive() const { return q_min == q_max; }
};

struct Branch {
  int from_bus = 0;
  int to_bus = 0;
  double r = 0.0;
  double x = 0.0;
  double charging = 0.0;
  double tap = 1.0;
  double shift = 0.0;                // radians
  std::optional<double> s_max;       // per-unit; absent means unlimited
  double phi_min = 0.0;              // radians, in [-pi, 0]
  double phi_max = 0.0;              // radians, in [0, pi]
};

/// Immutable per-unit grid model. Only in-service elements are kept.
struct Network {
  std::string name;
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Generator> generators;
  std::vector<Branch> branches;

  std::size_t n_buses() const { return buses.size(); }
  std::size_t n_generators() const { return generators.size(); }
  std::size_t n_branches() const { return branches.size(); }

  /// Index of the bus with the given id; throws std::out_of_range.
  std::size_t bus_index(int id) const;

  /// Index of the single slack bus.
  std::size_t slack_bus() const;

  /// Sum of all generator costs for an active-power vector in per-unit.
  double cost(const std::vector<double>& p_gen) const;
};

/// Checks every Network invariant and throws ValidationError on the first
/// violation found.
void validate(const Network& net);

}  // namespace feaspath
