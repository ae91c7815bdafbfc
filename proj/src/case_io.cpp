#include "feaspath/case_io.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

namespace feaspath {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDefaultAngle = kPi / 3.0;

struct Table {
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> lines;
  std::size_t start_line = 0;
};

struct RawCase {
  std::optional<double> base_mva;
  std::map<std::string, Table> tables;
};

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\'') quoted = !quoted;
    if (line[i] == '%' && !quoted) return line.substr(0, i);
  }
  return line;
}

double parse_number(const std::string& tok, std::size_t line) {
  if (tok == "Inf" || tok == "inf" || tok == "+Inf") {
    return std::numeric_limits<double>::infinity();
  }
  if (tok == "-Inf" || tok == "-inf") {
    return -std::numeric_limits<double>::infinity();
  }
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    throw ParseError("invalid number '" + tok + "'", line);
  }
  if (used != tok.size()) throw ParseError("invalid number '" + tok + "'", line);
  return v;
}

// Splits matrix body text into rows; ';' and newlines end rows.
void append_rows(Table& table, const std::string& body, std::size_t line) {
  std::vector<double> row;
  std::string tok;
  auto flush_tok = [&] {
    if (!tok.empty()) {
      row.push_back(parse_number(tok, line));
      tok.clear();
    }
  };
  auto flush_row = [&] {
    flush_tok();
    if (!row.empty()) {
      table.rows.push_back(std::move(row));
      table.lines.push_back(line);
      row.clear();
    }
  };
  for (char c : body) {
    if (c == ';') {
      flush_row();
    } else if (c == ' ' || c == '\t' || c == ',' || c == '\r') {
      flush_tok();
    } else {
      tok.push_back(c);
    }
  }
  flush_row();
}

RawCase tokenize(std::string_view text) {
  RawCase raw;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  Table* open = nullptr;
  bool in_cell = false;
  std::size_t open_line = 0;

  while (std::getline(in, line)) {
    ++lineno;
    std::string s = strip_comment(line);
    if (in_cell) {
      if (s.find('}') != std::string::npos) in_cell = false;
      continue;
    }
    if (open) {
      auto close = s.find(']');
      append_rows(*open, s.substr(0, close), lineno);
      if (close != std::string::npos) open = nullptr;
      continue;
    }
    auto pos = s.find("mpc.");
    if (pos == std::string::npos) continue;
    auto eq = s.find('=', pos);
    if (eq == std::string::npos) continue;
    std::string name = s.substr(pos + 4, eq - pos - 4);
    while (!name.empty() && std::isspace(static_cast<unsigned char>(name.back()))) {
      name.pop_back();
    }
    std::string rhs = s.substr(eq + 1);
    auto first = rhs.find_first_not_of(" \t");
    if (first == std::string::npos) {
      throw ParseError("missing value for mpc." + name, lineno);
    }
    char lead = rhs[first];
    if (lead == '[') {
      Table& t = raw.tables[name];
      t = Table{};
      t.start_line = lineno;
      open_line = lineno;
      std::string body = rhs.substr(first + 1);
      auto close = body.find(']');
      append_rows(t, body.substr(0, close), lineno);
      if (close == std::string::npos) open = &t;
    } else if (lead == '{') {
      if (rhs.find('}') == std::string::npos) in_cell = true;
    } else if (lead == '\'') {
      continue;
    } else if (name == "baseMVA") {
      std::string v = rhs.substr(first);
      auto semi = v.find(';');
      v = v.substr(0, semi);
      while (!v.empty() && std::isspace(static_cast<unsigned char>(v.back()))) v.pop_back();
      raw.base_mva = parse_number(v, lineno);
    }
  }
  if (open) throw ParseError("unterminated matrix starting here", open_line);
  if (in_cell) throw ParseError("unterminated cell array", lineno);
  return raw;
}

const Table& require(const RawCase& raw, const std::string& name,
                     std::size_t min_cols) {
  auto it = raw.tables.find(name);
  if (it == raw.tables.end()) throw ParseError("missing table mpc." + name);
  const Table& t = it->second;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    if (t.rows[i].size() < min_cols) {
      throw ParseError("mpc." + name + " row has " +
                           std::to_string(t.rows[i].size()) +
                           " columns, expected at least " +
                           std::to_string(min_cols),
                       t.lines[i]);
    }
  }
  return t;
}

int as_int(double v, std::size_t line) {
  if (v != std::floor(v)) throw ParseError("expected an integer", line);
  return static_cast<int>(v);
}

double angle_limit(const std::vector<double>& row, std::size_t col,
                   double fallback) {
  if (row.size() <= col) return fallback;
  double deg = row[col];
  if (deg == 0.0 || std::abs(deg) >= 360.0) return fallback;
  return deg * kPi / 180.0;
}

CostPolynomial parse_cost(const std::vector<double>& row, double base,
                          std::size_t line) {
  int model = as_int(row[0], line);
  if (model == 1) {
    throw UnsupportedCostError("line " + std::to_string(line) +
                               ": piecewise-linear cost is not supported");
  }
  if (model != 2) throw ParseError("unknown cost model", line);
  int n = as_int(row[3], line);
  if (n < 0 || row.size() < 4 + static_cast<std::size_t>(n)) {
    throw ParseError("gencost row shorter than NCOST", line);
  }
  // Coefficients are listed highest degree first.
  CostPolynomial c;
  for (int k = 0; k < n; ++k) {
    int degree = n - 1 - k;
    double coef = row[4 + k];
    if (degree > 2) {
      if (coef != 0.0) {
        throw UnsupportedCostError("line " + std::to_string(line) +
                                   ": cost polynomial degree exceeds 2");
      }
    } else if (degree == 2) {
      c.c2 = coef * base * base;
    } else if (degree == 1) {
      c.c1 = coef * base;
    } else {
      c.c0 = coef;
    }
  }
  if (c.c2 < 0.0 || c.c1 < 0.0) {
    throw UnsupportedCostError("line " + std::to_string(line) +
                               ": cost is not monotone increasing");
  }
  return c;
}

}  // namespace

Network parse_case(std::string_view text, std::string name) {
  RawCase raw = tokenize(text);
  if (!raw.base_mva) throw ParseError("missing mpc.baseMVA");
  Network net;
  net.name = std::move(name);
  net.base_mva = *raw.base_mva;
  const double base = net.base_mva;
  if (!(base > 0.0)) throw ValidationError("baseMVA must be positive");

  const Table& bus = require(raw, "bus", 13);
  const Table& gen = require(raw, "gen", 10);
  const Table& branch = require(raw, "branch", 11);

  std::map<int, std::size_t> index;
  for (std::size_t i = 0; i < bus.rows.size(); ++i) {
    const auto& r = bus.rows[i];
    int type = as_int(r[1], bus.lines[i]);
    if (type < 1 || type > 4) throw ParseError("invalid bus type", bus.lines[i]);
    if (type == 4) continue;
    Bus b;
    b.id = as_int(r[0], bus.lines[i]);
    b.kind = type == 3 ? BusKind::Slack : type == 2 ? BusKind::PV : BusKind::PQ;
    b.p_load = r[2] / base;
    b.q_load = r[3] / base;
    b.shunt_g = r[4] / base;
    b.shunt_b = r[5] / base;
    b.v_init = r[7];
    b.theta_init = r[8] * kPi / 180.0;
    b.base_kv = r[9];
    b.v_max = r[11];
    b.v_min = r[12];
    if (!index.emplace(b.id, net.buses.size()).second) {
      throw ValidationError("duplicate bus id " + std::to_string(b.id));
    }
    net.buses.push_back(b);
  }

  std::vector<CostPolynomial> costs;
  auto gc = raw.tables.find("gencost");
  if (gc != raw.tables.end()) {
    const Table& t = require(raw, "gencost", 4);
    if (t.rows.size() < gen.rows.size()) {
      throw ParseError("gencost has fewer rows than gen", t.start_line);
    }
    for (std::size_t i = 0; i < gen.rows.size(); ++i) {
      costs.push_back(parse_cost(t.rows[i], base, t.lines[i]));
    }
  } else {
    costs.assign(gen.rows.size(), CostPolynomial{0.0, base, 0.0});
  }

  std::vector<int> gens_at(net.buses.size(), 0);
  for (std::size_t i = 0; i < gen.rows.size(); ++i) {
    const auto& r = gen.rows[i];
    if (r[7] <= 0.0) continue;
    Generator g;
    g.bus = as_int(r[0], gen.lines[i]);
    auto it = index.find(g.bus);
    if (it == index.end()) {
      throw ValidationError("generator at unknown or isolated bus " +
                            std::to_string(g.bus));
    }
    g.p_setpoint = r[1] / base;
    g.q_setpoint = r[2] / base;
    g.q_max = r[3] / base;
    g.q_min = r[4] / base;
    g.v_setpoint = r[5];
    g.p_max = r[8] / base;
    g.p_min = r[9] / base;
    g.cost = costs[i];
    if (g.fixed_reactive()) {
      net.buses[it->second].q_load -= g.q_max;
      g.q_min = g.q_max = g.q_setpoint = 0.0;
    }
    ++gens_at[it->second];
    net.generators.push_back(g);
  }

  for (std::size_t i = 0; i < branch.rows.size(); ++i) {
    const auto& r = branch.rows[i];
    if (r[10] <= 0.0) continue;
    Branch br;
    br.from_bus = as_int(r[0], branch.lines[i]);
    br.to_bus = as_int(r[1], branch.lines[i]);
    if (!index.count(br.from_bus) || !index.count(br.to_bus)) continue;
    br.r = r[2];
    br.x = r[3];
    br.charging = r[4];
    if (r[5] > 0.0) br.s_max = r[5] / base;
    br.tap = r[8] == 0.0 ? 1.0 : r[8];
    br.shift = r[9] * kPi / 180.0;
    br.phi_min = angle_limit(r, 11, -kDefaultAngle);
    br.phi_max = angle_limit(r, 12, kDefaultAngle);
    net.branches.push_back(br);
  }

  for (std::size_t i = 0; i < net.buses.size(); ++i) {
    if (net.buses[i].kind == BusKind::PV && gens_at[i] == 0) {
      net.buses[i].kind = BusKind::PQ;
    }
  }
  // Generator buses hold their setpoint; the reference angle is zero.
  for (const Generator& g : net.generators) {
    Bus& b = net.buses[index.at(g.bus)];
    if (b.kind != BusKind::PQ) b.v_init = g.v_setpoint;
  }
  for (const Bus& b : net.buses) {
    if (b.kind == BusKind::Slack) {
      double ref = b.theta_init;
      for (Bus& o : net.buses) o.theta_init -= ref;
      break;
    }
  }

  validate(net);
  return net;
}

Network read_case(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_case(ss.str(), path.stem().string());
}

std::string write_case(const Network& net) {
  const double base = net.base_mva;
  std::ostringstream out;
  out << std::setprecision(17);
  out << "function mpc = " << (net.name.empty() ? "feaspath_case" : net.name)
      << "\nmpc.version = '2';\nmpc.baseMVA = " << base << ";\n\n";

  out << "%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin\n";
  out << "mpc.bus = [\n";
  for (const Bus& b : net.buses) {
    int type = b.kind == BusKind::Slack ? 3 : b.kind == BusKind::PV ? 2 : 1;
    out << '\t' << b.id << '\t' << type << '\t' << b.p_load * base << '\t'
        << b.q_load * base << '\t' << b.shunt_g * base << '\t'
        << b.shunt_b * base << "\t1\t" << b.v_init << '\t'
        << b.theta_init * 180.0 / kPi << '\t' << b.base_kv << "\t1\t"
        << b.v_max << '\t' << b.v_min << ";\n";
  }
  out << "];\n\n";

  out << "%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin\n";
  out << "mpc.gen = [\n";
  for (const Generator& g : net.generators) {
    out << '\t' << g.bus << '\t' << g.p_setpoint * base << '\t'
        << g.q_setpoint * base << '\t' << g.q_max * base << '\t'
        << g.q_min * base << '\t' << g.v_setpoint << '\t' << base << "\t1\t"
        << g.p_max * base << '\t' << g.p_min * base << ";\n";
  }
  out << "];\n\n";

  out << "%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax\n";
  out << "mpc.branch = [\n";
  for (const Branch& br : net.branches) {
    double rate = br.s_max ? *br.s_max * base : 0.0;
    out << '\t' << br.from_bus << '\t' << br.to_bus << '\t' << br.r << '\t'
        << br.x << '\t' << br.charging << '\t' << rate << '\t' << rate << '\t'
        << rate << '\t' << br.tap << '\t' << br.shift * 180.0 / kPi << "\t1\t"
        << br.phi_min * 180.0 / kPi << '\t' << br.phi_max * 180.0 / kPi
        << ";\n";
  }
  out << "];\n\n";

  out << "%\t2\tstartup\tshutdown\tn\tc2\tc1\tc0\n";
  out << "mpc.gencost = [\n";
  for (const Generator& g : net.generators) {
    out << "\t2\t0\t0\t3\t" << g.cost.c2 / (base * base) << '\t'
        << g.cost.c1 / base << '\t' << g.cost.c0 << ";\n";
  }
  out << "];\n";
  return out.str();
}

}  // namespace feaspath
