#include "feaspath/path_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace feaspath {

using nlohmann::json;

namespace {

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double to_num(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::infinity();
  return j.get<double>();
}

json vec(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
  return a;
}

VectorXd to_vec(const json& j) {
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = to_num(j[i]);
  return v;
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
}

void require_schema(const json& j, const char* schema) {
  if (!j.is_object() || !j.contains("schema") || j["schema"] != schema) {
    throw ParseError(std::string("expected document with schema \"") + schema + "\"");
  }
}

const char* objective_name(ObjectiveMode m) {
  switch (m) {
    case ObjectiveMode::Cost: return "cost";
    case ObjectiveMode::Distance: return "distance";
    case ObjectiveMode::None: return "none";
  }
  return "cost";
}

ObjectiveMode objective_from(const std::string& s) {
  if (s == "cost") return ObjectiveMode::Cost;
  if (s == "distance") return ObjectiveMode::Distance;
  if (s == "none") return ObjectiveMode::None;
  throw ParseError("unknown objective \"" + s + "\"");
}

json segment_json(const SegmentCertificate& s) {
  json margins = json::object();
  for (int c = 0; c < kLimitClassCount; ++c) {
    margins[to_string(static_cast<LimitClass>(c))] =
        num(s.worst_margin[static_cast<std::size_t>(c)]);
  }
  json j = {{"segment", s.segment}, {"samples", s.samples}, {"ok", s.ok},
            {"worst_margin", margins}};
  if (!s.ok) {
    j["failed_alpha"] = s.failed_alpha;
    j["failure"] = s.failure;
  }
  return j;
}

}  // namespace

std::string read_text(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ParseError("cannot open " + file);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Dispatch parse_dispatch(std::string_view text) {
  const json j = parse_json(text);
  require_schema(j, kDispatchSchema);
  try {
    Dispatch d;
    d.label = j.value("label", "");
    d.p_mw = to_vec(j.at("p_mw"));
    d.v_pu = to_vec(j.at("v_pu"));
    if (j.contains("q_mvar")) d.q_mvar = to_vec(j["q_mvar"]);
    if (j.contains("cost") && !j["cost"].is_null()) d.cost = j["cost"].get<double>();
    if (d.p_mw.size() != d.v_pu.size()) throw ParseError("p_mw and v_pu lengths differ");
    return d;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed dispatch: ") + e.what());
  }
}

Dispatch read_dispatch(const std::string& file) { return parse_dispatch(read_text(file)); }

std::string write_dispatch(const Dispatch& d) {
  json j = {{"schema", kDispatchSchema}, {"label", d.label}, {"p_mw", vec(d.p_mw)},
            {"v_pu", vec(d.v_pu)}};
  if (d.q_mvar) j["q_mvar"] = vec(*d.q_mvar);
  if (d.cost) j["cost"] = *d.cost;
  return j.dump(2) + "\n";
}

VectorXd dispatch_control(const Model& m, const Dispatch& d) {
  const auto ng = static_cast<Eigen::Index>(m.ix.n_gen);
  if (d.p_mw.size() != ng || (d.q_mvar && d.q_mvar->size() != ng)) {
    throw ConfigError("dispatch has " + std::to_string(d.p_mw.size()) +
                      " generators, case has " + std::to_string(ng));
  }
  const double base = m.net.base_mva;
  VectorXd q(ng);
  for (Eigen::Index g = 0; g < ng; ++g) {
    q[g] = d.q_mvar ? (*d.q_mvar)[g] / base
                    : m.net.generators[static_cast<std::size_t>(g)].q_setpoint;
  }
  return control_from_dispatch(m, d.p_mw / base, d.v_pu, q);
}

Dispatch file_dispatch(const Network& net) {
  Dispatch d;
  d.label = "case file setpoints";
  const auto ng = static_cast<Eigen::Index>(net.n_generators());
  d.p_mw.resize(ng);
  d.v_pu.resize(ng);
  VectorXd q(ng);
  for (Eigen::Index g = 0; g < ng; ++g) {
    const Generator& gen = net.generators[static_cast<std::size_t>(g)];
    d.p_mw[g] = gen.p_setpoint * net.base_mva;
    d.v_pu[g] = gen.v_setpoint;
    q[g] = gen.q_setpoint * net.base_mva;
  }
  d.q_mvar = q;
  return d;
}

std::string write_path(const FeasiblePath& path, const CertificationReport* cert) {
  json iters = json::array();
  json times = json::array(), solver_iters = json::array();
  for (std::size_t k = 0; k < path.setpoints.size(); ++k) {
    json it = {{"k", k}, {"u", vec(path.setpoints[k])}, {"cost", num(path.costs[k])}};
    if (k > 0) {
      const IterationRecord& r = path.records[k - 1];
      const PolytopeBounds& b = path.bounds[k - 1];
      it["restriction_objective"] = num(r.restriction_objective);
      it["step_norm"] = num(r.step_norm);
      it["bounds"] = {{"phi_hi", vec(b.phi_hi)}, {"phi_lo", vec(b.phi_lo)},
                      {"v_hi", vec(b.v_hi)}, {"v_lo", vec(b.v_lo)}};
      times.push_back(r.solve_time);
      solver_iters.push_back(r.solver_iterations);
      if (cert && k - 1 < cert->segments.size() && path.setpoints.size() > 1) {
        it["certificate"] = segment_json(cert->segments[k - 1]);
      }
    }
    iters.push_back(std::move(it));
  }
  json doc = {{"schema", kPathSchema},
              {"case", path.case_name},
              {"objective", objective_name(path.objective)},
              {"lambda", path.lambda},
              {"epsilon", path.epsilon},
              {"termination", path.termination},
              {"segments", path.records.size()},
              {"iterations", iters}};
  if (cert) {
    doc["certification"] = {{"certified", cert->certified},
                            {"samples", cert->samples},
                            {"worst_margin", num(cert->worst_margin)}};
  }
  doc["stats"] = {{"solve_time", times}, {"solver_iterations", solver_iters}};
  return doc.dump(2) + "\n";
}

FeasiblePath parse_path(std::string_view text) {
  const json j = parse_json(text);
  require_schema(j, kPathSchema);
  try {
    FeasiblePath p;
    p.case_name = j.at("case").get<std::string>();
    p.objective = objective_from(j.at("objective").get<std::string>());
    p.lambda = j.at("lambda").get<double>();
    p.epsilon = j.at("epsilon").get<double>();
    p.termination = j.at("termination").get<std::string>();
    const json& iters = j.at("iterations");
    const json& stats = j.at("stats");
    for (std::size_t k = 0; k < iters.size(); ++k) {
      const json& it = iters[k];
      p.setpoints.push_back(to_vec(it.at("u")));
      p.costs.push_back(to_num(it.at("cost")));
      if (k == 0) continue;
      IterationRecord r;
      r.iteration = static_cast<int>(k);
      r.cost = p.costs.back();
      r.restriction_objective = to_num(it.at("restriction_objective"));
      r.step_norm = to_num(it.at("step_norm"));
      r.solve_time = stats.at("solve_time").at(k - 1).get<double>();
      r.solver_iterations = stats.at("solver_iterations").at(k - 1).get<int>();
      p.records.push_back(r);
      const json& b = it.at("bounds");
      p.bounds.push_back({to_vec(b.at("phi_hi")), to_vec(b.at("phi_lo")),
                          to_vec(b.at("v_hi")), to_vec(b.at("v_lo"))});
    }
    if (p.setpoints.empty()) throw ParseError("path has no setpoints");
    return p;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed path document: ") + e.what());
  }
}

FeasiblePath read_path(const std::string& file) { return parse_path(read_text(file)); }

}  // namespace feaspath
