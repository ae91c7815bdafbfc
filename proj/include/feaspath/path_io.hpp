#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "feaspath/sequential.hpp"

namespace feaspath {

inline constexpr const char* kPathSchema = "feaspath.path/1";
inline constexpr const char* kDispatchSchema = "feaspath.dispatch/1";

/// Per-generator setpoints in file units (MW, p.u.), one entry per
/// in-service generator in case order.
struct Dispatch {
  std::string label;
  VectorXd p_mw, v_pu;
  std::optional<VectorXd> q_mvar;
  std::optional<double> cost;
};

/// @throws ParseError on malformed documents or a schema mismatch.
Dispatch parse_dispatch(std::string_view text);
Dispatch read_dispatch(const std::string& file);
std::string write_dispatch(const Dispatch& d);

/// Control vector for a dispatch. Missing reactive setpoints fall back to
/// the case file values. @throws ConfigError on length mismatch.
VectorXd dispatch_control(const Model& m, const Dispatch& d);

/// Dispatch holding the case file setpoints.
Dispatch file_dispatch(const Network& net);

/**
 * Path document: schema tag, run settings, one object per setpoint (u, cost,
 * restriction data, optional segment certificate), and a separate "stats"
 * block holding the timing fields.
 */
std::string write_path(const FeasiblePath& path,
                       const CertificationReport* cert = nullptr);

/// @throws ParseError on malformed documents or a schema mismatch.
FeasiblePath parse_path(std::string_view text);
FeasiblePath read_path(const std::string& file);

/// Reads a whole file; @throws ParseError when unreadable.
std::string read_text(const std::string& file);

}  // namespace feaspath
