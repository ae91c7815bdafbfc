#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "feaspath/network.hpp"

namespace feaspath {

/**
 * Parses MATPOWER case text (format version 2) into a validated per-unit
 * Network.
 *
 * Out-of-service generators and branches are dropped. PV buses left without
 * a generator become PQ. Generators with q_min == q_max keep their bus kind
 * and have their fixed reactive output folded into the bus load. Angle limits
 * that are missing, zero, or at the +/-360 degree "unbounded" convention
 * become +/-pi/3. A zero rating means no flow limit. A missing gencost table
 * gives every generator the cost p (per MW).
 *
 * @throws ParseError on malformed text, ValidationError on invariant
 *   violations, UnsupportedCostError for piecewise-linear or non-monotone
 *   cost models.
 */
Network parse_case(std::string_view text, std::string name = {});

/// Reads and parses a case file; the network name is the file stem.
Network read_case(const std::filesystem::path& path);

/// Serializes a Network back to MATPOWER text in MW/MVAr/degree units.
std::string write_case(const Network& net);

}  // namespace feaspath
