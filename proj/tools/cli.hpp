#pragma once

#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hdinf/simulate.hpp"

namespace hdinf::cli {

/// Version of the JSON/CSV output layout.
inline constexpr int kSchemaVersion = 1;

enum ExitCode : int { kOk = 0, kUsage = 2, kNumerical = 3 };

/// Runs one command line (without the program name). Results go to files or
/// `out`; diagnostics and error JSON go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Simulation config from JSON; unknown keys are rejected.
SimConfig sim_config_from_json(const nlohmann::json& j);
nlohmann::json sim_config_to_json(const SimConfig& c);

/// 64-bit FNV-1a of a byte string, as 16 hex digits.
std::string content_hash(std::string_view bytes);

}  // namespace hdinf::cli
