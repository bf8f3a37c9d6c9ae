#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "lbe/config.hpp"

namespace lbe {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;
inline constexpr int kExitConfig = 2;

struct CommandOutcome {
    int exit_code = kExitOk;
    nlohmann::json report;            // also written to <command>.json
    std::vector<std::string> artifacts;  // file names relative to the output directory
};

// Output files and their columns or fields, for --help.
std::string command_schema(const std::string& command);
std::string command_summary(const std::string& command);

// Runs a validated config and writes its artifacts. Computation errors become
// exit 1 with the reason recorded in the report.
CommandOutcome run_command(const RunConfig& cfg, std::ostream& log);

// RFC 4180 field quoting.
std::string csv_field(const std::string& s);

}  // namespace lbe
