#pragma once

#include <string>
#include <vector>

#include "corona_lab/weight.hpp"

namespace corona_lab {

// Result of one subcommand: the emitted document and the invariants that failed.
struct RunOutcome {
  std::string output;
  std::string format;  // "json" or "csv"
  std::string resolved_config;  // JSON, also embedded in JSON outputs
  std::vector<std::string> failed;
  bool passed() const { return failed.empty(); }
};

const char* artifact_version();

// Subcommands: weight, goodbad, pivotal, corona, norms, decompose, extrapolate, sweep.
// Configuration problems raise Error(ErrorKind::Config).
RunOutcome run_command(const std::string& command, const std::string& config_json);

std::vector<std::string> command_names();

// Weight spec JSON: {"kind", "dim", "level", "params": {...}}; params may also sit at top level.
WeightSpec weight_spec_from_json(const std::string& text);

}  // namespace corona_lab
