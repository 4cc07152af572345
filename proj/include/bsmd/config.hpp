#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "bsmd/workload.hpp"

namespace bsmd {

// Everything `run-sim` needs. The JSON layout groups the scenario fields into
// scenario, network, consensus and privacy sections; see docs/formats.md.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  ScenarioConfig scenario;
};

// Throws Config with "<json path>: <reason>" for unknown keys, wrong types
// and out-of-range values; Parse for malformed JSON.
RunConfig parse_run_config(std::string_view json_text);
// As above; Io naming the path when the file cannot be read.
RunConfig load_run_config(const std::string& path);
// Canonical JSON (sorted keys, two-space indent) that parses back to the
// same configuration.
std::string to_json(const RunConfig& config);

}  // namespace bsmd
