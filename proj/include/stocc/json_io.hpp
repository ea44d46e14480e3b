#pragma once

// JSON mappings for configuration and manifest records.

#include <json.hpp>

#include "stocc/sampler.hpp"
#include "stocc/simulator.hpp"

namespace stocc {

using Json = nlohmann::json;

Json to_json(const ModelParams& p);
ModelParams params_from_json(const Json& j);

/// Unset phi bounds serialise as null.
Json to_json(const PriorSpec& p);
/// Missing keys keep their defaults. Throws UsageError on malformed values.
PriorSpec priors_from_json(const Json& j, PriorSpec base = {});

Json to_json(const MCMCConfig& c);
MCMCConfig mcmc_from_json(const Json& j, MCMCConfig base = {});

Json to_json(const ScenarioSpec& s);
/// Requires "id"; other keys override the defaults of make_scenario.
ScenarioSpec scenario_from_json(const Json& j);

/// Reads a JSON file. Throws DataError if it is missing or malformed.
Json read_json_file(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline.
void write_json_file(const std::filesystem::path& path, const Json& j);

}  // namespace stocc
