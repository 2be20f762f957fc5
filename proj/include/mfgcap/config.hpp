#pragma once

// Scenario files: JSON documents with the sections market, price, demand,
// planner, grid, initial, training and seeds. Unknown keys are rejected and
// errors name the offending key ("training.batch", "planner", ...).

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "mfgcap/mfg_solver.hpp"
#include "mfgcap/stackelberg_solver.hpp"

namespace mfgcap {

struct RunConfig {
    std::string description;
    MarketParams market;
    Grid grid;
    double mu0 = 1000.0;
    std::optional<DemandSpec> demand;
    std::optional<PlannerParams> planner;
    TrainingConfig training;
};

/// Throws ConfigError for unknown keys, wrong types and invalid values.
RunConfig parse_config(const nlohmann::json& doc);

/// Reads and parses a file; malformed JSON and unreadable files are ConfigErrors.
RunConfig load_config(const std::filesystem::path& path);

/// Fully resolved echo of a configuration; parse_config(to_json(c)) == c.
nlohmann::json to_json(const RunConfig& config);

MfgScenario mfg_scenario(const RunConfig& config);

/// Throws ConfigError("planner" / "demand") when a section is missing.
StackelbergScenario stackelberg_scenario(const RunConfig& config);

}  // namespace mfgcap
