#pragma once

#include "gilt/operators.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gilt {

/// Parsed experiment configuration. Scenario-specific knobs live in params and
/// are validated by the scenario before any computation starts.
struct ExperimentConfig {
    std::string scenario;
    int grid_n = 1024;
    std::uint64_t master_seed = 20260810;
    std::string out_dir = "results";
    nlohmann::json params = nlohmann::json::object();

    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig from_file(const std::string& path);
};

/// One verification row. pass is decided by the scenario's declared tolerance
/// at emission time, never post-hoc.
struct ResultRow {
    std::string scenario;
    std::string verifies;  // stable anchor slug for the claim being checked
    std::string params;    // semicolon-separated key=value list
    double estimate = 0.0;
    double std_error = 0.0;
    std::optional<double> oracle;
    bool pass = false;
    std::uint64_t seed = 0;
};

struct ScenarioInfo {
    std::string name;
    std::string description;
};

/// Alphabetical scenario listing.
std::vector<ScenarioInfo> list_scenarios();

std::vector<ResultRow> run_scenario(const ExperimentConfig& config);

/// CSV body is byte-identical across reruns with the same config and seed;
/// timestamps and wall times go to a <path>.meta.json sidecar.
void write_csv(const std::string& path, std::span<const ResultRow> rows, double wall_seconds);

std::string csv_body(std::span<const ResultRow> rows);

/// Builds an operator from its config description (used by scenario configs).
OperatorSpec operator_from_json(const Grid& g, const nlohmann::json& j);

struct SelftestResult {
    bool all_pass = false;
    double wall_seconds = 0.0;
    std::vector<ResultRow> rows;
};

/// Runs every scenario with its default parameters at the given seed, writing
/// one CSV per scenario under out_dir. Deterministic given (seed, configs).
SelftestResult selftest(std::uint64_t seed, const std::string& out_dir);

}  // namespace gilt
