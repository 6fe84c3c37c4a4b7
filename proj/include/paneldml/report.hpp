#pragma once

#include "paneldml/dml.hpp"
#include "paneldml/logit.hpp"
#include "paneldml/panel.hpp"
#include "paneldml/robustness.hpp"
#include "paneldml/shapley.hpp"
#include "paneldml/synth.hpp"

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace paneldml {

// Text tables mirror the published report layouts; numbers use 4 decimals.
std::string render_lag_table(const Table1Report& report);
std::string render_dml_table(const DmlEstimate& estimate);
std::string render_placebo_table(const Table5Report& report);

nlohmann::json to_json(const AssemblyReport& report);
nlohmann::json to_json(const MarginalEffect& effect);
nlohmann::json to_json(const Table1Report& report);
nlohmann::json to_json(const ParamEstimate& param);
nlohmann::json to_json(const DmlEstimate& estimate);
nlohmann::json to_json(const Table5Report& report);
nlohmann::json to_json(const SeedSweepResult& result);
nlohmann::json to_json(const ScenarioResult& result);
nlohmann::json to_json(const GroundTruth& truth);

std::string sha256_hex(const std::filesystem::path& path);

/// Record of one CLI run: command, input digests, resolved configuration and
/// produced artifacts. Outputs are a pure function of this record.
struct RunManifest {
    std::string command;
    std::string tool_version;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> inputs; // path -> sha256
    nlohmann::json config;
    std::vector<std::string> outputs;
};

nlohmann::json to_json(const RunManifest& manifest);
void write_text_file(const std::filesystem::path& path, const std::string& content);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);

extern const char* kToolVersion;

} // namespace paneldml
