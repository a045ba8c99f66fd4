// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "xtal/agents/backend.hpp"
#include "xtal/agents/toolbox.hpp"
#include "xtal/energy/calculator.hpp"
#include "xtal/energy/relax.hpp"
#include "xtal/matcher/matcher.hpp"

namespace xtal {

struct BackendSettings {
    std::string kind = "scripted";  // scripted | http
    std::string fixture;            // scripted: JSON reply script
    HttpBackendConfig http;
};

struct CalculatorSettings {
    std::string kind = "pair";         // pair | subprocess
    std::vector<std::string> command;  // subprocess argv
    int timeout_ms = 30000;
};

/// Everything a run depends on. Loaded from one JSON file, overridden by
/// flags, and written back into the output directory as config.json.
/// Relative paths in a file are resolved against the file's directory.
struct RunConfig {
    BackendSettings backend;
    std::string database;   // retrieval DB, JSON-lines records
    std::string hull;       // convex-hull reference entries, JSON-lines
    std::string reference;  // novelty reference for eval gen; defaults to database
    CalculatorSettings calculator;
    MatchTolerances match;
    RelaxOptions relax;
    int max_relax_steps = 100;
    std::string task;       // overrides the default task text
    std::string intuition;
    std::map<std::string, std::string> parameters;
    std::string output = "xtal-run";
    std::uint64_t seed = 0;
    int max_retries = 3;
    DecodeParams decode;
    int threads = 1;

    /// Strict: unknown keys and wrong types throw xtal::Error.
    static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
    static RunConfig load(const std::filesystem::path& path);
    nlohmann::json to_json() const;
};

/// Throws IoError for a missing fixture and Error for an unknown kind.
BackendPtr make_backend(const RunConfig& c);
CalculatorPtr make_calculator(const RunConfig& c);
/// Loads the database and hull named in the config (either may be empty).
std::shared_ptr<ToolEnvironment> make_environment(const RunConfig& c);

} // namespace xtal
