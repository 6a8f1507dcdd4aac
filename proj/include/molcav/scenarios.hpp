#pragma once

// One scenario per figure panel: builds the forward models from a validated
// config, runs them and the analysis fits, and collects traces and results.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "molcav/config.hpp"
#include "molcav/params.hpp"
#include "molcav/trace.hpp"

namespace molcav::scenarios {

std::span<const std::string_view> scenario_names();
bool is_scenario(std::string_view name);

/// Preset a scenario uses when its config does not name one.
std::string_view default_preset(std::string_view scenario);

/// Preset defaults overlaid with `overrides`; `preset` in the overrides wins over
/// the scenario default.
config::Config effective_config(std::string_view scenario, const config::Config& overrides);

struct NamedTrace {
    std::string file;  ///< CSV file name inside the scenario directory
    Trace trace;
};

/// Ordered key-value results; keys carry unit suffixes like config keys.
class Results {
public:
    void add(std::string key, double value);
    void add(std::string key, std::string value);
    const std::vector<std::pair<std::string, std::string>>& items() const { return items_; }
    double number(std::string_view key) const;
    std::string text() const;

private:
    std::vector<std::pair<std::string, std::string>> items_;
};

struct ScenarioOutput {
    std::vector<NamedTrace> traces;
    Results results;
};

/// The physical system described by a config.
System system_from(const config::Config& cfg);

/// Runs `scenario` on an effective, validated config (seed and model taken from it).
ScenarioOutput run(std::string_view scenario, const config::Config& cfg);

/// The manifest is the effective config plus scenario and version; running it
/// again reproduces the outputs byte for byte.
std::string manifest_text(std::string_view scenario, const config::Config& cfg);

/// Writes <dir>/<file>.csv for every trace, results.txt and manifest.conf.
void write_outputs(const std::filesystem::path& dir, const ScenarioOutput& output, const std::string& manifest);

std::string_view version();

} // namespace molcav::scenarios
