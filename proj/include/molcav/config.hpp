#pragma once

// Scenario configuration: flat `key = value` text with `#` comments.
//
// Every dimensioned key carries a unit suffix that selects the scale, e.g.
// `kappa_fwhm_ghz = 250` or `kappa_fwhm_mhz = 250000`. Values are converted to Hz,
// s, m, m/s and degrees on parse; the text as written is kept so a serialized
// config re-parses to bit-identical values.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace molcav::config {

enum class Quantity { frequency, time, length, angle, velocity, dimensionless, integer, text, list };

struct KeySpec {
    std::string_view base;
    Quantity quantity;
    std::string_view doc;
};

/// Every accepted key, in serialization order.
std::span<const KeySpec> schema();
const KeySpec* find_key(std::string_view base);

/// Accepted unit suffixes for a quantity (empty for unitless quantities).
std::span<const std::string_view> suffixes(Quantity q);

struct Violation {
    std::string key;
    std::string message;
};

struct Entry {
    std::string written_key;  ///< key as it appeared in the file
    std::string raw;          ///< value text as it appeared
    std::vector<double> values;  ///< SI values (one unless a list)
};

class Config {
public:
    /// Parses text; malformed lines, unknown keys, missing suffixes and bad numbers
    /// are collected into `violations` and the offending lines skipped.
    static Config parse(std::istream& in, std::vector<Violation>& violations);
    static Config parse(std::string_view text, std::vector<Violation>& violations);

    bool has(std::string_view base) const { return entries_.contains(std::string(base)); }
    const Entry& entry(std::string_view base) const;
    /// Key name to cite in messages: as written, or the base name when unset.
    std::string key_name(std::string_view base) const;

    double number(std::string_view base) const;
    std::vector<double> list(std::string_view base) const;
    std::int64_t integer(std::string_view base) const;
    std::string text(std::string_view base) const;

    /// Sets a value from `key = raw` text; throws ConfigError on a bad key or value.
    void set(std::string_view written_key, std::string_view raw);

    /// Entries of `overrides` replace those here.
    Config merged(const Config& overrides) const;

    /// Schema-ordered `key = value` lines.
    std::string serialize() const;

private:
    std::map<std::string, Entry> entries_;
};

/// Named parameter presets bundled with the library ("paper", "degraded").
std::span<const std::string_view> preset_names();
std::string_view preset_text(std::string_view name);
Config load_preset(std::string_view name);

/// Missing keys, out-of-range values and physically inconsistent combinations.
/// Each violation names the key as written in the config.
std::vector<Violation> validate(const Config& config);

} // namespace molcav::config
