#include "molcav/config.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <sstream>

#include "molcav/errors.hpp"
#include "molcav/units.hpp"

namespace molcav::config {
namespace detail {
extern const std::string_view kPaperPreset;
extern const std::string_view kDegradedPreset;
} // namespace detail

namespace {

using Q = Quantity;

constexpr KeySpec kSchema[] = {
    {"scenario", Q::text, "scenario this file reproduces (manifests)"},
    {"version", Q::text, "molcav version that wrote the manifest"},
    {"preset", Q::text, "paper | degraded: defaults for keys not given"},
    {"seed", Q::integer, "RNG seed for ensembles and lock noise"},
    {"model", Q::text, "extinction model: linear | eq1 | both"},

    {"finesse", Q::dimensionless, "cavity finesse"},
    {"kappa_fwhm", Q::frequency, "cavity linewidth (FWHM)"},
    {"resonance_wavelength", Q::length, "cavity/zero-phonon-line wavelength"},
    {"mode_volume_lambda3", Q::dimensionless, "mode volume in lambda^3 (descriptive)"},
    {"mode_waist_fwhm", Q::length, "lateral intensity FWHM of the cavity mode"},
    {"axis_angle", Q::angle, "angle between the projected crystal axes a and b"},
    {"per_axis_offset", Q::frequency, "splitting of the a- and b-polarized resonances"},

    {"gamma_fwhm", Q::frequency, "excited-state decay rate gamma/2pi (lifetime-limited FWHM)"},
    {"branching_alpha", Q::dimensionless, "zero-phonon-line branching ratio outside the cavity"},
    {"pure_dephasing", Q::frequency, "pure dephasing gamma*/2pi"},
    {"tau_cav", Q::time, "excited-state lifetime in the cavity"},
    {"tau_ref", Q::time, "excited-state lifetime without the micromirror"},

    {"g", Q::frequency, "molecule-cavity coupling g/2pi"},
    {"extinction_dip", Q::dimensionless, "measured weak-probe extinction 1 - T"},
    {"critical_photon_number", Q::dimensionless, "photons per lifetime for S = 1"},

    {"probe_span", Q::frequency, "half-width of probe sweeps"},
    {"probe_points", Q::integer, "samples per probe sweep"},
    {"fano_detunings_kappa", Q::list, "cavity detunings of fig4a-d in units of kappa"},
    {"saturation_flux_max", Q::dimensionless, "largest photon flux (per lifetime) of fig4e"},
    {"saturation_points", Q::integer, "samples of fig4e"},

    {"ensemble_count", Q::integer, "molecules in the excitation spot"},
    {"inhomogeneous_fwhm", Q::frequency, "width of the inhomogeneous band"},
    {"ensemble_saturation", Q::dimensionless, "excitation saturation parameter on the mode axis"},
    {"line_amplitude", Q::dimensionless, "fluorescence of a fully saturated molecule"},
    {"pedestal_amplitude", Q::dimensionless, "background fluorescence on cavity resonance"},
    {"ensemble_span", Q::frequency, "half-width of the laser scan"},
    {"ensemble_step", Q::frequency, "laser scan step"},

    {"g2_signal_fraction", Q::dimensionless, "molecule share of detected counts"},
    {"g2_span", Q::time, "half-width of the delay axis"},
    {"g2_points", Q::integer, "samples of the g2 trace"},

    {"mode_scan_span", Q::length, "half-width of the lateral scan"},
    {"mode_scan_points", Q::integer, "samples of the lateral scan"},
    {"mode_map_saturation", Q::dimensionless, "saturation parameter at the mode center"},

    {"target_peak_gain_percent", Q::dimensionless, "maximum CW gain used to fix gamma*"},
    {"pump_rates_gamma", Q::list, "pump rates of fig5a and fig5b in units of gamma"},
    {"amplification_pump_max_gamma", Q::dimensionless, "largest pump rate of fig5d in units of gamma"},
    {"amplification_points", Q::integer, "samples of fig5d"},

    {"pulse_decay_time", Q::time, "excited-state lifetime of the pulsed measurement"},
    {"irf_fwhm", Q::time, "instrument response FWHM (0 = ideal detector)"},
    {"pulse_arrival", Q::time, "pump pulse arrival time"},
    {"pulse_population", Q::dimensionless, "excited population left by the pump pulse"},
    {"pulse_window", Q::time, "length of the time axis"},
    {"pulse_step", Q::time, "time axis step"},
    {"pulse_emission_scale", Q::dimensionless, "counts per unit excited population"},
    {"pulse_probe_background", Q::dimensionless, "detected probe level without the molecule"},

    {"lock_kp", Q::dimensionless, "proportional loop gain"},
    {"lock_ki", Q::dimensionless, "integral loop gain per sample"},
    {"lock_sample_interval", Q::time, "servo sample interval"},
    {"lock_duration", Q::time, "simulated lock time"},
    {"lock_noise_sigma", Q::length, "displacement noise increment per sample"},
    {"lock_drift", Q::velocity, "linear displacement drift"},
    {"lock_actuator_range", Q::length, "actuator travel"},
    {"lock_coupling_efficiency", Q::dimensionless, "lock-laser coupling efficiency eta"},

    {"mod_operating_point", Q::text, "max_slope | half_maximum | peak"},
    {"mod_amplitude", Q::length, "length modulation amplitude"},
    {"mod_frequency", Q::frequency, "slow modulation frequency"},
    {"mod_duration", Q::time, "slow modulation record length"},
    {"mod_sample_rate", Q::frequency, "slow modulation sample rate"},
    {"mod_fast_frequency", Q::frequency, "fast modulation frequency"},
    {"mod_fast_duration", Q::time, "fast modulation record length"},
    {"mod_fast_sample_rate", Q::frequency, "fast modulation sample rate"},
    {"mod_peak_emission", Q::dimensionless, "emission rate on cavity resonance"},
};

struct Unit {
    std::string_view suffix;
    double scale;
};

constexpr std::array kFrequencyUnits{Unit{"hz", kHz}, Unit{"khz", kKHz}, Unit{"mhz", kMHz}, Unit{"ghz", kGHz},
                                     Unit{"thz", kTHz}};
constexpr std::array kTimeUnits{Unit{"s", kSecond}, Unit{"ms", kMillisecond}, Unit{"us", kMicrosecond},
                                Unit{"ns", kNanosecond}, Unit{"ps", kPicosecond}};
constexpr std::array kLengthUnits{Unit{"m", kMeter}, Unit{"mm", 1e-3}, Unit{"um", kMicrometer},
                                  Unit{"nm", kNanometer}};
constexpr std::array kAngleUnits{Unit{"deg", 1.0}, Unit{"rad", 180.0 / kPi}};
constexpr std::array kVelocityUnits{Unit{"m_per_s", 1.0}, Unit{"um_per_s", kMicrometer},
                                    Unit{"nm_per_s", kNanometer}};

std::span<const Unit> units(Quantity q) {
    switch (q) {
    case Q::frequency: return kFrequencyUnits;
    case Q::time: return kTimeUnits;
    case Q::length: return kLengthUnits;
    case Q::angle: return kAngleUnits;
    case Q::velocity: return kVelocityUnits;
    default: return {};
    }
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

struct Resolved {
    const KeySpec* spec;
    double scale;
};

// Maps a written key to its schema entry and unit scale; throws ConfigError.
Resolved resolve(std::string_view key) {
    for (const auto& spec : kSchema) {
        const auto us = units(spec.quantity);
        if (us.empty()) {
            if (key == spec.base) return {&spec, 1.0};
            continue;
        }
        if (key == spec.base) throw ConfigError(std::string(key), "missing unit suffix (e.g. " +
                                                                      std::string(key) + "_" +
                                                                      std::string(us.front().suffix) + ")");
        if (key.size() > spec.base.size() + 1 && key.starts_with(spec.base) && key[spec.base.size()] == '_') {
            const auto suffix = key.substr(spec.base.size() + 1);
            for (const auto& u : us)
                if (u.suffix == suffix) return {&spec, u.scale};
        }
    }
    throw ConfigError(std::string(key), "unknown key");
}

Entry make_entry(std::string_view key, std::string_view raw) {
    const auto [spec, scale] = resolve(key);
    Entry e{std::string(key), std::string(raw), {}};
    switch (spec->quantity) {
    case Q::text:
        if (raw.empty()) throw ConfigError(std::string(key), "empty value");
        break;
    case Q::integer: {
        std::int64_t v = 0;
        const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
        if (ec != std::errc() || ptr != raw.data() + raw.size())
            throw ConfigError(std::string(key), "expected an integer, got '" + std::string(raw) + "'");
        e.values.push_back(static_cast<double>(v));
        break;
    }
    case Q::list: {
        std::string_view rest = raw;
        while (true) {
            const auto comma = rest.find(',');
            const auto item = parse_double(rest.substr(0, comma));
            if (!item) throw ConfigError(std::string(key), "expected comma-separated numbers, got '" +
                                                               std::string(raw) + "'");
            e.values.push_back(*item);
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        break;
    }
    default: {
        const auto v = parse_double(raw);
        if (!v) throw ConfigError(std::string(key), "expected a number, got '" + std::string(raw) + "'");
        e.values.push_back(*v * scale);
        break;
    }
    }
    return e;
}

} // namespace

std::span<const KeySpec> schema() { return kSchema; }

const KeySpec* find_key(std::string_view base) {
    for (const auto& k : schema())
        if (k.base == base) return &k;
    return nullptr;
}

std::span<const std::string_view> suffixes(Quantity q) {
    static const std::array<std::vector<std::string_view>, 9> table = [] {
        std::array<std::vector<std::string_view>, 9> t;
        for (int i = 0; i < 9; ++i)
            for (const auto& u : units(static_cast<Quantity>(i))) t[static_cast<std::size_t>(i)].push_back(u.suffix);
        return t;
    }();
    return table[static_cast<std::size_t>(q)];
}

Config Config::parse(std::istream& in, std::vector<Violation>& violations) {
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse(std::string_view(buffer.str()), violations);
}

Config Config::parse(std::string_view text, std::vector<Violation>& violations) {
    Config cfg;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            violations.push_back({"line " + std::to_string(line_no), "expected 'key = value'"});
            continue;
        }
        const auto key = trim(line.substr(0, eq));
        const auto raw = trim(line.substr(eq + 1));
        try {
            auto entry = make_entry(key, raw);
            const auto base = std::string(resolve(key).spec->base);
            if (cfg.entries_.contains(base)) {
                violations.push_back({std::string(key), "duplicate key (also given as " +
                                                            cfg.entries_.at(base).written_key + ")"});
                continue;
            }
            cfg.entries_.emplace(base, std::move(entry));
        } catch (const ConfigError& e) {
            violations.push_back({e.key(), std::string(e.what()).substr(e.key().size() + 2)});
        }
    }
    return cfg;
}

const Entry& Config::entry(std::string_view base) const {
    const auto it = entries_.find(std::string(base));
    if (it == entries_.end()) throw ConfigError(std::string(base), "missing key");
    return it->second;
}

std::string Config::key_name(std::string_view base) const {
    const auto it = entries_.find(std::string(base));
    return it == entries_.end() ? std::string(base) : it->second.written_key;
}

double Config::number(std::string_view base) const {
    const auto& e = entry(base);
    if (e.values.size() != 1) throw ConfigError(e.written_key, "expected a single number");
    return e.values.front();
}

std::vector<double> Config::list(std::string_view base) const { return entry(base).values; }

std::int64_t Config::integer(std::string_view base) const {
    const auto* spec = find_key(base);
    if (spec == nullptr || spec->quantity != Q::integer) throw ConfigError(std::string(base), "not an integer key");
    return static_cast<std::int64_t>(number(base));
}

std::string Config::text(std::string_view base) const { return entry(base).raw; }

void Config::set(std::string_view written_key, std::string_view raw) {
    auto entry = make_entry(trim(written_key), trim(raw));
    const auto base = std::string(resolve(entry.written_key).spec->base);
    entries_.insert_or_assign(base, std::move(entry));
}

Config Config::merged(const Config& overrides) const {
    Config out = *this;
    for (const auto& [base, e] : overrides.entries_) out.entries_.insert_or_assign(base, e);
    return out;
}

std::string Config::serialize() const {
    std::string out;
    for (const auto& spec : schema()) {
        const auto it = entries_.find(std::string(spec.base));
        if (it == entries_.end()) continue;
        out += it->second.written_key + " = " + it->second.raw + "\n";
    }
    return out;
}

std::span<const std::string_view> preset_names() {
    static constexpr std::array<std::string_view, 2> names{"paper", "degraded"};
    return names;
}

std::string_view preset_text(std::string_view name) {
    if (name == "paper") return detail::kPaperPreset;
    if (name == "degraded") return detail::kDegradedPreset;
    throw ConfigError("preset", "unknown preset '" + std::string(name) + "' (expected paper or degraded)");
}

Config load_preset(std::string_view name) {
    std::vector<Violation> violations;
    auto cfg = Config::parse(preset_text(name), violations);
    if (!violations.empty()) throw ConfigError(violations.front().key, "bundled preset: " + violations.front().message);
    return cfg;
}

// ---- validation ----------------------------------------------------------------------

std::vector<Violation> validate(const Config& cfg) {
    std::vector<Violation> out;
    auto fail = [&](std::string_view base, std::string message) {
        out.push_back({cfg.key_name(base), std::move(message)});
    };
    for (const auto& spec : schema()) {
        if (spec.base == "scenario" || spec.base == "version") continue;
        if (!cfg.has(spec.base)) fail(spec.base, "missing key");
    }
    if (!out.empty()) return out;

    auto num = [&](std::string_view base) { return cfg.number(base); };
    auto positive = [&](std::string_view base) {
        if (!(num(base) > 0.0)) fail(base, "must be > 0");
    };
    auto non_negative = [&](std::string_view base) {
        if (!(num(base) >= 0.0)) fail(base, "must be >= 0");
    };
    auto fraction = [&](std::string_view base, bool open_low, bool open_high) {
        const double v = num(base);
        const bool ok = (open_low ? v > 0.0 : v >= 0.0) && (open_high ? v < 1.0 : v <= 1.0);
        if (!ok)
            fail(base, std::string("must lie in ") + (open_low ? "(" : "[") + "0, 1" + (open_high ? ")" : "]"));
    };
    auto one_of = [&](std::string_view base, std::initializer_list<std::string_view> options) {
        const auto v = cfg.text(base);
        if (std::find(options.begin(), options.end(), v) == options.end()) {
            std::string list;
            for (auto o : options) list += (list.empty() ? "" : " | ") + std::string(o);
            fail(base, "must be one of " + list);
        }
    };
    auto at_least = [&](std::string_view base, double min) {
        if (!(num(base) >= min)) fail(base, "must be >= " + std::to_string(static_cast<long long>(min)));
    };

    one_of("preset", {"paper", "degraded"});
    one_of("model", {"linear", "eq1", "both"});
    one_of("mod_operating_point", {"max_slope", "half_maximum", "peak"});
    non_negative("seed");

    for (auto k : {"finesse", "kappa_fwhm", "resonance_wavelength", "mode_volume_lambda3", "mode_waist_fwhm",
                   "gamma_fwhm", "tau_cav", "tau_ref", "critical_photon_number", "probe_span", "saturation_flux_max",
                   "inhomogeneous_fwhm", "ensemble_span", "ensemble_step", "g2_span", "mode_scan_span",
                   "target_peak_gain_percent", "amplification_pump_max_gamma", "pulse_decay_time", "pulse_window",
                   "pulse_step", "lock_sample_interval", "lock_duration", "lock_actuator_range", "mod_frequency",
                   "mod_duration", "mod_sample_rate", "mod_fast_frequency", "mod_fast_duration",
                   "mod_fast_sample_rate", "mod_peak_emission"})
        positive(k);
    for (auto k : {"per_axis_offset", "pure_dephasing", "g", "ensemble_saturation", "line_amplitude",
                   "pedestal_amplitude", "mode_map_saturation", "irf_fwhm", "pulse_emission_scale",
                   "pulse_probe_background", "lock_noise_sigma", "mod_amplitude"})
        non_negative(k);
    fraction("branching_alpha", true, false);
    fraction("extinction_dip", true, true);
    fraction("g2_signal_fraction", false, false);
    fraction("pulse_population", false, false);
    fraction("lock_coupling_efficiency", true, false);
    at_least("probe_points", 3);
    at_least("saturation_points", 3);
    at_least("ensemble_count", 1);
    at_least("g2_points", 3);
    at_least("mode_scan_points", 7);
    at_least("amplification_points", 3);
    if (!std::isfinite(num("axis_angle")) || std::abs(std::sin(deg_to_rad(num("axis_angle")))) < 1e-6)
        fail("axis_angle", "crystal axes must not be parallel");

    // Purcell feasibility: no non-negative enhancement reproduces tau_cav otherwise.
    const double alpha = num("branching_alpha");
    if (num("tau_cav") > 0.0 && num("tau_ref") > 0.0 && alpha > 0.0 && alpha <= 1.0) {
        const double bound = alpha < 1.0 ? num("tau_ref") / (1.0 - alpha) : std::numeric_limits<double>::infinity();
        if (num("tau_cav") > bound) fail("tau_cav", "exceeds tau_ref / (1 - branching_alpha); no Purcell factor >= 0");
    }

    if (cfg.list("fano_detunings_kappa").size() != 4)
        fail("fano_detunings_kappa", "needs four values (fig4a, fig4b, fig4c, fig4d)");
    for (double d : cfg.list("fano_detunings_kappa"))
        if (std::abs(d) > 3.0) fail("fano_detunings_kappa", "detunings must lie within +-3 kappa");
    if (cfg.list("pump_rates_gamma").size() != 2) fail("pump_rates_gamma", "needs two values (fig5a, fig5b)");
    for (double k : cfg.list("pump_rates_gamma"))
        if (!(k >= 0.0)) fail("pump_rates_gamma", "pump rates must be >= 0");

    if (num("ensemble_step") > 0.0 && num("ensemble_span") > 0.0 && num("ensemble_span") / num("ensemble_step") > 5e6)
        fail("ensemble_step", "laser scan would exceed 1e7 samples");
    if (num("pulse_step") > 0.0 && num("pulse_window") / num("pulse_step") > 1e6)
        fail("pulse_step", "time axis would exceed 1e6 samples");
    if (num("pulse_window") < num("pulse_arrival") + 5.0 * num("pulse_decay_time"))
        fail("pulse_window", "must extend at least five decay times past the pulse arrival");
    if (num("pulse_arrival") < 0.0) fail("pulse_arrival", "must be >= 0");

    const double kp = num("lock_kp");
    const double ki = num("lock_ki");
    if (!(kp == 0.0 && ki == 0.0)) {
        if (!(ki > 0.0)) fail("lock_ki", "loop unstable: Jury bound ki > 0");
        if (!(std::abs(kp) < 1.0)) fail("lock_kp", "loop unstable: Jury bound |kp| < 1");
        if (!(2.0 * kp + ki < 2.0)) fail("lock_ki", "loop unstable: Jury bound 2 kp + ki < 2");
    }
    if (num("lock_duration") < 2.0 * num("lock_sample_interval"))
        fail("lock_duration", "must cover at least two samples");

    auto check_modulation = [&](std::string_view f, std::string_view fs, std::string_view duration) {
        if (!(num(fs) > 2.0 * num(f))) fail(fs, "must exceed twice the modulation frequency (Nyquist)");
        if (!(num(fs) >= 6.0 * num(f))) fail(fs, "needs >= 2 samples per period of the third harmonic");
        const double cycles = num(duration) * num(f);
        if (cycles < 10.0 - 1e-9) fail(duration, "must cover at least 10 modulation periods");
        else if (std::abs(cycles - std::round(cycles)) > 1e-9 * cycles)
            fail(duration, "must cover a whole number of modulation periods");
    };
    check_modulation("mod_frequency", "mod_sample_rate", "mod_duration");
    check_modulation("mod_fast_frequency", "mod_fast_sample_rate", "mod_fast_duration");
    return out;
}

} // namespace molcav::config
