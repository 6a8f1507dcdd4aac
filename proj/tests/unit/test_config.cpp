#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "molcav/config.hpp"
#include "molcav/errors.hpp"
#include "molcav/units.hpp"

using namespace molcav;
using namespace molcav::config;
using doctest::Approx;

namespace {

std::vector<Violation> check_overrides(const std::string& text) {
    std::vector<Violation> v;
    const auto overrides = Config::parse(text, v);
    if (!v.empty()) return v;
    return validate(load_preset("paper").merged(overrides));
}

bool names(const std::vector<Violation>& v, std::string_view key) {
    return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.key == key; });
}

} // namespace

TEST_CASE("bundled presets validate") {
    for (auto name : preset_names()) {
        CAPTURE(name);
        const auto cfg = load_preset(name);
        CHECK(validate(cfg).empty());
        CHECK(cfg.text("preset") == name);
    }
    const auto paper = load_preset("paper");
    CHECK(paper.number("g") == Approx(0.74 * kGHz));
    CHECK(paper.number("kappa_fwhm") == Approx(250 * kGHz));
    CHECK(paper.number("gamma_fwhm") == Approx(40 * kMHz));
    CHECK(paper.number("branching_alpha") == 0.33);
    CHECK(paper.number("tau_ref") == Approx(3.9 * kNanosecond));
    CHECK(paper.number("tau_cav") == Approx(3.2 * kNanosecond));
    CHECK(paper.number("critical_photon_number") == 1.8);
    CHECK(paper.number("finesse") == 200);
    CHECK(paper.number("axis_angle") == 93);
    const auto degraded = load_preset("degraded");
    CHECK(degraded.number("finesse") == 100);
    CHECK(degraded.number("kappa_fwhm") == Approx(500 * kGHz));
    CHECK_THROWS_AS(load_preset("nope"), ConfigError);
}

TEST_CASE("unit suffixes scale values") {
    std::vector<Violation> v;
    const auto cfg = Config::parse("kappa_fwhm_mhz = 250000\ntau_cav_ps = 3200\nmode_waist_fwhm_nm = 1030\n"
                                   "axis_angle_rad = 1.5707963267948966\nlock_drift_um_per_s = 2\n",
                                   v);
    REQUIRE(v.empty());
    CHECK(cfg.number("kappa_fwhm") == Approx(250 * kGHz));
    CHECK(cfg.number("tau_cav") == Approx(3.2 * kNanosecond));
    CHECK(cfg.number("mode_waist_fwhm") == Approx(1.03 * kMicrometer));
    CHECK(cfg.number("axis_angle") == Approx(90.0));
    CHECK(cfg.number("lock_drift") == Approx(2e-6));
    CHECK(cfg.key_name("kappa_fwhm") == "kappa_fwhm_mhz");
    CHECK(cfg.key_name("g") == "g");
    for (auto q : {Quantity::frequency, Quantity::time, Quantity::length, Quantity::angle, Quantity::velocity})
        CHECK_FALSE(suffixes(q).empty());
    CHECK(suffixes(Quantity::dimensionless).empty());
}

TEST_CASE("parse errors are collected, not thrown") {
    std::vector<Violation> v;
    const auto cfg = Config::parse("kappa_fwhm = 250\n"      // missing suffix
                                   "bogus_key = 1\n"         // unknown
                                   "g_ghz = abc\n"           // bad number
                                   "finesse = 200\n"
                                   "finesse = 100\n"         // duplicate
                                   "no equals sign here\n"
                                   "# comment only\n"
                                   "seed = 1.5\n",           // not an integer
                                   v);
    REQUIRE(v.size() == 6);
    CHECK(v[0].key == "kappa_fwhm");
    CHECK(v[0].message.find("missing unit suffix") != std::string::npos);
    CHECK(v[1].key == "bogus_key");
    CHECK(v[2].key == "g_ghz");
    CHECK(v[3].key == "finesse");
    CHECK(v[4].key == "line 6");
    CHECK(v[5].key == "seed");
    CHECK(cfg.number("finesse") == 200);
}

TEST_CASE("validation names the offending key as written") {
    CHECK(check_overrides("").empty());
    auto v = check_overrides("kappa_fwhm_ghz = -250\n");
    REQUIRE(v.size() == 1);
    CHECK(v[0].key == "kappa_fwhm_ghz");
    v = check_overrides("kappa_fwhm_mhz = -1\n");
    REQUIRE(v.size() == 1);
    CHECK(v[0].key == "kappa_fwhm_mhz");
    CHECK(names(check_overrides("tau_cav_ns = 6.0\n"), "tau_cav_ns"));
    CHECK(names(check_overrides("lock_ki = 2.5\n"), "lock_ki"));
    CHECK(names(check_overrides("lock_kp = 1.2\n"), "lock_kp"));
    CHECK(names(check_overrides("branching_alpha = 1.5\n"), "branching_alpha"));
    CHECK(names(check_overrides("fano_detunings_kappa = 0.8, 0.3, -1\n"), "fano_detunings_kappa"));
    CHECK(names(check_overrides("fano_detunings_kappa = 0.8, 0.3, -1, 4\n"), "fano_detunings_kappa"));
    CHECK(names(check_overrides("mod_sample_rate_hz = 15\n"), "mod_sample_rate_hz"));
    CHECK(names(check_overrides("mod_duration_s = 0.55\n"), "mod_duration_s"));
    CHECK(names(check_overrides("pulse_window_ns = 10\n"), "pulse_window_ns"));
    CHECK(names(check_overrides("model = quantum\n"), "model"));
    CHECK(names(check_overrides("axis_angle_deg = 180\n"), "axis_angle_deg"));
    // Several independent problems are all listed.
    CHECK(check_overrides("finesse = -1\ng_ghz = -1\nextinction_dip = 1.5\n").size() == 3);

    std::vector<Violation> pv;
    const auto partial = Config::parse("finesse = 200\n", pv);
    const auto missing = validate(partial);
    CHECK(missing.size() > 10);
    CHECK(names(missing, "kappa_fwhm"));
}

TEST_CASE("serialization round trips bit for bit") {
    const auto cfg = load_preset("paper").merged([] {
        std::vector<Violation> v;
        return Config::parse("kappa_fwhm_mhz = 251234.5678901234\nseed = 99\n", v);
    }());
    const auto text = cfg.serialize();
    std::vector<Violation> v;
    const auto again = Config::parse(text, v);
    REQUIRE(v.empty());
    CHECK(again.serialize() == text);
    for (const auto& spec : schema()) {
        if (!cfg.has(spec.base)) continue;
        CHECK(again.entry(spec.base).values == cfg.entry(spec.base).values);
    }
    CHECK(text.find("kappa_fwhm_mhz = 251234.5678901234") != std::string::npos);
}

TEST_CASE("set and accessors") {
    Config cfg;
    cfg.set("g_mhz", "740");
    CHECK(cfg.number("g") == Approx(0.74 * kGHz));
    cfg.set("g_ghz", "0.5");  // replaces, keeps the new spelling
    CHECK(cfg.key_name("g") == "g_ghz");
    CHECK_THROWS_AS(cfg.set("g", "1"), ConfigError);
    CHECK_THROWS_AS(cfg.set("unknown", "1"), ConfigError);
    CHECK_THROWS_AS(cfg.number("finesse"), ConfigError);
    cfg.set("fano_detunings_kappa", "1, 2,3");
    CHECK(cfg.list("fano_detunings_kappa") == std::vector<double>{1, 2, 3});
    cfg.set("ensemble_count", "200");
    CHECK(cfg.integer("ensemble_count") == 200);
    std::istringstream in("finesse = 100 # trailing comment\n");
    std::vector<Violation> v;
    CHECK(Config::parse(in, v).number("finesse") == 100);
}
