// molcav command-line front end: runs figure scenarios, validates configs,
// fits CSV data and replays manifests.
//
// Exit status: 0 ok, 1 I/O failure, 2 config validation failure or bad command line,
// 3 model domain error.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "molcav/config.hpp"
#include "molcav/errors.hpp"
#include "molcav/fitting.hpp"
#include "molcav/scenarios.hpp"

namespace fs = std::filesystem;
using namespace molcav;

namespace {

constexpr int kExitIo = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDomain = 3;

std::mutex g_output_mutex;

void report(std::ostream& os, const std::string& line) {
    std::lock_guard lock(g_output_mutex);
    os << line << '\n';
}

void print_violations(const std::string& source, const std::vector<config::Violation>& violations) {
    std::ostringstream os;
    os << source << ": " << violations.size() << " violation" << (violations.size() == 1 ? "" : "s");
    for (const auto& v : violations) os << "\n  " << v.key << ": " << v.message;
    report(std::cerr, os.str());
}

// Parses a config file; violations are printed and turned into exit status 2.
std::optional<config::Config> read_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read config " + path.string());
    std::vector<config::Violation> violations;
    auto cfg = config::Config::parse(in, violations);
    if (!violations.empty()) {
        print_violations(path.string(), violations);
        return std::nullopt;
    }
    return cfg;
}

template <class F>
int guarded(const std::string& context, F&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        report(std::cerr, context + ": config error: " + e.what());
        return kExitConfig;
    } catch (const DomainError& e) {
        report(std::cerr, context + ": domain error: " + e.what());
        return kExitDomain;
    } catch (const IoError& e) {
        report(std::cerr, context + ": I/O error: " + e.what());
        return kExitIo;
    } catch (const std::exception& e) {
        report(std::cerr, context + ": error: " + e.what());
        return kExitIo;
    }
}

int run_one(const std::string& scenario, const config::Config& overrides, const fs::path& out_root) {
    return guarded(scenario, [&] {
        if (!scenarios::is_scenario(scenario)) {
            report(std::cerr, scenario + ": unknown scenario");
            return kExitConfig;
        }
        const auto cfg = scenarios::effective_config(scenario, overrides);
        const auto violations = config::validate(cfg);
        if (!violations.empty()) {
            print_violations(scenario, violations);
            return kExitConfig;
        }
        const auto output = scenarios::run(scenario, cfg);
        const auto dir = out_root / scenario;
        scenarios::write_outputs(dir, output, scenarios::manifest_text(scenario, cfg));
        report(std::cout, scenario + ": wrote " + dir.string() + " (" + std::to_string(output.traces.size()) +
                              " trace" + (output.traces.size() == 1 ? "" : "s") + ")");
        return 0;
    });
}

int run_batch(const std::vector<std::string>& names, const config::Config& overrides, const fs::path& out_root,
              unsigned jobs) {
    std::vector<int> codes(names.size(), 0);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < names.size(); i = next++) codes[i] = run_one(names[i], overrides, out_root);
    };
    const unsigned threads = std::clamp<unsigned>(jobs, 1, static_cast<unsigned>(names.size()));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    // Report the most severe failure: domain (3) over config (2) over I/O (1).
    return *std::max_element(codes.begin(), codes.end());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"molcav: single molecule coupled to an open Fabry-Perot microcavity"};
    app.set_version_flag("--version", std::string(scenarios::version()));
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "Run figure scenarios and write CSV, results and manifest");
    std::vector<std::string> run_names;
    std::string run_config;
    std::string run_out = "out";
    std::optional<std::uint64_t> run_seed;
    std::string run_model;
    unsigned run_jobs = 1;
    std::string names_help = "Scenarios (";
    for (auto n : scenarios::scenario_names()) names_help += std::string(n) + " ";
    names_help += "or all); defaults to the config's scenario key";
    run->add_option("scenarios", run_names, names_help);
    run->add_option("--config", run_config, "Config file overriding the preset")->check(CLI::ExistingFile);
    run->add_option("--out", run_out, "Output root; each scenario writes <out>/<scenario>/")->capture_default_str();
    run->add_option("--seed", run_seed, "RNG seed (overrides the config)");
    run->add_option("--model", run_model, "Extinction model")->check(CLI::IsMember({"linear", "eq1", "both"}));
    run->add_option("--jobs", run_jobs, "Scenarios run concurrently")->check(CLI::PositiveNumber);

    // validate
    auto* validate = app.add_subcommand("validate", "Check a config against the schema without running");
    std::string validate_path;
    validate->add_option("config", validate_path, "Config file")->required();

    // fit
    auto* fit = app.add_subcommand("fit", "Fit a model to two-column CSV data (optional sigma column)");
    std::string fit_model;
    std::string fit_path;
    fitting::ModelAux aux;
    std::string model_list;
    for (auto kind : {fitting::ModelKind::lorentzian, fitting::ModelKind::coupled_response,
                      fitting::ModelKind::gaussian, fitting::ModelKind::exp_irf, fitting::ModelKind::saturation,
                      fitting::ModelKind::amplification})
        model_list += std::string(fitting::model_name(kind)) + " ";
    fit->add_option("--model", fit_model, "One of: " + model_list)->required();
    fit->add_option("data", fit_path, "CSV file (names line, units line, rows)")->required()->check(CLI::ExistingFile);
    fit->add_option("--kappa", aux.kappa_fwhm, "coupled_response: cavity FWHM in x units");
    fit->add_option("--irf-fwhm", aux.irf_fwhm, "exp_irf: instrument response FWHM in x units (0 = ideal)");
    fit->add_option("--t0", aux.t0, "exp_irf: pulse arrival in x units");
    fit->add_option("--beta-alpha", aux.beta_alpha, "amplification: beta * alpha_cav");

    // replay
    auto* replay = app.add_subcommand("replay", "Re-run a scenario from its manifest");
    std::string replay_path;
    std::string replay_out = "out";
    replay->add_option("manifest", replay_path, "manifest.conf written by run")->required();
    replay->add_option("--out", replay_out, "Output root")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    if (*run) {
        return guarded("run", [&] {
            config::Config overrides;
            if (!run_config.empty()) {
                auto cfg = read_config(run_config);
                if (!cfg) return kExitConfig;
                overrides = *cfg;
            }
            if (run_seed) overrides.set("seed", std::to_string(*run_seed));
            if (!run_model.empty()) overrides.set("model", run_model);
            if (run_names.empty() && overrides.has("scenario")) run_names.push_back(overrides.text("scenario"));
            if (run_names.empty()) {
                report(std::cerr, "run: no scenario given and the config has no scenario key");
                return kExitConfig;
            }
            if (std::find(run_names.begin(), run_names.end(), "all") != run_names.end()) {
                run_names.clear();
                for (auto n : scenarios::scenario_names()) run_names.emplace_back(n);
            }
            return run_batch(run_names, overrides, run_out, run_jobs);
        });
    }
    if (*validate) {
        return guarded("validate", [&] {
            auto cfg = read_config(validate_path);
            if (!cfg) return kExitConfig;
            const std::string scenario = cfg->has("scenario") ? cfg->text("scenario") : "params";
            std::vector<config::Violation> violations;
            if (!scenarios::is_scenario(scenario))
                violations.push_back({cfg->key_name("scenario"), "unknown scenario '" + scenario + "'"});
            if (cfg->has("preset")) {
                const auto p = cfg->text("preset");
                const auto names = config::preset_names();
                if (std::find(names.begin(), names.end(), p) == names.end()) {
                    violations.push_back({cfg->key_name("preset"), "unknown preset '" + p + "'"});
                    print_violations(validate_path, violations);
                    return kExitConfig;
                }
            }
            const auto more = config::validate(scenarios::effective_config(scenario, *cfg));
            violations.insert(violations.end(), more.begin(), more.end());
            if (!violations.empty()) {
                print_violations(validate_path, violations);
                return kExitConfig;
            }
            std::cout << validate_path << ": 0 violations\n";
            return 0;
        });
    }
    if (*fit) {
        return guarded("fit", [&] {
            const auto kind = fitting::parse_model(fit_model);
            if (!kind) throw ConfigError("--model", "unknown model '" + fit_model + "' (one of: " + model_list + ")");
            const auto data = read_csv(fs::path(fit_path));
            const auto model = fitting::initial_model(*kind, data.trace, aux);
            const auto result = fitting::fit(model, data.trace, data.sigma);
            std::ostringstream os;
            os << fit_model << ':';
            for (std::size_t i = 0; i < result.names.size(); ++i)
                os << (i == 0 ? " " : ", ") << result.names[i] << " = " << format_double(result.values[i])
                   << " ± " << format_double(result.stderrs[i]);
            os << " (rss = " << format_double(result.rss) << ", " << result.iterations << " iterations, "
               << (result.converged ? "converged" : "not converged: " + result.message) << ")";
            std::cout << os.str() << '\n';
            return result.converged ? 0 : kExitDomain;
        });
    }
    if (*replay) {
        return guarded("replay", [&] {
            auto cfg = read_config(replay_path);
            if (!cfg) return kExitConfig;
            if (!cfg->has("scenario")) throw ConfigError("scenario", "manifest has no scenario key");
            if (cfg->has("version") && cfg->text("version") != scenarios::version())
                report(std::cerr, "replay: manifest written by molcav " + cfg->text("version") + ", running " +
                                      std::string(scenarios::version()));
            return run_one(cfg->text("scenario"), *cfg, replay_out);
        });
    }
    return 0;
}
