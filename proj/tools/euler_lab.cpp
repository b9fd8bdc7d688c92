// euler-lab: command-line entry point of the laboratory.
//
//   euler-lab run         --config <path> [--output-dir <dir>]
//   euler-lab selfsim     --config <path> [--output-dir <dir>]
//   euler-lab lemma-check --config <path> [--output-dir <dir>]
//   euler-lab validate    --config <path>
//   euler-lab presets     [--kind <kind>]

#include "eulerlab/config.hpp"
#include "eulerlab/lab.hpp"
#include "eulerlab/presets.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

using namespace eulerlab;

namespace {

int run_config(const std::string& path, const std::string& output_dir, const std::optional<std::string>& required_system) {
    ExperimentConfig cfg;
    try {
        cfg = load_config(path);
        if (required_system && cfg.system != *required_system)
            throw ConfigError("this subcommand runs system = " + *required_system + ", the config has system = " + cfg.system);
    } catch (const ConfigError& e) {
        std::cerr << path << ": " << e.what() << "\n";
        return exit_config;
    }
    const std::string dir = output_dir.empty() ? cfg.output_dir() : output_dir;
    RunOutcome r;
    try {
        r = run_and_write(cfg, dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_failure;
    }
    const auto& a = r.artifacts;
    std::cout << "status = " << a.status << "\n";
    if (!a.error.empty()) std::cerr << "error: " << a.error << "\n";
    std::cout << a.summary.str();
    std::cout << "output = " << dir << "\n";
    return a.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical laboratory for incompressible Euler, blow-up models and IPM"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kLabVersion));

    std::string config, output_dir, kind;
    auto add_run = [&](const std::string& name, const std::string& help) {
        auto* c = app.add_subcommand(name, help);
        c->add_option("--config", config, "experiment config file")->required();
        c->add_option("--output-dir", output_dir, "overrides output_dir of the config");
        return c;
    };
    auto* run = add_run("run", "run any experiment config");
    auto* selfsim = add_run("selfsim", "solve for a self-similar profile (system = selfsim)");
    auto* lemma = add_run("lemma-check", "certify a coercive plus finite-rank split (system = lemma_check)");
    auto* validate = app.add_subcommand("validate", "parse a config and print it with defaults filled");
    validate->add_option("--config", config, "experiment config file")->required();
    auto* presets = app.add_subcommand("presets", "list the named initial data and flows");
    presets->add_option("--kind", kind, "only this kind (vorticity, density, scalar, flow, ...)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_config;
    }

    if (*run) return run_config(config, output_dir, std::nullopt);
    if (*selfsim) return run_config(config, output_dir, std::string("selfsim"));
    if (*lemma) return run_config(config, output_dir, std::string("lemma_check"));
    if (*validate) {
        try {
            std::cout << load_config(config).canonical();
            return exit_ok;
        } catch (const ConfigError& e) {
            std::cerr << config << ": " << e.what() << "\n";
            return exit_config;
        }
    }
    if (*presets) {
        bool any = false;
        for (const auto& p : preset_registry()) {
            const std::string k = preset_kind_name(p.kind);
            if (!kind.empty() && k != kind && k.substr(0, k.find(' ')) != kind) continue;
            any = true;
            std::cout << p.name << " [" << k << "]: " << p.doc << "\n";
            for (const auto& q : p.params)
                std::cout << "    " << q.name << " = " << q.default_value << (q.integer ? " (integer)" : "")
                          << "  " << q.doc << "\n";
        }
        if (!any) {
            std::cerr << "no presets of kind '" << kind << "'\n";
            return exit_config;
        }
        return exit_ok;
    }
    return exit_config;
}
