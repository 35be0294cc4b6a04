#include <CLI11.hpp>

#include <iostream>

#include "nhsim/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"nhsim: non-Hermitian ladder dynamics on a simulated quantum computer"};
    app.set_version_flag("--version", std::string(nhsim::kVersion));
    app.require_subcommand(1);

    nhsim::CommandOptions opt;
    std::string config, preset, out;
    std::uint64_t seed = 0;
    int threads = 0;

    struct Verb {
        const char* name;
        const char* help;
        int (*fn)(const nhsim::CommandOptions&);
    };
    const Verb verbs[] = {
        {"evolve", "run the circuit simulation, escape analysis and plots", nhsim::cmd_evolve},
        {"spectral", "scan v1 and estimate extremal imaginary energies", nhsim::cmd_spectral},
        {"oracle", "exact reference outputs only (no circuits)", nhsim::cmd_oracle},
        {"mitigate", "readout inversion and zero-noise extrapolation of a run directory", nhsim::cmd_mitigate},
        {"calibrate", "measure readout confusion matrices under the configured noise", nhsim::cmd_calibrate},
    };
    std::vector<std::pair<CLI::App*, const Verb*>> subs;
    for (const auto& v : verbs) {
        CLI::App* sub = app.add_subcommand(v.name, v.help);
        sub->add_option("--config", config, "TOML experiment file");
        sub->add_option("--preset", preset, "named preset (see presets/)");
        sub->add_option("--out", out, "output directory");
        sub->add_option("--seed", seed, "override the config seed");
        sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
        subs.emplace_back(sub, &v);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : nhsim::kExitConfig;
    }

    for (auto& [sub, verb] : subs) {
        if (!sub->parsed()) continue;
        if (sub->count("--config")) opt.config = config;
        if (sub->count("--preset")) opt.preset = preset;
        if (sub->count("--out")) opt.out = out;
        if (sub->count("--seed")) opt.seed = seed;
        if (sub->count("--threads")) opt.threads = threads;
        try {
            return verb->fn(opt);
        } catch (const nhsim::ConfigError& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return nhsim::kExitConfig;
        } catch (const nhsim::ConvergenceError& e) {
            std::cerr << "did not converge: " << e.what() << "\n";
            return nhsim::kExitConvergence;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        }
    }
    return nhsim::kExitConfig;
}
