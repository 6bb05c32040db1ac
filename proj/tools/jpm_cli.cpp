// jpm_cli.cpp: Command-line driver: simulate, chi, coherent-sweep, verify, list-presets

#include <CLI11.hpp>
#include <fmt/format.h>

#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "jpm/cli/commands.hpp"
#include "jpm/cli/presets.hpp"

namespace {

struct Flags {
    std::string config;
    std::string preset;
    std::string out;
    unsigned threads{1};
};

void add_common(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "configuration file (key = value)");
    sub->add_option("--preset", f.preset, "named scenario (see list-presets)");
    sub->add_option("--out", f.out, "output directory (overrides output.dir)");
    sub->add_option("--threads", f.threads, "worker threads for sweeps")->check(CLI::PositiveNumber);
}

jpm::cli::LoadOptions load_options(const Flags& f) {
    jpm::cli::LoadOptions o;
    if (!f.config.empty()) o.config_path = f.config;
    if (!f.preset.empty()) o.preset = f.preset;
    if (!f.out.empty()) o.out_dir = f.out;
    return o;
}

void report(const jpm::cli::CommandResult& r) {
    for (const auto& n : r.notes) std::cerr << n << '\n';
    for (const auto& p : r.written) std::cout << p.string() << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cavity photon detector simulator"};
    app.require_subcommand(1);
    Flags sim, chi, coh, ver;
    auto* s_sim = app.add_subcommand("simulate", "detection probabilities P0, P1, Pm versus time");
    auto* s_chi = app.add_subcommand("chi", "conditioned chi-matrix elements versus time");
    auto* s_coh = app.add_subcommand("coherent-sweep", "coherent-state power scaling and back-action label");
    auto* s_ver = app.add_subcommand("verify", "oracle suite; JSON report, nonzero exit on failure");
    auto* s_list = app.add_subcommand("list-presets", "print the named scenarios");
    add_common(s_sim, sim);
    add_common(s_chi, chi);
    add_common(s_coh, coh);
    add_common(s_ver, ver);
    CLI11_PARSE(app, argc, argv);

    try {
        using namespace jpm::cli;
        if (s_list->parsed()) {
            for (const auto& p : presets()) std::cout << fmt::format("{:<36} {:<15} {}\n", p.name, p.command, p.description);
            return 0;
        }
        if (s_sim->parsed()) {
            report(cmd_simulate(load_config(load_options(sim)), sim.threads));
        } else if (s_chi->parsed()) {
            report(cmd_chi(load_config(load_options(chi)), chi.threads));
        } else if (s_coh->parsed()) {
            report(cmd_coherent_sweep(load_config(load_options(coh)), coh.threads));
        } else if (s_ver->parsed()) {
            auto opt = load_options(ver);
            opt.default_text = kDefaultVerifyConfig;
            bool ok = false;
            report(cmd_verify(load_config(opt), ok));
            return ok ? 0 : 1;
        }
    } catch (const jpm::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
