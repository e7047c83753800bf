#include <CLI11.hpp>
#include <iostream>

#include "gspin/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Finite-volume simulation and certification of interacting spin systems on geometric graphs"};
    app.require_subcommand(1);
    std::string config;
    std::string out = ".";
    unsigned threads = 1;
    const std::pair<const char*, const char*> commands[] = {
        {"graph", "build the configuration and graph, report the degree constant"},
        {"simulate", "run the nested truncated systems and write moment tables"},
        {"converge", "Cauchy gaps between volumes against the Gronwall tail bound"},
        {"gibbs", "kernel sampling, DLR residuals and the reversibility test"},
        {"ovs", "Ovsjannikov certificate and K_T table"},
    };
    for (auto [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config, "JSON run configuration")->required()->check(CLI::ExistingFile);
        sub->add_option("--threads", threads, "worker threads (0 = all cores)");
        sub->add_option("--out", out, "output directory");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : gspin::kExitConfig;
    }
    return gspin::run_command(app.get_subcommands().front()->get_name(), config, out, threads, std::cout, std::cerr);
}
