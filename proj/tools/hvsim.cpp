// hvsim: run the bundled studies from key-value config files.
//
//   hvsim list
//   hvsim run <config> [--seed N] [--workers N] [--output DIR]
//
// A bare name (no slash, no .conf) is looked up in the bundled config
// directory. Exit codes: 0 ok, 2 config error, 3 numerical failure,
// 4 a built-in check failed.

#include <iostream>

#include <CLI11.hpp>

#include "hvsim/cli.hpp"

namespace fs = std::filesystem;
using namespace hvsim::cli;

namespace {

fs::path locate(const std::string& arg) {
    fs::path p(arg);
    if (fs::exists(p) || p.has_parent_path() || p.extension() == ".conf") return p;
    return bundled_config_dir() / (arg + ".conf");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pilot-wave and hidden-variables experiment runner"};
    app.require_subcommand(1);

    auto* list = app.add_subcommand("list", "Show the bundled experiment configs");
    std::string config_dir;
    list->add_option("--dir", config_dir, "Config directory (default: bundled)");

    auto* run_cmd = app.add_subcommand("run", "Run one experiment config");
    std::string config;
    std::uint64_t seed = 0;
    unsigned workers = 1;
    std::string output;
    run_cmd->add_option("config", config, "Config file or bundled name")->required();
    auto* seed_opt = run_cmd->add_option("--seed", seed, "Override the config seed");
    auto* workers_opt = run_cmd->add_option("-j,--workers", workers, "Worker threads")->check(CLI::Range(1u, 1024u));
    auto* output_opt = run_cmd->add_option("-o,--output", output, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    if (list->parsed()) {
        std::cout << format_catalog(list_experiments(config_dir.empty() ? bundled_config_dir() : fs::path(config_dir)));
        return kExitOk;
    }

    RunOptions opts;
    opts.config = locate(config);
    if (*seed_opt) opts.seed = seed;
    if (*workers_opt) opts.workers = workers;
    if (*output_opt) opts.output = output;
    return run(opts, std::cerr);
}
