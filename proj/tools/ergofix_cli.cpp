// ergofix run <config.json> [--jobs N] [--out DIR] [--seed S]
//
// Exit codes: 0 success, 2 config/parse error, 3 numeric failure (traces
// written so far are kept).

#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "ergofix/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Ergodic-mean fixed point experiments"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run the experiment(s) described by a JSON config");
    std::string config;
    std::size_t jobs = 1;
    std::string out_dir;
    std::uint64_t seed = 0;
    run->add_option("config", config, "Config file")->required();
    run->add_option("-j,--jobs", jobs, "Concurrent sweep runs")->check(CLI::PositiveNumber);
    auto* out_opt = run->add_option("-o,--out", out_dir, "Output directory (overrides config and $ERGOFIX_OUT_DIR)");
    auto* seed_opt = run->add_option("-s,--seed", seed, "Seed override");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : ergofix::experiment::exit_config;
    }

    ergofix::experiment::RunOptions opt;
    opt.jobs = jobs;
    if (*out_opt) opt.out_dir = out_dir;
    if (*seed_opt) opt.seed = seed;
    return ergofix::experiment::run_config_file(config, opt, std::cerr);
}
