#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "drmcvar/app.hpp"

int main(int argc, char** argv) {
    using namespace drmcvar;
    CLI::App cli{"Distributionally robust multi-CVaR portfolio optimization"};
    cli.require_subcommand(1);

    std::string config_path;
    std::string output_dir;
    auto add_config = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "JSON run config")->required()->check(CLI::ExistingFile);
        sub->add_option("-o,--output-dir", output_dir, "Override output_dir from the config");
    };
    auto* optimize = cli.add_subcommand("optimize", "Solve each strategy on the window ending at optimize.as_of");
    add_config(optimize);
    auto* backtest = cli.add_subcommand("backtest", "Rolling monthly backtest of each strategy");
    add_config(backtest);
    auto* theory = cli.add_subcommand("theory", "Excess-risk experiment on a Gaussian model");
    add_config(theory);

    auto* validate = cli.add_subcommand("validate-data", "Parse return panels and report their shape and hash");
    std::string validate_config;
    std::vector<std::string> files;
    bool decimal = false;
    bool drop_missing = false;
    validate->add_option("-c,--config", validate_config, "JSON run config naming the panels")
        ->check(CLI::ExistingFile);
    validate->add_option("files", files, "CSV files to check instead of a config");
    validate->add_flag("--decimal", decimal, "Values are decimal fractions rather than percent");
    validate->add_flag("--drop-missing", drop_missing, "Drop rows holding missing-value sentinels");

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = cli.exit(e);
        return code == 0 ? app::exit_ok : app::exit_validation;
    }

    return app::run_guarded(
        [&]() -> int {
            if (validate->parsed() && validate_config.empty()) {
                ParseOptions opts;
                opts.layout = decimal ? ValueLayout::decimal : ValueLayout::percent;
                opts.missing = drop_missing ? MissingPolicy::drop_row : MissingPolicy::error;
                return app::cmd_validate_files(files, opts, std::cout);
            }
            app::RunConfig config = app::load_config(validate->parsed() ? validate_config : config_path);
            if (!output_dir.empty()) {
                config.output_dir = output_dir;
                config.resolved_output_dir = output_dir;
            }
            if (optimize->parsed()) return app::cmd_optimize(config, std::cout);
            if (backtest->parsed()) return app::cmd_backtest(config, std::cout);
            if (theory->parsed()) return app::cmd_theory(config, std::cout);
            return app::cmd_validate_data(config, std::cout);
        },
        std::cerr);
}
