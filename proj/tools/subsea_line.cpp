// subsea-line: dataset generation, surrogate training, calibration, launch-spectrum
// optimization and the GFF-frequency sweep, one subcommand per stage.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "subsea/cli/commands.hpp"

using namespace subsea;

int main(int argc, char** argv) {
    CLI::App app{"Submarine line design: EDFA surrogate, sparse-GFF links, RL launch-spectrum optimization"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::optional<std::uint64_t> seed;
    std::vector<int> f_list;
    std::optional<int> episodes, count;
    bool quiet = false;

    app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "root seed");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--f", f_list, "GFF frequencies, e.g. 2,3,7")->delimiter(',');
    app.add_option("--episodes", episodes, "RL episodes per GFF frequency");
    app.add_flag("--quiet", quiet, "only warnings and errors");

    auto* gen = app.add_subcommand("gen-data", "generate the synthetic EDFA dataset");
    gen->add_option("--count", count, "number of rows");
    app.add_subcommand("train-edfa", "train the EDFA gain surrogate");
    app.add_subcommand("calibrate", "fit the noise figure to the conventional line capacity");
    app.add_subcommand("optimize", "RL launch-spectrum optimization for each GFF frequency");
    app.add_subcommand("report", "per-channel SNR reports and the sweep table from optimized spectra");
    app.add_subcommand("sweep", "optimize then report for each GFF frequency");
    app.add_subcommand("pipeline", "gen, train, calibrate, optimize, report");
    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? cli::kOk : cli::kUsage;
    }

    if (quiet) spdlog::set_level(spdlog::level::warn);

    try {
        cli::RunConfig config = config_path.empty() ? cli::RunConfig{} : cli::load_config(config_path);
        if (seed) config.seed = *seed;
        if (!out_dir.empty()) config.paths.out_dir = out_dir;
        if (!f_list.empty()) config.f_list = f_list;
        if (episodes) config.rl.episodes = *episodes;
        cli::validate(config);
        const cli::Context ctx(config, quiet ? nullptr : &std::cout);

        const std::string cmd = app.get_subcommands().front()->get_name();
        if (cmd == "gen-data")
            cli::cmd_gen_data(ctx, count);
        else if (cmd == "train-edfa")
            cli::cmd_train_edfa(ctx);
        else if (cmd == "calibrate")
            cli::cmd_calibrate(ctx);
        else if (cmd == "optimize")
            cli::cmd_optimize(ctx);
        else if (cmd == "report")
            cli::cmd_report(ctx);
        else if (cmd == "sweep")
            cli::cmd_sweep(ctx);
        else
            cli::cmd_pipeline(ctx);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return cli::exit_code_for(e);
    }
    return cli::kOk;
}
