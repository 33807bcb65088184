#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "dhtm/harness.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::vector<std::uint64_t> seeds;
    int episodes = -1;
    int horizon = -1;
    int switch_episode = -2;
    std::string out_dir;
    bool plot = false;
    bool export_frames = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "JSON experiment config");
    cmd->add_option("--seed", flags.seeds, "trial seed (repeatable)");
    cmd->add_option("--episodes", flags.episodes, "episodes per trial");
    cmd->add_option("--horizon", flags.horizon, "SR prediction horizon T");
    cmd->add_option("--switch-episode", flags.switch_episode,
                    "episode at which the environment switches (-1 disables)");
    cmd->add_option("--out-dir", flags.out_dir, "output directory (default $DHTM_OUT_DIR or runs)");
    cmd->add_flag("--plot", flags.plot, "write SVG plots");
    cmd->add_flag("--export-frames", flags.export_frames,
                  "write PGM frames of the first episode for debugging");
}

dhtm::ExperimentConfig resolve_config(const CommonFlags& flags, nlohmann::json* raw_out = nullptr) {
    nlohmann::json raw = nlohmann::json::object();
    if (!flags.config_path.empty()) {
        std::ifstream is(flags.config_path);
        if (!is) throw dhtm::ConfigError("cannot open config file: " + flags.config_path);
        is >> raw;
    }
    dhtm::ExperimentConfig config = dhtm::ExperimentConfig::from_json(raw);
    if (!flags.seeds.empty()) config.seeds = flags.seeds;
    if (flags.episodes >= 0) config.episodes = flags.episodes;
    if (flags.horizon >= 0) config.sr.horizon = flags.horizon;
    if (flags.switch_episode >= -1) config.switch_episode = flags.switch_episode;
    if (!flags.out_dir.empty()) config.out_dir = flags.out_dir;
    if (flags.plot) config.plot = true;
    if (flags.export_frames) config.export_frames = true;
    config.finalize();
    if (raw_out) *raw_out = raw;
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DHTM sequence-memory and reinforcement-learning toolkit"};
    app.require_subcommand(1);

    CommonFlags train_flags;
    CLI::App* train = app.add_subcommand("train", "run trials and write metrics + checkpoints");
    add_common(train, train_flags);

    CommonFlags compare_flags;
    CLI::App* compare =
        app.add_subcommand("compare", "run config variants on identical seeds, joined CSV");
    add_common(compare, compare_flags);

    std::string inspect_path;
    CLI::App* inspect = app.add_subcommand("inspect", "report on a checkpoint file");
    inspect->add_option("checkpoint", inspect_path, "checkpoint file")->required();

    std::string plot_in, plot_out;
    CLI::App* plot = app.add_subcommand("plot", "render SVG charts from a metrics CSV");
    plot->add_option("--in", plot_in, "episodes.csv or compare.csv")->required();
    plot->add_option("--out-dir", plot_out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            const dhtm::ExperimentConfig config = resolve_config(train_flags);
            const dhtm::TrainResult result = dhtm::run_train(config);
            std::cout << "wrote " << result.out_dir << "/steps.csv and episodes.csv for "
                      << result.trials.size() << " seed(s)\n";
        } else if (compare->parsed()) {
            nlohmann::json raw;
            const dhtm::ExperimentConfig base = resolve_config(compare_flags, &raw);
            if (!raw.contains("variants"))
                throw dhtm::ConfigError("compare: config must define a variants array");
            const auto variants = dhtm::variants_from_json(raw.at("variants"));
            const auto results = dhtm::run_compare(base, variants, base.out_dir);
            std::cout << "wrote " << base.out_dir << "/compare.csv with " << results.size()
                      << " variant(s)\n";
        } else if (inspect->parsed()) {
            const dhtm::TrialCheckpoint ckpt = dhtm::load_checkpoint_file(inspect_path);
            dhtm::print_report(std::cout, dhtm::inspect_checkpoint(ckpt));
        } else if (plot->parsed()) {
            for (const auto& path : dhtm::plot_csv(plot_in, plot_out))
                std::cout << "wrote " << path << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
