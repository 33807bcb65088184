#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dhtm/checkpoint.hpp"
#include "dhtm/config.hpp"

namespace dhtm {

struct EpisodeSummary {
    int episode = 0;
    double total_reward = 0.0;
    int steps = 0;
    std::vector<double> mean_surprise;  // per offset, NaN where undefined
    int segment_count = 0;
};

struct TrialResult {
    std::uint64_t seed = 0;
    std::vector<EpisodeRecord> episodes;
    std::vector<EpisodeSummary> summaries;
    TrialCheckpoint final_checkpoint;
};

struct TrainResult {
    std::vector<TrialResult> trials;  // ordered as config.seeds
    std::string out_dir;
};

// Owns one trial's components; episodes can be run in slices with the
// environment switch applied at the configured episode.
class TrialRunner {
public:
    TrialRunner(const ExperimentConfig& config, std::uint64_t seed);

    // Runs episodes [first_episode, first_episode + count).
    std::vector<EpisodeRecord> run_episodes(int first_episode, int count);

    TrialCheckpoint checkpoint() const;
    void restore(const TrialCheckpoint& ckpt);

    const Agent& agent() const { return trial_.agent; }
    PinballEnv& env() { return trial_.env; }

private:
    const ExperimentConfig& config_;
    std::uint64_t seed_;
    Trial trial_;
    bool switched_ = false;
};

// `train`: trials across seeds (parallel), per-step and per-episode CSVs,
// final checkpoints, optional SVG plots.
TrainResult run_train(const ExperimentConfig& config);

// `compare`: each variant runs on identical seeds; joined CSV keyed by
// (variant, seed, episode).
std::vector<std::pair<std::string, TrainResult>> run_compare(const ExperimentConfig& base,
                                                             const std::vector<Variant>& variants,
                                                             const std::string& out_dir);

// `inspect`: human-readable checkpoint report.
struct InspectReport {
    Topology topology;
    std::vector<int> segments_per_var;
    int segment_count = 0;
    std::vector<int> f_histogram;  // 10 bins over (0,1]
    double sr_row_norm_min = 0.0, sr_row_norm_mean = 0.0, sr_row_norm_max = 0.0;
    std::string encoder_stage;
    int encoder_steps_remaining = 0;
};

InspectReport inspect_checkpoint(const TrialCheckpoint& ckpt);
void print_report(std::ostream& os, const InspectReport& report);

// `plot`: renders SVG charts from a previously written episodes or compare
// CSV; returns the written file paths.
std::vector<std::string> plot_csv(const std::string& csv_path, const std::string& out_dir);

// CSV writers (shared by run_train/run_compare and the tests).
void write_steps_csv(std::ostream& os, const std::vector<TrialResult>& trials, int offsets);
void write_episodes_csv(std::ostream& os, const std::vector<TrialResult>& trials);
void write_compare_csv(std::ostream& os,
                       const std::vector<std::pair<std::string, TrainResult>>& variants);

std::vector<Variant> variants_from_json(const nlohmann::json& j);

}  // namespace dhtm
