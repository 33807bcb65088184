#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dhtm/encoder.hpp"
#include "dhtm/env.hpp"
#include "dhtm/rng.hpp"
#include "dhtm/sr.hpp"
#include "dhtm/tm.hpp"

namespace dhtm {

// Event-camera preprocessing: a bit fires where the absolute intensity delta
// between consecutive frames exceeds the frame pair's mean absolute delta.
// Without a previous frame the event image is empty.
std::vector<std::uint8_t> event_frame(std::span<const float> frame,
                                      std::span<const float> prev_frame, bool has_prev);

// Per-observation-state reward estimates, turned into observation priors by
// a scaled softmax; the log prior is the reward vector for value readout.
class RewardModel {
public:
    RewardModel(int n_vars, int n_obs_states, double alpha, double lambda);

    void learn(std::span<const int> obs_states, double reward);
    std::vector<double> observation_prior() const;
    std::vector<double> log_observation_prior() const;

    std::span<const double> r() const { return r_; }
    void restore(std::vector<double> r);

private:
    int n_vars_;
    int n_obs_states_;
    double alpha_;
    double lambda_;
    std::vector<double> r_;
};

struct AgentConfig {
    double temperature = 1.0;  // softmax policy temperature
    int surprise_offsets = 3;  // offsets 1..L evaluated against later steps
    int max_steps = 16;        // observations processed per episode, at most
    std::uint64_t seed = 0;    // policy sampling stream
};

struct StepRecord {
    int step = 0;
    int action = -1;  // action taken after this observation; -1 if none
    double reward = 0.0;
    std::vector<double> surprise;  // per offset; NaN where the future is cut off
    int segment_count = 0;
};

struct EpisodeRecord {
    std::vector<StepRecord> steps;
    double total_reward = 0.0;
    bool aborted = false;
    std::string error;

    // Mean surprise at a 1-based offset over steps where it is defined.
    double mean_surprise(int offset) const;
};

struct PolicyDecision {
    std::vector<double> values;
    std::vector<double> probs;
};

// The decision-making loop: preprocess, encode, memory update, reward-model
// learning, SR learning, softmax action selection. Memory weights persist
// across episodes; messages reset at each episode start.
class Agent {
public:
    Agent(SpatialPooler encoder, Memory memory, SrMatrix sr, RewardModel reward_model,
          AgentConfig config);

    EpisodeRecord run_episode(PinballEnv& env);

    // Observed state per variable from a block-partitioned encoder SDR.
    std::vector<int> observation_states(const Sdr& z) const;

    // Per-action one-step values from the current messages and the policy
    // softmax over them.
    PolicyDecision decide(int n_actions) const;
    int sample_action(const PolicyDecision& decision);

    const SpatialPooler& encoder() const { return encoder_; }
    const Memory& memory() const { return memory_; }
    const SrMatrix& sr() const { return sr_; }
    const RewardModel& reward_model() const { return reward_model_; }
    const AgentConfig& config() const { return config_; }
    const Rng& policy_rng() const { return policy_rng_; }

    SpatialPooler& encoder() { return encoder_; }
    Memory& memory() { return memory_; }
    SrMatrix& sr() { return sr_; }
    RewardModel& reward_model() { return reward_model_; }
    Rng& policy_rng() { return policy_rng_; }

private:
    int null_action() const { return memory_.topology().n_action_states - 1; }

    SpatialPooler encoder_;
    Memory memory_;
    SrMatrix sr_;
    RewardModel reward_model_;
    AgentConfig config_;
    Rng policy_rng_;
};

std::vector<double> softmax(std::span<const double> values, double temperature);

}  // namespace dhtm
