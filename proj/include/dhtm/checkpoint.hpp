#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "dhtm/encoder.hpp"
#include "dhtm/env.hpp"
#include "dhtm/tm.hpp"

namespace dhtm {

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Everything a trial needs to resume: learned weights, messages and every
// random stream. Versioned binary layout; see checkpoint.cpp.
struct TrialCheckpoint {
    // encoder
    int encoder_neurons = 0;
    int encoder_input_dim = 0;
    SpatialPooler::State encoder;
    // memory
    Topology topology;
    Memory::State memory;
    // successor representation
    int sr_rows = 0;
    int sr_cols = 0;
    double sr_gamma = 0.0;
    int sr_horizon = 0;
    std::vector<double> sr_data;
    // reward model
    std::vector<double> reward_r;
    // random streams
    Rng policy_rng;
    Rng env_rng;
    EnvState env_state;
    std::vector<std::uint8_t> env_inside;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(std::ostream& os, const TrialCheckpoint& ckpt);
TrialCheckpoint load_checkpoint(std::istream& is);

void save_checkpoint_file(const std::string& path, const TrialCheckpoint& ckpt);
TrialCheckpoint load_checkpoint_file(const std::string& path);

}  // namespace dhtm
