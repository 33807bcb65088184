#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dhtm/agent.hpp"
#include "dhtm/encoder.hpp"
#include "dhtm/env.hpp"
#include "dhtm/sr.hpp"
#include "dhtm/tm.hpp"

namespace dhtm {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Full experiment description. Component dimensions are derived from the
// top-level topology scalars in finalize(), so configs only override what
// an experiment actually varies.
struct ExperimentConfig {
    // topology
    int n_vars = 5;
    int n_obs_states = 32;
    int cells_per_column = 4;

    PinballConfig env;
    std::vector<ForceField> switch_fields;  // force-field set after the switch
    int switch_episode = -1;                // -1 disables the mid-run switch

    SpatialPoolerConfig encoder;
    MemoryConfig memory;
    SrConfig sr;
    AgentConfig agent;
    double reward_alpha = 0.02;
    double reward_lambda = 4.0;

    int episodes = 500;
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    std::string out_dir;  // empty: $DHTM_OUT_DIR or "runs"
    bool plot = false;
    bool export_frames = false;

    // Fill derived fields and validate. Must be called before building.
    void finalize();

    static ExperimentConfig defaults();
    static ExperimentConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct Variant {
    std::string name;
    nlohmann::json overrides;  // JSON merge patch applied to the base config
};

// A fully wired trial: environment plus agent, seeded from one trial seed
// via named sub-streams.
struct Trial {
    PinballEnv env;
    Agent agent;
};

Trial build_trial(const ExperimentConfig& config, std::uint64_t trial_seed);

ExperimentConfig load_config_file(const std::string& path);

}  // namespace dhtm
