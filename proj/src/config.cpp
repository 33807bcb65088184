#include "dhtm/config.hpp"

#include <cstdlib>
#include <fstream>

#include "dhtm/check.hpp"

namespace dhtm {

namespace {

using nlohmann::json;

ForceField field_from_json(const json& j) {
    ForceField f;
    f.cx = j.value("cx", f.cx);
    f.cy = j.value("cy", f.cy);
    f.radius = j.value("radius", f.radius);
    f.reward = j.value("reward", f.reward);
    f.terminal = j.value("terminal", f.terminal);
    const std::string mode = j.value("mode", std::string("none"));
    if (mode == "none")
        f.mode = ForceField::Deflection::none;
    else if (mode == "random")
        f.mode = ForceField::Deflection::random_direction;
    else if (mode == "perpendicular")
        f.mode = ForceField::Deflection::perpendicular;
    else
        throw ConfigError("unknown field mode: " + mode);
    return f;
}

json field_to_json(const ForceField& f) {
    const char* mode = "none";
    if (f.mode == ForceField::Deflection::random_direction) mode = "random";
    if (f.mode == ForceField::Deflection::perpendicular) mode = "perpendicular";
    return json{{"cx", f.cx},         {"cy", f.cy},           {"radius", f.radius},
                {"reward", f.reward}, {"terminal", f.terminal}, {"mode", mode}};
}

std::vector<ForceField> fields_from_json(const json& arr) {
    std::vector<ForceField> out;
    for (const auto& j : arr) out.push_back(field_from_json(j));
    return out;
}

}  // namespace

void ExperimentConfig::finalize() {
    if (episodes < 1) throw ConfigError("episodes must be at least 1");
    if (seeds.empty()) throw ConfigError("seeds must not be empty");
    if (n_vars < 1 || n_obs_states < 2 || cells_per_column < 1)
        throw ConfigError("bad topology scalars");

    encoder.input_dim = env.res_x * env.res_y;
    encoder.num_neurons = n_vars * n_obs_states;
    encoder.k = n_vars;
    encoder.block_count = n_vars;

    memory.topology.n_vars = n_vars;
    memory.topology.n_obs_states = n_obs_states;
    memory.topology.cells_per_column = cells_per_column;
    memory.topology.n_action_states = static_cast<int>(env.action_angles_deg.size()) + 1;

    sr.topology = memory.topology;

    if (agent.max_steps <= 0) agent.max_steps = env.max_steps + 1;
    if (agent.surprise_offsets < 1) agent.surprise_offsets = 1;
    agent.surprise_offsets = std::min(agent.surprise_offsets, std::max(1, sr.horizon));

    if (out_dir.empty()) {
        const char* env_dir = std::getenv("DHTM_OUT_DIR");
        out_dir = env_dir && *env_dir ? env_dir : "runs";
    }
}

ExperimentConfig ExperimentConfig::defaults() {
    ExperimentConfig c;
    c.env.fields = pinball_base_fields();
    c.switch_fields = pinball_blocked_fields();
    c.encoder.initial_connectivity = 0.5;
    c.encoder.target_rf_size = 25;
    c.encoder.newborn_steps = 400;
    c.encoder.boost_scale = 2.0;
    c.encoder.learning_rate = 0.02;
    c.finalize();
    return c;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig c = defaults();
    c.n_vars = j.value("n_vars", c.n_vars);
    c.n_obs_states = j.value("n_obs_states", c.n_obs_states);
    c.cells_per_column = j.value("cells_per_column", c.cells_per_column);
    c.episodes = j.value("episodes", c.episodes);
    c.switch_episode = j.value("switch_episode", c.switch_episode);
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    c.out_dir = j.value("out_dir", c.out_dir);
    c.plot = j.value("plot", c.plot);
    c.export_frames = j.value("export_frames", c.export_frames);

    if (j.contains("env")) {
        const json& e = j.at("env");
        c.env.width = e.value("width", c.env.width);
        c.env.height = e.value("height", c.env.height);
        c.env.res_x = e.value("res_x", c.env.res_x);
        c.env.res_y = e.value("res_y", c.env.res_y);
        c.env.ball_radius = e.value("ball_radius", c.env.ball_radius);
        c.env.friction = e.value("friction", c.env.friction);
        c.env.momentum = e.value("momentum", c.env.momentum);
        if (e.contains("action_angles_deg"))
            c.env.action_angles_deg = e.at("action_angles_deg").get<std::vector<double>>();
        c.env.start_x = e.value("start_x", c.env.start_x);
        c.env.start_y = e.value("start_y", c.env.start_y);
        c.env.step_reward = e.value("step_reward", c.env.step_reward);
        c.env.max_steps = e.value("max_steps", c.env.max_steps);
        c.env.substeps = e.value("substeps", c.env.substeps);
        if (e.contains("fields")) c.env.fields = fields_from_json(e.at("fields"));
    }
    if (j.contains("switch_fields")) c.switch_fields = fields_from_json(j.at("switch_fields"));

    if (j.contains("encoder")) {
        const json& e = j.at("encoder");
        c.encoder.initial_connectivity = e.value("initial_connectivity", c.encoder.initial_connectivity);
        c.encoder.target_rf_size = e.value("target_rf_size", c.encoder.target_rf_size);
        c.encoder.newborn_steps = e.value("newborn_steps", c.encoder.newborn_steps);
        c.encoder.boost_scale = e.value("boost_scale", c.encoder.boost_scale);
        c.encoder.target_rate = e.value("target_rate", c.encoder.target_rate);
        c.encoder.rate_ema_horizon = e.value("rate_ema_horizon", c.encoder.rate_ema_horizon);
        c.encoder.learning_rate = e.value("learning_rate", c.encoder.learning_rate);
    }
    if (j.contains("memory")) {
        const json& m = j.at("memory");
        c.memory.context_field_size = m.value("context_field_size", c.memory.context_field_size);
        c.memory.alpha_f = m.value("alpha_f", c.memory.alpha_f);
        c.memory.alpha_w = m.value("alpha_w", c.memory.alpha_w);
        c.memory.f_init = m.value("f_init", c.memory.f_init);
        c.memory.w_init = m.value("w_init", c.memory.w_init);
        c.memory.max_segments_per_cell =
            m.value("max_segments_per_cell", c.memory.max_segments_per_cell);
        c.memory.support_top_k = m.value("support_top_k", c.memory.support_top_k);
    }
    if (j.contains("sr")) {
        const json& s = j.at("sr");
        c.sr.gamma = s.value("gamma", c.sr.gamma);
        c.sr.horizon = s.value("horizon", c.sr.horizon);
        c.sr.alpha = s.value("alpha", c.sr.alpha);
    }
    if (j.contains("agent")) {
        const json& a = j.at("agent");
        c.agent.temperature = a.value("temperature", c.agent.temperature);
        c.agent.surprise_offsets = a.value("surprise_offsets", c.agent.surprise_offsets);
        c.agent.max_steps = a.value("max_steps", 0);
        c.reward_alpha = a.value("reward_alpha", c.reward_alpha);
        c.reward_lambda = a.value("reward_lambda", c.reward_lambda);
    }
    c.finalize();
    return c;
}

nlohmann::json ExperimentConfig::to_json() const {
    json fields = json::array();
    for (const auto& f : env.fields) fields.push_back(field_to_json(f));
    json switch_fields_json = json::array();
    for (const auto& f : switch_fields) switch_fields_json.push_back(field_to_json(f));
    return json{
        {"n_vars", n_vars},
        {"n_obs_states", n_obs_states},
        {"cells_per_column", cells_per_column},
        {"episodes", episodes},
        {"switch_episode", switch_episode},
        {"seeds", seeds},
        {"out_dir", out_dir},
        {"plot", plot},
        {"export_frames", export_frames},
        {"env",
         {{"width", env.width},
          {"height", env.height},
          {"res_x", env.res_x},
          {"res_y", env.res_y},
          {"ball_radius", env.ball_radius},
          {"friction", env.friction},
          {"momentum", env.momentum},
          {"action_angles_deg", env.action_angles_deg},
          {"start_x", env.start_x},
          {"start_y", env.start_y},
          {"step_reward", env.step_reward},
          {"max_steps", env.max_steps},
          {"substeps", env.substeps},
          {"fields", fields}}},
        {"switch_fields", switch_fields_json},
        {"encoder",
         {{"initial_connectivity", encoder.initial_connectivity},
          {"target_rf_size", encoder.target_rf_size},
          {"newborn_steps", encoder.newborn_steps},
          {"boost_scale", encoder.boost_scale},
          {"target_rate", encoder.target_rate},
          {"rate_ema_horizon", encoder.rate_ema_horizon},
          {"learning_rate", encoder.learning_rate}}},
        {"memory",
         {{"context_field_size", memory.context_field_size},
          {"alpha_f", memory.alpha_f},
          {"alpha_w", memory.alpha_w},
          {"f_init", memory.f_init},
          {"w_init", memory.w_init},
          {"max_segments_per_cell", memory.max_segments_per_cell},
          {"support_top_k", memory.support_top_k}}},
        {"sr", {{"gamma", sr.gamma}, {"horizon", sr.horizon}, {"alpha", sr.alpha}}},
        {"agent",
         {{"temperature", agent.temperature},
          {"surprise_offsets", agent.surprise_offsets},
          {"max_steps", agent.max_steps},
          {"reward_alpha", reward_alpha},
          {"reward_lambda", reward_lambda}}},
    };
}

Trial build_trial(const ExperimentConfig& config, std::uint64_t trial_seed) {
    PinballConfig env_config = config.env;
    env_config.seed = derive_seed(trial_seed, "env");

    SpatialPoolerConfig enc_config = config.encoder;
    enc_config.seed = derive_seed(trial_seed, "encoder");

    MemoryConfig mem_config = config.memory;
    mem_config.seed = derive_seed(trial_seed, "memory");

    AgentConfig agent_config = config.agent;
    agent_config.seed = derive_seed(trial_seed, "policy");

    const Topology& t = mem_config.topology;
    RewardModel reward(t.n_vars, t.n_obs_states, config.reward_alpha, config.reward_lambda);
    Agent agent(SpatialPooler(enc_config), Memory(mem_config), SrMatrix(config.sr),
                std::move(reward), agent_config);
    return Trial{PinballEnv(env_config), std::move(agent)};
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        is >> j;
    } catch (const std::exception& e) {
        throw ConfigError("config parse error: " + std::string(e.what()));
    }
    return ExperimentConfig::from_json(j);
}

}  // namespace dhtm
