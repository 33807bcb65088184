#include "dhtm/agent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dhtm/check.hpp"

namespace dhtm {

std::vector<std::uint8_t> event_frame(std::span<const float> frame,
                                      std::span<const float> prev_frame, bool has_prev) {
    std::vector<std::uint8_t> events(frame.size(), 0);
    if (!has_prev) return events;
    check_arg(frame.size() == prev_frame.size(), "event_frame: frame size mismatch");
    double mean = 0.0;
    for (std::size_t i = 0; i < frame.size(); ++i)
        mean += std::abs(static_cast<double>(frame[i]) - prev_frame[i]);
    mean /= static_cast<double>(frame.size());
    for (std::size_t i = 0; i < frame.size(); ++i)
        if (std::abs(static_cast<double>(frame[i]) - prev_frame[i]) > mean) events[i] = 1;
    return events;
}

std::vector<double> softmax(std::span<const double> values, double temperature) {
    check_arg(!values.empty(), "softmax: empty input");
    check_arg(temperature > 0.0, "softmax: temperature must be positive");
    double mx = values[0];
    for (double v : values) mx = std::max(mx, v);
    std::vector<double> out(values.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = std::exp((values[i] - mx) / temperature);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

RewardModel::RewardModel(int n_vars, int n_obs_states, double alpha, double lambda)
    : n_vars_(n_vars), n_obs_states_(n_obs_states), alpha_(alpha), lambda_(lambda) {
    check_arg(n_vars >= 1 && n_obs_states >= 1, "RewardModel: bad dimensions");
    r_.assign(static_cast<std::size_t>(n_vars) * n_obs_states, 0.0);
}

void RewardModel::learn(std::span<const int> obs_states, double reward) {
    check_arg(obs_states.size() == static_cast<std::size_t>(n_vars_),
              "RewardModel: one state per variable required");
    for (int v = 0; v < n_vars_; ++v) {
        check_arg(obs_states[v] >= 0 && obs_states[v] < n_obs_states_,
                  "RewardModel: state out of range");
        double& r = r_[static_cast<std::size_t>(v) * n_obs_states_ + obs_states[v]];
        r += alpha_ * (reward - r);
    }
}

std::vector<double> RewardModel::observation_prior() const {
    std::vector<double> prior(r_.size());
    std::vector<double> scaled(n_obs_states_);
    for (int v = 0; v < n_vars_; ++v) {
        for (int j = 0; j < n_obs_states_; ++j)
            scaled[j] = lambda_ * r_[static_cast<std::size_t>(v) * n_obs_states_ + j];
        const std::vector<double> p = softmax(scaled, 1.0);
        std::copy(p.begin(), p.end(), prior.begin() + static_cast<std::size_t>(v) * n_obs_states_);
    }
    return prior;
}

std::vector<double> RewardModel::log_observation_prior() const {
    std::vector<double> p = observation_prior();
    for (double& v : p) v = std::log(v);
    return p;
}

void RewardModel::restore(std::vector<double> r) {
    check_arg(r.size() == r_.size(), "RewardModel: restore size mismatch");
    r_ = std::move(r);
}

double EpisodeRecord::mean_surprise(int offset) const {
    double sum = 0.0;
    int count = 0;
    for (const auto& s : steps) {
        if (offset - 1 >= static_cast<int>(s.surprise.size())) continue;
        const double v = s.surprise[offset - 1];
        if (std::isnan(v)) continue;
        sum += v;
        ++count;
    }
    return count > 0 ? sum / count : std::numeric_limits<double>::quiet_NaN();
}

Agent::Agent(SpatialPooler encoder, Memory memory, SrMatrix sr, RewardModel reward_model,
             AgentConfig config)
    : encoder_(std::move(encoder)),
      memory_(std::move(memory)),
      sr_(std::move(sr)),
      reward_model_(std::move(reward_model)),
      config_(config),
      policy_rng_(config.seed) {
    const Topology& t = memory_.topology();
    check_arg(encoder_.config().block_count == t.n_vars,
              "Agent: encoder blocks must match hidden variables");
    check_arg(encoder_.config().num_neurons == t.total_obs_states(),
              "Agent: encoder size must match observation states");
    check_arg(encoder_.config().k == t.n_vars, "Agent: encoder must emit one winner per block");
    check_arg(t.n_action_states >= 2, "Agent: need at least one action plus the null action");
}

std::vector<int> Agent::observation_states(const Sdr& z) const {
    const Topology& t = memory_.topology();
    check_arg(z.active.size() == static_cast<std::size_t>(t.n_vars),
              "Agent: expected one active bit per variable block");
    std::vector<int> obs(t.n_vars);
    for (int v = 0; v < t.n_vars; ++v) {
        const int idx = z.active[v] - v * t.n_obs_states;
        check_arg(idx >= 0 && idx < t.n_obs_states, "Agent: active bit outside its block");
        obs[v] = idx;
    }
    return obs;
}

PolicyDecision Agent::decide(int n_actions) const {
    const std::vector<double> reward = reward_model_.log_observation_prior();
    PolicyDecision decision;
    decision.values.resize(n_actions);
    for (int a = 0; a < n_actions; ++a) {
        const BeliefState next = memory_.predict(a);
        decision.values[a] = sr_.value(next, reward);
    }
    decision.probs = softmax(decision.values, config_.temperature);
    return decision;
}

int Agent::sample_action(const PolicyDecision& decision) {
    return policy_rng_.categorical(decision.probs);
}

EpisodeRecord Agent::run_episode(PinballEnv& env) {
    const Topology& t = memory_.topology();
    const int n_actions = env.num_actions();
    check_arg(t.n_action_states == n_actions + 1,
              "Agent: memory action states must cover env actions plus null");
    const int horizon = sr_.config().horizon;
    const int offsets = std::min(config_.surprise_offsets, std::max(1, horizon));

    EpisodeRecord record;
    memory_.reset();
    int action = null_action();
    std::vector<float> prev_frame;
    bool has_prev = false;
    std::vector<std::vector<double>> q_history;  // normalized SR readout per step

    PinballEnv::StepResult res;
    try {
        res = env.reset();
    } catch (const std::exception& e) {
        record.aborted = true;
        record.error = e.what();
        return record;
    }

    for (int step = 0; step < config_.max_steps; ++step) {
        const std::vector<std::uint8_t> events = event_frame(res.frame, prev_frame, has_prev);
        prev_frame = res.frame;
        has_prev = true;

        const Sdr z = encoder_.encode(events);
        encoder_.learn(events, z);
        encoder_.newborn_step();
        const std::vector<int> obs = observation_states(z);

        auto [prior, posterior] = memory_.step(action, obs);
        reward_model_.learn(obs, res.reward);

        // Score predictions made at earlier steps against this observation.
        for (int l = 1; l <= offsets; ++l) {
            const int origin = step - l;
            if (origin < 0) break;
            record.steps[origin].surprise[l - 1] = sr_.surprise(q_history[origin], obs);
        }

        // One TD update per step from a fresh rollout; rollout actions are
        // sampled from the policy computed at this step.
        const PolicyDecision policy = decide(n_actions);
        Rollout rollout = memory_.rollout(horizon + 1, [this, &policy](int) {
            return policy_rng_.categorical(policy.probs);
        });
        std::vector<std::vector<double>> obs_dists;
        obs_dists.reserve(horizon + 1);
        std::vector<double> now(t.total_obs_states(), 0.0);
        for (int v = 0; v < t.n_vars; ++v) now[v * t.n_obs_states + obs[v]] = 1.0;
        obs_dists.push_back(std::move(now));
        for (int l = 0; l < horizon; ++l) {
            std::vector<double> flat(t.total_obs_states());
            for (int v = 0; v < t.n_vars; ++v)
                std::copy(rollout.obs_dists[l][v].begin(), rollout.obs_dists[l][v].end(),
                          flat.begin() + static_cast<std::size_t>(v) * t.n_obs_states);
            obs_dists.push_back(std::move(flat));
        }
        sr_.td_update(posterior, obs_dists, rollout.final_belief);
        q_history.push_back(sr_.readout_distribution(posterior));

        StepRecord row;
        row.step = step;
        row.reward = res.reward;
        row.surprise.assign(offsets, std::numeric_limits<double>::quiet_NaN());
        row.segment_count = memory_.segment_count();
        record.steps.push_back(std::move(row));
        record.total_reward += res.reward;

        if (res.terminal) break;

        action = sample_action(policy);
        record.steps.back().action = action;
        try {
            res = env.step(action);
        } catch (const std::exception& e) {
            record.aborted = true;
            record.error = e.what();
            break;
        }
    }
    return record;
}

}  // namespace dhtm
