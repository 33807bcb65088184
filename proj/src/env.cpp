#include "dhtm/env.hpp"

#include <cmath>

#include "dhtm/check.hpp"

namespace dhtm {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

PinballEnv::PinballEnv(const PinballConfig& config) : config_(config), rng_(config.seed) {
    check_arg(config.width > 0 && config.height > 0, "PinballEnv: bad surface size");
    check_arg(config.res_x > 0 && config.res_y > 0, "PinballEnv: bad resolution");
    check_arg(config.ball_radius > 0 &&
                  2 * config.ball_radius < std::min(config.width, config.height),
              "PinballEnv: ball does not fit the surface");
    check_arg(!config.action_angles_deg.empty(), "PinballEnv: no actions configured");
    check_arg(config.friction >= 0 && config.friction < 1, "PinballEnv: friction out of range");
    check_arg(config.substeps >= 1, "PinballEnv: substeps must be positive");
    for (const auto& f : config.fields) {
        check_arg(f.cx >= 0 && f.cx <= config.width && f.cy >= 0 && f.cy <= config.height,
                  "PinballEnv: field center outside the surface");
        check_arg(f.radius > 0, "PinballEnv: field radius must be positive");
    }
    inside_.assign(config_.fields.size(), 0);
    reset();
}

PinballEnv::StepResult PinballEnv::reset() {
    state_ = EnvState{};
    state_.x = config_.start_x;
    state_.y = config_.start_y;
    inside_.assign(config_.fields.size(), 0);
    for (std::size_t i = 0; i < config_.fields.size(); ++i) {
        const auto& f = config_.fields[i];
        const double dx = state_.x - f.cx, dy = state_.y - f.cy;
        if (dx * dx + dy * dy <= f.radius * f.radius) {
            inside_[i] = 1;
            if (f.terminal) state_.terminal = true;
        }
    }
    return {render(), 0.0, state_.terminal};
}

double PinballEnv::field_events(double& reward) {
    bool terminal = false;
    for (std::size_t i = 0; i < config_.fields.size(); ++i) {
        const auto& f = config_.fields[i];
        const double dx = state_.x - f.cx, dy = state_.y - f.cy;
        const bool now = dx * dx + dy * dy <= f.radius * f.radius;
        if (now && !inside_[i]) {
            reward += f.reward;
            if (f.terminal) terminal = true;
            if (f.mode != ForceField::Deflection::none) {
                const double speed = std::hypot(state_.vx, state_.vy);
                if (f.mode == ForceField::Deflection::random_direction) {
                    const double angle = rng_.uniform() * 2.0 * kPi;
                    state_.vx = speed * std::cos(angle);
                    state_.vy = speed * std::sin(angle);
                } else {
                    const double sign = rng_.uniform() < 0.5 ? 1.0 : -1.0;
                    const double vx = state_.vx, vy = state_.vy;
                    state_.vx = -sign * vy;
                    state_.vy = sign * vx;
                }
            }
        }
        inside_[i] = now ? 1 : 0;
    }
    return terminal;
}

PinballEnv::StepResult PinballEnv::step(int action) {
    check_state(!state_.terminal, "PinballEnv: step on a terminal state");
    check_arg(action >= 0 && action < num_actions(), "PinballEnv: action out of range");

    const double angle = config_.action_angles_deg[action] * kPi / 180.0;
    state_.vx += config_.momentum * std::cos(angle);
    state_.vy += config_.momentum * std::sin(angle);

    double reward = 0.0;

    // A field already containing the ball stirs it once per step.
    for (std::size_t i = 0; i < config_.fields.size(); ++i) {
        if (!inside_[i]) continue;
        const auto& f = config_.fields[i];
        if (f.mode == ForceField::Deflection::none) continue;
        const double speed = std::hypot(state_.vx, state_.vy);
        if (f.mode == ForceField::Deflection::random_direction) {
            const double a = rng_.uniform() * 2.0 * kPi;
            state_.vx = speed * std::cos(a);
            state_.vy = speed * std::sin(a);
        } else {
            const double sign = rng_.uniform() < 0.5 ? 1.0 : -1.0;
            const double vx = state_.vx, vy = state_.vy;
            state_.vx = -sign * vy;
            state_.vy = sign * vx;
        }
    }

    const double dt = 1.0 / config_.substeps;
    const double damp = std::pow(1.0 - config_.friction, dt);
    const double r = config_.ball_radius;
    bool terminal = false;
    for (int s = 0; s < config_.substeps && !terminal; ++s) {
        state_.x += state_.vx * dt;
        state_.y += state_.vy * dt;
        // Reflect off borders: flip the normal velocity component.
        if (state_.x < r) {
            state_.x = 2 * r - state_.x;
            state_.vx = -state_.vx;
        } else if (state_.x > config_.width - r) {
            state_.x = 2 * (config_.width - r) - state_.x;
            state_.vx = -state_.vx;
        }
        if (state_.y < r) {
            state_.y = 2 * r - state_.y;
            state_.vy = -state_.vy;
        } else if (state_.y > config_.height - r) {
            state_.y = 2 * (config_.height - r) - state_.y;
            state_.vy = -state_.vy;
        }
        state_.vx *= damp;
        state_.vy *= damp;
        terminal = field_events(reward) || terminal;
    }

    reward += config_.step_reward;
    ++state_.steps;
    if (state_.steps >= config_.max_steps) terminal = true;
    state_.terminal = terminal;
    return {render(), reward, terminal};
}

std::vector<float> PinballEnv::render() const {
    std::vector<float> frame(static_cast<std::size_t>(config_.res_x) * config_.res_y, 0.0f);
    const double r2 = config_.ball_radius * config_.ball_radius;
    for (int py = 0; py < config_.res_y; ++py) {
        // Row 0 is the top of the image; world y grows upward.
        const double wy = config_.height * (1.0 - (py + 0.5) / config_.res_y);
        for (int px = 0; px < config_.res_x; ++px) {
            const double wx = config_.width * (px + 0.5) / config_.res_x;
            const double dx = wx - state_.x, dy = wy - state_.y;
            if (dx * dx + dy * dy <= r2)
                frame[static_cast<std::size_t>(py) * config_.res_x + px] = 1.0f;
        }
    }
    return frame;
}

void PinballEnv::restore(const EnvState& state, std::span<const std::uint8_t> inside,
                         const Rng& rng) {
    check_arg(inside.size() == config_.fields.size(), "PinballEnv: inside flag count mismatch");
    state_ = state;
    inside_.assign(inside.begin(), inside.end());
    rng_ = rng;
}

void PinballEnv::set_fields(std::vector<ForceField> fields) {
    config_.fields = std::move(fields);
    inside_.assign(config_.fields.size(), 0);
    for (std::size_t i = 0; i < config_.fields.size(); ++i) {
        const auto& f = config_.fields[i];
        const double dx = state_.x - f.cx, dy = state_.y - f.cy;
        if (dx * dx + dy * dy <= f.radius * f.radius) inside_[i] = 1;
    }
}

std::vector<ForceField> pinball_base_fields() {
    ForceField target;
    target.cx = 0.5;
    target.cy = 0.36;
    target.radius = 0.05;
    target.reward = 1.0;
    target.terminal = true;
    target.mode = ForceField::Deflection::random_direction;
    return {target};
}

std::vector<ForceField> pinball_blocked_fields() {
    std::vector<ForceField> fields = pinball_base_fields();
    ForceField blocker;
    blocker.cx = 0.5;
    blocker.cy = 0.22;
    blocker.radius = 0.07;
    blocker.reward = 0.0;
    blocker.terminal = false;
    blocker.mode = ForceField::Deflection::perpendicular;
    fields.push_back(blocker);
    return fields;
}

}  // namespace dhtm
