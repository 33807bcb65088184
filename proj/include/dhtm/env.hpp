#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dhtm/rng.hpp"

namespace dhtm {

// Circular force field. Entering it accrues its reward (once per entry) and
// optionally ends the episode; while the ball is inside, the field deflects
// it according to its mode.
struct ForceField {
    double cx = 0.5, cy = 0.5;
    double radius = 0.1;
    double reward = 0.0;
    bool terminal = false;
    enum class Deflection { none, random_direction, perpendicular } mode = Deflection::none;
};

struct PinballConfig {
    double width = 1.0, height = 0.72;  // world units
    int res_x = 50, res_y = 36;         // rendered frame resolution
    double ball_radius = 0.045;
    double friction = 0.3;              // fractional speed loss per step
    double momentum = 0.10;             // impulse magnitude per action
    // Momentum directions in degrees from +x; 90 is straight up. The default
    // three actions: vertical, 30 degrees left, 30 degrees right.
    std::vector<double> action_angles_deg = {90.0, 120.0, 60.0};
    double start_x = 0.5, start_y = 0.10;
    double step_reward = -0.02;
    std::vector<ForceField> fields;
    int max_steps = 15;
    int substeps = 8;
    std::uint64_t seed = 0;
};

struct EnvState {
    double x = 0.0, y = 0.0;
    double vx = 0.0, vy = 0.0;
    int steps = 0;
    bool terminal = false;
};

// A ball on a bordered 2D surface with stochastic force fields, rendered as
// a small grayscale image. Explicit Euler with fixed substeps; borders
// reflect the velocity component normal to the wall.
class PinballEnv {
public:
    struct StepResult {
        std::vector<float> frame;
        double reward = 0.0;
        bool terminal = false;
    };

    explicit PinballEnv(const PinballConfig& config);

    StepResult reset();
    StepResult step(int action);

    std::vector<float> render() const;
    const EnvState& state() const { return state_; }
    const PinballConfig& config() const { return config_; }
    int num_actions() const { return static_cast<int>(config_.action_angles_deg.size()); }

    // Swap the force-field set (the adaptation experiment's mid-run switch).
    void set_fields(std::vector<ForceField> fields);

    Rng& rng() { return rng_; }
    const Rng& rng() const { return rng_; }
    std::span<const std::uint8_t> inside_flags() const { return inside_; }
    void restore(const EnvState& state, std::span<const std::uint8_t> inside, const Rng& rng);

private:
    double field_events(double& reward);  // deflections + entry rewards; returns terminal

    PinballConfig config_;
    EnvState state_;
    std::vector<std::uint8_t> inside_;  // per field: ball currently inside
    Rng rng_;
};

// Default experiment layouts: a terminal reward field in the center, and the
// switched variant where a perpendicular-deflection field obscures the
// approach to it.
std::vector<ForceField> pinball_base_fields();
std::vector<ForceField> pinball_blocked_fields();

}  // namespace dhtm
