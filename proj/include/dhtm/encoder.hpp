#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dhtm/rng.hpp"
#include "dhtm/sdr.hpp"

namespace dhtm {

struct SpatialPoolerConfig {
    int input_dim = 0;
    int num_neurons = 0;
    int k = 0;                          // output sparsity, exact
    int block_count = 1;                // >1: kWTA runs per contiguous block
    double initial_connectivity = 0.5;  // fraction of inputs wired per neuron
    int target_rf_size = 0;             // newborn pruning target; 0 keeps initial
    int newborn_steps = 0;              // 0 starts in the adult stage
    double boost_scale = 2.0;           // homeostasis strength, annealed to 0
    double target_rate = 0.0;           // 0 derives k / num_neurons
    double rate_ema_horizon = 1000.0;   // activity-frequency moving average
    double learning_rate = 0.02;
    std::uint64_t seed = 0;
};

// Spatial Pooler: converts binary event images to fixed-sparsity SDRs.
// Each neuron holds a normalized weight row over its receptive field;
// winners are the k neurons with the highest boosted overlap. During the
// newborn stage boosting encourages specialization and the weakest
// connections are pruned; the adult stage is boost-neutral and stable.
class SpatialPooler {
public:
    enum class Stage { newborn, adult };

    explicit SpatialPooler(const SpatialPoolerConfig& config);

    // overlaps_i = boost_i * (W_i . obs), winners by kWTA.
    Sdr encode(std::span<const std::uint8_t> obs) const;

    // Hebbian update of the winners' weight rows; rows stay normalized.
    // Also advances every neuron's activity-rate estimate.
    void learn(std::span<const std::uint8_t> obs, const Sdr& winners);

    // One annealing step: boosting scale decays linearly to zero and
    // receptive fields are pruned toward the target size. No-op once adult.
    void newborn_step();

    std::vector<double> overlaps(std::span<const std::uint8_t> obs) const;

    Stage stage() const { return stage_; }
    int newborn_steps_remaining() const { return steps_remaining_; }
    double boost_scale() const { return scale_; }
    const SpatialPoolerConfig& config() const { return config_; }

    int rf_size(int neuron) const { return static_cast<int>(rf_[neuron].size()); }
    std::span<const int> rf(int neuron) const { return rf_[neuron]; }
    std::span<const double> weights(int neuron) const { return w_[neuron]; }
    double activity_rate(int neuron) const { return rate_[neuron]; }

    // Checkpoint access (raw state; see checkpoint.cpp for the layout).
    struct State {
        std::vector<std::vector<int>> rf;
        std::vector<std::vector<double>> w;
        std::vector<double> rate;
        double scale = 0.0;
        int steps_remaining = 0;
        int stage = 0;
        Rng rng;
    };
    State snapshot() const;
    void restore(const State& state);

private:
    double boost(int neuron) const;

    SpatialPoolerConfig config_;
    std::vector<std::vector<int>> rf_;     // per neuron, sorted input indices
    std::vector<std::vector<double>> w_;   // aligned with rf_, rows sum to 1
    std::vector<double> rate_;             // activity-frequency EMA
    double scale_;                         // current boosting scale
    int steps_remaining_;
    int newborn_total_;
    std::vector<int> initial_rf_size_;
    Stage stage_;
    Rng rng_;
};

// Linear reconstruction layer for visualization and debugging; trained by
// per-step gradient descent on the reconstruction MSE.
class LinearDecoder {
public:
    LinearDecoder(int sdr_dim, int input_dim, double learning_rate);

    std::vector<double> decode(const Sdr& z) const;
    void learn(const Sdr& z, std::span<const std::uint8_t> obs);

    int sdr_dim() const { return sdr_dim_; }
    int input_dim() const { return input_dim_; }
    std::span<const double> row(int i) const;

private:
    int sdr_dim_;
    int input_dim_;
    double learning_rate_;
    std::vector<double> weights_;  // sdr_dim x input_dim, row-major
};

}  // namespace dhtm
