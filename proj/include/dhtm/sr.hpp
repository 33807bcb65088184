#pragma once

#include <span>
#include <vector>

#include "dhtm/tm.hpp"

namespace dhtm {

struct SrConfig {
    Topology topology;
    double gamma = 0.99;           // discount, in [0,1)
    int horizon = 5;               // T: prediction steps inside the TD target
    double alpha = 0.05;           // learning rate
    double surprise_floor = 1e-6;  // probability floor inside the surprise log
};

// Successor Representation weights: rows are flat hidden cells over all
// variables, columns are flat observation states (variable blocks of
// n_obs_states). Learned by belief-weighted n-step TD.
class SrMatrix {
public:
    explicit SrMatrix(const SrConfig& config);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    const SrConfig& config() const { return config_; }

    double at(int row, int col) const { return m_[static_cast<std::size_t>(row) * cols_ + col]; }
    double& at(int row, int col) { return m_[static_cast<std::size_t>(row) * cols_ + col]; }
    std::span<const double> row(int r) const {
        return {m_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)};
    }
    std::span<const double> data() const { return m_; }
    std::span<double> mutable_data() { return m_; }

    // SR of a belief: readout_j = sum_i b(i) M_ij with b the flattened
    // per-variable belief (total mass = number of variables).
    std::vector<double> readout(const BeliefState& belief) const;

    // Readout normalized per variable block into a probability vector;
    // negative entries (transient TD overshoot) clamp to zero first.
    std::vector<double> readout_distribution(const BeliefState& belief) const;

    // V = sum_j readout_j reward_j.
    double value(const BeliefState& belief, std::span<const double> reward) const;

    // n-step TD update. obs_dists holds T+1 flattened predicted observation
    // distributions for offsets 0..T (each of length cols, one probability
    // block per variable); final_belief is the bootstrap belief at t+T+1.
    void td_update(const BeliefState& belief_t,
                   const std::vector<std::vector<double>>& obs_dists,
                   const BeliefState& final_belief);

    // Pseudo-surprise of observed states (one per variable, flat block
    // offsets applied internally) under a normalized readout q:
    // -(1/K) sum_vars log max(q[obs], floor).
    double surprise(std::span<const double> q, std::span<const int> obs_states) const;

    void restore(std::vector<double> data);

private:
    void flatten(const BeliefState& belief, std::vector<double>& out) const;

    SrConfig config_;
    int rows_;
    int cols_;
    std::vector<double> m_;
};

}  // namespace dhtm
