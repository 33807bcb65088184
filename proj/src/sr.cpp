#include "dhtm/sr.hpp"

#include <cmath>

#include "dhtm/check.hpp"

namespace dhtm {

SrMatrix::SrMatrix(const SrConfig& config)
    : config_(config),
      rows_(config.topology.total_hidden_cells()),
      cols_(config.topology.total_obs_states()) {
    check_arg(config.gamma >= 0.0 && config.gamma < 1.0, "SrMatrix: gamma must be in [0,1)");
    check_arg(config.horizon >= 0, "SrMatrix: horizon must be nonnegative");
    m_.assign(static_cast<std::size_t>(rows_) * cols_, 0.0);
}

void SrMatrix::flatten(const BeliefState& belief, std::vector<double>& out) const {
    const Topology& t = config_.topology;
    check_arg(belief.p.size() == static_cast<std::size_t>(t.n_vars),
              "SrMatrix: belief variable count mismatch");
    out.assign(rows_, 0.0);
    for (int v = 0; v < t.n_vars; ++v) {
        check_arg(belief.p[v].size() == static_cast<std::size_t>(t.cells_per_var()),
                  "SrMatrix: belief cell count mismatch");
        std::copy(belief.p[v].begin(), belief.p[v].end(),
                  out.begin() + static_cast<std::size_t>(v) * t.cells_per_var());
    }
}

std::vector<double> SrMatrix::readout(const BeliefState& belief) const {
    std::vector<double> b;
    flatten(belief, b);
    std::vector<double> out(cols_, 0.0);
    for (int i = 0; i < rows_; ++i) {
        const double bi = b[i];
        if (bi == 0.0) continue;
        const double* row = m_.data() + static_cast<std::size_t>(i) * cols_;
        for (int j = 0; j < cols_; ++j) out[j] += bi * row[j];
    }
    return out;
}

std::vector<double> SrMatrix::readout_distribution(const BeliefState& belief) const {
    std::vector<double> q = readout(belief);
    const Topology& t = config_.topology;
    for (int v = 0; v < t.n_vars; ++v) {
        const int base = v * t.n_obs_states;
        double sum = 0.0;
        for (int j = 0; j < t.n_obs_states; ++j) {
            if (q[base + j] < 0.0) q[base + j] = 0.0;
            sum += q[base + j];
        }
        if (sum <= 0.0) {
            for (int j = 0; j < t.n_obs_states; ++j) q[base + j] = 1.0 / t.n_obs_states;
        } else {
            for (int j = 0; j < t.n_obs_states; ++j) q[base + j] /= sum;
        }
    }
    return q;
}

double SrMatrix::value(const BeliefState& belief, std::span<const double> reward) const {
    check_arg(reward.size() == static_cast<std::size_t>(cols_), "SrMatrix: reward length mismatch");
    const std::vector<double> sr = readout(belief);
    double v = 0.0;
    for (int j = 0; j < cols_; ++j) v += sr[j] * reward[j];
    return v;
}

void SrMatrix::td_update(const BeliefState& belief_t,
                         const std::vector<std::vector<double>>& obs_dists,
                         const BeliefState& final_belief) {
    check_arg(static_cast<int>(obs_dists.size()) == config_.horizon + 1,
              "SrMatrix: need horizon+1 predicted observation distributions");
    for (const auto& dist : obs_dists)
        check_arg(dist.size() == static_cast<std::size_t>(cols_),
                  "SrMatrix: distribution length mismatch");

    std::vector<double> target(cols_, 0.0);
    double scale = 1.0;
    for (const auto& dist : obs_dists) {
        for (int j = 0; j < cols_; ++j) target[j] += scale * dist[j];
        scale *= config_.gamma;
    }
    // scale is now gamma^(T+1): bootstrap on the rollout's final belief.
    const std::vector<double> tail = readout(final_belief);
    for (int j = 0; j < cols_; ++j) target[j] += scale * tail[j];

    const std::vector<double> predicted = readout(belief_t);
    std::vector<double> delta(cols_);
    for (int j = 0; j < cols_; ++j) delta[j] = target[j] - predicted[j];

    std::vector<double> b;
    flatten(belief_t, b);
    for (int i = 0; i < rows_; ++i) {
        const double step = config_.alpha * b[i];
        if (step == 0.0) continue;
        double* row = m_.data() + static_cast<std::size_t>(i) * cols_;
        for (int j = 0; j < cols_; ++j) row[j] += step * delta[j];
    }
}

double SrMatrix::surprise(std::span<const double> q, std::span<const int> obs_states) const {
    const Topology& t = config_.topology;
    check_arg(q.size() == static_cast<std::size_t>(cols_), "SrMatrix: q length mismatch");
    check_arg(obs_states.size() == static_cast<std::size_t>(t.n_vars),
              "SrMatrix: one observed state per variable required");
    double total = 0.0;
    for (int v = 0; v < t.n_vars; ++v) {
        const double p = q[v * t.n_obs_states + obs_states[v]];
        total += std::log(std::max(p, config_.surprise_floor));
    }
    return -total / t.n_vars;
}

void SrMatrix::restore(std::vector<double> data) {
    check_arg(data.size() == m_.size(), "SrMatrix: restore size mismatch");
    m_ = std::move(data);
}

}  // namespace dhtm
