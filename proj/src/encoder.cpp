#include "dhtm/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dhtm/check.hpp"

namespace dhtm {

SpatialPooler::SpatialPooler(const SpatialPoolerConfig& config)
    : config_(config),
      scale_(config.newborn_steps > 0 ? config.boost_scale : 0.0),
      steps_remaining_(config.newborn_steps),
      newborn_total_(config.newborn_steps),
      stage_(config.newborn_steps > 0 ? Stage::newborn : Stage::adult),
      rng_(config.seed) {
    check_arg(config.input_dim > 0, "SpatialPooler: input_dim must be positive");
    check_arg(config.num_neurons > 0, "SpatialPooler: num_neurons must be positive");
    check_arg(config.k >= 1 && config.k <= config.num_neurons, "SpatialPooler: bad k");
    check_arg(config.block_count >= 1 && config.num_neurons % config.block_count == 0 &&
                  config.k % config.block_count == 0,
              "SpatialPooler: blocks must divide neurons and k");
    check_arg(config.initial_connectivity > 0.0 && config.initial_connectivity <= 1.0,
              "SpatialPooler: bad initial_connectivity");

    if (config_.target_rate <= 0.0)
        config_.target_rate = static_cast<double>(config.k) / config.num_neurons;

    const int rf_size =
        std::max(1, static_cast<int>(std::lround(config.initial_connectivity * config.input_dim)));
    rf_.resize(config.num_neurons);
    w_.resize(config.num_neurons);
    initial_rf_size_.assign(config.num_neurons, rf_size);
    std::vector<int> pool(config.input_dim);
    for (int i = 0; i < config.num_neurons; ++i) {
        // Sample the receptive field without replacement (partial Fisher-Yates).
        std::iota(pool.begin(), pool.end(), 0);
        for (int j = 0; j < rf_size; ++j) {
            const int pick = j + rng_.uniform_int(config.input_dim - j);
            std::swap(pool[j], pool[pick]);
        }
        rf_[i].assign(pool.begin(), pool.begin() + rf_size);
        std::sort(rf_[i].begin(), rf_[i].end());
        w_[i].resize(rf_size);
        double sum = 0.0;
        for (auto& v : w_[i]) {
            v = 0.5 + rng_.uniform();  // positive, roughly even start
            sum += v;
        }
        for (auto& v : w_[i]) v /= sum;
    }
    rate_.assign(config.num_neurons, config_.target_rate);
}

double SpatialPooler::boost(int neuron) const {
    if (scale_ == 0.0) return 1.0;
    return std::exp(scale_ * (config_.target_rate - rate_[neuron]));
}

std::vector<double> SpatialPooler::overlaps(std::span<const std::uint8_t> obs) const {
    check_arg(static_cast<int>(obs.size()) == config_.input_dim,
              "SpatialPooler: observation length mismatch");
    std::vector<double> out(config_.num_neurons, 0.0);
    for (int i = 0; i < config_.num_neurons; ++i) {
        double acc = 0.0;
        const auto& rf = rf_[i];
        const auto& w = w_[i];
        for (std::size_t s = 0; s < rf.size(); ++s)
            if (obs[rf[s]]) acc += w[s];
        out[i] = boost(i) * acc;
    }
    return out;
}

Sdr SpatialPooler::encode(std::span<const std::uint8_t> obs) const {
    const std::vector<double> scores = overlaps(obs);
    if (config_.block_count > 1)
        return kwta_blocks(scores, config_.block_count, config_.k / config_.block_count);
    return kwta(scores, config_.k);
}

void SpatialPooler::learn(std::span<const std::uint8_t> obs, const Sdr& winners) {
    check_arg(static_cast<int>(obs.size()) == config_.input_dim,
              "SpatialPooler: observation length mismatch");
    check_arg(winners.dimension == config_.num_neurons, "SpatialPooler: winner dimension mismatch");
    const double alpha = config_.learning_rate;
    for (int i : winners.active) {
        auto& rf = rf_[i];
        auto& w = w_[i];
        int hits = 0;
        for (int idx : rf) hits += obs[idx] ? 1 : 0;
        if (hits == 0) continue;  // empty intersection: nothing to strengthen
        const double add = alpha / hits;
        double sum = 0.0;
        for (std::size_t s = 0; s < rf.size(); ++s) {
            if (obs[rf[s]]) w[s] += add;
            sum += w[s];
        }
        for (auto& v : w) v /= sum;
    }
    // Activity-frequency EMA over all neurons.
    const double decay = 1.0 / config_.rate_ema_horizon;
    std::size_t cursor = 0;
    for (int i = 0; i < config_.num_neurons; ++i) {
        const bool active = cursor < winners.active.size() && winners.active[cursor] == i;
        if (active) ++cursor;
        rate_[i] += decay * ((active ? 1.0 : 0.0) - rate_[i]);
    }
}

void SpatialPooler::newborn_step() {
    if (stage_ == Stage::adult) return;
    const int done = newborn_total_ - steps_remaining_ + 1;
    --steps_remaining_;
    scale_ = config_.boost_scale * static_cast<double>(steps_remaining_) / newborn_total_;

    if (config_.target_rf_size > 0) {
        for (int i = 0; i < config_.num_neurons; ++i) {
            const int initial = initial_rf_size_[i];
            const int target = std::min(config_.target_rf_size, initial);
            // Linear schedule from the initial field size down to the target.
            const int desired = initial - static_cast<int>(std::lround(
                                              static_cast<double>(initial - target) * done /
                                              newborn_total_));
            int current = static_cast<int>(rf_[i].size());
            if (current <= desired) continue;
            // Drop the weakest connections and renormalize the row.
            std::vector<int> order(current);
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](int a, int b) {
                if (w_[i][a] != w_[i][b]) return w_[i][a] > w_[i][b];
                return a < b;
            });
            order.resize(desired);
            std::sort(order.begin(), order.end());
            std::vector<int> rf(desired);
            std::vector<double> w(desired);
            double sum = 0.0;
            for (int s = 0; s < desired; ++s) {
                rf[s] = rf_[i][order[s]];
                w[s] = w_[i][order[s]];
                sum += w[s];
            }
            if (sum > 0.0)
                for (auto& v : w) v /= sum;
            else
                for (auto& v : w) v = 1.0 / desired;
            rf_[i] = std::move(rf);
            w_[i] = std::move(w);
        }
    }

    if (steps_remaining_ == 0) {
        stage_ = Stage::adult;
        scale_ = 0.0;
    }
}

SpatialPooler::State SpatialPooler::snapshot() const {
    return State{rf_, w_, rate_, scale_, steps_remaining_, stage_ == Stage::adult ? 1 : 0, rng_};
}

void SpatialPooler::restore(const State& state) {
    check_arg(state.rf.size() == static_cast<std::size_t>(config_.num_neurons),
              "SpatialPooler: state size mismatch");
    rf_ = state.rf;
    w_ = state.w;
    rate_ = state.rate;
    scale_ = state.scale;
    steps_remaining_ = state.steps_remaining;
    stage_ = state.stage ? Stage::adult : Stage::newborn;
    rng_ = state.rng;
}

LinearDecoder::LinearDecoder(int sdr_dim, int input_dim, double learning_rate)
    : sdr_dim_(sdr_dim), input_dim_(input_dim), learning_rate_(learning_rate) {
    check_arg(sdr_dim > 0 && input_dim > 0, "LinearDecoder: bad dimensions");
    weights_.assign(static_cast<std::size_t>(sdr_dim) * input_dim, 0.0);
}

std::span<const double> LinearDecoder::row(int i) const {
    return {weights_.data() + static_cast<std::size_t>(i) * input_dim_,
            static_cast<std::size_t>(input_dim_)};
}

std::vector<double> LinearDecoder::decode(const Sdr& z) const {
    check_arg(z.dimension == sdr_dim_, "LinearDecoder: SDR dimension mismatch");
    std::vector<double> out(input_dim_, 0.0);
    for (int i : z.active) {
        const double* w = weights_.data() + static_cast<std::size_t>(i) * input_dim_;
        for (int j = 0; j < input_dim_; ++j) out[j] += w[j];
    }
    return out;
}

void LinearDecoder::learn(const Sdr& z, std::span<const std::uint8_t> obs) {
    check_arg(static_cast<int>(obs.size()) == input_dim_, "LinearDecoder: obs length mismatch");
    const std::vector<double> predicted = decode(z);
    for (int i : z.active) {
        double* w = weights_.data() + static_cast<std::size_t>(i) * input_dim_;
        for (int j = 0; j < input_dim_; ++j)
            w[j] -= learning_rate_ * (predicted[j] - static_cast<double>(obs[j]));
    }
}

}  // namespace dhtm
