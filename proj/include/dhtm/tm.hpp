#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "dhtm/rng.hpp"

namespace dhtm {

// Layout of the factorial hidden space. Each hidden variable owns
// n_obs_states columns of cells_per_column cells; the flat cell id is
// var * cells_per_var + column * cells_per_column + within. Actions live in
// a dedicated always-observed variable appended after the hidden cells, so
// their cells can appear as presynaptic context.
struct Topology {
    int n_vars = 1;
    int n_obs_states = 2;
    int cells_per_column = 1;
    int n_action_states = 0;

    int cells_per_var() const { return n_obs_states * cells_per_column; }
    int total_hidden_cells() const { return n_vars * cells_per_var(); }
    int context_size() const { return total_hidden_cells() + n_action_states; }
    int total_obs_states() const { return n_vars * n_obs_states; }
    int cell_id(int var, int column, int within) const {
        return var * cells_per_var() + column * cells_per_column + within;
    }
    int action_cell(int action) const { return total_hidden_cells() + action; }
    int var_of(int cell) const { return cell / cells_per_var(); }
    int column_of(int cell) const { return (cell % cells_per_var()) / cells_per_column; }
};

struct MemoryConfig {
    Topology topology;
    int context_field_size = 0;  // presynaptic cells per grown segment; 0 = all winners
    double alpha_f = 0.1;        // factor-value learning rate
    double alpha_w = 0.1;        // synapse specificity learning rate
    double f_init = 0.0;         // 0 derives alpha_f
    double w_init = 0.5;         // neutral starting specificity
    int max_segments_per_cell = 32;
    double likelihood_eps = 1e-12;   // floor inside the cluster term
    double message_eps = 1e-12;      // floor for log m_u
    double floor_excitation = 1e-12; // exp(excitation) assigned to segmentless cells
    double burst_eps = 1e-12;        // observation column mass below this bursts
    int support_top_k = 32;          // per-variable cap on presynaptic support
    double support_eps = 1e-9;
    std::uint64_t seed = 0;
};

// One nonzero transition-factor entry. The factor value f is a bounded
// recency-weighted coincidence statistic in (0,1]; its log enters the cell
// excitation. w[u] estimates p(segment active | presynaptic cell u active).
struct Segment {
    int owner = -1;             // flat hidden cell id; -1 marks a free slot
    double f = 0.0;
    std::vector<int> field;     // presynaptic flat ids (previous step), sorted
    std::vector<double> w;      // aligned with field, in [0,1]
};

// Per-variable categorical distributions over hidden cells (the messages).
struct BeliefState {
    std::vector<std::vector<double>> p;

    static BeliefState uniform(const Topology& topology);
    void validate(const Topology& topology, double tol = 1e-9) const;
    bool operator==(const BeliefState&) const = default;
};

struct Rollout {
    // obs_dists[l][var][state]: predicted observation distribution l+1 steps
    // ahead, from the column marginals of the propagated prior.
    std::vector<std::vector<std::vector<double>>> obs_dists;
    BeliefState final_belief;
};

// DHTM core: factorial belief filtering with segment-based sparse transition
// factors and Monte-Carlo Hebbian learning. Single writer; predict_from is
// const and may run read-parallel on a fixed instance.
class Memory {
public:
    explicit Memory(const MemoryConfig& config);

    // Prior over the current step given the previous messages and the
    // executed action (-1 when the topology has no action variable).
    BeliefState predict(int action) const { return predict_from(messages_, action); }
    BeliefState predict_from(const BeliefState& messages, int action) const;

    // Eq. for the segment log-likelihood over a flattened context vector of
    // previous-step cell probabilities (hidden cells then action cells).
    double segment_log_likelihood(const Segment& segment, std::span<const double> context) const;

    // Posterior: prior masked to each variable's observed column and
    // renormalized; a column with(out) prior mass bursts to uniform.
    BeliefState observe(const BeliefState& prior, std::span<const int> obs_states) const;

    // Monte-Carlo Hebbian update from sampled winner cells.
    void learn(const BeliefState& prev_posterior, const BeliefState& cur_posterior, int action);

    // predict -> observe -> learn -> advance messages. Learning is skipped on
    // the first step after reset: the initial uniform message is not a
    // posterior of any observed step, so there is no transition to count.
    std::pair<BeliefState, BeliefState> step(int action, std::span<const int> obs_states);

    // True once the messages reflect at least one observed step.
    bool has_context() const { return context_valid_; }

    // Messages back to uniform; the segment store is untouched.
    void reset();

    // Forward simulation on a copy of the messages; the instance is not
    // mutated. action_sampler(l) supplies the action for step l.
    Rollout rollout(int horizon, const std::function<int(int)>& action_sampler) const;

    const Topology& topology() const { return config_.topology; }
    const MemoryConfig& config() const { return config_; }
    const BeliefState& messages() const { return messages_; }
    void set_messages(const BeliefState& messages);

    int segment_count() const;
    int segment_count_for_var(int var) const;
    std::vector<const Segment*> segments_of_cell(int cell) const;
    void for_each_segment(const std::function<void(const Segment&)>& fn) const;

    // Verifies the presynaptic reverse index against the receptive fields by
    // full scan; used by tests.
    bool reverse_index_consistent() const;

    struct State {
        std::vector<Segment> slots;
        std::vector<int> free_ids;
        std::vector<std::vector<int>> segs_by_cell;
        std::vector<std::vector<int>> reverse;
        BeliefState messages;
        bool context_valid = false;
        Rng rng;
    };
    State snapshot() const;
    void restore(const State& state);

private:
    std::vector<double> build_context(const BeliefState& messages, int action) const;
    void collect_support(std::span<const double> context, std::vector<int>& out) const;
    int grow_segment(int owner, std::span<const int> winner_pool);
    void erase_segment(int id);
    bool segment_active(const Segment& segment, std::span<const std::uint8_t> winner_mask) const;

    MemoryConfig config_;
    std::vector<Segment> slots_;
    std::vector<int> free_ids_;
    std::vector<std::vector<int>> segs_by_cell_;  // hidden cell -> segment ids
    std::vector<std::vector<int>> reverse_;       // context cell -> segment ids
    BeliefState messages_;
    bool context_valid_ = false;
    Rng rng_;
};

}  // namespace dhtm
