#include "dhtm/tm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dhtm/check.hpp"

namespace dhtm {

BeliefState BeliefState::uniform(const Topology& topology) {
    BeliefState b;
    b.p.assign(topology.n_vars,
               std::vector<double>(topology.cells_per_var(), 1.0 / topology.cells_per_var()));
    return b;
}

void BeliefState::validate(const Topology& topology, double tol) const {
    check_arg(p.size() == static_cast<std::size_t>(topology.n_vars),
              "BeliefState: variable count mismatch");
    for (const auto& dist : p) {
        check_arg(dist.size() == static_cast<std::size_t>(topology.cells_per_var()),
                  "BeliefState: cell count mismatch");
        double sum = 0.0;
        for (double v : dist) {
            check_arg(v >= 0.0, "BeliefState: negative probability");
            sum += v;
        }
        check_arg(std::abs(sum - 1.0) <= tol, "BeliefState: distribution does not sum to 1");
    }
}

Memory::Memory(const MemoryConfig& config) : config_(config), rng_(config.seed) {
    const Topology& t = config_.topology;
    check_arg(t.n_vars >= 1 && t.n_obs_states >= 1 && t.cells_per_column >= 1,
              "Memory: bad topology");
    check_arg(t.n_action_states >= 0, "Memory: bad action states");
    check_arg(config_.alpha_f >= 0.0 && config_.alpha_f < 1.0, "Memory: alpha_f out of range");
    check_arg(config_.alpha_w >= 0.0 && config_.alpha_w <= 1.0, "Memory: alpha_w out of range");
    check_arg(config_.max_segments_per_cell >= 1, "Memory: bad segment limit");
    if (config_.f_init <= 0.0)
        config_.f_init = config_.alpha_f > 0.0 ? config_.alpha_f : 0.5;
    segs_by_cell_.resize(t.total_hidden_cells());
    reverse_.resize(t.context_size());
    messages_ = BeliefState::uniform(t);
}

std::vector<double> Memory::build_context(const BeliefState& messages, int action) const {
    const Topology& t = config_.topology;
    std::vector<double> ctx(t.context_size(), 0.0);
    for (int v = 0; v < t.n_vars; ++v) {
        const auto& dist = messages.p[v];
        std::copy(dist.begin(), dist.end(), ctx.begin() + static_cast<std::size_t>(v) * t.cells_per_var());
    }
    if (t.n_action_states > 0 && action >= 0) {
        check_arg(action < t.n_action_states, "Memory: action out of range");
        ctx[t.action_cell(action)] = 1.0;
    }
    return ctx;
}

void Memory::collect_support(std::span<const double> context, std::vector<int>& out) const {
    // Presynaptic cells worth visiting through the reverse index. Per
    // variable the support is capped at the top support_top_k probabilities;
    // segments reached only through cells below the cap contribute
    // excitations near or below the no-segment floor and are approximated by
    // it.
    const Topology& t = config_.topology;
    out.clear();
    std::vector<int> cells;
    for (int v = 0; v < t.n_vars; ++v) {
        const int base = v * t.cells_per_var();
        cells.clear();
        for (int c = 0; c < t.cells_per_var(); ++c)
            if (context[base + c] >= config_.support_eps) cells.push_back(base + c);
        if (static_cast<int>(cells.size()) > config_.support_top_k) {
            std::nth_element(cells.begin(), cells.begin() + config_.support_top_k - 1, cells.end(),
                             [&](int a, int b) {
                                 if (context[a] != context[b]) return context[a] > context[b];
                                 return a < b;
                             });
            cells.resize(config_.support_top_k);
        }
        out.insert(out.end(), cells.begin(), cells.end());
    }
    for (int a = 0; a < t.n_action_states; ++a)
        if (context[t.action_cell(a)] > 0.0) out.push_back(t.action_cell(a));
}

double Memory::segment_log_likelihood(const Segment& segment,
                                      std::span<const double> context) const {
    check_state(!segment.field.empty(), "segment_log_likelihood: empty receptive field");
    double cluster = 0.0;   // sum_u w_ul m_u
    double solo = 0.0;      // sum_u (1 - w_ul) log m_u
    for (std::size_t s = 0; s < segment.field.size(); ++s) {
        const double m = context[segment.field[s]];
        const double w = segment.w[s];
        cluster += w * m;
        solo += (1.0 - w) * std::log(std::max(m, config_.message_eps));
    }
    return std::log(cluster + config_.likelihood_eps) + solo -
           std::log(static_cast<double>(segment.field.size()));
}

BeliefState Memory::predict_from(const BeliefState& messages, int action) const {
    const Topology& t = config_.topology;
    messages.validate(t, 1e-6);
    const std::vector<double> ctx = build_context(messages, action);

    std::vector<int> support;
    collect_support(ctx, support);
    std::vector<std::uint8_t> seen(slots_.size(), 0);
    const double floor_log = std::log(config_.floor_excitation);
    std::vector<double> excitation(t.total_hidden_cells(), floor_log);
    for (int u : support) {
        for (int sid : reverse_[u]) {
            if (seen[sid]) continue;
            seen[sid] = 1;
            const Segment& seg = slots_[sid];
            const double e = std::log(seg.f) + segment_log_likelihood(seg, ctx);
            if (e > excitation[seg.owner]) excitation[seg.owner] = e;
        }
    }

    BeliefState prior;
    prior.p.assign(t.n_vars, std::vector<double>(t.cells_per_var()));
    for (int v = 0; v < t.n_vars; ++v) {
        const int base = v * t.cells_per_var();
        double mx = excitation[base];
        for (int c = 1; c < t.cells_per_var(); ++c) mx = std::max(mx, excitation[base + c]);
        double sum = 0.0;
        auto& dist = prior.p[v];
        for (int c = 0; c < t.cells_per_var(); ++c) {
            dist[c] = std::exp(excitation[base + c] - mx);
            sum += dist[c];
        }
        for (double& x : dist) x /= sum;
    }
    return prior;
}

BeliefState Memory::observe(const BeliefState& prior, std::span<const int> obs_states) const {
    const Topology& t = config_.topology;
    prior.validate(t, 1e-6);
    check_arg(obs_states.size() == static_cast<std::size_t>(t.n_vars),
              "observe: one observation state per variable required");
    BeliefState post;
    post.p.assign(t.n_vars, std::vector<double>(t.cells_per_var(), 0.0));
    for (int v = 0; v < t.n_vars; ++v) {
        const int o = obs_states[v];
        check_arg(o >= 0 && o < t.n_obs_states, "observe: observation state out of range");
        const int first = o * t.cells_per_column;
        double mass = 0.0;
        for (int c = 0; c < t.cells_per_column; ++c) mass += prior.p[v][first + c];
        if (mass < config_.burst_eps) {
            // Burst: no prior support inside the observed column.
            for (int c = 0; c < t.cells_per_column; ++c)
                post.p[v][first + c] = 1.0 / t.cells_per_column;
        } else {
            for (int c = 0; c < t.cells_per_column; ++c)
                post.p[v][first + c] = prior.p[v][first + c] / mass;
        }
    }
    return post;
}

bool Memory::segment_active(const Segment& segment,
                            std::span<const std::uint8_t> winner_mask) const {
    for (int u : segment.field)
        if (!winner_mask[u]) return false;
    return true;
}

int Memory::grow_segment(int owner, std::span<const int> winner_pool) {
    const int pool_size = static_cast<int>(winner_pool.size());
    int field_size = config_.context_field_size > 0
                         ? std::min(config_.context_field_size, pool_size)
                         : pool_size;
    std::vector<int> field(winner_pool.begin(), winner_pool.end());
    for (int i = 0; i < field_size; ++i) {
        const int pick = i + rng_.uniform_int(pool_size - i);
        std::swap(field[i], field[pick]);
    }
    field.resize(field_size);
    std::sort(field.begin(), field.end());

    // An equal receptive field on the same cell is reinforced, not duplicated.
    for (int sid : segs_by_cell_[owner]) {
        if (slots_[sid].field == field) {
            slots_[sid].f += config_.alpha_f * (1.0 - slots_[sid].f);
            return sid;
        }
    }

    if (static_cast<int>(segs_by_cell_[owner].size()) >= config_.max_segments_per_cell) {
        int victim = segs_by_cell_[owner][0];
        for (int sid : segs_by_cell_[owner])
            if (slots_[sid].f < slots_[victim].f) victim = sid;
        erase_segment(victim);
    }

    int id;
    if (!free_ids_.empty()) {
        id = free_ids_.back();
        free_ids_.pop_back();
    } else {
        id = static_cast<int>(slots_.size());
        slots_.emplace_back();
    }
    Segment& seg = slots_[id];
    seg.owner = owner;
    seg.f = config_.f_init;
    seg.field = std::move(field);
    seg.w.assign(seg.field.size(), config_.w_init);
    segs_by_cell_[owner].push_back(id);
    for (int u : seg.field) reverse_[u].push_back(id);
    return id;
}

void Memory::erase_segment(int id) {
    Segment& seg = slots_[id];
    auto& own = segs_by_cell_[seg.owner];
    own.erase(std::find(own.begin(), own.end(), id));
    for (int u : seg.field) {
        auto& rev = reverse_[u];
        rev.erase(std::find(rev.begin(), rev.end(), id));
    }
    seg = Segment{};
    free_ids_.push_back(id);
}

void Memory::learn(const BeliefState& prev_posterior, const BeliefState& cur_posterior,
                   int action) {
    const Topology& t = config_.topology;
    prev_posterior.validate(t, 1e-6);
    cur_posterior.validate(t, 1e-6);
    if (t.n_action_states > 0)
        check_arg(action >= 0 && action < t.n_action_states, "learn: action out of range");

    // (1) One winner per variable, sampled from each posterior.
    std::vector<int> prev_winners(t.n_vars);
    std::vector<int> cur_winners(t.n_vars);
    for (int v = 0; v < t.n_vars; ++v)
        prev_winners[v] = v * t.cells_per_var() + rng_.categorical(prev_posterior.p[v]);
    for (int v = 0; v < t.n_vars; ++v)
        cur_winners[v] = v * t.cells_per_var() + rng_.categorical(cur_posterior.p[v]);

    std::vector<int> pool = prev_winners;
    if (t.n_action_states > 0) pool.push_back(t.action_cell(action));
    std::vector<std::uint8_t> winner_mask(t.context_size(), 0);
    for (int u : pool) winner_mask[u] = 1;

    // (2) Reinforce active segments of winner cells; grow where none fired.
    std::vector<int> grown;
    for (int v = 0; v < t.n_vars; ++v) {
        const int j = cur_winners[v];
        bool reinforced = false;
        for (int sid : segs_by_cell_[j]) {
            if (segment_active(slots_[sid], winner_mask)) {
                slots_[sid].f += config_.alpha_f * (1.0 - slots_[sid].f);
                reinforced = true;
            }
        }
        if (!reinforced) grown.push_back(grow_segment(j, pool));
    }

    // Segments touching any previous winner, including freshly grown ones.
    std::vector<std::uint8_t> seen(slots_.size(), 0);
    std::vector<int> touched;
    for (int u : pool)
        for (int sid : reverse_[u])
            if (!seen[sid]) {
                seen[sid] = 1;
                touched.push_back(sid);
            }

    std::vector<std::uint8_t> cur_winner_mask(t.total_hidden_cells(), 0);
    for (int j : cur_winners) cur_winner_mask[j] = 1;

    for (int sid : touched) {
        Segment& seg = slots_[sid];
        const bool active = segment_active(seg, winner_mask);
        // (3) Specificity update on synapses from previous winners.
        const double s = active ? 1.0 : 0.0;
        for (std::size_t i = 0; i < seg.field.size(); ++i)
            if (winner_mask[seg.field[i]]) seg.w[i] += config_.alpha_w * (s - seg.w[i]);
        // (4) Active segments of non-winner cells predicted falsely: decay.
        if (active && !cur_winner_mask[seg.owner]) seg.f *= 1.0 - config_.alpha_f;
    }
}

std::pair<BeliefState, BeliefState> Memory::step(int action, std::span<const int> obs_states) {
    BeliefState prior = predict(action);
    BeliefState posterior = observe(prior, obs_states);
    if (context_valid_) learn(messages_, posterior, action);
    messages_ = posterior;
    context_valid_ = true;
    return {std::move(prior), std::move(posterior)};
}

void Memory::reset() {
    messages_ = BeliefState::uniform(config_.topology);
    context_valid_ = false;
}

Rollout Memory::rollout(int horizon, const std::function<int(int)>& action_sampler) const {
    check_arg(horizon >= 1, "rollout: horizon must be at least 1");
    const Topology& t = config_.topology;
    Rollout out;
    out.obs_dists.reserve(horizon);
    BeliefState belief = messages_;
    for (int l = 0; l < horizon; ++l) {
        const int action = t.n_action_states > 0 ? action_sampler(l) : -1;
        belief = predict_from(belief, action);
        std::vector<std::vector<double>> dist(t.n_vars,
                                              std::vector<double>(t.n_obs_states, 0.0));
        for (int v = 0; v < t.n_vars; ++v)
            for (int o = 0; o < t.n_obs_states; ++o) {
                double mass = 0.0;
                const int first = o * t.cells_per_column;
                for (int c = 0; c < t.cells_per_column; ++c) mass += belief.p[v][first + c];
                dist[v][o] = mass;
            }
        out.obs_dists.push_back(std::move(dist));
    }
    out.final_belief = std::move(belief);
    return out;
}

void Memory::set_messages(const BeliefState& messages) {
    messages.validate(config_.topology, 1e-6);
    messages_ = messages;
    context_valid_ = true;
}

int Memory::segment_count() const {
    int count = 0;
    for (const auto& seg : slots_)
        if (seg.owner >= 0) ++count;
    return count;
}

int Memory::segment_count_for_var(int var) const {
    int count = 0;
    for (const auto& seg : slots_)
        if (seg.owner >= 0 && config_.topology.var_of(seg.owner) == var) ++count;
    return count;
}

std::vector<const Segment*> Memory::segments_of_cell(int cell) const {
    std::vector<const Segment*> out;
    for (int sid : segs_by_cell_[cell]) out.push_back(&slots_[sid]);
    return out;
}

void Memory::for_each_segment(const std::function<void(const Segment&)>& fn) const {
    for (const auto& seg : slots_)
        if (seg.owner >= 0) fn(seg);
}

bool Memory::reverse_index_consistent() const {
    for (std::size_t sid = 0; sid < slots_.size(); ++sid) {
        const Segment& seg = slots_[sid];
        if (seg.owner < 0) continue;
        for (int u : seg.field) {
            const auto& rev = reverse_[u];
            if (std::find(rev.begin(), rev.end(), static_cast<int>(sid)) == rev.end())
                return false;
        }
    }
    // No stale entries either.
    for (std::size_t u = 0; u < reverse_.size(); ++u)
        for (int sid : reverse_[u]) {
            const Segment& seg = slots_[sid];
            if (seg.owner < 0) return false;
            if (std::find(seg.field.begin(), seg.field.end(), static_cast<int>(u)) ==
                seg.field.end())
                return false;
        }
    return true;
}

Memory::State Memory::snapshot() const {
    return State{slots_, free_ids_, segs_by_cell_, reverse_, messages_, context_valid_, rng_};
}

void Memory::restore(const State& state) {
    check_arg(state.segs_by_cell.size() == segs_by_cell_.size(), "Memory: state size mismatch");
    check_arg(state.reverse.size() == reverse_.size(), "Memory: state size mismatch");
    slots_ = state.slots;
    free_ids_ = state.free_ids;
    segs_by_cell_ = state.segs_by_cell;
    reverse_ = state.reverse;
    messages_ = state.messages;
    context_valid_ = state.context_valid;
    rng_ = state.rng;
}

}  // namespace dhtm
