#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "dhtm/oracle.hpp"
#include "dhtm/rng.hpp"
#include "dhtm/tm.hpp"

using namespace dhtm;

namespace {

MemoryConfig chain_config(int n_obs_states, int cells_per_column = 1, int n_vars = 1,
                          int n_actions = 0) {
    MemoryConfig c;
    c.topology.n_vars = n_vars;
    c.topology.n_obs_states = n_obs_states;
    c.topology.cells_per_column = cells_per_column;
    c.topology.n_action_states = n_actions;
    c.seed = 99;
    return c;
}

BeliefState one_hot(const Topology& t, int cell) {
    BeliefState b;
    b.p.assign(t.n_vars, std::vector<double>(t.cells_per_var(), 0.0));
    b.p[t.var_of(cell)][cell % t.cells_per_var()] = 1.0;
    return b;
}

// Install hand-crafted segments through the state mirror.
void install_segments(Memory& memory, const std::vector<Segment>& segments) {
    Memory::State state = memory.snapshot();
    for (const auto& seg : segments) {
        const int id = static_cast<int>(state.slots.size());
        state.slots.push_back(seg);
        state.segs_by_cell[seg.owner].push_back(id);
        for (int u : seg.field) state.reverse[u].push_back(id);
    }
    memory.restore(state);
}

double belief_sum(const BeliefState& b, int var) {
    double sum = 0.0;
    for (double v : b.p[var]) sum += v;
    return sum;
}

}  // namespace

TEST_CASE("predict with no segments is uniform") {
    Memory memory(chain_config(4, 3, 2));
    const BeliefState prior = memory.predict(-1);
    for (int v = 0; v < 2; ++v)
        for (double p : prior.p[v]) CHECK(p == doctest::Approx(1.0 / 12));
}

TEST_CASE("a matching segment wins its variable") {
    Memory memory(chain_config(4));
    Segment seg;
    seg.owner = 1;
    seg.f = 1.0;
    seg.field = {0};
    seg.w = {1.0};
    install_segments(memory, {seg});
    memory.set_messages(one_hot(memory.topology(), 0));
    const BeliefState prior = memory.predict(-1);
    for (int c = 0; c < 4; ++c)
        if (c != 1) CHECK(prior.p[0][1] > prior.p[0][c]);
    CHECK(prior.p[0][1] > 0.999);
}

TEST_CASE("two segments with different factor values follow the softmax against floors") {
    MemoryConfig config = chain_config(4);
    Memory memory(config);
    Segment a, b;
    a.owner = 1;
    a.f = 0.8;
    a.field = {0};
    a.w = {1.0};
    b.owner = 2;
    b.f = 0.2;
    b.field = {0};
    b.w = {1.0};
    install_segments(memory, {a, b});
    memory.set_messages(one_hot(memory.topology(), 0));
    const BeliefState prior = memory.predict(-1);

    // Hand evaluation: exp(E) is f*(w*m + eps) for the matching segments and
    // the configured floor for segmentless cells.
    const double ea = 0.8 * (1.0 + config.likelihood_eps);
    const double eb = 0.2 * (1.0 + config.likelihood_eps);
    const double floor = config.floor_excitation;
    const double z = ea + eb + 2 * floor;
    CHECK(prior.p[0][1] == doctest::Approx(ea / z).epsilon(1e-12));
    CHECK(prior.p[0][2] == doctest::Approx(eb / z).epsilon(1e-12));
    CHECK(prior.p[0][0] == doctest::Approx(floor / z).epsilon(1e-12));
    CHECK(prior.p[0][1] / prior.p[0][2] == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("segment log likelihood formula") {
    MemoryConfig config = chain_config(4);
    Memory memory(config);
    const Topology& t = memory.topology();

    SUBCASE("all w=1 with equal messages gives log mean message") {
        Segment seg;
        seg.owner = 0;
        seg.f = 1.0;
        seg.field = {0, 1, 2, 3};
        seg.w = {1, 1, 1, 1};
        std::vector<double> ctx(t.context_size(), 0.25);
        CHECK(memory.segment_log_likelihood(seg, ctx) ==
              doctest::Approx(std::log(0.25)).epsilon(1e-9));
    }
    SUBCASE("all w=1 with a one-hot message inside the field gives log(1/n)") {
        Segment seg;
        seg.owner = 0;
        seg.f = 1.0;
        seg.field = {0, 1, 2, 3};
        seg.w = {1, 1, 1, 1};
        std::vector<double> ctx(t.context_size(), 0.0);
        ctx[2] = 1.0;
        CHECK(memory.segment_log_likelihood(seg, ctx) ==
              doctest::Approx(std::log(0.25)).epsilon(1e-9));
    }
    SUBCASE("all w=0 is floor dominated") {
        Segment seg;
        seg.owner = 0;
        seg.f = 1.0;
        seg.field = {0, 1};
        seg.w = {0, 0};
        std::vector<double> ctx(t.context_size(), 0.0);
        ctx[0] = 0.5;
        ctx[1] = 0.5;
        const double expected =
            std::log(config.likelihood_eps) + 2 * std::log(0.5) - std::log(2.0);
        CHECK(memory.segment_log_likelihood(seg, ctx) == doctest::Approx(expected).epsilon(1e-9));
    }
    SUBCASE("empty receptive field is an invalid state") {
        Segment seg;
        seg.owner = 0;
        seg.f = 1.0;
        std::vector<double> ctx(t.context_size(), 0.0);
        CHECK_THROWS_AS(memory.segment_log_likelihood(seg, ctx), std::logic_error);
    }
}

TEST_CASE("observe masks, renormalizes and bursts") {
    Memory memory(chain_config(3, 4));  // 3 columns of 4 cells
    const Topology& t = memory.topology();

    SUBCASE("uniform prior becomes uniform over the observed column") {
        const BeliefState prior = BeliefState::uniform(t);
        const std::vector<int> obs{1};
        const BeliefState post = memory.observe(prior, obs);
        for (int c = 0; c < 12; ++c) {
            const bool in_column = c >= 4 && c < 8;
            CHECK(post.p[0][c] == doctest::Approx(in_column ? 0.25 : 0.0));
        }
    }
    SUBCASE("prior concentrated inside the column is renormalized") {
        BeliefState prior;
        prior.p = {{0.0, 0.0, 0.0, 0.0, 0.6, 0.2, 0.1, 0.1, 0.0, 0.0, 0.0, 0.0}};
        const std::vector<int> obs{1};
        const BeliefState post = memory.observe(prior, obs);
        CHECK(post.p[0][4] == doctest::Approx(0.6));
        CHECK(post.p[0][7] == doctest::Approx(0.1));
    }
    SUBCASE("zero prior mass in the column bursts to uniform") {
        BeliefState prior;
        prior.p = {{0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0}};
        const std::vector<int> obs{2};
        const BeliefState post = memory.observe(prior, obs);
        for (int c = 8; c < 12; ++c) CHECK(post.p[0][c] == doctest::Approx(0.25));
    }
    SUBCASE("missing observation is rejected") {
        const BeliefState prior = BeliefState::uniform(t);
        CHECK_THROWS_AS(memory.observe(prior, std::vector<int>{}), std::invalid_argument);
    }
}

TEST_CASE("one pass over a two-observation cycle grows exactly two segments") {
    Memory memory(chain_config(2));
    memory.reset();
    const std::vector<int> sequence{0, 1, 0, 1, 0};
    for (int o : sequence) memory.step(-1, std::vector<int>{o});
    CHECK(memory.segment_count() == 2);
    CHECK(memory.reverse_index_consistent());
    // One per transition: cell 1 context {0}, cell 0 context {1}.
    const auto segs0 = memory.segments_of_cell(0);
    const auto segs1 = memory.segments_of_cell(1);
    REQUIRE(segs0.size() == 1);
    REQUIRE(segs1.size() == 1);
    CHECK(segs0[0]->field == std::vector<int>{1});
    CHECK(segs1[0]->field == std::vector<int>{0});
}

TEST_CASE("zero learning rates change nothing but segment growth") {
    MemoryConfig config = chain_config(3);
    config.alpha_f = 0.0;
    config.alpha_w = 0.0;
    config.f_init = 0.25;
    Memory memory(config);
    for (int o : {0, 1, 2, 0, 1, 2, 0}) memory.step(-1, std::vector<int>{o});
    CHECK(memory.segment_count() == 3);
    memory.for_each_segment([&](const Segment& seg) {
        CHECK(seg.f == doctest::Approx(0.25));
        for (double w : seg.w) CHECK(w == doctest::Approx(config.w_init));
    });
}

TEST_CASE("repeated coincidences follow the closed-form factor recurrence") {
    MemoryConfig config = chain_config(2);
    config.alpha_f = 0.2;
    Memory memory(config);
    memory.reset();
    // Alternating observations; the 0->1 transition occurs once per cycle.
    memory.step(-1, std::vector<int>{0});
    int reinforcements = 0;
    for (int cycle = 0; cycle < 12; ++cycle) {
        memory.step(-1, std::vector<int>{1});
        ++reinforcements;
        memory.step(-1, std::vector<int>{0});
    }
    const auto segs = memory.segments_of_cell(1);
    REQUIRE(segs.size() == 1);
    // Closed form: f = 1 - (1 - f0)(1 - a)^t with t reinforcements after growth.
    const double f0 = config.alpha_f;
    const double closed = 1.0 - (1.0 - f0) * std::pow(1.0 - config.alpha_f, reinforcements - 1);
    CHECK(segs[0]->f == doctest::Approx(closed).epsilon(1e-12));
}

TEST_CASE("monotone reinforcement never decreases f") {
    Memory memory(chain_config(2));
    memory.reset();
    memory.step(-1, std::vector<int>{0});
    double last_f = 0.0;
    for (int cycle = 0; cycle < 10; ++cycle) {
        memory.step(-1, std::vector<int>{1});
        const auto segs = memory.segments_of_cell(1);
        REQUIRE(segs.size() == 1);
        CHECK(segs[0]->f >= last_f);
        last_f = segs[0]->f;
        memory.step(-1, std::vector<int>{0});
    }
}

TEST_CASE("false predictions decay the factor value") {
    MemoryConfig config = chain_config(3);
    config.alpha_f = 0.5;
    Memory memory(config);
    memory.reset();
    // Teach 0 -> 1, then change the world to 0 -> 2.
    memory.step(-1, std::vector<int>{0});
    memory.step(-1, std::vector<int>{1});
    const double f_before = memory.segments_of_cell(1)[0]->f;
    memory.reset();
    memory.step(-1, std::vector<int>{0});
    memory.step(-1, std::vector<int>{2});  // the cell-1 segment fires but loses
    const double f_after = memory.segments_of_cell(1)[0]->f;
    CHECK(f_after == doctest::Approx(f_before * (1.0 - config.alpha_f)));
}

TEST_CASE("step equals predict, observe, learn in sequence") {
    MemoryConfig config = chain_config(3, 2);
    Memory a(config);
    a.reset();
    a.step(-1, std::vector<int>{0});
    a.step(-1, std::vector<int>{1});
    Memory b = a;  // same rng state, same store

    const std::vector<int> obs{2};
    const auto [prior_a, post_a] = a.step(-1, obs);
    const BeliefState prior_b = b.predict(-1);
    const BeliefState post_b = b.observe(prior_b, obs);
    b.learn(b.messages(), post_b, -1);
    b.set_messages(post_b);

    CHECK(prior_a == prior_b);
    CHECK(post_a == post_b);
    CHECK(a.segment_count() == b.segment_count());
    CHECK(a.messages() == b.messages());
}

TEST_CASE("reset is idempotent and keeps the segment store") {
    Memory memory(chain_config(2));
    for (int o : {0, 1, 0, 1}) memory.step(-1, std::vector<int>{o});
    const int segments = memory.segment_count();
    memory.reset();
    const BeliefState m1 = memory.messages();
    memory.reset();
    CHECK(memory.messages() == m1);
    CHECK(memory.segment_count() == segments);
    for (double p : memory.messages().p[0]) CHECK(p == doctest::Approx(0.5));
    const BeliefState prior = memory.predict(-1);
    CHECK(belief_sum(prior, 0) == doctest::Approx(1.0));
}

TEST_CASE("trained chain predicts the next column after three steps") {
    Memory memory(chain_config(4));
    memory.reset();
    for (int pass = 0; pass < 3; ++pass)
        for (int o : {0, 1, 2, 3}) memory.step(-1, std::vector<int>{o});
    memory.reset();
    std::vector<int> expected_next{1, 2, 3, 0};
    int o = 0;
    for (int step = 0; step < 3; ++step) {
        memory.step(-1, std::vector<int>{o});
        const BeliefState prior = memory.predict(-1);
        int argmax = 0;
        for (int c = 1; c < 4; ++c)
            if (prior.p[0][c] > prior.p[0][argmax]) argmax = c;
        CHECK(argmax == expected_next[o]);
        o = expected_next[o];
    }
}

TEST_CASE("rollout of horizon one is predict plus column marginals") {
    Memory memory(chain_config(3, 2));
    for (int o : {0, 1, 2, 0, 1}) memory.step(-1, std::vector<int>{o});
    const BeliefState prior = memory.predict(-1);
    const Rollout rollout = memory.rollout(1, [](int) { return -1; });
    REQUIRE(rollout.obs_dists.size() == 1);
    for (int state = 0; state < 3; ++state) {
        double mass = 0.0;
        for (int c = 0; c < 2; ++c) mass += prior.p[0][state * 2 + c];
        CHECK(rollout.obs_dists[0][0][state] == doctest::Approx(mass).epsilon(1e-12));
    }
    CHECK(rollout.final_belief == prior);
}

TEST_CASE("rollout on a trained deterministic chain matches ground truth") {
    Memory memory(chain_config(4));
    for (int pass = 0; pass < 4; ++pass)
        for (int o : {0, 1, 2, 3}) memory.step(-1, std::vector<int>{o});
    memory.reset();
    memory.step(-1, std::vector<int>{0});
    const BeliefState before = memory.messages();
    const Rollout rollout = memory.rollout(4, [](int) { return -1; });
    for (int l = 0; l < 4; ++l) {
        const int truth = (1 + l) % 4;
        int argmax = 0;
        for (int s = 1; s < 4; ++s)
            if (rollout.obs_dists[l][0][s] > rollout.obs_dists[l][0][argmax]) argmax = s;
        CHECK(argmax == truth);
        CHECK(rollout.obs_dists[l][0][truth] > 0.99);
        double sum = 0.0;
        for (double v : rollout.obs_dists[l][0]) sum += v;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
    CHECK(memory.messages() == before);  // copy semantics
}

TEST_CASE("beliefs stay normalized through predict, observe and rollout") {
    Rng rng(17);
    Memory memory(chain_config(4, 3, 2, 3));
    for (int step = 0; step < 60; ++step) {
        const int action = rng.uniform_int(3);
        const std::vector<int> obs{rng.uniform_int(4), rng.uniform_int(4)};
        const auto [prior, post] = memory.step(action, obs);
        for (int v = 0; v < 2; ++v) {
            CHECK(belief_sum(prior, v) == doctest::Approx(1.0).epsilon(1e-6));
            CHECK(belief_sum(post, v) == doctest::Approx(1.0).epsilon(1e-6));
        }
    }
    const Rollout rollout = memory.rollout(5, [&](int) { return rng.uniform_int(3); });
    for (int v = 0; v < 2; ++v)
        CHECK(belief_sum(rollout.final_belief, v) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("segment count is bounded by distinct transitions times variables") {
    // Two variables, one cell per column: winners are deterministic, so the
    // set of distinct observed transitions is known exactly.
    Rng rng(23);
    Memory memory(chain_config(4, 1, 2, 2));
    std::set<std::vector<int>> distinct;
    std::vector<int> prev_obs;
    int prev_action = -1;
    for (int step = 0; step < 300; ++step) {
        const int action = rng.uniform_int(2);
        const std::vector<int> obs{rng.uniform_int(4), rng.uniform_int(4)};
        memory.step(action, obs);
        if (!prev_obs.empty()) {
            std::vector<int> key = prev_obs;
            key.push_back(prev_action);
            key.insert(key.end(), obs.begin(), obs.end());
            distinct.insert(key);
        }
        prev_obs = obs;
        prev_action = action;
    }
    const int bound = static_cast<int>(distinct.size()) * 2;
    CHECK(memory.segment_count() <= bound);
    CHECK(memory.reverse_index_consistent());
}

TEST_CASE("full segment stores evict the weakest segment") {
    MemoryConfig config = chain_config(3, 1, 2);
    config.max_segments_per_cell = 2;
    Memory memory(config);
    // Variable 1 always observes state 0; variable 0 cycles through 3 states,
    // giving variable 1's single winning cell three distinct contexts.
    for (int pass = 0; pass < 4; ++pass)
        for (int o : {0, 1, 2}) memory.step(-1, std::vector<int>{o, 0});
    const int var1_cell = memory.topology().cell_id(1, 0, 0);
    CHECK(memory.segments_of_cell(var1_cell).size() <= 2);
    CHECK(memory.reverse_index_consistent());
}

TEST_CASE("predict matches the exact forward filter on a one-hot chain") {
    // One variable, one cell per column: the segment graph is a plain HMM.
    // Probing each one-hot context extracts the learned dense transition
    // matrix; the oracle runs its own filtering recursion over it.
    Memory memory(chain_config(4));
    for (int pass = 0; pass < 2; ++pass)
        for (int o : {0, 1, 2, 3}) memory.step(-1, std::vector<int>{o});

    oracle::DenseHmm hmm;
    hmm.n_states = 4;
    hmm.n_obs = 4;
    oracle::Matrix p(4, std::vector<double>(4));
    for (int i = 0; i < 4; ++i) {
        const BeliefState row = memory.predict_from(one_hot(memory.topology(), i), -1);
        p[i] = row.p[0];
        double sum = 0.0;
        for (double v : p[i]) sum += v;
        for (auto& v : p[i]) v /= sum;
    }
    hmm.transitions = {p};
    hmm.emission.assign(4, std::vector<double>(4, 0.0));
    for (int i = 0; i < 4; ++i) hmm.emission[i][i] = 1.0;
    hmm.initial.assign(4, 0.25);

    const std::vector<int> obs{0, 1, 2, 3, 0, 1, 2};
    const auto posteriors = oracle::forward_filter(hmm, obs);

    memory.reset();
    for (std::size_t t = 0; t < obs.size(); ++t) {
        const auto [prior, post] = memory.step(-1, std::vector<int>{obs[t]});
        if (t > 0) {
            // DHTM's prior must equal the filter's one-step prediction.
            std::vector<double> predicted(4, 0.0);
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) predicted[j] += posteriors[t - 1][i] * p[i][j];
            double sum = 0.0;
            for (double v : predicted) sum += v;
            for (auto& v : predicted) v /= sum;
            for (int j = 0; j < 4; ++j) CHECK(std::abs(prior.p[0][j] - predicted[j]) < 1e-6);
        }
        for (int j = 0; j < 4; ++j) CHECK(std::abs(post.p[0][j] - posteriors[t][j]) < 1e-6);
    }
}

TEST_CASE("action context distinguishes transitions") {
    // The same observation leads to different successors per action.
    Memory memory(chain_config(2, 1, 1, 2));
    for (int pass = 0; pass < 6; ++pass) {
        memory.reset();
        memory.step(0, std::vector<int>{0});
        memory.step(0, std::vector<int>{0});  // action 0 keeps state 0
        memory.reset();
        memory.step(0, std::vector<int>{0});
        memory.step(1, std::vector<int>{1});  // action 1 moves to state 1
    }
    memory.reset();
    memory.step(0, std::vector<int>{0});
    const BeliefState stay = memory.predict(0);
    const BeliefState move = memory.predict(1);
    CHECK(stay.p[0][0] > 0.9);
    CHECK(move.p[0][1] > 0.9);
}

TEST_CASE("snapshot and restore preserve behavior exactly") {
    Memory a(chain_config(3, 2, 1, 2));
    Rng rng(5);
    for (int step = 0; step < 40; ++step)
        a.step(rng.uniform_int(2), std::vector<int>{rng.uniform_int(3)});

    Memory b(chain_config(3, 2, 1, 2));
    b.restore(a.snapshot());
    for (int step = 0; step < 20; ++step) {
        const int action = rng.uniform_int(2);
        const std::vector<int> obs{rng.uniform_int(3)};
        const auto ra = a.step(action, obs);
        const auto rb = b.step(action, obs);
        CHECK(ra.first == rb.first);
        CHECK(ra.second == rb.second);
    }
    CHECK(a.segment_count() == b.segment_count());
}
