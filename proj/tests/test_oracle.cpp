#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "dhtm/oracle.hpp"
#include "dhtm/rng.hpp"

using namespace dhtm;
using oracle::DenseHmm;
using oracle::Matrix;

namespace {

DenseHmm cyclic_hmm(int n) {
    DenseHmm hmm;
    hmm.n_states = n;
    hmm.n_obs = n;
    Matrix p(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i) p[i][(i + 1) % n] = 1.0;
    hmm.transitions = {p};
    hmm.emission.assign(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i) hmm.emission[i][i] = 1.0;
    hmm.initial.assign(n, 1.0 / n);
    return hmm;
}

// Brute force p(h_t | o_{1:t}) by enumerating every hidden path.
std::vector<double> path_sum_posterior(const DenseHmm& hmm, const std::vector<int>& obs) {
    const int n = hmm.n_states;
    const int t_len = static_cast<int>(obs.size());
    std::vector<double> posterior(n, 0.0);
    std::vector<int> path(t_len, 0);
    double total = 0.0;
    while (true) {
        double p = hmm.initial[path[0]] * hmm.emission[path[0]][obs[0]];
        for (int t = 1; t < t_len; ++t)
            p *= hmm.transitions[0][path[t - 1]][path[t]] * hmm.emission[path[t]][obs[t]];
        posterior[path[t_len - 1]] += p;
        total += p;
        int pos = t_len - 1;
        while (pos >= 0 && ++path[pos] == n) path[pos--] = 0;
        if (pos < 0) break;
    }
    for (auto& v : posterior) v /= total;
    return posterior;
}

}  // namespace

TEST_CASE("forward filter tracks a deterministic cycle") {
    const DenseHmm hmm = cyclic_hmm(4);
    const std::vector<int> obs{0, 1, 2, 3, 0, 1};
    const auto posteriors = oracle::forward_filter(hmm, obs);
    REQUIRE(posteriors.size() == obs.size());
    for (std::size_t t = 0; t < obs.size(); ++t) {
        for (int j = 0; j < 4; ++j)
            CHECK(posteriors[t][j] == doctest::Approx(j == obs[t] ? 1.0 : 0.0));
    }
}

TEST_CASE("forward filter stays uniform under uniform dynamics") {
    DenseHmm hmm;
    hmm.n_states = 3;
    hmm.n_obs = 2;
    hmm.transitions = {Matrix(3, std::vector<double>(3, 1.0 / 3))};
    hmm.emission.assign(3, std::vector<double>(2, 0.5));
    hmm.initial.assign(3, 1.0 / 3);
    const std::vector<int> obs{0, 1, 1, 0};
    for (const auto& post : oracle::forward_filter(hmm, obs))
        for (double v : post) CHECK(v == doctest::Approx(1.0 / 3));
}

TEST_CASE("forward filter matches exhaustive path enumeration") {
    Rng rng(3);
    DenseHmm hmm;
    hmm.n_states = 3;
    hmm.n_obs = 3;
    auto random_stochastic = [&rng](int rows, int cols) {
        Matrix m(rows, std::vector<double>(cols));
        for (auto& row : m) {
            double sum = 0.0;
            for (auto& v : row) {
                v = 0.05 + rng.uniform();
                sum += v;
            }
            for (auto& v : row) v /= sum;
        }
        return m;
    };
    hmm.transitions = {random_stochastic(3, 3)};
    hmm.emission = random_stochastic(3, 3);
    hmm.initial = random_stochastic(1, 3)[0];

    const std::vector<int> obs{0, 2, 1, 1, 0};
    const auto filtered = oracle::forward_filter(hmm, obs);
    for (std::size_t t = 1; t <= obs.size(); ++t) {
        const std::vector<int> prefix(obs.begin(), obs.begin() + t);
        const auto exact = path_sum_posterior(hmm, prefix);
        for (int j = 0; j < 3; ++j) CHECK(filtered[t - 1][j] == doctest::Approx(exact[j]).epsilon(1e-10));
    }
}

TEST_CASE("forward filter reports zero likelihood") {
    DenseHmm hmm = cyclic_hmm(2);
    const std::vector<int> obs{0, 0};  // cycle forces 1 after 0
    CHECK_THROWS_AS(oracle::forward_filter(hmm, obs), oracle::ZeroLikelihoodError);
}

TEST_CASE("forward filter uses per-action transitions") {
    DenseHmm hmm = cyclic_hmm(2);
    Matrix stay(2, std::vector<double>(2, 0.0));
    stay[0][0] = stay[1][1] = 1.0;
    hmm.transitions.push_back(stay);  // action 1 = hold
    const std::vector<int> obs{0, 1, 1};
    const std::vector<int> actions{0, 1};
    const auto posteriors = oracle::forward_filter(hmm, obs, actions);
    CHECK(posteriors[2][1] == doctest::Approx(1.0));
}

TEST_CASE("forward posteriors sum to one") {
    const DenseHmm hmm = cyclic_hmm(5);
    const std::vector<int> obs{2, 3, 4, 0, 1};
    for (const auto& post : oracle::forward_filter(hmm, obs)) {
        double sum = 0.0;
        for (double v : post) sum += v;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("sr_closed_form on the 2-state cycle") {
    Matrix p{{0, 1}, {1, 0}};
    Matrix d{{1, 0}, {0, 1}};
    const Matrix m = oracle::sr_closed_form(p, d, 0.5, -1);
    CHECK(m[0][0] == doctest::Approx(4.0 / 3));
    CHECK(m[0][1] == doctest::Approx(2.0 / 3));
    CHECK(m[1][0] == doctest::Approx(2.0 / 3));
    CHECK(m[1][1] == doctest::Approx(4.0 / 3));
}

TEST_CASE("sr_closed_form with gamma 0 is the emission") {
    Matrix p{{0.5, 0.5}, {0.25, 0.75}};
    Matrix d{{0.9, 0.1}, {0.2, 0.8}};
    const Matrix m = oracle::sr_closed_form(p, d, 0.0, -1);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) CHECK(m[i][j] == doctest::Approx(d[i][j]));
}

TEST_CASE("truncated sr matches term-by-term accumulation") {
    Rng rng(5);
    Matrix p(3, std::vector<double>(3));
    for (auto& row : p) {
        double sum = 0.0;
        for (auto& v : row) {
            v = rng.uniform() + 0.01;
            sum += v;
        }
        for (auto& v : row) v /= sum;
    }
    Matrix d(3, std::vector<double>(3, 0.0));
    for (int i = 0; i < 3; ++i) d[i][i] = 1.0;
    const double gamma = 0.7;
    const int horizon = 6;

    // Direct series: accumulate gamma^l P^l D one term at a time.
    Matrix expected(3, std::vector<double>(3, 0.0));
    Matrix power(3, std::vector<double>(3, 0.0));
    for (int i = 0; i < 3; ++i) power[i][i] = 1.0;  // P^0
    double scale = 1.0;
    for (int l = 0; l <= horizon; ++l) {
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double dot = 0.0;
                for (int k = 0; k < 3; ++k) dot += power[i][k] * d[k][j];
                expected[i][j] += scale * dot;
            }
        Matrix next(3, std::vector<double>(3, 0.0));
        for (int i = 0; i < 3; ++i)
            for (int k = 0; k < 3; ++k)
                for (int j = 0; j < 3; ++j) next[i][j] += power[i][k] * p[k][j];
        power = next;
        scale *= gamma;
    }

    const Matrix m = oracle::sr_closed_form(p, d, gamma, horizon);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(m[i][j] == doctest::Approx(expected[i][j]).epsilon(1e-12));
}

TEST_CASE("sr row sums follow the discount series") {
    Matrix p{{0.2, 0.8}, {0.6, 0.4}};
    Matrix d{{0.5, 0.5}, {0.1, 0.9}};
    const double gamma = 0.9;
    const int horizon = 11;
    const Matrix m = oracle::sr_closed_form(p, d, gamma, horizon);
    const double expected = (1.0 - std::pow(gamma, horizon + 1)) / (1.0 - gamma);
    for (const auto& row : m) {
        double sum = 0.0;
        for (double v : row) sum += v;
        CHECK(sum == doctest::Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("infinite-horizon sr satisfies the fixed point") {
    Matrix p{{0.3, 0.7, 0.0}, {0.1, 0.2, 0.7}, {0.5, 0.0, 0.5}};
    Matrix d{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    const double gamma = 0.95;
    const Matrix m = oracle::sr_closed_form(p, d, gamma, -1);
    // M = D + gamma P M, residual below 1e-9
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double pm = 0.0;
            for (int k = 0; k < 3; ++k) pm += p[i][k] * m[k][j];
            CHECK(std::abs(m[i][j] - (d[i][j] + gamma * pm)) < 1e-9);
        }
}

TEST_CASE("model text fixtures round-trip") {
    DenseHmm hmm = cyclic_hmm(3);
    std::stringstream ss;
    oracle::save_hmm(ss, hmm);
    const DenseHmm loaded = oracle::load_hmm(ss);
    CHECK(loaded.n_states == 3);
    CHECK(loaded.transitions[0][0][1] == doctest::Approx(1.0));
    CHECK(loaded.emission[2][2] == doctest::Approx(1.0));

    std::stringstream ms;
    oracle::save_matrix(ms, hmm.emission);
    const Matrix m = oracle::load_matrix(ms);
    CHECK(m == hmm.emission);
}
