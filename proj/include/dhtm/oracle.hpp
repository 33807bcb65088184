#pragma once

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

namespace dhtm::oracle {

using Matrix = std::vector<std::vector<double>>;

// Thrown by forward_filter when an observation has zero likelihood under
// the model at some step.
struct ZeroLikelihoodError : std::runtime_error {
    explicit ZeroLikelihoodError(int step)
        : std::runtime_error("forward_filter: zero likelihood at step " + std::to_string(step)),
          step(step) {}
    int step;
};

// Dense reference HMM for small test instances. Transitions may be given
// per action; a single matrix means action-independent dynamics.
struct DenseHmm {
    int n_states = 0;
    int n_obs = 0;
    std::vector<Matrix> transitions;  // each n_states x n_states, row-stochastic
    Matrix emission;                  // n_states x n_obs, row-stochastic
    std::vector<double> initial;      // length n_states

    void validate() const;
};

// Exact forward filtering with per-step renormalization. Returns the
// posterior p(h_t | o_{1:t}) for every step. `actions` selects the
// transition matrix used for step t-1 -> t; it is ignored for models with a
// single transition matrix and must otherwise hold obs.size()-1 entries.
std::vector<std::vector<double>> forward_filter(const DenseHmm& hmm,
                                                std::span<const int> obs,
                                                std::span<const int> actions = {});

// Closed-form Successor Representation, M = sum_{l=0..T} gamma^l P^l D.
// horizon < 0 selects the infinite-horizon solution (I - gamma P)^{-1} D via
// a dense linear solve; a singular solve falls back to the truncated series
// with enough terms that gamma^(T+1) < 1e-15.
Matrix sr_closed_form(const Matrix& transition, const Matrix& emission, double gamma,
                      int horizon);

// Text fixture format: "n_rows n_cols" then row-major values.
Matrix load_matrix(std::istream& is);
void save_matrix(std::ostream& os, const Matrix& m);

// Fixture format for a whole model: n_states n_obs n_actions, then the
// initial vector, each transition matrix and the emission matrix row-major.
DenseHmm load_hmm(std::istream& is);
void save_hmm(std::ostream& os, const DenseHmm& hmm);

}  // namespace dhtm::oracle
