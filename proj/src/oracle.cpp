#include "dhtm/oracle.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "dhtm/check.hpp"

namespace dhtm::oracle {

namespace {

void check_stochastic(const Matrix& m, std::size_t cols, const char* name) {
    for (const auto& row : m) {
        check_arg(row.size() == cols, std::string(name) + ": ragged matrix");
        double sum = 0.0;
        for (double v : row) {
            check_arg(v >= 0.0, std::string(name) + ": negative entry");
            sum += v;
        }
        check_arg(std::abs(sum - 1.0) <= 1e-12, std::string(name) + ": row does not sum to 1");
    }
}

// Solve A x = b in place by Gaussian elimination with partial pivoting.
// Returns false when a pivot is numerically zero.
bool solve_inplace(Matrix& a, Matrix& b) {
    const int n = static_cast<int>(a.size());
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        if (std::abs(a[pivot][col]) < 1e-12) return false;
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (int r = 0; r < n; ++r) {
            if (r == col) continue;
            const double factor = a[r][col] / a[col][col];
            if (factor == 0.0) continue;
            for (int c = col; c < n; ++c) a[r][c] -= factor * a[col][c];
            for (std::size_t c = 0; c < b[r].size(); ++c) b[r][c] -= factor * b[col][c];
        }
    }
    for (int r = 0; r < n; ++r)
        for (std::size_t c = 0; c < b[r].size(); ++c) b[r][c] /= a[r][r];
    return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    const std::size_t rows = a.size(), inner = b.size(), cols = b[0].size();
    Matrix out(rows, std::vector<double>(cols, 0.0));
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t k = 0; k < inner; ++k) {
            const double aik = a[i][k];
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < cols; ++j) out[i][j] += aik * b[k][j];
        }
    return out;
}

Matrix truncated_series(const Matrix& p, const Matrix& d, double gamma, int horizon) {
    const std::size_t cols = d[0].size();
    Matrix acc(d.size(), std::vector<double>(cols, 0.0));
    Matrix term = d;  // gamma^l P^l D, starting at l = 0
    double scale = 1.0;
    for (int l = 0;; ++l) {
        for (std::size_t i = 0; i < acc.size(); ++i)
            for (std::size_t j = 0; j < cols; ++j) acc[i][j] += scale * term[i][j];
        if (l == horizon) break;
        term = matmul(p, term);
        scale *= gamma;
    }
    return acc;
}

}  // namespace

void DenseHmm::validate() const {
    check_arg(n_states > 0 && n_obs > 0, "DenseHmm: empty state or observation space");
    check_arg(!transitions.empty(), "DenseHmm: no transition matrix");
    for (const auto& p : transitions) {
        check_arg(p.size() == static_cast<std::size_t>(n_states), "DenseHmm: bad transition rows");
        check_stochastic(p, n_states, "transition");
    }
    check_arg(emission.size() == static_cast<std::size_t>(n_states), "DenseHmm: bad emission rows");
    check_stochastic(emission, n_obs, "emission");
    check_arg(initial.size() == static_cast<std::size_t>(n_states), "DenseHmm: bad initial length");
    double sum = 0.0;
    for (double v : initial) sum += v;
    check_arg(std::abs(sum - 1.0) <= 1e-12, "DenseHmm: initial does not sum to 1");
}

std::vector<std::vector<double>> forward_filter(const DenseHmm& hmm, std::span<const int> obs,
                                                std::span<const int> actions) {
    hmm.validate();
    check_arg(!obs.empty(), "forward_filter: empty observation sequence");
    for (int o : obs) check_arg(o >= 0 && o < hmm.n_obs, "forward_filter: observation out of range");
    const bool per_action = hmm.transitions.size() > 1;
    if (per_action) {
        check_arg(actions.size() == obs.size() - 1, "forward_filter: need one action per transition");
        for (int a : actions)
            check_arg(a >= 0 && a < static_cast<int>(hmm.transitions.size()),
                      "forward_filter: action out of range");
    }

    std::vector<std::vector<double>> posteriors;
    posteriors.reserve(obs.size());
    std::vector<double> prior = hmm.initial;
    std::vector<double> post(hmm.n_states);
    for (std::size_t t = 0; t < obs.size(); ++t) {
        if (t > 0) {
            const Matrix& p = hmm.transitions[per_action ? actions[t - 1] : 0];
            std::fill(prior.begin(), prior.end(), 0.0);
            const auto& prev = posteriors.back();
            for (int i = 0; i < hmm.n_states; ++i) {
                if (prev[i] == 0.0) continue;
                for (int j = 0; j < hmm.n_states; ++j) prior[j] += prev[i] * p[i][j];
            }
        }
        double norm = 0.0;
        for (int j = 0; j < hmm.n_states; ++j) {
            post[j] = prior[j] * hmm.emission[j][obs[t]];
            norm += post[j];
        }
        if (norm <= 0.0) throw ZeroLikelihoodError(static_cast<int>(t));
        for (double& v : post) v /= norm;
        posteriors.push_back(post);
    }
    return posteriors;
}

Matrix sr_closed_form(const Matrix& transition, const Matrix& emission, double gamma,
                      int horizon) {
    check_arg(gamma >= 0.0 && gamma < 1.0, "sr_closed_form: gamma must be in [0,1)");
    check_arg(!transition.empty() && transition.size() == transition[0].size(),
              "sr_closed_form: transition must be square");
    check_arg(emission.size() == transition.size(), "sr_closed_form: row count mismatch");
    check_stochastic(transition, transition.size(), "transition");

    if (horizon >= 0) return truncated_series(transition, emission, gamma, horizon);

    // (I - gamma P) M = D
    const int n = static_cast<int>(transition.size());
    Matrix a(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a[i][j] = (i == j ? 1.0 : 0.0) - gamma * transition[i][j];
    Matrix rhs = emission;
    if (solve_inplace(a, rhs)) return rhs;

    // Singular solve: truncated fallback, long enough that the tail is below
    // double precision (gamma^(T+1) < 1e-15).
    const int fallback = gamma == 0.0 ? 0 : static_cast<int>(std::ceil(-34.6 / std::log(gamma)));
    return truncated_series(transition, emission, gamma, fallback);
}

Matrix load_matrix(std::istream& is) {
    std::size_t rows = 0, cols = 0;
    check_arg(static_cast<bool>(is >> rows >> cols), "load_matrix: bad header");
    Matrix m(rows, std::vector<double>(cols));
    for (auto& row : m)
        for (auto& v : row) check_arg(static_cast<bool>(is >> v), "load_matrix: truncated data");
    return m;
}

void save_matrix(std::ostream& os, const Matrix& m) {
    os.precision(17);
    os << m.size() << ' ' << (m.empty() ? 0 : m[0].size()) << '\n';
    for (const auto& row : m) {
        for (std::size_t j = 0; j < row.size(); ++j) os << (j ? " " : "") << row[j];
        os << '\n';
    }
}

DenseHmm load_hmm(std::istream& is) {
    DenseHmm hmm;
    int n_actions = 0;
    check_arg(static_cast<bool>(is >> hmm.n_states >> hmm.n_obs >> n_actions),
              "load_hmm: bad header");
    check_arg(n_actions >= 1, "load_hmm: need at least one transition matrix");
    hmm.initial.resize(hmm.n_states);
    for (auto& v : hmm.initial) check_arg(static_cast<bool>(is >> v), "load_hmm: truncated data");
    for (int a = 0; a < n_actions; ++a) {
        Matrix p(hmm.n_states, std::vector<double>(hmm.n_states));
        for (auto& row : p)
            for (auto& v : row) check_arg(static_cast<bool>(is >> v), "load_hmm: truncated data");
        hmm.transitions.push_back(std::move(p));
    }
    hmm.emission.assign(hmm.n_states, std::vector<double>(hmm.n_obs));
    for (auto& row : hmm.emission)
        for (auto& v : row) check_arg(static_cast<bool>(is >> v), "load_hmm: truncated data");
    hmm.validate();
    return hmm;
}

void save_hmm(std::ostream& os, const DenseHmm& hmm) {
    os.precision(17);
    os << hmm.n_states << ' ' << hmm.n_obs << ' ' << hmm.transitions.size() << '\n';
    for (std::size_t i = 0; i < hmm.initial.size(); ++i) os << (i ? " " : "") << hmm.initial[i];
    os << '\n';
    for (const auto& p : hmm.transitions)
        for (const auto& row : p) {
            for (std::size_t j = 0; j < row.size(); ++j) os << (j ? " " : "") << row[j];
            os << '\n';
        }
    for (const auto& row : hmm.emission) {
        for (std::size_t j = 0; j < row.size(); ++j) os << (j ? " " : "") << row[j];
        os << '\n';
    }
}

}  // namespace dhtm::oracle
