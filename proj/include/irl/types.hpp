#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace irl {

/// Tolerance used when checking that probability rows sum to one.
inline constexpr double kDistributionTol = 1e-9;

/// Dense row-major table of reals. Used for all (state, action) quantities:
/// rewards, Q-values, policies, Beta hyperparameters, visit counts.
class Table {
  public:
    Table() = default;
    Table(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool operator==(const Table&) const = default;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Environment dynamics with the reward left out: state/action counts, a
/// transition kernel and an initial-state distribution. The kernel is stored
/// flat, indexed (state, action, next state).
struct ControlledMarkovProcess {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::vector<double> transitions;
    std::vector<double> initial_dist;

    ControlledMarkovProcess() = default;
    ControlledMarkovProcess(std::size_t ns, std::size_t na)
        : n_states(ns), n_actions(na), transitions(ns * na * ns, 0.0), initial_dist(ns, 0.0) {}

    double& transition(std::size_t s, std::size_t a, std::size_t next) {
        return transitions[(s * n_actions + a) * n_states + next];
    }
    double transition(std::size_t s, std::size_t a, std::size_t next) const {
        return transitions[(s * n_actions + a) * n_states + next];
    }

    std::span<double> next_state_dist(std::size_t s, std::size_t a) {
        return {transitions.data() + (s * n_actions + a) * n_states, n_states};
    }
    std::span<const double> next_state_dist(std::size_t s, std::size_t a) const {
        return {transitions.data() + (s * n_actions + a) * n_states, n_states};
    }

    /// Throws std::invalid_argument unless every kernel row and the initial
    /// distribution are non-negative and sum to 1 within kDistributionTol.
    void validate() const;
};

/// Per-(state, action) Bernoulli success probabilities. The mean table is the
/// reward function: rewards are 0/1 draws, so the expected reward equals the
/// success probability.
struct RewardModel {
    Table success_prob;

    void validate() const;
};

/// Full decision problem: dynamics, reward model and discount in [0, 1).
struct Mdp {
    ControlledMarkovProcess cmp;
    RewardModel reward;
    double discount = 0.95;

    void validate() const;
};

/// Stochastic action-selection table, one distribution over actions per state.
struct Policy {
    Table action_prob;

    std::size_t n_states() const { return action_prob.rows(); }
    std::size_t n_actions() const { return action_prob.cols(); }

    void validate() const;
};

using QTable = Table;
using VTable = std::vector<double>;

/// An observed state/action sequence, optionally with the 0/1 rewards that
/// were obtained alongside it.
struct Trajectory {
    std::vector<std::size_t> states;
    std::vector<std::size_t> actions;
    std::optional<std::vector<std::uint8_t>> rewards;

    std::size_t length() const { return states.size(); }

    void validate(std::size_t n_states, std::size_t n_actions) const;
};

namespace detail {

inline void check_distribution_row(std::span<const double> row, const std::string& what) {
    double sum = 0.0;
    for (double p : row) {
        if (!(p >= 0.0)) throw std::invalid_argument(what + ": negative or NaN entry");
        sum += p;
    }
    if (std::abs(sum - 1.0) > kDistributionTol)
        throw std::invalid_argument(what + ": row sums to " + std::to_string(sum));
}

}  // namespace detail

inline void ControlledMarkovProcess::validate() const {
    if (n_states == 0 || n_actions == 0)
        throw std::invalid_argument("ControlledMarkovProcess: empty state or action set");
    if (transitions.size() != n_states * n_actions * n_states)
        throw std::invalid_argument("ControlledMarkovProcess: kernel size mismatch");
    if (initial_dist.size() != n_states)
        throw std::invalid_argument("ControlledMarkovProcess: initial_dist size mismatch");
    for (std::size_t s = 0; s < n_states; ++s)
        for (std::size_t a = 0; a < n_actions; ++a)
            detail::check_distribution_row(next_state_dist(s, a), "transition row");
    detail::check_distribution_row(initial_dist, "initial_dist");
}

inline void RewardModel::validate() const {
    for (double p : success_prob.data())
        if (!(p >= 0.0 && p <= 1.0))
            throw std::invalid_argument("RewardModel: success probability outside [0,1]");
}

inline void Mdp::validate() const {
    cmp.validate();
    reward.validate();
    if (reward.success_prob.rows() != cmp.n_states || reward.success_prob.cols() != cmp.n_actions)
        throw std::invalid_argument("Mdp: reward table shape mismatch");
    if (!(discount >= 0.0 && discount < 1.0))
        throw std::invalid_argument("Mdp: discount must lie in [0,1)");
}

inline void Policy::validate() const {
    for (std::size_t s = 0; s < n_states(); ++s)
        detail::check_distribution_row(action_prob.row(s), "policy row");
}

inline void Trajectory::validate(std::size_t n_states, std::size_t n_actions) const {
    if (states.size() != actions.size())
        throw std::invalid_argument("Trajectory: state/action length mismatch");
    if (rewards && rewards->size() != states.size())
        throw std::invalid_argument("Trajectory: reward length mismatch");
    for (std::size_t s : states)
        if (s >= n_states) throw std::out_of_range("Trajectory: state index out of range");
    for (std::size_t a : actions)
        if (a >= n_actions) throw std::out_of_range("Trajectory: action index out of range");
    if (rewards)
        for (std::uint8_t r : *rewards)
            if (r > 1) throw std::invalid_argument("Trajectory: reward outside {0,1}");
}

}  // namespace irl
