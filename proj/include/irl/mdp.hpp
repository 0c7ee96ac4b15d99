#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "irl/types.hpp"

namespace irl {

/// Thrown when an iterative solver exhausts its iteration budget. Carries the
/// last sup-norm residual so callers can decide whether to retry or reject.
class ConvergenceError : public std::runtime_error {
  public:
    ConvergenceError(const std::string& what, double residual)
        : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
          residual_(residual) {}

    double residual() const { return residual_; }

  private:
    double residual_;
};

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

namespace detail {

/// One Bellman backup of V into Q: Q(s,a) = rho(s,a) + gamma * T(.|s,a) . V
inline void q_from_v(const Mdp& mdp, const VTable& v, QTable& q) {
    const auto& cmp = mdp.cmp;
    for (std::size_t s = 0; s < cmp.n_states; ++s) {
        for (std::size_t a = 0; a < cmp.n_actions; ++a) {
            auto row = cmp.next_state_dist(s, a);
            double ev = 0.0;
            for (std::size_t n = 0; n < cmp.n_states; ++n) ev += row[n] * v[n];
            q(s, a) = mdp.reward.success_prob(s, a) + mdp.discount * ev;
        }
    }
}

}  // namespace detail

/// Optimal Q-value function by value iteration.
///
/// Iterates the optimality backup on the state values until successive sweeps
/// differ by at most `tol` in sup norm, then performs one more backup to
/// produce Q. The returned table has Bellman residual at most `tol` (the
/// contraction shrinks the final step by an extra discount factor).
///
/// Throws ConvergenceError, carrying the last residual, if `max_iter` sweeps
/// do not reach the tolerance.
inline QTable solve_optimal_q(const Mdp& mdp, double tol = 1e-6, std::size_t max_iter = 100000) {
    if (!(tol > 0.0)) throw std::invalid_argument("solve_optimal_q: tol must be positive");
    const auto& cmp = mdp.cmp;
    VTable v(cmp.n_states, 0.0);
    VTable next(cmp.n_states, 0.0);
    QTable q(cmp.n_states, cmp.n_actions);
    double diff = std::numeric_limits<double>::infinity();
    for (std::size_t it = 0; it < max_iter; ++it) {
        detail::q_from_v(mdp, v, q);
        diff = 0.0;
        for (std::size_t s = 0; s < cmp.n_states; ++s) {
            double best = q(s, 0);
            for (std::size_t a = 1; a < cmp.n_actions; ++a) best = std::max(best, q(s, a));
            diff = std::max(diff, std::abs(best - v[s]));
            next[s] = best;
        }
        v.swap(next);
        if (diff <= tol) {
            detail::q_from_v(mdp, v, q);
            return q;
        }
    }
    throw ConvergenceError("solve_optimal_q: value iteration did not converge", diff);
}

/// Q-values of a fixed stochastic policy, by iterative policy evaluation to
/// the same residual contract as solve_optimal_q.
inline QTable evaluate_policy_q(const Mdp& mdp, const Policy& policy, double tol = 1e-6,
                                std::size_t max_iter = 100000) {
    const auto& cmp = mdp.cmp;
    if (policy.n_states() != cmp.n_states || policy.n_actions() != cmp.n_actions)
        throw std::invalid_argument("evaluate_policy_q: policy shape mismatch");
    if (!(tol > 0.0)) throw std::invalid_argument("evaluate_policy_q: tol must be positive");
    VTable v(cmp.n_states, 0.0);
    VTable next(cmp.n_states, 0.0);
    QTable q(cmp.n_states, cmp.n_actions);
    double diff = std::numeric_limits<double>::infinity();
    for (std::size_t it = 0; it < max_iter; ++it) {
        detail::q_from_v(mdp, v, q);
        diff = 0.0;
        for (std::size_t s = 0; s < cmp.n_states; ++s) {
            double ev = 0.0;
            for (std::size_t a = 0; a < cmp.n_actions; ++a) ev += policy.action_prob(s, a) * q(s, a);
            diff = std::max(diff, std::abs(ev - v[s]));
            next[s] = ev;
        }
        v.swap(next);
        if (diff <= tol) {
            detail::q_from_v(mdp, v, q);
            return q;
        }
    }
    throw ConvergenceError("evaluate_policy_q: policy evaluation did not converge", diff);
}

/// State values of a policy: V(s) = sum_a pi(a|s) Q(s,a).
inline VTable policy_value(const Mdp& mdp, const Policy& policy, double tol = 1e-6) {
    const QTable q = evaluate_policy_q(mdp, policy, tol);
    VTable v(q.rows(), 0.0);
    for (std::size_t s = 0; s < q.rows(); ++s) {
        double ev = 0.0;
        for (std::size_t a = 0; a < q.cols(); ++a) ev += policy.action_prob(s, a) * q(s, a);
        v[s] = ev;
    }
    return v;
}

/// Greedy state values of a Q table: V(s) = max_a Q(s,a).
inline VTable optimal_value(const QTable& q) {
    VTable v(q.rows(), 0.0);
    for (std::size_t s = 0; s < q.rows(); ++s) {
        double best = q(s, 0);
        for (std::size_t a = 1; a < q.cols(); ++a) best = std::max(best, q(s, a));
        v[s] = best;
    }
    return v;
}

/// Boltzmann policy over a Q table at inverse temperature eta, computed with
/// per-row max subtraction so arbitrarily large eta cannot overflow. eta = 0
/// gives the uniform policy; eta -> infinity approaches the greedy one.
inline Policy softmax_policy(const QTable& q, double eta) {
    if (!(eta >= 0.0)) throw std::invalid_argument("softmax_policy: eta must be non-negative");
    Policy pol{Table(q.rows(), q.cols())};
    for (std::size_t s = 0; s < q.rows(); ++s) {
        double qmax = q(s, 0);
        for (std::size_t a = 1; a < q.cols(); ++a) qmax = std::max(qmax, q(s, a));
        double total = 0.0;
        for (std::size_t a = 0; a < q.cols(); ++a) {
            const double w = std::exp(eta * (q(s, a) - qmax));
            pol.action_prob(s, a) = w;
            total += w;
        }
        for (std::size_t a = 0; a < q.cols(); ++a) pol.action_prob(s, a) /= total;
    }
    return pol;
}

/// Uniform distribution over the epsilon-argmax set of each row:
/// {a : Q(s,a) >= max Q(s,.) - tie_tol}. Deterministic when the argmax is
/// unique; splits ties evenly otherwise.
inline Policy greedy_policy(const QTable& q, double tie_tol = 1e-9) {
    if (!(tie_tol >= 0.0)) throw std::invalid_argument("greedy_policy: tie_tol must be >= 0");
    Policy pol{Table(q.rows(), q.cols(), 0.0)};
    for (std::size_t s = 0; s < q.rows(); ++s) {
        double qmax = q(s, 0);
        for (std::size_t a = 1; a < q.cols(); ++a) qmax = std::max(qmax, q(s, a));
        std::size_t hits = 0;
        for (std::size_t a = 0; a < q.cols(); ++a)
            if (q(s, a) >= qmax - tie_tol) ++hits;
        for (std::size_t a = 0; a < q.cols(); ++a)
            if (q(s, a) >= qmax - tie_tol) pol.action_prob(s, a) = 1.0 / static_cast<double>(hits);
    }
    return pol;
}

/// Log-probability of the action sequence under the policy. State transition
/// probabilities do not enter: they cancel from the posterior, so the
/// trajectory likelihood is the product of the per-step action probabilities
/// alone. Returns -infinity if any step has probability zero; an empty
/// trajectory yields 0.
inline double trajectory_log_likelihood(const Policy& policy, const Trajectory& traj) {
    traj.validate(policy.n_states(), policy.n_actions());
    double ll = 0.0;
    for (std::size_t t = 0; t < traj.length(); ++t) {
        const double p = policy.action_prob(traj.states[t], traj.actions[t]);
        if (p <= 0.0) return kNegInf;
        ll += std::log(p);
    }
    return ll;
}

/// L1 value loss against the optimal policy: sum_s (V*(s) - V_pi(s)), with
/// each state's difference clamped at zero to absorb solver noise.
inline double l1_loss(const Mdp& mdp, const Policy& policy, double tol = 1e-6) {
    const VTable v_star = optimal_value(solve_optimal_q(mdp, tol));
    const VTable v_pi = policy_value(mdp, policy, tol);
    double loss = 0.0;
    for (std::size_t s = 0; s < v_star.size(); ++s) loss += std::max(0.0, v_star[s] - v_pi[s]);
    return loss;
}

}  // namespace irl
