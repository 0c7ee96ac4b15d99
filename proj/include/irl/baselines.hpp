#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "irl/envgen.hpp"
#include "irl/linalg.hpp"
#include "irl/mdp.hpp"
#include "irl/samplers.hpp"
#include "irl/simplex.hpp"
#include "irl/types.hpp"

namespace irl {

/// Estimated demonstrator policy plus the visit counts it was built from.
struct PolicyEstimate {
    Policy policy;
    Table visit_counts;
};

/// Discounted expected state-visitation mass: sum_t gamma^(t-1) P(s_t = s).
/// Entries total 1/(1-gamma).
struct OccupancyVector {
    std::vector<double> values;
};

namespace detail {

inline Table count_visits(const Trajectory& traj, std::size_t n_states, std::size_t n_actions) {
    Table counts(n_states, n_actions, 0.0);
    for (std::size_t t = 0; t < traj.length(); ++t) counts(traj.states[t], traj.actions[t]) += 1.0;
    return counts;
}

}  // namespace detail

/// Maximum-likelihood policy estimate, count(s,a)/count(s). States never
/// visited get a uniform row.
inline PolicyEstimate ml_policy_estimate(const Trajectory& traj, std::size_t n_states,
                                         std::size_t n_actions) {
    Table counts = detail::count_visits(traj, n_states, n_actions);
    Policy pol{Table(n_states, n_actions)};
    for (std::size_t s = 0; s < n_states; ++s) {
        double total = 0.0;
        for (std::size_t a = 0; a < n_actions; ++a) total += counts(s, a);
        for (std::size_t a = 0; a < n_actions; ++a)
            pol.action_prob(s, a) =
                total > 0.0 ? counts(s, a) / total : 1.0 / static_cast<double>(n_actions);
    }
    return {std::move(pol), std::move(counts)};
}

/// Laplace-smoothed policy estimate, (count(s,a)+1)/(count(s)+n_actions);
/// the product-Dirichlet(1) posterior mean.
inline PolicyEstimate laplace_policy_estimate(const Trajectory& traj, std::size_t n_states,
                                              std::size_t n_actions) {
    Table counts = detail::count_visits(traj, n_states, n_actions);
    Policy pol{Table(n_states, n_actions)};
    for (std::size_t s = 0; s < n_states; ++s) {
        double total = 0.0;
        for (std::size_t a = 0; a < n_actions; ++a) total += counts(s, a);
        for (std::size_t a = 0; a < n_actions; ++a)
            pol.action_prob(s, a) = (counts(s, a) + 1.0) / (total + static_cast<double>(n_actions));
    }
    return {std::move(pol), std::move(counts)};
}

/// Linear-programming reward recovery. The input policy is deterministicized
/// by per-state argmax (lowest index on ties) and treated as optimal; the LP
/// then finds a state reward R in [0, r_max] maximizing the summed gap
/// between the chosen action and the best alternative, minus penalty * |R|_1,
/// subject to the chosen action being optimal everywhere:
///
///   max  sum_s min_{a != a*(s)} (P_{a*} - P_a)(I - gamma P_{a*})^{-1} R  -  penalty * sum_s R(s)
///   s.t. (P_{a*} - P_a)(I - gamma P_{a*})^{-1} R >= 0,   0 <= R <= r_max.
///
/// The state reward is broadcast over actions to fit the shared reward type.
inline RewardModel lp_irl(const ControlledMarkovProcess& cmp, double discount,
                          const Policy& policy, double penalty = 1.05, double r_max = 1.0) {
    if (policy.n_states() != cmp.n_states || policy.n_actions() != cmp.n_actions)
        throw std::invalid_argument("lp_irl: policy shape mismatch");
    if (penalty < 0.0) throw std::invalid_argument("lp_irl: penalty must be >= 0");
    const std::size_t n = cmp.n_states;
    const std::size_t n_act = cmp.n_actions;
    if (n_act == 1) return RewardModel{Table(n, 1, 0.0)};  // no alternative actions, no gap

    std::vector<std::size_t> a_star(n, 0);
    for (std::size_t s = 0; s < n; ++s) {
        std::size_t best = 0;
        for (std::size_t a = 1; a < n_act; ++a)
            if (policy.action_prob(s, a) > policy.action_prob(s, best)) best = a;
        a_star[s] = best;
    }

    DenseMatrix m(n);
    for (std::size_t s = 0; s < n; ++s) {
        auto row = cmp.next_state_dist(s, a_star[s]);
        for (std::size_t t = 0; t < n; ++t) m(s, t) = (s == t ? 1.0 : 0.0) - discount * row[t];
    }
    const DenseMatrix w = invert(m);

    // variables: x = [R(0..n-1), t(0..n-1)]
    std::vector<std::vector<double>> a_rows;
    std::vector<double> b;
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t act = 0; act < n_act; ++act) {
            if (act == a_star[s]) continue;
            std::vector<double> gap(n, 0.0);  // (P_{a*}(s,.) - P_act(s,.)) W
            auto star_row = cmp.next_state_dist(s, a_star[s]);
            auto alt_row = cmp.next_state_dist(s, act);
            for (std::size_t j = 0; j < n; ++j) {
                double dot = 0.0;
                for (std::size_t t = 0; t < n; ++t) dot += (star_row[t] - alt_row[t]) * w(t, j);
                gap[j] = dot;
            }
            // t_s - gap . R <= 0
            std::vector<double> row(2 * n, 0.0);
            for (std::size_t j = 0; j < n; ++j) row[j] = -gap[j];
            row[n + s] = 1.0;
            a_rows.push_back(row);
            b.push_back(0.0);
            // -gap . R <= 0   (chosen action stays optimal)
            std::vector<double> feas(2 * n, 0.0);
            for (std::size_t j = 0; j < n; ++j) feas[j] = -gap[j];
            a_rows.push_back(std::move(feas));
            b.push_back(0.0);
        }
        std::vector<double> bound(2 * n, 0.0);
        bound[s] = 1.0;
        a_rows.push_back(std::move(bound));
        b.push_back(r_max);
    }
    std::vector<double> c(2 * n, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
        c[s] = -penalty;
        c[n + s] = 1.0;
    }
    const SimplexResult lp = SimplexSolver(std::move(a_rows), std::move(b), std::move(c)).solve();

    RewardModel reward{Table(n, n_act)};
    for (std::size_t s = 0; s < n; ++s) {
        const double r = std::clamp(lp.x[s], 0.0, r_max);
        for (std::size_t a = 0; a < n_act; ++a) reward.success_prob(s, a) = r;
    }
    return reward;
}

/// MH chain over rewards targeting the posterior proportional to
/// exp[confidence * sum_t Q*(s_t, a_t)] times the Beta-product prior, with
/// prior proposals, started from a seed reward (typically the lp_irl
/// solution). The per-sample policy stored in the chain is the greedy policy
/// of the sample's optimal Q-values, and the log_likelihood field holds the
/// confidence-scaled Q-sum.
inline Chain policy_walk_chain(const ControlledMarkovProcess& cmp, double discount,
                               const BetaProductPrior& reward_prior, const Trajectory& traj,
                               double confidence, const SamplerConfig& config,
                               const RewardModel& seed_reward, RandomStream& rng) {
    config.validate();
    reward_prior.validate();
    traj.validate(cmp.n_states, cmp.n_actions);
    if (!(confidence >= 0.0)) throw std::invalid_argument("policy_walk_chain: confidence < 0");

    const auto q_sum = [&](const QTable& q) {
        double total = 0.0;
        for (std::size_t t = 0; t < traj.length(); ++t) total += q(traj.states[t], traj.actions[t]);
        return confidence * total;
    };

    Chain chain;
    chain.config = config;
    chain.samples.reserve(config.kept_samples());
    chain.steps.reserve(config.n_samples);

    JointSample current;
    current.reward = seed_reward;
    current.eta = confidence;
    {
        const QTable q = solve_optimal_q(Mdp{cmp, seed_reward, discount}, config.q_tol);
        current.policy = greedy_policy(q);
        current.log_likelihood = q_sum(q);
    }

    std::size_t accepted = 0;
    for (std::size_t k = 1; k <= config.n_samples; ++k) {
        const RewardModel proposed_reward = sample_reward(reward_prior, rng);
        double proposed_score = kNegInf;
        Policy proposed_policy;
        bool solver_ok = true;
        try {
            const QTable q = solve_optimal_q(Mdp{cmp, proposed_reward, discount}, config.q_tol);
            proposed_policy = greedy_policy(q);
            proposed_score = q_sum(q);
        } catch (const ConvergenceError&) {
            solver_ok = false;
            ++chain.solver_failures;
        }
        const double log_ratio = solver_ok ? proposed_score - current.log_likelihood : kNegInf;
        const bool take = detail::mcmc_accept(log_ratio, rng);
        chain.steps.push_back({proposed_score, current.log_likelihood, take});
        if (take) {
            current.reward = proposed_reward;
            current.policy = std::move(proposed_policy);
            current.log_likelihood = proposed_score;
            ++accepted;
        }
        if (k > config.burn_in && (k - config.burn_in) % config.thin == 0)
            chain.samples.push_back(current);
    }
    chain.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(config.n_samples);
    return chain;
}

/// Discounted state occupancy of a policy from an arbitrary start
/// distribution, by iterating the flow x = d1 + gamma x P_pi to the given
/// tolerance.
inline OccupancyVector discounted_state_occupancy(const ControlledMarkovProcess& cmp,
                                                  const Policy& policy, double discount,
                                                  const std::vector<double>& start_dist,
                                                  double tol = 1e-9) {
    if (policy.n_states() != cmp.n_states || policy.n_actions() != cmp.n_actions)
        throw std::invalid_argument("discounted_state_occupancy: policy shape mismatch");
    if (start_dist.size() != cmp.n_states)
        throw std::invalid_argument("discounted_state_occupancy: start distribution size");
    const std::size_t n = cmp.n_states;
    // chain induced by the policy: P(s,s') = sum_a pi(a|s) T(s'|s,a)
    std::vector<double> p(n * n, 0.0);
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t a = 0; a < cmp.n_actions; ++a) {
            const double pa = policy.action_prob(s, a);
            if (pa == 0.0) continue;
            auto row = cmp.next_state_dist(s, a);
            for (std::size_t t = 0; t < n; ++t) p[s * n + t] += pa * row[t];
        }
    std::vector<double> x = start_dist;
    std::vector<double> next(n, 0.0);
    for (std::size_t it = 0; it < 100000; ++it) {
        for (std::size_t t = 0; t < n; ++t) next[t] = start_dist[t];
        for (std::size_t s = 0; s < n; ++s) {
            if (x[s] == 0.0) continue;
            const double mass = discount * x[s];
            for (std::size_t t = 0; t < n; ++t) next[t] += mass * p[s * n + t];
        }
        double diff = 0.0;
        for (std::size_t t = 0; t < n; ++t) diff = std::max(diff, std::abs(next[t] - x[t]));
        x.swap(next);
        if (diff <= tol) return {std::move(x)};
    }
    throw ConvergenceError("discounted_state_occupancy: flow did not converge", 0.0);
}

inline OccupancyVector discounted_state_occupancy(const ControlledMarkovProcess& cmp,
                                                  const Policy& policy, double discount,
                                                  double tol = 1e-9) {
    return discounted_state_occupancy(cmp, policy, discount, cmp.initial_dist, tol);
}

/// A finite mixture of policies with mixing weights; executed by picking one
/// component at the start of an episode.
struct MixedPolicy {
    std::vector<Policy> policies;
    std::vector<double> weights;
};

struct MwalResult {
    MixedPolicy mixture;
    std::vector<double> final_weights;   // feature weights after the last round
    std::size_t rounds = 0;
    bool round_capped = false;
    std::vector<double> weight_sums;     // per-round simplex checks
    std::vector<double> weight_minima;
};

/// Multiplicative-weights apprenticeship learning over state-indicator
/// features. Feature expectations are discounted state occupancies scaled by
/// (1 - gamma) into [0, 1]. Each round best-responds to the current weights
/// (reward w(s) broadcast over actions, solved exactly), scores the response
/// against the demonstrator's occupancy, and updates the weights
/// multiplicatively; the result is the uniform mixture of the per-round
/// greedy policies (identical rounds merged).
///
/// Schedule: N = ceil((4 / accuracy^2) ln n_states) rounds, learning rate
/// beta = 1 / (1 + sqrt(2 ln n_states / N)). A positive round_cap truncates N
/// for desk-scale runs; the truncation is reported in the result.
inline MwalResult mwal(const ControlledMarkovProcess& cmp, double discount,
                       const OccupancyVector& demo_occupancy, double accuracy,
                       std::size_t round_cap = 0, double q_tol = 1e-6) {
    if (!(accuracy > 0.0)) throw std::invalid_argument("mwal: accuracy must be > 0");
    if (demo_occupancy.values.size() != cmp.n_states)
        throw std::invalid_argument("mwal: occupancy size mismatch");
    const std::size_t n = cmp.n_states;
    const double log_n = std::log(static_cast<double>(n));
    std::size_t rounds = static_cast<std::size_t>(
        std::ceil(4.0 / (accuracy * accuracy) * std::max(log_n, 0.0)));
    rounds = std::max<std::size_t>(rounds, 1);
    MwalResult result;
    if (round_cap > 0 && rounds > round_cap) {
        rounds = round_cap;
        result.round_capped = true;
    }
    result.rounds = rounds;
    const double beta = 1.0 / (1.0 + std::sqrt(2.0 * std::max(log_n, 0.0) /
                                               static_cast<double>(rounds)));
    const double scale = 1.0 - discount;

    std::vector<double> weights(n, 1.0 / static_cast<double>(n));
    std::map<std::vector<double>, double> mixture_weight;
    const double per_round = 1.0 / static_cast<double>(rounds);
    for (std::size_t round = 0; round < rounds; ++round) {
        RewardModel round_reward{Table(n, cmp.n_actions)};
        for (std::size_t s = 0; s < n; ++s)
            for (std::size_t a = 0; a < cmp.n_actions; ++a)
                round_reward.success_prob(s, a) = weights[s];
        const Policy response =
            greedy_policy(solve_optimal_q(Mdp{cmp, round_reward, discount}, q_tol));
        const OccupancyVector occ = discounted_state_occupancy(cmp, response, discount);
        double total = 0.0;
        double minimum = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < n; ++s) {
            // payoff in [-1, 1], shifted into [0, 1] for the exponent
            const double payoff = scale * (occ.values[s] - demo_occupancy.values[s]);
            const double g = (payoff + 2.0) / 4.0;
            weights[s] *= std::pow(beta, g);
            total += weights[s];
        }
        double check_sum = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            weights[s] /= total;
            minimum = std::min(minimum, weights[s]);
            check_sum += weights[s];
        }
        result.weight_sums.push_back(check_sum);
        result.weight_minima.push_back(minimum);
        mixture_weight[response.action_prob.data()] += per_round;
    }
    for (auto& [table_data, weight] : mixture_weight) {
        Policy pol{Table(n, cmp.n_actions)};
        pol.action_prob.data() = table_data;
        result.mixture.policies.push_back(std::move(pol));
        result.mixture.weights.push_back(weight);
    }
    result.final_weights = weights;
    return result;
}

/// State values of a policy mixture: the weighted average of the component
/// values.
inline VTable mixed_policy_value(const Mdp& mdp, const MixedPolicy& mixed, double tol = 1e-6) {
    if (mixed.policies.empty()) throw std::invalid_argument("mixed_policy_value: empty mixture");
    VTable v(mdp.cmp.n_states, 0.0);
    for (std::size_t i = 0; i < mixed.policies.size(); ++i) {
        const VTable vi = policy_value(mdp, mixed.policies[i], tol);
        for (std::size_t s = 0; s < v.size(); ++s) v[s] += mixed.weights[i] * vi[s];
    }
    return v;
}

/// L1 value loss of a policy mixture against the optimal policy.
inline double l1_loss(const Mdp& mdp, const MixedPolicy& mixed, double tol = 1e-6) {
    const VTable v_star = optimal_value(solve_optimal_q(mdp, tol));
    const VTable v_mix = mixed_policy_value(mdp, mixed, tol);
    double loss = 0.0;
    for (std::size_t s = 0; s < v_star.size(); ++s) loss += std::max(0.0, v_star[s] - v_mix[s]);
    return loss;
}

}  // namespace irl
