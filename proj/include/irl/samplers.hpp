#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "irl/envgen.hpp"
#include "irl/mdp.hpp"
#include "irl/random.hpp"
#include "irl/types.hpp"

namespace irl {

/// Gamma prior on the demonstrator's inverse temperature.
struct GammaPrior {
    double shape = 2.0;
    double rate = 0.5;

    void validate() const {
        if (!(shape > 0.0) || !(rate > 0.0))
            throw std::invalid_argument("GammaPrior: shape and rate must be > 0");
    }

    double sample(RandomStream& rng) const { return sample_gamma(shape, rate, rng); }

    double log_pdf(double x) const {
        if (!(x > 0.0)) return kNegInf;
        return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) -
               rate * x;
    }
};

struct SamplerConfig {
    std::size_t n_samples = 10000;
    std::size_t burn_in = 2000;
    std::size_t thin = 1;
    double q_tol = 1e-6;

    void validate() const {
        if (burn_in >= n_samples)
            throw std::invalid_argument("SamplerConfig: burn_in must be below n_samples");
        if (thin < 1) throw std::invalid_argument("SamplerConfig: thin must be >= 1");
        if (!(q_tol > 0.0)) throw std::invalid_argument("SamplerConfig: q_tol must be > 0");
    }

    std::size_t kept_samples() const { return (n_samples - burn_in) / thin; }
};

/// One draw from the joint chain: reward model, inverse temperature, the
/// softmax policy induced by them, and the trajectory log-likelihood. The
/// reward sequence is populated by the Gibbs sampler only.
struct JointSample {
    RewardModel reward;
    double eta = 0.0;
    Policy policy;
    double log_likelihood = 0.0;
    std::vector<std::uint8_t> reward_sequence;
};

/// Per-iteration audit entry, kept for every step including burn-in, so the
/// acceptance rule can be replayed and checked after the fact.
struct McmcStep {
    double proposed_log_likelihood = 0.0;
    double previous_log_likelihood = 0.0;
    bool accepted = false;
};

struct Chain {
    std::vector<JointSample> samples;  // post burn-in, thinned
    double acceptance_rate = 0.0;
    SamplerConfig config;
    std::size_t solver_failures = 0;
    std::vector<McmcStep> steps;
};

/// Which acceptance ratio the hybrid Gibbs sampler uses. `literal` is the
/// plain likelihood ratio: the conditional-proposal density cancels against
/// the conditional target, so this is an exact within-Gibbs move and the
/// default. `corrected` additionally weighs the conditional Beta proposal
/// density against the unconditioned prior, treating the move as targeting
/// the (reward, temperature) marginal directly; the composed kernel's
/// stationary law is then only approximately the posterior.
enum class GibbsAcceptance { literal, corrected };

namespace detail {

inline double beta_log_pdf(double x, double a, double b) {
    // Samples land in the open interval almost surely; clamp the measure-zero
    // boundary cases so the log stays finite.
    x = std::min(std::max(x, 1e-300), 1.0 - 1e-16);
    return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * std::log(x) +
           (b - 1.0) * std::log1p(-x);
}

inline double beta_product_log_pdf(const RewardModel& reward, const BetaProductPrior& prior) {
    double lp = 0.0;
    for (std::size_t i = 0; i < prior.alpha.size(); ++i)
        lp += beta_log_pdf(reward.success_prob.data()[i], prior.alpha.data()[i],
                           prior.beta.data()[i]);
    return lp;
}

/// Acceptance decision for a log ratio. Never consumes randomness on a sure
/// accept (ratio >= 1) or a sure reject (-infinity), which keeps replays and
/// the exact-rate tests deterministic.
inline bool mcmc_accept(double log_ratio, RandomStream& rng) {
    if (log_ratio == kNegInf) return false;
    if (log_ratio >= 0.0) return true;
    return sample_uniform(rng) < std::exp(log_ratio);
}

}  // namespace detail

/// Direct Metropolis-Hastings sampling of the joint posterior over reward
/// functions and inverse temperatures given one demonstrated trajectory.
///
/// Each iteration draws an independent proposal from the prior: a reward
/// model from the Beta product, a temperature from the gamma prior, and the
/// softmax policy over the proposal's optimal Q-values. Because proposals
/// come from the prior, the prior densities cancel and the acceptance
/// probability reduces to min{1, exp(new log-likelihood - old)}. Proposals
/// whose Q-solve fails to converge are rejected and counted in
/// `solver_failures`.
inline Chain mh_chain(const ControlledMarkovProcess& cmp, double discount,
                      const BetaProductPrior& reward_prior, const GammaPrior& temp_prior,
                      const Trajectory& traj, const SamplerConfig& config, RandomStream& rng) {
    config.validate();
    reward_prior.validate();
    temp_prior.validate();
    traj.validate(cmp.n_states, cmp.n_actions);
    if (reward_prior.alpha.rows() != cmp.n_states || reward_prior.alpha.cols() != cmp.n_actions)
        throw std::invalid_argument("mh_chain: prior shape mismatch");

    Chain chain;
    chain.config = config;
    chain.samples.reserve(config.kept_samples());
    chain.steps.reserve(config.n_samples);

    JointSample current;
    current.reward = sample_reward(reward_prior, rng);
    current.eta = temp_prior.sample(rng);
    current.policy = softmax_policy(
        solve_optimal_q(Mdp{cmp, current.reward, discount}, config.q_tol), current.eta);
    current.log_likelihood = trajectory_log_likelihood(current.policy, traj);

    std::size_t accepted = 0;
    for (std::size_t k = 1; k <= config.n_samples; ++k) {
        const RewardModel proposed_reward = sample_reward(reward_prior, rng);
        const double proposed_eta = temp_prior.sample(rng);
        double proposed_ll = kNegInf;
        Policy proposed_policy;
        bool solver_ok = true;
        try {
            proposed_policy = softmax_policy(
                solve_optimal_q(Mdp{cmp, proposed_reward, discount}, config.q_tol), proposed_eta);
            proposed_ll = trajectory_log_likelihood(proposed_policy, traj);
        } catch (const ConvergenceError&) {
            solver_ok = false;
            ++chain.solver_failures;
        }
        const double log_ratio =
            (!solver_ok || proposed_ll == kNegInf)
                ? kNegInf
                : (current.log_likelihood == kNegInf ? 0.0
                                                     : proposed_ll - current.log_likelihood);
        const bool take = detail::mcmc_accept(log_ratio, rng);
        chain.steps.push_back({proposed_ll, current.log_likelihood, take});
        if (take) {
            current.reward = proposed_reward;
            current.eta = proposed_eta;
            current.policy = std::move(proposed_policy);
            current.log_likelihood = proposed_ll;
            ++accepted;
        }
        if (k > config.burn_in && (k - config.burn_in) % config.thin == 0)
            chain.samples.push_back(current);
    }
    chain.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(config.n_samples);
    return chain;
}

/// Beta-Bernoulli conjugate update: adds the per-pair success and failure
/// counts of the reward sequence to the prior hyperparameters. Pairs never
/// visited by the trajectory are returned unchanged.
inline BetaProductPrior conjugate_beta_update(const BetaProductPrior& prior,
                                              const Trajectory& traj,
                                              const std::vector<std::uint8_t>& reward_seq) {
    if (reward_seq.size() != traj.length())
        throw std::invalid_argument("conjugate_beta_update: reward sequence length mismatch");
    BetaProductPrior post = prior;
    for (std::size_t t = 0; t < traj.length(); ++t) {
        if (reward_seq[t])
            post.alpha(traj.states[t], traj.actions[t]) += 1.0;
        else
            post.beta(traj.states[t], traj.actions[t]) += 1.0;
    }
    return post;
}

/// Draws a reward sequence along the trajectory from the given reward model,
/// one independent Bernoulli per step.
inline std::vector<std::uint8_t> sample_reward_sequence(const RewardModel& reward,
                                                        const Trajectory& traj,
                                                        RandomStream& rng) {
    std::vector<std::uint8_t> seq(traj.length(), 0);
    for (std::size_t t = 0; t < traj.length(); ++t)
        seq[t] = sample_bernoulli(reward.success_prob(traj.states[t], traj.actions[t]), rng) ? 1
                                                                                             : 0;
    return seq;
}

/// Two-stage hybrid Gibbs sampler. Alternates (a) an MH move on the reward
/// model and temperature, proposing the reward from the Beta posterior
/// conditioned on the current latent reward sequence, with (b) a fresh draw
/// of the reward sequence from the current reward model. The observed
/// trajectory's rewards field is ignored: reward sequences are latent here,
/// initialized from the prior-predictive Bernoulli.
///
/// With GibbsAcceptance::literal (default) the MH move accepts on the plain
/// likelihood ratio; see GibbsAcceptance for the corrected alternative.
inline Chain gibbs_chain(const ControlledMarkovProcess& cmp, double discount,
                         const BetaProductPrior& reward_prior, const GammaPrior& temp_prior,
                         const Trajectory& traj, const SamplerConfig& config, RandomStream& rng,
                         GibbsAcceptance acceptance = GibbsAcceptance::literal) {
    config.validate();
    reward_prior.validate();
    temp_prior.validate();
    traj.validate(cmp.n_states, cmp.n_actions);
    if (reward_prior.alpha.rows() != cmp.n_states || reward_prior.alpha.cols() != cmp.n_actions)
        throw std::invalid_argument("gibbs_chain: prior shape mismatch");

    Chain chain;
    chain.config = config;
    chain.samples.reserve(config.kept_samples());
    chain.steps.reserve(config.n_samples);

    // prior-predictive initialization of the latent rewards
    std::vector<std::uint8_t> reward_seq(traj.length(), 0);
    for (std::size_t t = 0; t < traj.length(); ++t) {
        const double a = reward_prior.alpha(traj.states[t], traj.actions[t]);
        const double b = reward_prior.beta(traj.states[t], traj.actions[t]);
        reward_seq[t] = sample_bernoulli(a / (a + b), rng) ? 1 : 0;
    }

    JointSample current;
    current.reward = sample_reward(reward_prior, rng);
    current.eta = temp_prior.sample(rng);
    current.policy = softmax_policy(
        solve_optimal_q(Mdp{cmp, current.reward, discount}, config.q_tol), current.eta);
    current.log_likelihood = trajectory_log_likelihood(current.policy, traj);
    current.reward_sequence = reward_seq;

    std::size_t accepted = 0;
    for (std::size_t k = 1; k <= config.n_samples; ++k) {
        const BetaProductPrior conditional = conjugate_beta_update(reward_prior, traj, reward_seq);
        const RewardModel proposed_reward = sample_reward(conditional, rng);
        const double proposed_eta = temp_prior.sample(rng);
        double proposed_ll = kNegInf;
        Policy proposed_policy;
        bool solver_ok = true;
        try {
            proposed_policy = softmax_policy(
                solve_optimal_q(Mdp{cmp, proposed_reward, discount}, config.q_tol), proposed_eta);
            proposed_ll = trajectory_log_likelihood(proposed_policy, traj);
        } catch (const ConvergenceError&) {
            solver_ok = false;
            ++chain.solver_failures;
        }
        double log_ratio;
        if (!solver_ok || proposed_ll == kNegInf) {
            log_ratio = kNegInf;
        } else if (current.log_likelihood == kNegInf) {
            log_ratio = 0.0;
        } else {
            log_ratio = proposed_ll - current.log_likelihood;
            if (acceptance == GibbsAcceptance::corrected) {
                log_ratio += detail::beta_product_log_pdf(proposed_reward, reward_prior) -
                             detail::beta_product_log_pdf(current.reward, reward_prior) +
                             detail::beta_product_log_pdf(current.reward, conditional) -
                             detail::beta_product_log_pdf(proposed_reward, conditional);
            }
        }
        const bool take = detail::mcmc_accept(log_ratio, rng);
        chain.steps.push_back({proposed_ll, current.log_likelihood, take});
        if (take) {
            current.reward = proposed_reward;
            current.eta = proposed_eta;
            current.policy = std::move(proposed_policy);
            current.log_likelihood = proposed_ll;
            ++accepted;
        }
        reward_seq = sample_reward_sequence(current.reward, traj, rng);
        current.reward_sequence = reward_seq;
        if (k > config.burn_in && (k - config.burn_in) % config.thin == 0)
            chain.samples.push_back(current);
    }
    chain.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(config.n_samples);
    return chain;
}

/// Entrywise mean of the reward samples in a chain.
inline RewardModel posterior_mean_reward(const Chain& chain) {
    if (chain.samples.empty()) throw std::invalid_argument("posterior_mean_reward: empty chain");
    const auto& first = chain.samples.front().reward.success_prob;
    RewardModel mean{Table(first.rows(), first.cols(), 0.0)};
    for (const JointSample& sample : chain.samples)
        for (std::size_t i = 0; i < mean.success_prob.size(); ++i)
            mean.success_prob.data()[i] += sample.reward.success_prob.data()[i];
    for (double& v : mean.success_prob.data()) v /= static_cast<double>(chain.samples.size());
    return mean;
}

/// Maximum a-posteriori sample: the kept draw maximizing log-likelihood plus
/// log prior density. Secondary point estimate; the mean is the default.
inline RewardModel posterior_map_reward(const Chain& chain, const BetaProductPrior& reward_prior,
                                        const GammaPrior& temp_prior) {
    if (chain.samples.empty()) throw std::invalid_argument("posterior_map_reward: empty chain");
    double best = kNegInf;
    const JointSample* pick = &chain.samples.front();
    for (const JointSample& sample : chain.samples) {
        const double lp = sample.log_likelihood +
                          detail::beta_product_log_pdf(sample.reward, reward_prior) +
                          temp_prior.log_pdf(sample.eta);
        if (lp > best) {
            best = lp;
            pick = &sample;
        }
    }
    return pick->reward;
}

/// Greedy policy of the optimal Q-values under the chain's posterior-mean
/// reward. This is the policy whose loss the experiment harness reports.
inline Policy chain_policy(const Chain& chain, const ControlledMarkovProcess& cmp,
                           double discount, double tie_tol = 1e-9) {
    const RewardModel mean = posterior_mean_reward(chain);
    return greedy_policy(solve_optimal_q(Mdp{cmp, mean, discount}, chain.config.q_tol), tie_tol);
}

}  // namespace irl
