#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "irl/samplers.hpp"
#include "test_support.hpp"

using Catch::Approx;

namespace {

bool same_sample(const irl::JointSample& a, const irl::JointSample& b) {
    return a.reward.success_prob == b.reward.success_prob && a.eta == b.eta &&
           a.log_likelihood == b.log_likelihood &&
           a.policy.action_prob == b.policy.action_prob;
}

}  // namespace

TEST_CASE("conjugate_beta_update") {
    SECTION("four visits with rewards (1,1,1,0) turn Beta(1,1) into Beta(4,2)") {
        const auto prior = irl::BetaProductPrior::constant(2, 2, 1.0, 1.0);
        irl::Trajectory traj;
        traj.states = {0, 0, 0, 0};
        traj.actions = {1, 1, 1, 1};
        const std::vector<std::uint8_t> seq = {1, 1, 1, 0};
        const auto post = irl::conjugate_beta_update(prior, traj, seq);
        REQUIRE(post.alpha(0, 1) == 4.0);
        REQUIRE(post.beta(0, 1) == 2.0);
        REQUIRE(post.alpha(0, 0) == 1.0);  // untouched pair
        REQUIRE(post.beta(1, 1) == 1.0);
    }

    SECTION("empty trajectory returns the prior unchanged") {
        const auto prior = irl::BetaProductPrior::constant(3, 2, 2.5, 0.5);
        const auto post = irl::conjugate_beta_update(prior, irl::Trajectory{}, {});
        REQUIRE(post.alpha == prior.alpha);
        REQUIRE(post.beta == prior.beta);
    }

    SECTION("distinct pairs update independently") {
        const auto prior = irl::BetaProductPrior::constant(2, 2, 1.0, 1.0);
        irl::Trajectory traj;
        traj.states = {0, 1, 0, 1};
        traj.actions = {0, 1, 0, 1};
        const std::vector<std::uint8_t> seq = {1, 0, 0, 0};
        const auto post = irl::conjugate_beta_update(prior, traj, seq);
        REQUIRE(post.alpha(0, 0) == 2.0);
        REQUIRE(post.beta(0, 0) == 2.0);
        REQUIRE(post.alpha(1, 1) == 1.0);
        REQUIRE(post.beta(1, 1) == 3.0);
        REQUIRE(post.alpha(0, 1) == 1.0);
        REQUIRE(post.beta(1, 0) == 1.0);
    }

    SECTION("length mismatch throws") {
        const auto prior = irl::BetaProductPrior::constant(2, 2, 1.0, 1.0);
        irl::Trajectory traj;
        traj.states = {0};
        traj.actions = {0};
        REQUIRE_THROWS_AS(irl::conjugate_beta_update(prior, traj, {1, 0}),
                          std::invalid_argument);
    }

    SECTION("matches hand counts on randomized trajectories") {
        irl::RandomStream rng = irl::make_stream(211);
        for (int rep = 0; rep < 100; ++rep) {
            const std::size_t ns = 3, na = 2, len = 40;
            const auto prior = irl::BetaProductPrior::constant(ns, na, 1.0, 2.0);
            irl::Trajectory traj;
            std::vector<std::uint8_t> seq;
            irl::Table ones(ns, na, 0.0), zeros(ns, na, 0.0);
            for (std::size_t t = 0; t < len; ++t) {
                const auto s = static_cast<std::size_t>(irl::sample_uniform(rng) * ns);
                const auto a = static_cast<std::size_t>(irl::sample_uniform(rng) * na);
                const bool r = irl::sample_bernoulli(0.5, rng);
                traj.states.push_back(std::min(s, ns - 1));
                traj.actions.push_back(std::min(a, na - 1));
                seq.push_back(r ? 1 : 0);
                (r ? ones : zeros)(traj.states.back(), traj.actions.back()) += 1.0;
            }
            const auto post = irl::conjugate_beta_update(prior, traj, seq);
            for (std::size_t s = 0; s < ns; ++s)
                for (std::size_t a = 0; a < na; ++a) {
                    REQUIRE(post.alpha(s, a) == 1.0 + ones(s, a));
                    REQUIRE(post.beta(s, a) == 2.0 + zeros(s, a));
                }
        }
    }
}

TEST_CASE("sample_reward_sequence") {
    irl::RandomStream rng = irl::make_stream(223);
    irl::Trajectory traj;
    for (int t = 0; t < 20; ++t) {
        traj.states.push_back(0);
        traj.actions.push_back(0);
    }

    SECTION("certain success gives all ones") {
        const irl::RewardModel reward{irl::Table(1, 1, 1.0)};
        for (std::uint8_t r : irl::sample_reward_sequence(reward, traj, rng)) REQUIRE(r == 1);
    }

    SECTION("certain failure gives all zeros") {
        const irl::RewardModel reward{irl::Table(1, 1, 0.0)};
        for (std::uint8_t r : irl::sample_reward_sequence(reward, traj, rng)) REQUIRE(r == 0);
    }

    SECTION("empirical rate matches the success probability") {
        const irl::RewardModel reward{irl::Table(1, 1, 0.3)};
        irl::Trajectory single;
        single.states = {0};
        single.actions = {0};
        double sum = 0.0;
        const int n = 100000;
        for (int i = 0; i < n; ++i) sum += irl::sample_reward_sequence(reward, single, rng)[0];
        REQUIRE(sum / n == Approx(0.3).margin(0.005));
    }
}

TEST_CASE("mh_chain on an empty trajectory samples the prior") {
    const auto problem = testsup::make_oracle_problem(1, 0);
    const auto prior = irl::BetaProductPrior::constant(2, 2, 2.0, 6.0);
    irl::SamplerConfig config;
    config.n_samples = 6000;
    config.burn_in = 1000;
    irl::RandomStream rng = irl::make_stream(227);
    const irl::Chain chain = irl::mh_chain(problem.cmp, problem.discount, prior,
                                           problem.temp_prior, irl::Trajectory{}, config, rng);
    REQUIRE(chain.acceptance_rate == 1.0);
    REQUIRE(chain.samples.size() == config.kept_samples());
    // prior mean 0.25, sd of a Beta(2,6) is ~0.145; draws are i.i.d. here
    const double se = 0.145 / std::sqrt(static_cast<double>(chain.samples.size()));
    const irl::RewardModel mean = irl::posterior_mean_reward(chain);
    for (double v : mean.success_prob.data()) REQUIRE(v == Approx(0.25).margin(3.0 * se + 1e-9));
}

TEST_CASE("mh_chain acceptance rule audit") {
    const auto problem = testsup::make_oracle_problem(2, 30);
    irl::SamplerConfig config;
    config.n_samples = 2000;
    config.burn_in = 500;
    irl::RandomStream rng = irl::make_stream(229);
    const irl::Chain chain = irl::mh_chain(problem.cmp, problem.discount, problem.prior,
                                           problem.temp_prior, problem.traj, config, rng);
    REQUIRE(chain.steps.size() == config.n_samples);

    SECTION("improving proposals are always accepted") {
        for (const irl::McmcStep& step : chain.steps)
            if (step.proposed_log_likelihood >= step.previous_log_likelihood)
                REQUIRE(step.accepted);
    }

    SECTION("rejections repeat the previous tuple exactly") {
        for (std::size_t i = 1; i < chain.samples.size(); ++i) {
            const auto& step = chain.steps[config.burn_in + i];
            if (!step.accepted) REQUIRE(same_sample(chain.samples[i], chain.samples[i - 1]));
        }
    }

    SECTION("acceptance rate is consistent with the audit trail") {
        std::size_t accepted = 0;
        for (const auto& step : chain.steps) accepted += step.accepted;
        REQUIRE(chain.acceptance_rate ==
                Approx(static_cast<double>(accepted) / config.n_samples).margin(1e-15));
    }
}

TEST_CASE("chain bookkeeping honours burn-in and thinning") {
    const auto problem = testsup::make_oracle_problem(3, 10);
    irl::SamplerConfig config;
    config.n_samples = 1000;
    config.burn_in = 300;
    config.thin = 7;
    irl::RandomStream rng = irl::make_stream(233);
    const irl::Chain chain = irl::mh_chain(problem.cmp, problem.discount, problem.prior,
                                           problem.temp_prior, problem.traj, config, rng);
    REQUIRE(chain.samples.size() == 100);
    REQUIRE(chain.samples.size() == config.kept_samples());
}

TEST_CASE("identical seeds give bit-identical chains") {
    const auto problem = testsup::make_oracle_problem(4, 25);
    irl::SamplerConfig config;
    config.n_samples = 800;
    config.burn_in = 200;
    for (int variant = 0; variant < 2; ++variant) {
        irl::RandomStream r1 = irl::make_stream(239), r2 = irl::make_stream(239);
        const auto run = [&](irl::RandomStream& rng) {
            return variant == 0
                       ? irl::mh_chain(problem.cmp, problem.discount, problem.prior,
                                       problem.temp_prior, problem.traj, config, rng)
                       : irl::gibbs_chain(problem.cmp, problem.discount, problem.prior,
                                          problem.temp_prior, problem.traj, config, rng);
        };
        const irl::Chain c1 = run(r1), c2 = run(r2);
        REQUIRE(c1.acceptance_rate == c2.acceptance_rate);
        REQUIRE(c1.samples.size() == c2.samples.size());
        for (std::size_t i = 0; i < c1.samples.size(); ++i) {
            REQUIRE(same_sample(c1.samples[i], c2.samples[i]));
            REQUIRE(c1.samples[i].reward_sequence == c2.samples[i].reward_sequence);
        }
    }
}

TEST_CASE("chain policies satisfy the policy invariants") {
    const auto problem = testsup::make_oracle_problem(5, 20);
    irl::SamplerConfig config;
    config.n_samples = 300;
    config.burn_in = 100;
    irl::RandomStream rng = irl::make_stream(241);
    const irl::Chain chain = irl::mh_chain(problem.cmp, problem.discount, problem.prior,
                                           problem.temp_prior, problem.traj, config, rng);
    for (const irl::JointSample& s : chain.samples) REQUIRE_NOTHROW(s.policy.validate());
}

TEST_CASE("gibbs_chain basics") {
    SECTION("empty trajectory reduces to prior sampling") {
        const auto problem = testsup::make_oracle_problem(6, 0);
        irl::SamplerConfig config;
        config.n_samples = 6000;
        config.burn_in = 1000;
        irl::RandomStream rng = irl::make_stream(251);
        const irl::Chain chain =
            irl::gibbs_chain(problem.cmp, problem.discount, problem.prior, problem.temp_prior,
                             irl::Trajectory{}, config, rng);
        REQUIRE(chain.acceptance_rate == 1.0);
        const irl::RewardModel mean = irl::posterior_mean_reward(chain);
        const double se = 0.2887 / std::sqrt(static_cast<double>(chain.samples.size()));
        for (double v : mean.success_prob.data())
            REQUIRE(v == Approx(0.5).margin(3.0 * se + 1e-9));
    }

    SECTION("near-certain prior mass makes every sampled reward sequence all ones") {
        auto problem = testsup::make_oracle_problem(7, 20);
        const auto prior = irl::BetaProductPrior::constant(2, 2, 1e6, 1.0);
        irl::SamplerConfig config;
        config.n_samples = 200;
        config.burn_in = 50;
        irl::RandomStream rng = irl::make_stream(257);
        const irl::Chain chain = irl::gibbs_chain(problem.cmp, problem.discount, prior,
                                                  problem.temp_prior, problem.traj, config, rng);
        for (const irl::JointSample& s : chain.samples) {
            REQUIRE(s.reward_sequence.size() == problem.traj.length());
            for (std::uint8_t r : s.reward_sequence) REQUIRE(r == 1);
        }
    }

    SECTION("latent reward draws track the posterior success rate of a visited pair") {
        const auto problem = testsup::make_oracle_problem(8, 40);
        irl::SamplerConfig config;
        config.n_samples = 6000;
        config.burn_in = 1000;
        irl::RandomStream rng = irl::make_stream(263);
        const irl::Chain chain =
            irl::gibbs_chain(problem.cmp, problem.discount, problem.prior, problem.temp_prior,
                             problem.traj, config, rng);
        // pick the most-visited pair
        irl::Table counts(2, 2, 0.0);
        for (std::size_t t = 0; t < problem.traj.length(); ++t)
            counts(problem.traj.states[t], problem.traj.actions[t]) += 1.0;
        std::size_t bs = 0, ba = 0;
        for (std::size_t s = 0; s < 2; ++s)
            for (std::size_t a = 0; a < 2; ++a)
                if (counts(s, a) > counts(bs, ba)) {
                    bs = s;
                    ba = a;
                }
        const irl::RewardModel mean = irl::posterior_mean_reward(chain);
        std::vector<double> rates;
        for (const irl::JointSample& sample : chain.samples) {
            double hits = 0.0, visits = 0.0;
            for (std::size_t t = 0; t < problem.traj.length(); ++t)
                if (problem.traj.states[t] == bs && problem.traj.actions[t] == ba) {
                    visits += 1.0;
                    hits += sample.reward_sequence[t];
                }
            rates.push_back(hits / visits);
        }
        REQUIRE(testsup::mean(rates) ==
                Approx(mean.success_prob(bs, ba)).margin(3.0 * testsup::std_err(rates) + 0.02));
    }
}

TEST_CASE("both samplers recover the enumerated posterior on the oracle problem") {
    const auto problem = testsup::make_oracle_problem(42, 50);
    const auto oracle = testsup::enumerate_posterior(problem);
    irl::SamplerConfig config;  // defaults: 10000 samples, 2000 burn-in

    const auto check = [&](const irl::Chain& chain, double mean_tol, double tv_tol) {
        const irl::RewardModel mean = irl::posterior_mean_reward(chain);
        for (std::size_t e = 0; e < 4; ++e)
            REQUIRE(mean.success_prob.data()[e] ==
                    Approx(oracle.posterior_mean[e]).margin(mean_tol));
        REQUIRE(testsup::tv_to_marginal(testsup::pooled_reward_entries(chain),
                                        testsup::pooled_marginal(oracle)) <= tv_tol);
    };

    SECTION("metropolis-hastings") {
        irl::RandomStream rng = irl::make_stream(271);
        check(irl::mh_chain(problem.cmp, problem.discount, problem.prior, problem.temp_prior,
                            problem.traj, config, rng),
              0.05, 0.05);
    }

    SECTION("gibbs, literal acceptance (default)") {
        irl::RandomStream rng = irl::make_stream(281);
        check(irl::gibbs_chain(problem.cmp, problem.discount, problem.prior, problem.temp_prior,
                               problem.traj, config, rng),
              0.05, 0.05);
    }

    SECTION("gibbs, corrected acceptance stays near (but not on) the posterior") {
        // the proposal-density correction makes the composed kernel target a
        // slightly perturbed law: close enough for point estimates, but its
        // pooled marginal misses the 0.05 band the exact rules satisfy
        irl::RandomStream rng = irl::make_stream(277);
        const irl::Chain chain =
            irl::gibbs_chain(problem.cmp, problem.discount, problem.prior, problem.temp_prior,
                             problem.traj, config, rng, irl::GibbsAcceptance::corrected);
        check(chain, 0.12, 0.2);
        REQUIRE(testsup::tv_to_marginal(testsup::pooled_reward_entries(chain),
                                        testsup::pooled_marginal(oracle)) > 0.05);
    }
}

TEST_CASE("posterior point estimates") {
    const auto problem = testsup::make_oracle_problem(9, 0);

    SECTION("a chain of identical samples averages to that sample") {
        irl::Chain chain;
        chain.config = irl::SamplerConfig{};
        irl::JointSample s;
        s.reward.success_prob = irl::Table(2, 2, 0.7);
        s.eta = 1.0;
        s.policy.action_prob = irl::Table(2, 2, 0.5);
        chain.samples = {s, s, s};
        const irl::RewardModel mean = irl::posterior_mean_reward(chain);
        for (double v : mean.success_prob.data()) REQUIRE(v == Approx(0.7).margin(1e-15));
    }

    SECTION("two samples average entrywise") {
        irl::Chain chain;
        irl::JointSample a, b;
        a.reward.success_prob = irl::Table(1, 1, 0.2);
        b.reward.success_prob = irl::Table(1, 1, 0.4);
        a.policy.action_prob = irl::Table(1, 1, 1.0);
        b.policy.action_prob = irl::Table(1, 1, 1.0);
        chain.samples = {a, b};
        REQUIRE(irl::posterior_mean_reward(chain).success_prob(0, 0) ==
                Approx(0.3).margin(1e-15));
    }

    SECTION("empty chain throws") {
        REQUIRE_THROWS_AS(irl::posterior_mean_reward(irl::Chain{}), std::invalid_argument);
    }

    SECTION("map estimate picks the highest-scoring sample") {
        irl::Chain chain;
        irl::JointSample low, high;
        low.reward.success_prob = irl::Table(2, 2, 0.4);
        low.log_likelihood = -10.0;
        low.eta = 2.0;
        high.reward.success_prob = irl::Table(2, 2, 0.6);
        high.log_likelihood = -1.0;
        high.eta = 2.0;
        chain.samples = {low, high};
        const irl::RewardModel map =
            irl::posterior_map_reward(chain, problem.prior, problem.temp_prior);
        REQUIRE(map.success_prob(0, 0) == 0.6);
    }
}

TEST_CASE("chain_policy") {
    const auto problem = testsup::make_oracle_problem(10, 0);

    SECTION("a chain concentrated on the true reward recovers the optimal policy") {
        irl::Chain chain;
        chain.config.q_tol = 1e-8;
        irl::JointSample s;
        s.reward = problem.true_reward;
        s.policy.action_prob = irl::Table(2, 2, 0.5);
        chain.samples = {s};
        const irl::Policy pol = irl::chain_policy(chain, problem.cmp, problem.discount);
        const irl::Mdp truth{problem.cmp, problem.true_reward, problem.discount};
        REQUIRE(irl::l1_loss(truth, pol, 1e-8) <= 2e-8 * 2);
    }

    SECTION("constant posterior mean makes every policy optimal") {
        irl::Chain chain;
        chain.config.q_tol = 1e-8;
        irl::JointSample s;
        s.reward.success_prob = irl::Table(2, 2, 0.5);
        s.policy.action_prob = irl::Table(2, 2, 0.5);
        chain.samples = {s};
        const irl::Policy pol = irl::chain_policy(chain, problem.cmp, problem.discount);
        const irl::Mdp flat{problem.cmp, s.reward, problem.discount};
        REQUIRE(irl::l1_loss(flat, pol, 1e-8) <= 1e-6);
    }

    SECTION("matches the greedy policy of the enumerated posterior mean") {
        const auto full = testsup::make_oracle_problem(42, 50);
        const auto oracle = testsup::enumerate_posterior(full);
        irl::SamplerConfig config;
        irl::RandomStream rng = irl::make_stream(283);
        const irl::Chain chain = irl::mh_chain(full.cmp, full.discount, full.prior,
                                               full.temp_prior, full.traj, config, rng);
        irl::RewardModel oracle_mean{irl::Table(2, 2)};
        for (std::size_t e = 0; e < 4; ++e)
            oracle_mean.success_prob.data()[e] = oracle.posterior_mean[e];
        const irl::Policy from_chain = irl::chain_policy(chain, full.cmp, full.discount);
        const irl::Policy from_oracle = irl::greedy_policy(
            irl::solve_optimal_q(irl::Mdp{full.cmp, oracle_mean, full.discount}, 1e-8));
        REQUIRE(from_chain.action_prob == from_oracle.action_prob);
    }
}
