#pragma once

#include <cstdio>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "irl/samplers.hpp"
#include "irl/types.hpp"

// Plain-text interchange format. Every block starts with a tag and version
// token so files can be concatenated and replayed. Reals are written with 17
// significant digits, which round-trips doubles exactly.

namespace irl {

namespace detail {

inline std::string fmt_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void expect_tag(std::istream& in, const std::string& tag) {
    std::string got;
    if (!(in >> got) || got != tag)
        throw std::runtime_error("parse error: expected '" + tag + "', got '" + got + "'");
}

inline std::size_t read_count(std::istream& in, const char* what) {
    long long v = 0;
    if (!(in >> v) || v < 0) throw std::runtime_error(std::string("parse error: ") + what);
    return static_cast<std::size_t>(v);
}

inline double read_real(std::istream& in, const char* what) {
    double v = 0.0;
    if (!(in >> v)) throw std::runtime_error(std::string("parse error: ") + what);
    return v;
}

inline void write_table(std::ostream& out, const Table& t) {
    out << t.rows() << ' ' << t.cols() << '\n';
    for (std::size_t r = 0; r < t.rows(); ++r) {
        for (std::size_t c = 0; c < t.cols(); ++c)
            out << (c ? " " : "") << fmt_real(t(r, c));
        out << '\n';
    }
}

inline Table read_table(std::istream& in) {
    const std::size_t rows = read_count(in, "table rows");
    const std::size_t cols = read_count(in, "table cols");
    Table t(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) t(r, c) = read_real(in, "table entry");
    return t;
}

}  // namespace detail

inline void write_cmp(std::ostream& out, const ControlledMarkovProcess& cmp) {
    out << "irl-cmp 1\n" << cmp.n_states << ' ' << cmp.n_actions << '\n';
    out << "initial";
    for (double p : cmp.initial_dist) out << ' ' << detail::fmt_real(p);
    out << '\n';
    for (std::size_t s = 0; s < cmp.n_states; ++s)
        for (std::size_t a = 0; a < cmp.n_actions; ++a) {
            out << "trans " << s << ' ' << a;
            for (double p : cmp.next_state_dist(s, a)) out << ' ' << detail::fmt_real(p);
            out << '\n';
        }
    out << "end\n";
}

inline ControlledMarkovProcess read_cmp(std::istream& in) {
    detail::expect_tag(in, "irl-cmp");
    detail::expect_tag(in, "1");
    const std::size_t ns = detail::read_count(in, "n_states");
    const std::size_t na = detail::read_count(in, "n_actions");
    ControlledMarkovProcess cmp(ns, na);
    detail::expect_tag(in, "initial");
    for (std::size_t s = 0; s < ns; ++s) cmp.initial_dist[s] = detail::read_real(in, "initial");
    for (std::size_t i = 0; i < ns * na; ++i) {
        detail::expect_tag(in, "trans");
        const std::size_t s = detail::read_count(in, "state");
        const std::size_t a = detail::read_count(in, "action");
        if (s >= ns || a >= na) throw std::runtime_error("parse error: trans index");
        auto row = cmp.next_state_dist(s, a);
        for (std::size_t t = 0; t < ns; ++t) row[t] = detail::read_real(in, "trans prob");
    }
    detail::expect_tag(in, "end");
    return cmp;
}

inline void write_reward(std::ostream& out, const RewardModel& reward) {
    out << "irl-reward 1\n";
    detail::write_table(out, reward.success_prob);
    out << "end\n";
}

inline RewardModel read_reward(std::istream& in) {
    detail::expect_tag(in, "irl-reward");
    detail::expect_tag(in, "1");
    RewardModel r{detail::read_table(in)};
    detail::expect_tag(in, "end");
    return r;
}

inline void write_policy(std::ostream& out, const Policy& policy) {
    out << "irl-policy 1\n";
    detail::write_table(out, policy.action_prob);
    out << "end\n";
}

inline Policy read_policy(std::istream& in) {
    detail::expect_tag(in, "irl-policy");
    detail::expect_tag(in, "1");
    Policy p{detail::read_table(in)};
    detail::expect_tag(in, "end");
    return p;
}

inline void write_trajectory(std::ostream& out, const Trajectory& traj) {
    out << "irl-trajectory 1\n" << traj.length() << ' ' << (traj.rewards ? 1 : 0) << '\n';
    for (std::size_t t = 0; t < traj.length(); ++t) {
        out << traj.states[t] << ' ' << traj.actions[t];
        if (traj.rewards) out << ' ' << static_cast<int>((*traj.rewards)[t]);
        out << '\n';
    }
    out << "end\n";
}

inline Trajectory read_trajectory(std::istream& in) {
    detail::expect_tag(in, "irl-trajectory");
    detail::expect_tag(in, "1");
    const std::size_t len = detail::read_count(in, "length");
    const std::size_t has_rewards = detail::read_count(in, "has_rewards");
    Trajectory traj;
    if (has_rewards) traj.rewards.emplace();
    for (std::size_t t = 0; t < len; ++t) {
        traj.states.push_back(detail::read_count(in, "state"));
        traj.actions.push_back(detail::read_count(in, "action"));
        if (has_rewards) {
            const std::size_t r = detail::read_count(in, "reward");
            if (r > 1) throw std::runtime_error("parse error: reward not 0/1");
            traj.rewards->push_back(static_cast<std::uint8_t>(r));
        }
    }
    detail::expect_tag(in, "end");
    return traj;
}

inline void write_chain(std::ostream& out, const Chain& chain) {
    out << "irl-chain 1\n";
    out << chain.samples.size() << ' ' << detail::fmt_real(chain.acceptance_rate) << ' '
        << chain.solver_failures << '\n';
    out << chain.config.n_samples << ' ' << chain.config.burn_in << ' ' << chain.config.thin
        << ' ' << detail::fmt_real(chain.config.q_tol) << '\n';
    for (const JointSample& s : chain.samples) {
        out << "sample " << detail::fmt_real(s.eta) << ' '
            << detail::fmt_real(s.log_likelihood) << '\n';
        detail::write_table(out, s.reward.success_prob);
        detail::write_table(out, s.policy.action_prob);
        out << s.reward_sequence.size();
        for (std::uint8_t r : s.reward_sequence) out << ' ' << static_cast<int>(r);
        out << '\n';
    }
    out << "end\n";
}

inline Chain read_chain(std::istream& in) {
    detail::expect_tag(in, "irl-chain");
    detail::expect_tag(in, "1");
    Chain chain;
    const std::size_t count = detail::read_count(in, "sample count");
    chain.acceptance_rate = detail::read_real(in, "acceptance rate");
    chain.solver_failures = detail::read_count(in, "solver failures");
    chain.config.n_samples = detail::read_count(in, "n_samples");
    chain.config.burn_in = detail::read_count(in, "burn_in");
    chain.config.thin = detail::read_count(in, "thin");
    chain.config.q_tol = detail::read_real(in, "q_tol");
    for (std::size_t i = 0; i < count; ++i) {
        detail::expect_tag(in, "sample");
        JointSample s;
        s.eta = detail::read_real(in, "eta");
        s.log_likelihood = detail::read_real(in, "log likelihood");
        s.reward.success_prob = detail::read_table(in);
        s.policy.action_prob = detail::read_table(in);
        const std::size_t seq = detail::read_count(in, "sequence length");
        for (std::size_t t = 0; t < seq; ++t)
            s.reward_sequence.push_back(
                static_cast<std::uint8_t>(detail::read_count(in, "reward bit")));
        chain.samples.push_back(std::move(s));
    }
    detail::expect_tag(in, "end");
    return chain;
}

}  // namespace irl
