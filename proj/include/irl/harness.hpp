#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "irl/baselines.hpp"
#include "irl/envgen.hpp"
#include "irl/mdp.hpp"
#include "irl/random.hpp"
#include "irl/samplers.hpp"
#include "irl/types.hpp"

namespace irl {

enum class Method { soft, mh, gibbs, lp, policywalk, mwal };
enum class Domain { random_mdp, maze };
enum class PointEstimate { mean, map };

inline const std::vector<Method>& all_methods() {
    static const std::vector<Method> methods = {Method::soft, Method::mh,         Method::gibbs,
                                                Method::lp,   Method::policywalk, Method::mwal};
    return methods;
}

inline std::string to_string(Method m) {
    switch (m) {
        case Method::soft: return "soft";
        case Method::mh: return "mh";
        case Method::gibbs: return "gibbs";
        case Method::lp: return "lp";
        case Method::policywalk: return "policywalk";
        case Method::mwal: return "mwal";
    }
    return "?";
}

inline std::optional<Method> method_from_string(const std::string& s) {
    for (Method m : all_methods())
        if (to_string(m) == s) return m;
    return std::nullopt;
}

inline std::string to_string(Domain d) {
    return d == Domain::random_mdp ? "random-mdp" : "maze";
}

/// Error in user-supplied configuration (maps to CLI exit code 1).
class ConfigError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Full description of one experiment batch. A batch is a pure function of
/// this struct: the same config always produces the same results file.
struct ExperimentConfig {
    Domain domain = Domain::random_mdp;
    std::vector<std::size_t> state_counts = {16};
    std::size_t n_actions = 4;
    std::size_t maze_width = 8;
    std::size_t maze_height = 8;
    double discount = 0.95;
    std::vector<double> etas = {0.5, 1, 2, 4, 8, 16, 32, 64};
    std::vector<std::size_t> horizons = {500};
    std::size_t n_runs = 100;
    std::vector<Method> methods = all_methods();
    SamplerConfig sampler;
    double beta_alpha = 1.0;
    double beta_beta = 1.0;
    GammaPrior temp_prior;
    double pw_confidence = 1.0;
    double lp_penalty = 1.05;
    double lp_r_max = 1.0;
    double mwal_accuracy = 1e-3;
    std::size_t mwal_round_cap = 500;  // 0 = run the full schedule
    double tie_tol = 1e-9;
    PointEstimate point_estimate = PointEstimate::mean;
    GibbsAcceptance gibbs_acceptance = GibbsAcceptance::literal;
    bool occupancy_empirical_start = false;
    std::uint64_t master_seed = 0;
    std::size_t workers = 1;
    bool record_timing = false;
    std::string out_path = "results.csv";

    std::string sweep_axis() const {
        const int active = (etas.size() > 1) + (horizons.size() > 1) + (state_counts.size() > 1);
        if (active > 1) throw ConfigError("exactly one sweep axis may be active");
        if (horizons.size() > 1) return "T";
        if (state_counts.size() > 1) return "states";
        return "eta";
    }

    std::size_t sweep_size() const {
        return std::max({etas.size(), horizons.size(), state_counts.size()});
    }

    void validate() const {
        sweep_axis();
        if (n_runs < 1) throw ConfigError("runs must be >= 1");
        if (etas.empty() || horizons.empty() || state_counts.empty())
            throw ConfigError("eta, horizon and states lists must be non-empty");
        for (double e : etas)
            if (!(e >= 0.0)) throw ConfigError("eta must be >= 0");
        if (!(discount >= 0.0 && discount < 1.0)) throw ConfigError("gamma must lie in [0,1)");
        if (methods.empty()) throw ConfigError("at least one method required");
        if (domain == Domain::maze && state_counts.size() > 1)
            throw ConfigError("the states sweep applies to the random-mdp domain only");
        if (domain == Domain::maze && maze_width * maze_height < 4)
            throw ConfigError("maze too small");
        for (std::size_t s : state_counts)
            if (s < 4) throw ConfigError("states must be >= 4");
        if (!(beta_alpha > 0.0 && beta_beta > 0.0)) throw ConfigError("alpha-beta must be > 0");
        if (!(mwal_accuracy > 0.0)) throw ConfigError("mwal-accuracy must be > 0");
        if (workers < 1) throw ConfigError("workers must be >= 1");
        try {
            sampler.validate();
            temp_prior.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }

    /// Copy with the method list sorted into canonical order and deduplicated.
    ExperimentConfig normalized() const {
        ExperimentConfig c = *this;
        std::vector<Method> sorted;
        for (Method m : all_methods())
            if (std::find(c.methods.begin(), c.methods.end(), m) != c.methods.end())
                sorted.push_back(m);
        c.methods = std::move(sorted);
        return c;
    }
};

/// One (run, method) outcome. `loss` is NaN for an error record.
struct RunRecord {
    std::size_t run_id = 0;
    std::string sweep_axis;
    double sweep_value = 0.0;
    Method method = Method::soft;
    double loss = 0.0;
    double eta = 0.0;
    std::size_t horizon = 0;
    std::size_t n_states = 0;
    double discount = 0.0;
    std::uint64_t seed = 0;
    std::int64_t wall_time_ms = 0;

    bool is_error() const { return std::isnan(loss); }
};

/// Everything a single run produced, for replay dumps and diagnostics.
struct RunArtifacts {
    ControlledMarkovProcess cmp;
    RewardModel true_reward;
    Policy demonstrator;
    Trajectory trajectory;
    std::map<Method, Chain> chains;
};

namespace detail {

// sub-stream salts within one run seed
inline constexpr std::uint64_t kSaltEnv = 1;
inline constexpr std::uint64_t kSaltReward = 2;
inline constexpr std::uint64_t kSaltTrajectory = 3;
inline constexpr std::uint64_t kSaltMh = 10;
inline constexpr std::uint64_t kSaltGibbs = 11;
inline constexpr std::uint64_t kSaltPolicyWalk = 12;

inline std::string fmt_real17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_real(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str()) throw std::runtime_error("bad real: '" + s + "'");
    return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string token;
    std::istringstream in(s);
    while (std::getline(in, token, sep)) parts.push_back(token);
    if (!s.empty() && s.back() == sep) parts.push_back("");
    return parts;
}

}  // namespace detail

/// Applies one `key=value` setting (config-file line or results-header echo)
/// to a config. Unknown keys raise ConfigError.
inline void apply_config_kv(ExperimentConfig& config, const std::string& key,
                            const std::string& value) {
    const auto parse_count_list = [&](const std::string& v) {
        std::vector<std::size_t> out;
        for (const std::string& tok : detail::split(v, ','))
            out.push_back(static_cast<std::size_t>(std::stoull(tok)));
        return out;
    };
    const auto parse_real_list = [&](const std::string& v) {
        std::vector<double> out;
        for (const std::string& tok : detail::split(v, ',')) out.push_back(detail::parse_real(tok));
        return out;
    };
    try {
        if (key == "domain") {
            if (value == "random-mdp")
                config.domain = Domain::random_mdp;
            else if (value == "maze")
                config.domain = Domain::maze;
            else
                throw ConfigError("unknown domain: " + value);
        } else if (key == "states") {
            config.state_counts = parse_count_list(value);
        } else if (key == "actions") {
            config.n_actions = std::stoull(value);
        } else if (key == "maze") {
            const auto parts = detail::split(value, 'x');
            if (parts.size() != 2) throw ConfigError("maze expects WxH");
            config.maze_width = std::stoull(parts[0]);
            config.maze_height = std::stoull(parts[1]);
        } else if (key == "gamma") {
            config.discount = detail::parse_real(value);
        } else if (key == "eta") {
            config.etas = parse_real_list(value);
        } else if (key == "horizon") {
            config.horizons = parse_count_list(value);
        } else if (key == "runs") {
            config.n_runs = std::stoull(value);
        } else if (key == "methods") {
            config.methods.clear();
            for (const std::string& tok : detail::split(value, ',')) {
                const auto m = method_from_string(tok);
                if (!m) throw ConfigError("unknown method: " + tok);
                config.methods.push_back(*m);
            }
        } else if (key == "samples") {
            config.sampler.n_samples = std::stoull(value);
        } else if (key == "burn-in") {
            config.sampler.burn_in = std::stoull(value);
        } else if (key == "thin") {
            config.sampler.thin = std::stoull(value);
        } else if (key == "q-tol") {
            config.sampler.q_tol = detail::parse_real(value);
        } else if (key == "alpha-beta") {
            const auto parts = detail::split(value, ',');
            if (parts.size() != 2) throw ConfigError("alpha-beta expects A,B");
            config.beta_alpha = detail::parse_real(parts[0]);
            config.beta_beta = detail::parse_real(parts[1]);
        } else if (key == "gamma-prior") {
            const auto parts = detail::split(value, ',');
            if (parts.size() != 2) throw ConfigError("gamma-prior expects SHAPE,RATE");
            config.temp_prior.shape = detail::parse_real(parts[0]);
            config.temp_prior.rate = detail::parse_real(parts[1]);
        } else if (key == "pw-confidence") {
            config.pw_confidence = detail::parse_real(value);
        } else if (key == "lp-penalty") {
            config.lp_penalty = detail::parse_real(value);
        } else if (key == "lp-rmax") {
            config.lp_r_max = detail::parse_real(value);
        } else if (key == "mwal-accuracy") {
            config.mwal_accuracy = detail::parse_real(value);
        } else if (key == "mwal-round-cap") {
            config.mwal_round_cap = std::stoull(value);
        } else if (key == "tie-tol") {
            config.tie_tol = detail::parse_real(value);
        } else if (key == "point-estimate") {
            if (value == "mean")
                config.point_estimate = PointEstimate::mean;
            else if (value == "map")
                config.point_estimate = PointEstimate::map;
            else
                throw ConfigError("point-estimate must be mean or map");
        } else if (key == "gibbs-acceptance") {
            if (value == "corrected")
                config.gibbs_acceptance = GibbsAcceptance::corrected;
            else if (value == "literal")
                config.gibbs_acceptance = GibbsAcceptance::literal;
            else
                throw ConfigError("gibbs-acceptance must be corrected or literal");
        } else if (key == "occupancy-empirical-start") {
            config.occupancy_empirical_start = (value == "1" || value == "true");
        } else if (key == "seed") {
            config.master_seed = std::stoull(value);
        } else if (key == "workers") {
            config.workers = std::stoull(value);
        } else if (key == "timing") {
            config.record_timing = (value == "1" || value == "true");
        } else if (key == "out") {
            config.out_path = value;
        } else {
            throw ConfigError("unknown config key: " + key);
        }
    } catch (const std::invalid_argument&) {
        throw ConfigError("bad value for " + key + ": " + value);
    } catch (const std::out_of_range&) {
        throw ConfigError("bad value for " + key + ": " + value);
    }
}

/// The fully resolved config as `key=value` lines, the same keys
/// apply_config_kv accepts. Echoed into results files as `#` comments.
inline std::vector<std::string> config_echo_lines(const ExperimentConfig& config) {
    using detail::fmt_real17;
    const auto join_counts = [](const std::vector<std::size_t>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
        return s;
    };
    const auto join_reals = [](const std::vector<double>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt_real17(v[i]);
        return s;
    };
    std::string methods;
    for (std::size_t i = 0; i < config.methods.size(); ++i)
        methods += (i ? "," : "") + to_string(config.methods[i]);
    std::vector<std::string> lines;
    lines.push_back("domain=" + to_string(config.domain));
    lines.push_back("states=" + join_counts(config.state_counts));
    lines.push_back("actions=" + std::to_string(config.n_actions));
    lines.push_back("maze=" + std::to_string(config.maze_width) + "x" +
                    std::to_string(config.maze_height));
    lines.push_back("gamma=" + fmt_real17(config.discount));
    lines.push_back("eta=" + join_reals(config.etas));
    lines.push_back("horizon=" + join_counts(config.horizons));
    lines.push_back("runs=" + std::to_string(config.n_runs));
    lines.push_back("methods=" + methods);
    lines.push_back("samples=" + std::to_string(config.sampler.n_samples));
    lines.push_back("burn-in=" + std::to_string(config.sampler.burn_in));
    lines.push_back("thin=" + std::to_string(config.sampler.thin));
    lines.push_back("q-tol=" + fmt_real17(config.sampler.q_tol));
    lines.push_back("alpha-beta=" + fmt_real17(config.beta_alpha) + "," +
                    fmt_real17(config.beta_beta));
    lines.push_back("gamma-prior=" + fmt_real17(config.temp_prior.shape) + "," +
                    fmt_real17(config.temp_prior.rate));
    lines.push_back("pw-confidence=" + fmt_real17(config.pw_confidence));
    lines.push_back("lp-penalty=" + fmt_real17(config.lp_penalty));
    lines.push_back("lp-rmax=" + fmt_real17(config.lp_r_max));
    lines.push_back("mwal-accuracy=" + fmt_real17(config.mwal_accuracy));
    lines.push_back("mwal-round-cap=" + std::to_string(config.mwal_round_cap));
    lines.push_back("tie-tol=" + fmt_real17(config.tie_tol));
    lines.push_back(std::string("point-estimate=") +
                    (config.point_estimate == PointEstimate::mean ? "mean" : "map"));
    lines.push_back(std::string("gibbs-acceptance=") +
                    (config.gibbs_acceptance == GibbsAcceptance::corrected ? "corrected"
                                                                           : "literal"));
    lines.push_back(std::string("occupancy-empirical-start=") +
                    (config.occupancy_empirical_start ? "1" : "0"));
    lines.push_back("seed=" + std::to_string(config.master_seed));
    lines.push_back("workers=" + std::to_string(config.workers));
    lines.push_back(std::string("timing=") + (config.record_timing ? "1" : "0"));
    return lines;
}

namespace detail {

struct SweepPoint {
    double eta;
    std::size_t horizon;
    std::size_t n_states;
    double value;  // coordinate along the active axis
};

inline SweepPoint resolve_sweep(const ExperimentConfig& config, std::size_t sweep_index) {
    SweepPoint p{};
    const std::string axis = config.sweep_axis();
    p.eta = config.etas[axis == "eta" ? sweep_index : 0];
    p.horizon = config.horizons[axis == "T" ? sweep_index : 0];
    p.n_states = config.state_counts[axis == "states" ? sweep_index : 0];
    if (axis == "eta")
        p.value = p.eta;
    else if (axis == "T")
        p.value = static_cast<double>(p.horizon);
    else
        p.value = static_cast<double>(p.n_states);
    return p;
}

/// greedy policy of the optimal Q-values for a reward estimate
inline Policy plan_greedy(const ControlledMarkovProcess& cmp, double discount,
                          const RewardModel& reward, double q_tol, double tie_tol) {
    return greedy_policy(solve_optimal_q(Mdp{cmp, reward, discount}, q_tol), tie_tol);
}

}  // namespace detail

/// Executes one run: samples the environment and true reward, simulates one
/// demonstration, runs every requested method on that same trajectory, and
/// scores each method's policy against the true MDP. Per-method exceptions
/// become error records (NaN loss); the other methods still run. Pass
/// `artifacts` to capture the run's environment, trajectory and chains.
inline std::vector<RunRecord> run_single(const ExperimentConfig& raw_config,
                                         std::size_t sweep_index, std::size_t run_index,
                                         RunArtifacts* artifacts = nullptr) {
    const ExperimentConfig config = raw_config.normalized();
    config.validate();
    const detail::SweepPoint point = detail::resolve_sweep(config, sweep_index);
    const std::uint64_t run_seed = hash64(config.master_seed, run_index, sweep_index);
    const double q_tol = config.sampler.q_tol;

    RandomStream env_rng = make_stream(hash64(run_seed, detail::kSaltEnv));
    ControlledMarkovProcess cmp;
    if (config.domain == Domain::random_mdp) {
        cmp = sample_random_mdp(point.n_states, config.n_actions, env_rng);
    } else {
        cmp = sample_maze(config.maze_width, config.maze_height, env_rng).cmp;
    }
    const std::size_t n_states = cmp.n_states;
    const std::size_t n_actions = cmp.n_actions;

    const BetaProductPrior prior =
        BetaProductPrior::constant(n_states, n_actions, config.beta_alpha, config.beta_beta);
    RandomStream reward_rng = make_stream(hash64(run_seed, detail::kSaltReward));
    const RewardModel true_reward = sample_reward(prior, reward_rng);
    const Mdp mdp_true{cmp, true_reward, config.discount};

    const Policy demonstrator = make_demonstrator(mdp_true, point.eta, q_tol);
    RandomStream traj_rng = make_stream(hash64(run_seed, detail::kSaltTrajectory));
    const Trajectory traj = simulate(cmp, true_reward, demonstrator, point.horizon, traj_rng);

    if (artifacts) {
        artifacts->cmp = cmp;
        artifacts->true_reward = true_reward;
        artifacts->demonstrator = demonstrator;
        artifacts->trajectory = traj;
    }

    const auto extract_policy = [&](const Chain& chain) {
        if (config.point_estimate == PointEstimate::mean)
            return chain_policy(chain, cmp, config.discount, config.tie_tol);
        return detail::plan_greedy(cmp, config.discount,
                                   posterior_map_reward(chain, prior, config.temp_prior), q_tol,
                                   config.tie_tol);
    };
    const auto estimate_demo_policy = [&]() {
        return config.domain == Domain::random_mdp
                   ? ml_policy_estimate(traj, n_states, n_actions)
                   : laplace_policy_estimate(traj, n_states, n_actions);
    };

    std::vector<RunRecord> records;
    for (Method method : config.methods) {
        RunRecord rec;
        rec.run_id = sweep_index * config.n_runs + run_index;
        rec.sweep_axis = config.sweep_axis();
        rec.sweep_value = point.value;
        rec.method = method;
        rec.eta = point.eta;
        rec.horizon = point.horizon;
        rec.n_states = n_states;
        rec.discount = config.discount;
        rec.seed = run_seed;
        const auto start = std::chrono::steady_clock::now();
        try {
            switch (method) {
                case Method::soft: {
                    rec.loss = l1_loss(mdp_true, demonstrator, q_tol);
                    break;
                }
                case Method::mh: {
                    RandomStream rng = make_stream(hash64(run_seed, detail::kSaltMh));
                    Chain chain = mh_chain(cmp, config.discount, prior, config.temp_prior, traj,
                                           config.sampler, rng);
                    rec.loss = l1_loss(mdp_true, extract_policy(chain), q_tol);
                    if (artifacts) artifacts->chains.emplace(method, std::move(chain));
                    break;
                }
                case Method::gibbs: {
                    RandomStream rng = make_stream(hash64(run_seed, detail::kSaltGibbs));
                    Chain chain = gibbs_chain(cmp, config.discount, prior, config.temp_prior,
                                              traj, config.sampler, rng,
                                              config.gibbs_acceptance);
                    rec.loss = l1_loss(mdp_true, extract_policy(chain), q_tol);
                    if (artifacts) artifacts->chains.emplace(method, std::move(chain));
                    break;
                }
                case Method::lp: {
                    const RewardModel reward =
                        lp_irl(cmp, config.discount, estimate_demo_policy().policy,
                               config.lp_penalty, config.lp_r_max);
                    rec.loss = l1_loss(
                        mdp_true,
                        detail::plan_greedy(cmp, config.discount, reward, q_tol, config.tie_tol),
                        q_tol);
                    break;
                }
                case Method::policywalk: {
                    const RewardModel seed_reward =
                        lp_irl(cmp, config.discount, estimate_demo_policy().policy,
                               config.lp_penalty, config.lp_r_max);
                    RandomStream rng = make_stream(hash64(run_seed, detail::kSaltPolicyWalk));
                    Chain chain = policy_walk_chain(cmp, config.discount, prior, traj,
                                                    config.pw_confidence, config.sampler,
                                                    seed_reward, rng);
                    rec.loss = l1_loss(
                        mdp_true,
                        detail::plan_greedy(cmp, config.discount, posterior_mean_reward(chain),
                                            q_tol, config.tie_tol),
                        q_tol);
                    if (artifacts) artifacts->chains.emplace(method, std::move(chain));
                    break;
                }
                case Method::mwal: {
                    const PolicyEstimate est = estimate_demo_policy();
                    std::vector<double> start_dist = cmp.initial_dist;
                    if (config.occupancy_empirical_start && traj.length() > 0) {
                        std::fill(start_dist.begin(), start_dist.end(), 0.0);
                        start_dist[traj.states.front()] = 1.0;
                    }
                    const OccupancyVector demo_occ = discounted_state_occupancy(
                        cmp, est.policy, config.discount, start_dist);
                    const MwalResult res = mwal(cmp, config.discount, demo_occ,
                                                config.mwal_accuracy, config.mwal_round_cap,
                                                q_tol);
                    rec.loss = l1_loss(mdp_true, res.mixture, q_tol);
                    break;
                }
            }
        } catch (const std::exception&) {
            rec.loss = std::numeric_limits<double>::quiet_NaN();
        }
        const auto stop = std::chrono::steady_clock::now();
        rec.wall_time_ms =
            config.record_timing
                ? std::chrono::duration_cast<std::chrono::milliseconds>(stop - start).count()
                : 0;
        records.push_back(std::move(rec));
    }
    return records;
}

inline void write_results_csv(std::ostream& out, const ExperimentConfig& config,
                              const std::vector<RunRecord>& records) {
    for (const std::string& line : config_echo_lines(config)) out << "# " << line << '\n';
    out << "run_id,sweep_axis,sweep_value,method,loss,eta,T,n_states,discount,seed,wall_time_ms\n";
    for (const RunRecord& r : records) {
        out << r.run_id << ',' << r.sweep_axis << ',' << detail::fmt_real17(r.sweep_value) << ','
            << to_string(r.method) << ',' << detail::fmt_real17(r.loss) << ','
            << detail::fmt_real17(r.eta) << ',' << r.horizon << ',' << r.n_states << ','
            << detail::fmt_real17(r.discount) << ',' << r.seed << ',' << r.wall_time_ms << '\n';
    }
}

struct ResultsFile {
    ExperimentConfig config;
    std::vector<RunRecord> records;
};

inline ResultsFile read_results_csv(std::istream& in) {
    ResultsFile file;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.rfind("# ", 0) == 0) {
            const std::string kv = line.substr(2);
            const auto eq = kv.find('=');
            if (eq == std::string::npos) continue;
            apply_config_kv(file.config, kv.substr(0, eq), kv.substr(eq + 1));
            continue;
        }
        if (!header_seen) {
            if (line.rfind("run_id,", 0) != 0)
                throw std::runtime_error("results file: bad header row");
            header_seen = true;
            continue;
        }
        const auto f = detail::split(line, ',');
        if (f.size() != 11) throw std::runtime_error("results file: bad record: " + line);
        RunRecord r;
        r.run_id = std::stoull(f[0]);
        r.sweep_axis = f[1];
        r.sweep_value = detail::parse_real(f[2]);
        const auto m = method_from_string(f[3]);
        if (!m) throw std::runtime_error("results file: unknown method " + f[3]);
        r.method = *m;
        r.loss = detail::parse_real(f[4]);
        r.eta = detail::parse_real(f[5]);
        r.horizon = std::stoull(f[6]);
        r.n_states = std::stoull(f[7]);
        r.discount = detail::parse_real(f[8]);
        r.seed = std::stoull(f[9]);
        r.wall_time_ms = std::stoll(f[10]);
        file.records.push_back(std::move(r));
    }
    if (!header_seen) throw std::runtime_error("results file: missing header row");
    return file;
}

struct BatchResult {
    std::vector<RunRecord> records;
    bool any_error = false;
    bool interrupted = false;
};

/// Runs the whole batch: every sweep value times every run, optionally on
/// several worker threads, then writes the results file. Record order in the
/// file is canonical (run_id, then method order) regardless of scheduling.
/// `cancel`, when given, is polled between runs; on interruption the records
/// completed so far are still flushed.
inline BatchResult run_batch(const ExperimentConfig& raw_config,
                             const std::atomic<bool>* cancel = nullptr) {
    const ExperimentConfig config = raw_config.normalized();
    config.validate();
    const std::size_t sweep_count = config.sweep_size();
    const std::size_t total_runs = sweep_count * config.n_runs;

    std::vector<std::vector<RunRecord>> slots(total_runs);
    std::vector<char> done(total_runs, 0);
    std::atomic<std::size_t> next_task{0};
    std::atomic<bool> stopped{false};

    const auto worker = [&]() {
        for (;;) {
            if (stopped.load() || (cancel && cancel->load())) {
                stopped.store(true);
                return;
            }
            const std::size_t task = next_task.fetch_add(1);
            if (task >= total_runs) return;
            const std::size_t sweep_index = task / config.n_runs;
            const std::size_t run_index = task % config.n_runs;
            slots[task] = run_single(config, sweep_index, run_index);
            done[task] = 1;
        }
    };

    const std::size_t n_workers = std::min<std::size_t>(config.workers, total_runs);
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    BatchResult result;
    result.interrupted = stopped.load();
    for (std::size_t task = 0; task < total_runs; ++task) {
        if (!done[task]) continue;
        for (RunRecord& r : slots[task]) {
            result.any_error = result.any_error || r.is_error();
            result.records.push_back(std::move(r));
        }
    }
    if (!config.out_path.empty()) {
        std::ofstream out(config.out_path, std::ios::binary);  // LF endings everywhere
        if (!out) throw std::runtime_error("cannot open output file: " + config.out_path);
        write_results_csv(out, config, result.records);
    }
    return result;
}

struct AggregateRow {
    std::string sweep_axis;
    double sweep_value = 0.0;
    Method method = Method::soft;
    double mean_loss = 0.0;
    double std_err = 0.0;
    std::size_t n = 0;
};

/// Per (sweep value, method) mean and standard error over non-error records.
/// stderr is the sample standard deviation over sqrt(n); 0 when n = 1.
inline std::vector<AggregateRow> aggregate_records(const std::vector<RunRecord>& records) {
    std::vector<double> values_order;  // sweep values in order of first appearance
    std::map<std::pair<double, Method>, std::vector<double>> groups;
    std::string axis;
    for (const RunRecord& r : records) {
        if (axis.empty()) axis = r.sweep_axis;
        if (r.is_error()) continue;
        if (std::find(values_order.begin(), values_order.end(), r.sweep_value) ==
            values_order.end())
            values_order.push_back(r.sweep_value);
        groups[{r.sweep_value, r.method}].push_back(r.loss);
    }
    std::vector<AggregateRow> rows;
    for (double value : values_order) {
        for (Method m : all_methods()) {
            const auto it = groups.find({value, m});
            if (it == groups.end()) continue;
            const std::vector<double>& losses = it->second;
            AggregateRow row;
            row.sweep_axis = axis;
            row.sweep_value = value;
            row.method = m;
            row.n = losses.size();
            double sum = 0.0;
            for (double v : losses) sum += v;
            row.mean_loss = sum / static_cast<double>(losses.size());
            if (losses.size() > 1) {
                double ss = 0.0;
                for (double v : losses) ss += (v - row.mean_loss) * (v - row.mean_loss);
                row.std_err = std::sqrt(ss / static_cast<double>(losses.size() - 1)) /
                              std::sqrt(static_cast<double>(losses.size()));
            }
            rows.push_back(row);
        }
    }
    return rows;
}

inline void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
    if (!rows.empty()) out << "# sweep_axis=" << rows.front().sweep_axis << '\n';
    out << "sweep_value,method,mean_loss,stderr,n\n";
    for (const AggregateRow& r : rows)
        out << detail::fmt_real17(r.sweep_value) << ',' << to_string(r.method) << ','
            << detail::fmt_real17(r.mean_loss) << ',' << detail::fmt_real17(r.std_err) << ','
            << r.n << '\n';
}

}  // namespace irl
