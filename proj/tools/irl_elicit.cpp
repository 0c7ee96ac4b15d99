// irl-elicit: experiment driver for reward/policy estimation from a single
// demonstrated trajectory. Subcommands:
//   run        generate environments, run the requested methods, write a CSV
//   aggregate  per-(sweep value, method) mean/stderr table from a results CSV
//   replay     re-derive one run from its recorded seed and verify the file
//
// Exit codes: 0 success, 1 configuration error, 2 partial failure (some error
// records, an interrupted batch, or a replay mismatch).

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "irl/irl.hpp"
#include "irl/serialize.hpp"

namespace {

std::atomic<bool> g_interrupted{false};

void handle_sigint(int) { g_interrupted.store(true); }

// Pre-parse --config and apply the file before CLI11 binds the flags, so
// command-line values override file values.
std::string find_config_arg(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--config" && i + 1 < argc) return argv[i + 1];
        if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
    }
    return {};
}

void load_config_file(irl::ExperimentConfig& config, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw irl::ConfigError("cannot open config file: " + path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw irl::ConfigError("config file line without '=': " + line);
        irl::apply_config_kv(config, line.substr(0, eq), line.substr(eq + 1));
    }
}

int cmd_run(irl::ExperimentConfig config) {
    config.validate();
    std::signal(SIGINT, handle_sigint);
    const irl::BatchResult result = irl::run_batch(config, &g_interrupted);
    std::size_t errors = 0;
    for (const irl::RunRecord& r : result.records)
        if (r.is_error()) ++errors;
    std::cerr << "wrote " << result.records.size() << " records to " << config.out_path;
    if (errors) std::cerr << " (" << errors << " error records)";
    if (result.interrupted) std::cerr << " (interrupted, partial results)";
    std::cerr << '\n';
    return (errors > 0 || result.interrupted) ? 2 : 0;
}

int cmd_aggregate(const std::string& in_path, const std::string& out_path) {
    std::ifstream in(in_path, std::ios::binary);
    if (!in) throw irl::ConfigError("cannot open results file: " + in_path);
    const irl::ResultsFile file = irl::read_results_csv(in);
    const auto rows = irl::aggregate_records(file.records);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw irl::ConfigError("cannot open output file: " + out_path);
    irl::write_aggregate_csv(out, rows);
    std::cerr << "wrote " << rows.size() << " aggregate rows to " << out_path << '\n';
    return 0;
}

int cmd_replay(const std::string& in_path, std::size_t run_id, const std::string& dump_dir) {
    std::ifstream in(in_path, std::ios::binary);
    if (!in) throw irl::ConfigError("cannot open results file: " + in_path);
    const irl::ResultsFile file = irl::read_results_csv(in);
    const irl::ExperimentConfig config = file.config.normalized();
    config.validate();
    const std::size_t sweep_index = run_id / config.n_runs;
    const std::size_t run_index = run_id % config.n_runs;
    if (sweep_index >= config.sweep_size())
        throw irl::ConfigError("run id " + std::to_string(run_id) + " outside the batch");

    irl::RunArtifacts artifacts;
    const auto records = irl::run_single(config, sweep_index, run_index, &artifacts);

    bool all_match = true;
    for (const irl::RunRecord& rec : records) {
        const auto original =
            std::find_if(file.records.begin(), file.records.end(), [&](const irl::RunRecord& r) {
                return r.run_id == rec.run_id && r.method == rec.method;
            });
        std::string status;
        if (original == file.records.end()) {
            status = "missing from file";
            all_match = false;
        } else {
            const bool same = (original->loss == rec.loss) ||
                              (std::isnan(original->loss) && std::isnan(rec.loss));
            status = same ? "match" : "MISMATCH";
            all_match = all_match && same;
        }
        std::cout << "run " << rec.run_id << " " << irl::to_string(rec.method) << " loss "
                  << rec.loss << " seed " << rec.seed << " [" << status << "]\n";
    }
    if (!dump_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(dump_dir);
        const std::string stem = dump_dir + "/run" + std::to_string(run_id);
        {
            std::ofstream out(stem + ".cmp.txt", std::ios::binary);
            irl::write_cmp(out, artifacts.cmp);
        }
        {
            std::ofstream out(stem + ".reward.txt", std::ios::binary);
            irl::write_reward(out, artifacts.true_reward);
        }
        {
            std::ofstream out(stem + ".demonstrator.txt", std::ios::binary);
            irl::write_policy(out, artifacts.demonstrator);
        }
        {
            std::ofstream out(stem + ".trajectory.txt", std::ios::binary);
            irl::write_trajectory(out, artifacts.trajectory);
        }
        for (const auto& [method, chain] : artifacts.chains) {
            std::ofstream out(stem + "." + irl::to_string(method) + ".chain.txt",
                              std::ios::binary);
            irl::write_chain(out, chain);
        }
        std::cerr << "dumped run artifacts under " << dump_dir << '\n';
    }
    return all_match ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"reward and policy estimation from demonstrated trajectories"};
    app.require_subcommand(1);

    irl::ExperimentConfig config;
    if (const char* env_workers = std::getenv("IRL_ELICIT_WORKERS")) {
        try {
            config.workers = std::max<std::size_t>(1, std::stoull(env_workers));
        } catch (...) {
            std::cerr << "ignoring malformed IRL_ELICIT_WORKERS\n";
        }
    }

    try {
        const std::string config_path = find_config_arg(argc, argv);
        if (!config_path.empty()) load_config_file(config, config_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }

    std::string config_file_unused;  // consumed by the pre-parse above
    std::string domain_str = irl::to_string(config.domain);
    std::string states_str, maze_str, eta_str, horizon_str, methods_str, alpha_beta_str,
        gamma_prior_str, point_estimate_str, gibbs_acceptance_str;

    auto* run = app.add_subcommand("run", "run an experiment batch");
    run->add_option("--config", config_file_unused, "flat key=value config file");
    run->add_option("--domain", domain_str, "random-mdp or maze");
    run->add_option("--states", states_str, "state count, or comma list to sweep |S|");
    run->add_option("--actions", config.n_actions, "actions per state");
    run->add_option("--maze", maze_str, "maze size WxH");
    run->add_option("--gamma", config.discount, "discount factor");
    run->add_option("--eta", eta_str, "demonstrator inverse temperature(s), comma list sweeps");
    run->add_option("--horizon", horizon_str, "demonstration length(s), comma list sweeps");
    run->add_option("--runs", config.n_runs, "runs per sweep value");
    run->add_option("--methods", methods_str, "subset of soft,mh,gibbs,lp,policywalk,mwal");
    run->add_option("--samples", config.sampler.n_samples, "MCMC chain length");
    run->add_option("--burn-in", config.sampler.burn_in, "MCMC burn-in steps");
    run->add_option("--thin", config.sampler.thin, "MCMC thinning stride");
    run->add_option("--q-tol", config.sampler.q_tol, "Q-solver tolerance");
    run->add_option("--alpha-beta", alpha_beta_str, "Beta prior hyperparameters A,B");
    run->add_option("--gamma-prior", gamma_prior_str, "temperature prior SHAPE,RATE");
    run->add_option("--pw-confidence", config.pw_confidence, "policy-walk confidence");
    run->add_option("--lp-penalty", config.lp_penalty, "LP reward l1 penalty");
    run->add_option("--lp-rmax", config.lp_r_max, "LP reward upper bound");
    run->add_option("--mwal-accuracy", config.mwal_accuracy, "MWAL accuracy parameter");
    run->add_option("--mwal-round-cap", config.mwal_round_cap,
                    "cap on MWAL rounds (0 = full schedule)");
    run->add_option("--tie-tol", config.tie_tol, "greedy tie tolerance");
    run->add_option("--point-estimate", point_estimate_str, "mean or map");
    run->add_option("--gibbs-acceptance", gibbs_acceptance_str, "corrected or literal");
    run->add_flag("--occupancy-empirical-start", config.occupancy_empirical_start,
                  "seed feature expectations at the demonstration's first state");
    run->add_option("--seed", config.master_seed, "master seed");
    run->add_option("--workers", config.workers, "worker threads (env IRL_ELICIT_WORKERS)");
    run->add_flag("--timing", config.record_timing,
                  "record wall times (makes re-runs non-byte-identical)");
    run->add_option("--out", config.out_path, "results CSV path");

    std::string agg_in, agg_out = "aggregate.csv";
    auto* aggregate = app.add_subcommand("aggregate", "aggregate a results file");
    aggregate->add_option("--in", agg_in, "results CSV")->required();
    aggregate->add_option("--out", agg_out, "aggregate CSV path");

    std::string replay_in, replay_dump;
    std::size_t replay_run_id = 0;
    auto* replay = app.add_subcommand("replay", "re-derive one run from its recorded seed");
    replay->add_option("--in", replay_in, "results CSV")->required();
    replay->add_option("--run-id", replay_run_id, "run to replay");
    replay->add_option("--dump", replay_dump, "directory for environment/trajectory/chain dumps");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            const auto set = [&](const std::string& key, const std::string& value) {
                if (!value.empty()) irl::apply_config_kv(config, key, value);
            };
            set("domain", domain_str);
            set("states", states_str);
            set("maze", maze_str);
            set("eta", eta_str);
            set("horizon", horizon_str);
            set("methods", methods_str);
            set("alpha-beta", alpha_beta_str);
            set("gamma-prior", gamma_prior_str);
            set("point-estimate", point_estimate_str);
            set("gibbs-acceptance", gibbs_acceptance_str);
            return cmd_run(config);
        }
        if (aggregate->parsed()) return cmd_aggregate(agg_in, agg_out);
        if (replay->parsed()) return cmd_replay(replay_in, replay_run_id, replay_dump);
    } catch (const irl::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
