#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <vector>

#include "irl/mdp.hpp"
#include "irl/random.hpp"
#include "irl/types.hpp"

namespace irl {

/// Independent Beta(alpha, beta) prior per (state, action) entry of the
/// reward model.
struct BetaProductPrior {
    Table alpha;
    Table beta;

    static BetaProductPrior constant(std::size_t n_states, std::size_t n_actions, double a,
                                     double b) {
        return {Table(n_states, n_actions, a), Table(n_states, n_actions, b)};
    }

    void validate() const {
        if (alpha.rows() != beta.rows() || alpha.cols() != beta.cols())
            throw std::invalid_argument("BetaProductPrior: shape mismatch");
        for (double v : alpha.data())
            if (!(v > 0.0)) throw std::invalid_argument("BetaProductPrior: alpha must be > 0");
        for (double v : beta.data())
            if (!(v > 0.0)) throw std::invalid_argument("BetaProductPrior: beta must be > 0");
    }
};

/// Layout of a sampled grid maze. States of the companion kernel are the free
/// cells in row-major scan order.
struct MazeSpec {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> walls;  // row-major, 1 = wall
    double success_prob = 0.7;
    double wall_density = 0.25;

    bool wall(std::size_t x, std::size_t y) const { return walls[y * width + x] != 0; }
};

struct MazeSample {
    ControlledMarkovProcess cmp;
    MazeSpec spec;
};

namespace detail {

/// Strong connectivity of the union-over-actions transition graph, by forward
/// and backward breadth-first search from state 0.
inline bool is_communicating(const ControlledMarkovProcess& cmp) {
    const std::size_t n = cmp.n_states;
    std::vector<std::vector<std::size_t>> fwd(n), bwd(n);
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t a = 0; a < cmp.n_actions; ++a) {
            auto row = cmp.next_state_dist(s, a);
            for (std::size_t t = 0; t < n; ++t)
                if (row[t] > 0.0) {
                    fwd[s].push_back(t);
                    bwd[t].push_back(s);
                }
        }
    auto reaches_all = [n](const std::vector<std::vector<std::size_t>>& adj) {
        std::vector<char> seen(n, 0);
        std::queue<std::size_t> q;
        q.push(0);
        seen[0] = 1;
        std::size_t count = 1;
        while (!q.empty()) {
            std::size_t u = q.front();
            q.pop();
            for (std::size_t v : adj[u])
                if (!seen[v]) {
                    seen[v] = 1;
                    ++count;
                    q.push(v);
                }
        }
        return count == n;
    };
    return reaches_all(fwd) && reaches_all(bwd);
}

}  // namespace detail

/// Random discrete MDP kernel: every (state, action) pair leads to a
/// destination set of ceil(n_states/4) states chosen uniformly without
/// replacement, with arrival probabilities drawn uniformly and normalized on
/// that set. Kernels are resampled until the union-over-actions graph is
/// strongly connected, so the result is always communicating. The initial
/// distribution is uniform.
inline ControlledMarkovProcess sample_random_mdp(std::size_t n_states, std::size_t n_actions,
                                                 RandomStream& rng,
                                                 std::size_t max_retries = 1000) {
    if (n_states < 4) throw std::invalid_argument("sample_random_mdp: need at least 4 states");
    if (n_actions < 1) throw std::invalid_argument("sample_random_mdp: need at least 1 action");
    const std::size_t dest_count = (n_states + 3) / 4;
    std::vector<std::size_t> pool(n_states);
    for (std::size_t attempt = 0; attempt < max_retries; ++attempt) {
        ControlledMarkovProcess cmp(n_states, n_actions);
        for (std::size_t s = 0; s < n_states; ++s) {
            for (std::size_t a = 0; a < n_actions; ++a) {
                std::iota(pool.begin(), pool.end(), std::size_t{0});
                auto row = cmp.next_state_dist(s, a);
                double total = 0.0;
                for (std::size_t k = 0; k < dest_count; ++k) {
                    std::uniform_int_distribution<std::size_t> pick(k, n_states - 1);
                    std::swap(pool[k], pool[pick(rng)]);
                    const double w = sample_uniform(rng);
                    row[pool[k]] = w;
                    total += w;
                }
                if (total == 0.0) {
                    // all weights underflowed to zero; spread evenly
                    for (std::size_t k = 0; k < dest_count; ++k)
                        row[pool[k]] = 1.0 / static_cast<double>(dest_count);
                } else {
                    for (std::size_t k = 0; k < dest_count; ++k) row[pool[k]] /= total;
                }
            }
        }
        std::fill(cmp.initial_dist.begin(), cmp.initial_dist.end(),
                  1.0 / static_cast<double>(n_states));
        if (detail::is_communicating(cmp)) return cmp;
    }
    throw std::runtime_error("sample_random_mdp: retry cap hit without a communicating kernel");
}

namespace detail {

// dx/dy per maze action: north, east, south, west
inline constexpr int kMazeDx[4] = {0, 1, 0, -1};
inline constexpr int kMazeDy[4] = {-1, 0, 1, 0};

}  // namespace detail

/// Free cells of a maze (states of its kernel), in row-major scan order.
inline std::vector<std::size_t> maze_free_cells(const MazeSpec& spec) {
    std::vector<std::size_t> cells;
    for (std::size_t i = 0; i < spec.walls.size(); ++i)
        if (!spec.walls[i]) cells.push_back(i);
    return cells;
}

/// Transition kernel of a maze layout. States are the free cells with four
/// compass actions; the intended move succeeds with the spec's success
/// probability, otherwise the agent slips to a uniformly random adjacent free
/// cell. Moves into walls or the border leave the agent in place, as does the
/// slip when no adjacent cell is free. The initial distribution is uniform
/// over free cells.
inline ControlledMarkovProcess maze_kernel(const MazeSpec& spec) {
    const std::size_t width = spec.width, height = spec.height;
    if (spec.walls.size() != width * height)
        throw std::invalid_argument("maze_kernel: wall grid size mismatch");
    const std::vector<std::size_t> cell_of_state = maze_free_cells(spec);
    const std::size_t n_free = cell_of_state.size();
    if (n_free == 0) throw std::invalid_argument("maze_kernel: no free cells");
    std::vector<std::ptrdiff_t> state_of_cell(width * height, -1);
    for (std::size_t s = 0; s < n_free; ++s)
        state_of_cell[cell_of_state[s]] = static_cast<std::ptrdiff_t>(s);

    ControlledMarkovProcess cmp(n_free, 4);
    for (std::size_t s = 0; s < n_free; ++s) {
        const std::size_t c = cell_of_state[s];
        const std::size_t x = c % width, y = c / width;
        std::vector<std::size_t> adj_free;
        for (int d = 0; d < 4; ++d) {
            const int nx = static_cast<int>(x) + detail::kMazeDx[d];
            const int ny = static_cast<int>(y) + detail::kMazeDy[d];
            if (nx < 0 || ny < 0 || nx >= static_cast<int>(width) ||
                ny >= static_cast<int>(height))
                continue;
            const std::size_t nc =
                static_cast<std::size_t>(ny) * width + static_cast<std::size_t>(nx);
            if (!spec.walls[nc]) adj_free.push_back(static_cast<std::size_t>(state_of_cell[nc]));
        }
        for (int a = 0; a < 4; ++a) {
            auto row = cmp.next_state_dist(s, static_cast<std::size_t>(a));
            std::size_t intended = s;
            const int nx = static_cast<int>(x) + detail::kMazeDx[a];
            const int ny = static_cast<int>(y) + detail::kMazeDy[a];
            if (nx >= 0 && ny >= 0 && nx < static_cast<int>(width) &&
                ny < static_cast<int>(height)) {
                const std::size_t nc =
                    static_cast<std::size_t>(ny) * width + static_cast<std::size_t>(nx);
                if (!spec.walls[nc]) intended = static_cast<std::size_t>(state_of_cell[nc]);
            }
            row[intended] += spec.success_prob;
            const double slip = 1.0 - spec.success_prob;
            if (adj_free.empty()) {
                row[s] += slip;
            } else {
                for (std::size_t f : adj_free) row[f] += slip / static_cast<double>(adj_free.size());
            }
        }
    }
    std::fill(cmp.initial_dist.begin(), cmp.initial_dist.end(), 1.0 / static_cast<double>(n_free));
    return cmp;
}

/// Random planar grid maze. Walls are dropped i.i.d. Bernoulli(1/4) per cell;
/// grids with more than width*height/4 walls, or whose free cells do not form
/// a single 4-connected region, are rejected and resampled. The kernel is
/// built by maze_kernel.
inline MazeSample sample_maze(std::size_t width, std::size_t height, RandomStream& rng,
                              std::size_t max_retries = 1000) {
    if (width * height < 4) throw std::invalid_argument("sample_maze: grid too small");
    const std::size_t cells = width * height;
    for (std::size_t attempt = 0; attempt < max_retries; ++attempt) {
        MazeSpec spec;
        spec.width = width;
        spec.height = height;
        spec.walls.assign(cells, 0);
        std::size_t wall_count = 0;
        for (std::size_t i = 0; i < cells; ++i)
            if (sample_bernoulli(spec.wall_density, rng)) {
                spec.walls[i] = 1;
                ++wall_count;
            }
        if (wall_count * 4 > cells) continue;

        const std::vector<std::size_t> free_cells = maze_free_cells(spec);
        if (free_cells.empty()) continue;

        // free cells must form one 4-connected region
        std::vector<char> seen(cells, 0);
        std::queue<std::size_t> bfs;
        bfs.push(free_cells[0]);
        seen[free_cells[0]] = 1;
        std::size_t reached = 1;
        while (!bfs.empty()) {
            const std::size_t c = bfs.front();
            bfs.pop();
            const std::size_t x = c % width, y = c / width;
            for (int d = 0; d < 4; ++d) {
                const int nx = static_cast<int>(x) + detail::kMazeDx[d];
                const int ny = static_cast<int>(y) + detail::kMazeDy[d];
                if (nx < 0 || ny < 0 || nx >= static_cast<int>(width) ||
                    ny >= static_cast<int>(height))
                    continue;
                const std::size_t nc =
                    static_cast<std::size_t>(ny) * width + static_cast<std::size_t>(nx);
                if (spec.walls[nc] || seen[nc]) continue;
                seen[nc] = 1;
                ++reached;
                bfs.push(nc);
            }
        }
        if (reached != free_cells.size()) continue;

        return {maze_kernel(spec), std::move(spec)};
    }
    throw std::runtime_error("sample_maze: retry cap hit without an acceptable maze");
}

/// Draws a reward model from the Beta-product prior, entrywise.
inline RewardModel sample_reward(const BetaProductPrior& prior, RandomStream& rng) {
    RewardModel reward{Table(prior.alpha.rows(), prior.alpha.cols())};
    for (std::size_t i = 0; i < prior.alpha.size(); ++i)
        reward.success_prob.data()[i] =
            sample_beta(prior.alpha.data()[i], prior.beta.data()[i], rng);
    return reward;
}

/// Demonstrator policy: softmax at inverse temperature eta over the optimal
/// Q-values of the given MDP.
inline Policy make_demonstrator(const Mdp& mdp, double eta, double tol = 1e-6) {
    return softmax_policy(solve_optimal_q(mdp, tol), eta);
}

/// Rolls out one trajectory of the given horizon: the initial state comes
/// from the kernel's initial distribution, actions from the policy, rewards
/// from the per-pair Bernoulli model.
inline Trajectory simulate(const ControlledMarkovProcess& cmp, const RewardModel& reward,
                           const Policy& policy, std::size_t horizon, RandomStream& rng) {
    Trajectory traj;
    traj.states.reserve(horizon);
    traj.actions.reserve(horizon);
    traj.rewards.emplace();
    traj.rewards->reserve(horizon);
    if (horizon == 0) return traj;
    std::size_t s = sample_index(cmp.initial_dist, rng);
    for (std::size_t t = 0; t < horizon; ++t) {
        const std::size_t a = sample_index(policy.action_prob.row(s), rng);
        const bool r = sample_bernoulli(reward.success_prob(s, a), rng);
        traj.states.push_back(s);
        traj.actions.push_back(a);
        traj.rewards->push_back(r ? 1 : 0);
        s = sample_index(cmp.next_state_dist(s, a), rng);
    }
    return traj;
}

}  // namespace irl
