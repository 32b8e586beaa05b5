#pragma once

#include "cbpl/random.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cbpl {

using StateId = int;
using ActionId = int;

struct Successor {
    StateId state;
    double prob;
};

/**
 * Finite discounted MDP with a primary cost c and m constraint costs g_1..g_m.
 *
 * Tables are dense and row-major: transition is indexed (state, action, next_state),
 * costs are indexed (state, action). Terminal states are stored as absorbing
 * self-loops with zero cost in every channel, so infinite-horizon discounted
 * values coincide with episodic returns. The object is immutable after
 * construction.
 */
class TabularMdp {
public:
    TabularMdp(int num_states, int num_actions, std::vector<double> transition,
               std::vector<double> cost_c, std::vector<std::vector<double>> cost_g, double gamma,
               std::vector<double> initial_dist, std::vector<StateId> terminal_states = {});

    int num_states() const { return num_states_; }
    int num_actions() const { return num_actions_; }
    int num_constraints() const { return static_cast<int>(cost_g_.size()); }
    int num_pairs() const { return num_states_ * num_actions_; }
    double gamma() const { return gamma_; }

    int pair_index(StateId x, ActionId a) const { return x * num_actions_ + a; }

    double transition(StateId x, ActionId a, StateId next) const {
        return transition_[static_cast<std::size_t>(pair_index(x, a)) * num_states_ + next];
    }
    std::span<const double> transition_row(StateId x, ActionId a) const {
        return {transition_.data() + static_cast<std::size_t>(pair_index(x, a)) * num_states_,
                static_cast<std::size_t>(num_states_)};
    }
    /// Nonzero entries of the transition row, in increasing state order.
    std::span<const Successor> successors(StateId x, ActionId a) const {
        const auto p = static_cast<std::size_t>(pair_index(x, a));
        return {successors_.data() + successor_offsets_[p],
                successor_offsets_[p + 1] - successor_offsets_[p]};
    }

    double cost(StateId x, ActionId a) const { return cost_c_[pair_index(x, a)]; }
    double constraint_cost(int i, StateId x, ActionId a) const {
        return cost_g_[i][pair_index(x, a)];
    }
    std::span<const double> cost_table() const { return cost_c_; }
    std::span<const double> constraint_table(int i) const { return cost_g_[i]; }

    std::span<const double> initial_dist() const { return initial_dist_; }
    bool is_terminal(StateId x) const { return terminal_flags_[x]; }
    const std::vector<StateId>& terminal_states() const { return terminal_states_; }

    /// Same MDP with a different discount factor.
    TabularMdp with_gamma(double gamma) const;

    bool valid_state(StateId x) const { return x >= 0 && x < num_states_; }
    bool valid_action(ActionId a) const { return a >= 0 && a < num_actions_; }

    /// Largest |c(x, a)|.
    double max_abs_cost() const;
    /// Largest g_i(x, a) over all constraints.
    double max_constraint_cost() const;

private:
    int num_states_;
    int num_actions_;
    std::vector<double> transition_;
    std::vector<double> cost_c_;
    std::vector<std::vector<double>> cost_g_;
    double gamma_;
    std::vector<double> initial_dist_;
    std::vector<StateId> terminal_states_;
    std::vector<bool> terminal_flags_;
    std::vector<Successor> successors_;
    std::vector<std::size_t> successor_offsets_;
};

/// Per-pair scalarized cost c + sum_i lambda_i g_i, indexed like TabularMdp::pair_index.
std::vector<double> scalarized_cost(const TabularMdp& mdp, std::span<const double> lambda);

struct StepResult {
    StateId next;
    double cost;
    std::vector<double> constraint_costs;
    bool terminal;
};

/// Samples one transition. Throws std::invalid_argument for out-of-range indices.
StepResult step(const TabularMdp& mdp, StateId x, ActionId a, Rng& rng);

// ---------------------------------------------------------------------------
// Reference environments
// ---------------------------------------------------------------------------

enum class Cell : char { Start = 'S', Free = 'F', Hole = 'H', Goal = 'G' };

/// Gridworld actions in the order used for action indices.
enum GridAction : ActionId { North = 0, South = 1, East = 2, West = 3 };

struct GridLayout {
    int rows = 0;
    int cols = 0;
    std::vector<Cell> cells;  // row-major

    Cell at(int r, int c) const { return cells[static_cast<std::size_t>(r) * cols + c]; }
    StateId state_of(int r, int c) const { return r * cols + c; }
};

/// Parses one row per line of S/F/H/G characters. Blank lines are ignored.
/// Throws ConfigError on ragged rows, unknown characters, or a wrong Start/Goal count.
GridLayout parse_layout(std::string_view text);
GridLayout load_layout(const std::string& path);

/// The 8x8 and 4x4 FrozenLake maps.
GridLayout standard_layout_8x8();
GridLayout standard_layout_4x4();

/**
 * Deterministic FrozenLake: one state per cell, actions N,S,E,W, moves off the grid
 * leave the agent in place, goal and hole cells are terminal. c = -1 on the
 * transition entering a goal, g_1 = 1 on the transition entering a hole.
 */
TabularMdp build_frozenlake(const GridLayout& layout, double gamma = 0.95);

/// Combination lock chain of n states: action 0 (L) resets to the first state,
/// action 1 (R) advances; entering the last (terminal) state costs -1. No constraints.
TabularMdp build_combination_lock(int n, double gamma = 0.9);

/// Random MDP with Dirichlet(1) transition rows and initial distribution, c and g
/// uniform on [0, 1]. Reproducible from seed.
TabularMdp build_random_mdp(int num_states, int num_actions, int num_constraints,
                            std::uint64_t seed, double gamma = 0.9);

}  // namespace cbpl
