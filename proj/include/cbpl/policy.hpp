#pragma once

#include "cbpl/mdp.hpp"

#include <compare>
#include <span>
#include <vector>

namespace cbpl {

/// Maps every state to one action. Terminal states carry an arbitrary (ignored) action.
struct DeterministicPolicy {
    std::vector<ActionId> action_of;

    ActionId operator()(StateId x) const { return action_of[x]; }
    int num_states() const { return static_cast<int>(action_of.size()); }

    auto operator<=>(const DeterministicPolicy&) const = default;
};

/// Row-stochastic table pi(a | x).
class StochasticPolicy {
public:
    StochasticPolicy(int num_states, int num_actions, std::vector<double> probs);

    /// Point-mass distribution on the deterministic policy's action.
    static StochasticPolicy from_deterministic(const DeterministicPolicy& policy, int num_actions);
    static StochasticPolicy uniform(int num_states, int num_actions);

    int num_states() const { return num_states_; }
    int num_actions() const { return num_actions_; }
    double prob(StateId x, ActionId a) const {
        return probs_[static_cast<std::size_t>(x) * num_actions_ + a];
    }
    std::span<const double> row(StateId x) const {
        return {probs_.data() + static_cast<std::size_t>(x) * num_actions_,
                static_cast<std::size_t>(num_actions_)};
    }
    const std::vector<double>& table() const { return probs_; }

    /// True when every action has positive probability in every state.
    bool has_full_support() const;

private:
    int num_states_;
    int num_actions_;
    std::vector<double> probs_;
};

/**
 * Randomized policy over deterministic members: an episode samples one member by
 * weight and follows it throughout. Members are stored once; a member returned in
 * several rounds of the game carries the combined weight.
 */
struct MixturePolicy {
    std::vector<DeterministicPolicy> members;
    std::vector<double> weights;
    /// Estimated value of each member (primary cost and each constraint), aligned with members.
    std::vector<double> member_costs;
    std::vector<std::vector<double>> member_constraints;

    std::size_t size() const { return members.size(); }
};

/// Throws std::invalid_argument if the policy does not match the MDP's shape.
void check_policy(const TabularMdp& mdp, const DeterministicPolicy& policy);
void check_policy(const TabularMdp& mdp, const StochasticPolicy& policy);
void check_policy(const TabularMdp& mdp, const MixturePolicy& policy);

}  // namespace cbpl
