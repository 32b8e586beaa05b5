#include "cbpl/policy.hpp"

#include <cmath>
#include <stdexcept>

namespace cbpl {

StochasticPolicy::StochasticPolicy(int num_states, int num_actions, std::vector<double> probs)
    : num_states_(num_states), num_actions_(num_actions), probs_(std::move(probs)) {
    if (num_states_ < 1 || num_actions_ < 1)
        throw std::invalid_argument("StochasticPolicy: empty shape");
    if (probs_.size() != static_cast<std::size_t>(num_states_) * num_actions_)
        throw std::invalid_argument("StochasticPolicy: table has wrong size");
    for (StateId x = 0; x < num_states_; ++x) {
        double sum = 0.0;
        for (double p : row(x)) {
            if (!(p >= 0.0)) throw std::invalid_argument("StochasticPolicy: negative probability");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw std::invalid_argument("StochasticPolicy: row " + std::to_string(x) +
                                        " does not sum to 1");
    }
}

StochasticPolicy StochasticPolicy::from_deterministic(const DeterministicPolicy& policy,
                                                      int num_actions) {
    std::vector<double> probs(policy.action_of.size() * static_cast<std::size_t>(num_actions), 0.0);
    for (std::size_t x = 0; x < policy.action_of.size(); ++x) {
        const ActionId a = policy.action_of[x];
        if (a < 0 || a >= num_actions)
            throw std::invalid_argument("StochasticPolicy: action out of range");
        probs[x * num_actions + a] = 1.0;
    }
    return StochasticPolicy(policy.num_states(), num_actions, std::move(probs));
}

StochasticPolicy StochasticPolicy::uniform(int num_states, int num_actions) {
    return StochasticPolicy(
        num_states, num_actions,
        std::vector<double>(static_cast<std::size_t>(num_states) * num_actions, 1.0 / num_actions));
}

bool StochasticPolicy::has_full_support() const {
    for (double p : probs_)
        if (p <= 0.0) return false;
    return true;
}

void check_policy(const TabularMdp& mdp, const DeterministicPolicy& policy) {
    if (policy.num_states() != mdp.num_states())
        throw std::invalid_argument("policy covers " + std::to_string(policy.num_states()) +
                                    " states, MDP has " + std::to_string(mdp.num_states()));
    for (StateId x = 0; x < mdp.num_states(); ++x)
        if (!mdp.is_terminal(x) && !mdp.valid_action(policy(x)))
            throw std::invalid_argument("policy action out of range at state " + std::to_string(x));
}

void check_policy(const TabularMdp& mdp, const StochasticPolicy& policy) {
    if (policy.num_states() != mdp.num_states() || policy.num_actions() != mdp.num_actions())
        throw std::invalid_argument("stochastic policy shape does not match the MDP");
}

void check_policy(const TabularMdp& mdp, const MixturePolicy& policy) {
    if (policy.members.empty()) throw std::invalid_argument("mixture has no members");
    if (policy.weights.size() != policy.members.size())
        throw std::invalid_argument("mixture weights not aligned with members");
    double total = 0.0;
    for (double w : policy.weights) {
        if (!(w >= 0.0)) throw std::invalid_argument("mixture weight must be >= 0");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("mixture weights must sum to 1");
    for (const auto& m : policy.members) check_policy(mdp, m);
}

}  // namespace cbpl
