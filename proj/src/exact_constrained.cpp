#include "cbpl/exact_constrained.hpp"

namespace cbpl {

ConstrainedOptimum exact_constrained_optimum(const TabularMdp& mdp, std::span<const double> tau,
                                             double budget, std::optional<double> eta,
                                             double omega, long max_rounds) {
    LearnerConfig config;
    config.budget = budget;
    config.omega = omega;
    config.tau.assign(tau.begin(), tau.end());
    config.flavor = SubroutineFlavor::Exact;
    config.max_rounds = max_rounds;
    config.keep_records = false;
    config.gamma = mdp.gamma();
    config.validate(mdp.num_constraints());

    const double g_bar = g_bar_exact(mdp, tau);
    config.g_bar = g_bar > 0.0 ? g_bar : 1.0;
    config.eta = eta ? *eta : theory_learning_rate(omega, *config.g_bar, budget);

    ExactSubroutines subroutines(mdp);
    auto result = run_game(subroutines, config, mdp.num_constraints(), *config.g_bar);
    const auto values = exact_policy_values(mdp, result.mixture);
    return {values.cost, values.constraints, std::move(result.mixture), std::move(result.trace)};
}

}  // namespace cbpl
