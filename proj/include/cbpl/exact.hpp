#pragma once

#include "cbpl/func_approx.hpp"
#include "cbpl/mdp.hpp"
#include "cbpl/online.hpp"
#include "cbpl/policy.hpp"

#include <Eigen/Dense>

#include <map>
#include <span>
#include <vector>

namespace cbpl {

/// Discounted values from the initial distribution: C(pi) and G_1(pi)..G_m(pi).
struct PolicyValues {
    double cost = 0.0;
    std::vector<double> constraints;
};

PolicyValues exact_policy_values(const TabularMdp& mdp, const DeterministicPolicy& policy);
PolicyValues exact_policy_values(const TabularMdp& mdp, const StochasticPolicy& policy);
/// Weight-averaged member values.
PolicyValues exact_policy_values(const TabularMdp& mdp, const MixturePolicy& policy);

/// v solving (I - gamma P^pi) v = c^pi for a per-pair cost table.
Eigen::VectorXd exact_state_values(const TabularMdp& mdp, const StochasticPolicy& policy,
                                   std::span<const double> cost);
/// Q^pi(x, a) = c(x, a) + gamma sum_x' P(x'|x, a) v(x').
QFunction exact_q_values(const TabularMdp& mdp, const StochasticPolicy& policy,
                         std::span<const double> cost);

/// Normalized discounted occupancy d with d^T (I - gamma P^pi) = (1 - gamma) chi^T.
Eigen::VectorXd discounted_occupancy(const TabularMdp& mdp, const StochasticPolicy& policy);

/// Iterates the Bellman optimality operator on a per-pair cost table until the sup-norm
/// change drops below tol.
QFunction value_iteration(const TabularMdp& mdp, std::span<const double> cost, double tol = 1e-10);

/// Q* to linear-solve precision: value iteration followed by policy iteration.
QFunction exact_optimal_q(const TabularMdp& mdp, std::span<const double> cost);

/// Greedy policy of value iteration on c + lambda_{1..m}^T g. The EG slack coordinate
/// multiplies the constant-zero channel and does not enter.
DeterministicPolicy exact_best_response(const TabularMdp& mdp, const DualVector& lambda);
DeterministicPolicy exact_best_response(const TabularMdp& mdp, std::span<const double> multipliers);

/// |(C^pi - C*) - E_{x ~ d_pi}[Q*(x, pi(x)) - V*(x)] / (1 - gamma)| for the primary cost.
double performance_difference_check(const TabularMdp& mdp, const DeterministicPolicy& policy);
/// Same with the advantage averaged over pi(a|x).
double performance_difference_check(const TabularMdp& mdp, const StochasticPolicy& policy);

/// sup over policies of G_i(pi) from the initial distribution.
double max_constraint_value(const TabularMdp& mdp, int constraint);

/**
 * Exact best responses by warm-started policy iteration, with every evaluated policy's
 * per-channel state values cached. Since L(pi, lambda) is linear in lambda, checking
 * whether the previous best response is still optimal for a new lambda costs one
 * Bellman sweep. Holds a reference to the MDP, which must outlive the solver.
 */
class PolicyIterationSolver {
public:
    struct Evaluation {
        /// Channel 0 is c, channel i is g_i.
        std::vector<Eigen::VectorXd> state_values;
        PolicyValues values;
    };

    explicit PolicyIterationSolver(const TabularMdp& mdp);

    const Evaluation& evaluate(const DeterministicPolicy& policy);
    /// Optimal deterministic policy for c + multipliers^T g.
    DeterministicPolicy best_response(std::span<const double> multipliers);

    std::size_t cache_size() const { return cache_.size(); }

private:
    const TabularMdp& mdp_;
    std::map<std::vector<ActionId>, Evaluation> cache_;
    DeterministicPolicy warm_start_;
    std::vector<double> scalarized_values_;
};

}  // namespace cbpl
