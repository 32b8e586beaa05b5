#pragma once

#include "cbpl/learner.hpp"
#include "cbpl/mdp.hpp"

#include <optional>
#include <span>

namespace cbpl {

struct ConstrainedOptimum {
    /// Exact primary value of the returned mixture.
    double cost;
    /// Exact constraint values of the mixture.
    std::vector<double> constraints;
    MixturePolicy mixture;
    RunTrace trace;
};

/**
 * Reference solution of min C(pi) s.t. G(pi) <= tau: the primal-dual game played with
 * exact best responses and exact evaluation. With eta unset, eta and the round cap
 * follow the Theorem 1 tuning for omega with G_bar = g_bar_exact(mdp, tau).
 * Non-convergence is reported through trace.termination.
 */
ConstrainedOptimum exact_constrained_optimum(const TabularMdp& mdp, std::span<const double> tau,
                                             double budget, std::optional<double> eta,
                                             double omega, long max_rounds = 0);

}  // namespace cbpl
