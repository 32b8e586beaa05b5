#pragma once

#include "cbpl/batch_rl.hpp"
#include "cbpl/dataset.hpp"
#include "cbpl/func_approx.hpp"
#include "cbpl/mdp.hpp"
#include "cbpl/policy.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cbpl {

/// Per-decision importance sampling: mean over trajectories of
/// sum_t gamma^t (prod_{s<=t} rho_s) cost_t with rho_s = pi_e(a_s|x_s) / pi_D(a_s|x_s).
double pdis(const Dataset& dataset, const StochasticPolicy& eval_policy, double gamma,
            const CostSelector& cost = CostSelector::primary());

/// Doubly robust estimate by the backward recursion
/// DR_t = V(x_t) + rho_t (cost_t + gamma DR_{t+1} - Q(x_t, a_t)), with V(x) = sum_a pi_e(a|x) Q(x, a).
/// DR is 0 past a terminal transition and V(x') past a trajectory cut off by the horizon.
double doubly_robust(const Dataset& dataset, const StochasticPolicy& eval_policy,
                     const QFunction& q_hat, double gamma,
                     const CostSelector& cost = CostSelector::primary());

/// Weighted doubly robust: the DR terms with cumulative importance weights normalized
/// across trajectories at each step. Finished trajectories keep their weight with zero
/// cost. A step where all weights vanish keeps only its control-variate term.
double weighted_doubly_robust(const Dataset& dataset, const StochasticPolicy& eval_policy,
                              const QFunction& q_hat, double gamma,
                              const CostSelector& cost = CostSelector::primary());

struct OpeConfig {
    int fqe_iters = 100;
    double ridge = 1e-8;
    std::uint64_t seed = 0;
    int jobs = 1;
    /// Fit the DR/WDR control variate on half of the sampled trajectories and apply
    /// the estimators to the other half.
    bool held_out = false;
};

struct OpeRow {
    std::string method;
    double fraction;
    int trial;
    double estimate;
    double abs_error;
};

/// For each fraction and trial: subsample trajectories, estimate the primary value of
/// eval_policy with FQE, PDIS, DR and WDR, and record the error against the exact value.
/// Rows are ordered by (fraction, trial, method).
std::vector<OpeRow> ope_comparison(const Dataset& dataset, const StochasticPolicy& eval_policy,
                                   const TabularMdp& mdp, const std::vector<double>& fractions,
                                   int trials, const OpeConfig& config = {});

/// Median absolute error of one method at one fraction; nullopt if there are no rows.
std::optional<double> median_abs_error(const std::vector<OpeRow>& rows, const std::string& method,
                                       double fraction);

}  // namespace cbpl
