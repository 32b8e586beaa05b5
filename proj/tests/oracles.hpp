#pragma once

// Independent reference computations used by the tests: Monte Carlo rollouts,
// empirical-model evaluation, brute-force constrained optima and small fixtures.

#include "cbpl/batch_rl.hpp"
#include "cbpl/dataset.hpp"
#include "cbpl/exact.hpp"
#include "cbpl/mdp.hpp"
#include "cbpl/policy.hpp"
#include "cbpl/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace cbpl::testing {

// State 0 moves to terminal state 1 under action 0 with cost 1. Further actions
// stay in state 0 with cost 0.
inline TabularMdp chain_mdp(double gamma, int num_actions = 1) {
    const int S = 2, A = num_actions;
    std::vector<double> P(static_cast<std::size_t>(S * A * S), 0.0), c(static_cast<std::size_t>(S * A), 0.0);
    for (int a = 0; a < A; ++a) {
        P[(0 * A + a) * S + (a == 0 ? 1 : 0)] = 1.0;
        P[(1 * A + a) * S + 1] = 1.0;
    }
    c[0] = 1.0;
    return TabularMdp(S, A, P, c, {}, gamma, {1.0, 0.0}, {1});
}

// One state, one action, self-loop with the given cost.
inline TabularMdp self_loop_mdp(double cost, double gamma) {
    return TabularMdp(1, 1, {1.0}, {cost}, {}, gamma, {1.0});
}

// Random MDP whose transitions are deterministic (one successor per pair).
inline TabularMdp random_deterministic_mdp(int S, int A, int m, std::uint64_t seed, double gamma) {
    Rng rng(seed);
    std::vector<double> P(static_cast<std::size_t>(S) * A * S, 0.0), c(static_cast<std::size_t>(S) * A);
    std::vector<std::vector<double>> g(static_cast<std::size_t>(m), std::vector<double>(c.size()));
    for (int p = 0; p < S * A; ++p) {
        P[static_cast<std::size_t>(p) * S + rng.index(static_cast<std::size_t>(S))] = 1.0;
        c[p] = rng.uniform();
        for (auto& gi : g) gi[p] = rng.uniform();
    }
    std::vector<double> chi(static_cast<std::size_t>(S), 1.0 / S);
    return TabularMdp(S, A, P, c, g, gamma, chi);
}

struct MonteCarloEstimate {
    double mean;
    double std_error;
};

// Discounted return of one channel (-1 = primary cost) over n rollouts of the policy.
inline MonteCarloEstimate monte_carlo(const TabularMdp& mdp, const StochasticPolicy& policy, int channel,
                                      int n, int horizon, Rng& rng) {
    double sum = 0.0, sq = 0.0;
    for (int k = 0; k < n; ++k) {
        StateId x = static_cast<StateId>(rng.categorical(mdp.initial_dist()));
        double ret = 0.0, discount = 1.0;
        for (int t = 0; t < horizon && !mdp.is_terminal(x); ++t) {
            const auto a = static_cast<ActionId>(rng.categorical(policy.row(x)));
            const auto r = step(mdp, x, a, rng);
            ret += discount * (channel < 0 ? r.cost : r.constraint_costs[channel]);
            discount *= mdp.gamma();
            x = r.next;
        }
        sum += ret;
        sq += ret * ret;
    }
    const double mean = sum / n;
    const double var = std::max(0.0, sq / n - mean * mean);
    return {mean, std::sqrt(var / n)};
}

// Q of a fixed policy under the empirical model of the data: mean cost and successor
// frequencies per pair, zero continuation after terminal transitions, zero on
// unvisited pairs. Solved by a dense linear system over pairs.
inline Eigen::VectorXd empirical_policy_q(const Dataset& data, int S, int A, const DeterministicPolicy& policy,
                                          const CostSelector& cost, double gamma) {
    const int n = S * A;
    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
    std::vector<double> count(static_cast<std::size_t>(n), 0.0);
    for (const auto& s : data.samples()) count[s.x * A + s.a] += 1.0;
    for (const auto& s : data.samples()) {
        const int p = s.x * A + s.a;
        r(p) += cost(s) / count[p];
        if (!s.done) M(p, s.x_next * A + policy(s.x_next)) -= gamma / count[p];
    }
    return M.partialPivLu().solve(r);
}

// Every deterministic policy of a small MDP.
inline std::vector<DeterministicPolicy> all_deterministic_policies(const TabularMdp& mdp) {
    std::vector<DeterministicPolicy> out;
    DeterministicPolicy pi{std::vector<ActionId>(static_cast<std::size_t>(mdp.num_states()), 0)};
    while (true) {
        out.push_back(pi);
        int x = 0;
        while (x < mdp.num_states() && ++pi.action_of[x] == mdp.num_actions()) pi.action_of[x++] = 0;
        if (x == mdp.num_states()) return out;
    }
}

// min C s.t. G_1 <= tau over mixtures of deterministic policies (one constraint).
// The set of achievable (C, G) is the convex hull of the deterministic values, so the
// optimum is attained by a single policy or by a pair mixed to hit G = tau exactly.
inline double brute_force_constrained_optimum(const TabularMdp& mdp, double tau) {
    std::vector<PolicyValues> values;
    for (const auto& pi : all_deterministic_policies(mdp)) values.push_back(exact_policy_values(mdp, pi));
    double best = std::numeric_limits<double>::infinity();
    for (const auto& v : values)
        if (v.constraints[0] <= tau) best = std::min(best, v.cost);
    for (const auto& u : values)
        for (const auto& v : values) {
            const double gu = u.constraints[0], gv = v.constraints[0];
            if (!(gu <= tau && gv > tau)) continue;
            const double alpha = (gv - tau) / (gv - gu);  // weight on u
            best = std::min(best, alpha * u.cost + (1.0 - alpha) * v.cost);
        }
    return best;
}

inline double sup_norm_diff(const QFunction& a, const QFunction& b) {
    double d = 0.0;
    for (StateId x = 0; x < a.num_states(); ++x)
        for (ActionId y = 0; y < a.num_actions(); ++y) d = std::max(d, std::abs(a(x, y) - b(x, y)));
    return d;
}

// Full coverage data for a deterministic MDP: one sample per non-terminal pair.
inline Dataset one_sample_per_pair(const TabularMdp& mdp) {
    Rng rng(1);
    return collect_full_coverage(mdp, 1, rng);
}

/// The same transitions with every cost set to zero.
inline Dataset zero_costs(const Dataset& data) {
    auto samples = data.samples();
    for (auto& s : samples) {
        s.c = 0.0;
        for (double& g : s.g) g = 0.0;
    }
    return Dataset(data.num_constraints(), std::move(samples));
}

}  // namespace cbpl::testing
