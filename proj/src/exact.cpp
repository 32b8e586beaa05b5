#include "cbpl/exact.hpp"

#include "cbpl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cbpl {

namespace {

Eigen::MatrixXd policy_transition(const TabularMdp& mdp, const StochasticPolicy& policy) {
    const int S = mdp.num_states();
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(S, S);
    for (StateId x = 0; x < S; ++x)
        for (ActionId a = 0; a < mdp.num_actions(); ++a) {
            const double pa = policy.prob(x, a);
            if (pa == 0.0) continue;
            for (const auto& s : mdp.successors(x, a)) P(x, s.state) += pa * s.prob;
        }
    return P;
}

Eigen::VectorXd policy_cost(const TabularMdp& mdp, const StochasticPolicy& policy,
                            std::span<const double> cost) {
    const int S = mdp.num_states();
    Eigen::VectorXd c = Eigen::VectorXd::Zero(S);
    for (StateId x = 0; x < S; ++x)
        for (ActionId a = 0; a < mdp.num_actions(); ++a)
            c(x) += policy.prob(x, a) * cost[mdp.pair_index(x, a)];
    return c;
}

Eigen::Map<const Eigen::VectorXd> initial(const TabularMdp& mdp) {
    return {mdp.initial_dist().data(), mdp.num_states()};
}

void check_cost(const TabularMdp& mdp, std::span<const double> cost) {
    if (cost.size() != static_cast<std::size_t>(mdp.num_pairs()))
        throw std::invalid_argument("cost table must have one entry per state-action pair");
}

// Bellman backup c(x,a) + gamma sum P v for one pair.
double backup(const TabularMdp& mdp, std::span<const double> cost, const double* v, StateId x,
              ActionId a) {
    double next = 0.0;
    for (const auto& s : mdp.successors(x, a)) next += s.prob * v[s.state];
    return cost[mdp.pair_index(x, a)] + mdp.gamma() * next;
}

}  // namespace

Eigen::VectorXd exact_state_values(const TabularMdp& mdp, const StochasticPolicy& policy,
                                   std::span<const double> cost) {
    check_policy(mdp, policy);
    check_cost(mdp, cost);
    const int S = mdp.num_states();
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(S, S) - mdp.gamma() * policy_transition(mdp, policy);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
    Eigen::VectorXd v = lu.solve(policy_cost(mdp, policy, cost));
    if (!v.allFinite()) throw NumericalError("policy evaluation: singular system");
    return v;
}

QFunction exact_q_values(const TabularMdp& mdp, const StochasticPolicy& policy,
                         std::span<const double> cost) {
    const Eigen::VectorXd v = exact_state_values(mdp, policy, cost);
    std::vector<double> q(static_cast<std::size_t>(mdp.num_pairs()));
    for (StateId x = 0; x < mdp.num_states(); ++x)
        for (ActionId a = 0; a < mdp.num_actions(); ++a)
            q[mdp.pair_index(x, a)] = backup(mdp, cost, v.data(), x, a);
    return QFunction::tabular(mdp.num_states(), mdp.num_actions(), std::move(q));
}

PolicyValues exact_policy_values(const TabularMdp& mdp, const StochasticPolicy& policy) {
    check_policy(mdp, policy);
    const int S = mdp.num_states();
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(S, S) - mdp.gamma() * policy_transition(mdp, policy);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
    const auto chi = initial(mdp);
    PolicyValues out;
    out.cost = chi.dot(lu.solve(policy_cost(mdp, policy, mdp.cost_table())));
    for (int i = 0; i < mdp.num_constraints(); ++i)
        out.constraints.push_back(chi.dot(lu.solve(policy_cost(mdp, policy, mdp.constraint_table(i)))));
    if (!std::isfinite(out.cost)) throw NumericalError("policy evaluation: singular system");
    return out;
}

PolicyValues exact_policy_values(const TabularMdp& mdp, const DeterministicPolicy& policy) {
    check_policy(mdp, policy);
    // Terminal states may carry any action; they are absorbing either way.
    DeterministicPolicy safe = policy;
    for (StateId x = 0; x < mdp.num_states(); ++x)
        if (mdp.is_terminal(x)) safe.action_of[x] = 0;
    return exact_policy_values(mdp, StochasticPolicy::from_deterministic(safe, mdp.num_actions()));
}

PolicyValues exact_policy_values(const TabularMdp& mdp, const MixturePolicy& policy) {
    check_policy(mdp, policy);
    PolicyValues out{0.0, std::vector<double>(static_cast<std::size_t>(mdp.num_constraints()), 0.0)};
    for (std::size_t k = 0; k < policy.size(); ++k) {
        if (policy.weights[k] == 0.0) continue;
        const auto v = exact_policy_values(mdp, policy.members[k]);
        out.cost += policy.weights[k] * v.cost;
        for (std::size_t i = 0; i < out.constraints.size(); ++i)
            out.constraints[i] += policy.weights[k] * v.constraints[i];
    }
    return out;
}

Eigen::VectorXd discounted_occupancy(const TabularMdp& mdp, const StochasticPolicy& policy) {
    check_policy(mdp, policy);
    const int S = mdp.num_states();
    Eigen::MatrixXd system =
        (Eigen::MatrixXd::Identity(S, S) - mdp.gamma() * policy_transition(mdp, policy)).transpose();
    return system.partialPivLu().solve((1.0 - mdp.gamma()) * Eigen::VectorXd(initial(mdp)));
}

QFunction value_iteration(const TabularMdp& mdp, std::span<const double> cost, double tol) {
    check_cost(mdp, cost);
    if (!(tol > 0.0)) throw std::invalid_argument("value_iteration: tol must be > 0");
    const int S = mdp.num_states(), A = mdp.num_actions();
    std::vector<double> q(static_cast<std::size_t>(mdp.num_pairs()), 0.0), next(q.size());
    std::vector<double> v(static_cast<std::size_t>(S), 0.0);
    while (true) {
        for (StateId x = 0; x < S; ++x) {
            const double* row = q.data() + static_cast<std::size_t>(x) * A;
            v[x] = *std::min_element(row, row + A);
        }
        double change = 0.0;
        for (StateId x = 0; x < S; ++x)
            for (ActionId a = 0; a < A; ++a) {
                const int p = mdp.pair_index(x, a);
                next[p] = backup(mdp, cost, v.data(), x, a);
                change = std::max(change, std::abs(next[p] - q[p]));
            }
        q.swap(next);
        if (change < tol) break;
    }
    return QFunction::tabular(S, A, std::move(q));
}

QFunction exact_optimal_q(const TabularMdp& mdp, std::span<const double> cost) {
    auto policy = greedy_policy(value_iteration(mdp, cost));
    while (true) {
        const auto q = exact_q_values(
            mdp, StochasticPolicy::from_deterministic(policy, mdp.num_actions()), cost);
        bool changed = false;
        for (StateId x = 0; x < mdp.num_states(); ++x) {
            const ActionId cur = policy(x);
            ActionId best = cur;
            for (ActionId a = 0; a < mdp.num_actions(); ++a)
                if (q(x, a) < q(x, best) - 1e-12 * (1.0 + std::abs(q(x, cur)))) best = a;
            if (best != cur) {
                policy.action_of[x] = best;
                changed = true;
            }
        }
        if (!changed) return q;
    }
}

DeterministicPolicy exact_best_response(const TabularMdp& mdp, std::span<const double> multipliers) {
    const auto cost = scalarized_cost(mdp, multipliers);
    return greedy_policy(value_iteration(mdp, cost));
}

DeterministicPolicy exact_best_response(const TabularMdp& mdp, const DualVector& lambda) {
    return exact_best_response(mdp, lambda.multipliers());
}

double performance_difference_check(const TabularMdp& mdp, const StochasticPolicy& policy) {
    check_policy(mdp, policy);
    const auto q_star = exact_optimal_q(mdp, mdp.cost_table());
    const int S = mdp.num_states();
    Eigen::VectorXd v_star(S);
    for (StateId x = 0; x < S; ++x) v_star(x) = q_star.min_value(x);

    const double c_pi = exact_policy_values(mdp, policy).cost;
    const double c_star = initial(mdp).dot(v_star);
    const Eigen::VectorXd d = discounted_occupancy(mdp, policy);
    double advantage = 0.0;
    for (StateId x = 0; x < S; ++x) advantage += d(x) * (q_star.expected_value(x, policy.row(x)) - v_star(x));
    return std::abs((c_pi - c_star) - advantage / (1.0 - mdp.gamma()));
}

double performance_difference_check(const TabularMdp& mdp, const DeterministicPolicy& policy) {
    check_policy(mdp, policy);
    return performance_difference_check(mdp, StochasticPolicy::from_deterministic(policy, mdp.num_actions()));
}

double max_constraint_value(const TabularMdp& mdp, int constraint) {
    if (constraint < 0 || constraint >= mdp.num_constraints())
        throw std::invalid_argument("max_constraint_value: constraint index out of range");
    const auto g = mdp.constraint_table(constraint);
    std::vector<double> negated(g.size());
    std::transform(g.begin(), g.end(), negated.begin(), [](double v) { return -v; });
    const auto q = exact_optimal_q(mdp, negated);
    double value = 0.0;
    for (StateId x = 0; x < mdp.num_states(); ++x) value += mdp.initial_dist()[x] * q.min_value(x);
    return -value;
}

// ---------------------------------------------------------------------------

PolicyIterationSolver::PolicyIterationSolver(const TabularMdp& mdp)
    : mdp_(mdp),
      warm_start_{std::vector<ActionId>(static_cast<std::size_t>(mdp.num_states()), 0)},
      scalarized_values_(static_cast<std::size_t>(mdp.num_states())) {}

const PolicyIterationSolver::Evaluation& PolicyIterationSolver::evaluate(
    const DeterministicPolicy& policy) {
    check_policy(mdp_, policy);
    auto key = policy.action_of;
    for (StateId x = 0; x < mdp_.num_states(); ++x)
        if (mdp_.is_terminal(x)) key[x] = 0;
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;

    const auto stochastic =
        StochasticPolicy::from_deterministic(DeterministicPolicy{key}, mdp_.num_actions());
    const int S = mdp_.num_states();
    Eigen::MatrixXd system =
        Eigen::MatrixXd::Identity(S, S) - mdp_.gamma() * policy_transition(mdp_, stochastic);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
    const auto chi = initial(mdp_);

    Evaluation eval;
    eval.state_values.push_back(lu.solve(policy_cost(mdp_, stochastic, mdp_.cost_table())));
    eval.values.cost = chi.dot(eval.state_values.back());
    for (int i = 0; i < mdp_.num_constraints(); ++i) {
        eval.state_values.push_back(lu.solve(policy_cost(mdp_, stochastic, mdp_.constraint_table(i))));
        eval.values.constraints.push_back(chi.dot(eval.state_values.back()));
    }
    return cache_.emplace(std::move(key), std::move(eval)).first->second;
}

DeterministicPolicy PolicyIterationSolver::best_response(std::span<const double> multipliers) {
    const int m = mdp_.num_constraints();
    if (multipliers.size() != static_cast<std::size_t>(m))
        throw std::invalid_argument("best_response: multiplier count must equal constraint count");
    const int S = mdp_.num_states(), A = mdp_.num_actions();
    auto cost_of = [&](StateId x, ActionId a) {
        double c = mdp_.cost(x, a);
        for (int i = 0; i < m; ++i) c += multipliers[i] * mdp_.constraint_cost(i, x, a);
        return c;
    };

    DeterministicPolicy policy = warm_start_;
    while (true) {
        const auto& eval = evaluate(policy);
        for (StateId x = 0; x < S; ++x) {
            double v = eval.state_values[0](x);
            for (int i = 0; i < m; ++i) v += multipliers[i] * eval.state_values[i + 1](x);
            scalarized_values_[x] = v;
        }
        bool changed = false;
        for (StateId x = 0; x < S; ++x) {
            if (mdp_.is_terminal(x)) continue;
            auto q = [&](ActionId a) {
                double next = 0.0;
                for (const auto& s : mdp_.successors(x, a)) next += s.prob * scalarized_values_[s.state];
                return cost_of(x, a) + mdp_.gamma() * next;
            };
            const ActionId cur = policy(x);
            const double q_cur = q(cur);
            ActionId best = cur;
            double q_best = q_cur;
            for (ActionId a = 0; a < A; ++a) {
                if (a == cur) continue;
                const double qa = q(a);
                if (qa < q_best) {
                    best = a;
                    q_best = qa;
                }
            }
            // Switch only on a strict improvement, so ties cannot make the iteration cycle.
            if (best != cur && q_best < q_cur - 1e-12 * (1.0 + std::abs(q_cur))) {
                policy.action_of[x] = best;
                changed = true;
            }
        }
        if (!changed) break;
    }
    warm_start_ = policy;
    return policy;
}

}  // namespace cbpl
