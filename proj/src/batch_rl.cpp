#include "cbpl/batch_rl.hpp"

#include "cbpl/errors.hpp"
#include "csv_util.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <tuple>

namespace cbpl {

CostSelector CostSelector::constraint(int index) {
    if (index < 0) throw std::invalid_argument("CostSelector: constraint index must be >= 0");
    return CostSelector(Mode::Constraint, index, {});
}

CostSelector CostSelector::scalarized(std::vector<double> lambda) {
    for (double l : lambda)
        if (!(l >= 0.0) || !std::isfinite(l))
            throw std::invalid_argument("CostSelector: scalarization weights must be finite and >= 0");
    return CostSelector(Mode::Scalarized, 0, std::move(lambda));
}

double CostSelector::operator()(double c, std::span<const double> g) const {
    switch (mode_) {
    case Mode::Primary: return c;
    case Mode::Constraint: return g[index_];
    case Mode::Scalarized: {
        double v = c;
        for (std::size_t i = 0; i < lambda_.size(); ++i) v += lambda_[i] * g[i];
        return v;
    }
    }
    return c;
}

void CostSelector::check(int num_constraints) const {
    if (mode_ == Mode::Constraint && index_ >= num_constraints)
        throw std::invalid_argument("cost selector names constraint " + std::to_string(index_ + 1) +
                                    " but the data has " + std::to_string(num_constraints));
    if (mode_ == Mode::Scalarized && lambda_.size() != static_cast<std::size_t>(num_constraints))
        throw std::invalid_argument("scalarized cost needs one weight per constraint");
}

CostSelector parse_cost_selector(std::string_view text) {
    if (text == "c") return CostSelector::primary();
    if (text.starts_with("g:")) {
        const int i = csv::parse_int(text.substr(2), 0);
        if (i < 1) throw std::invalid_argument("cost g:i uses 1-based constraint indices");
        return CostSelector::constraint(i - 1);
    }
    if (text.starts_with("scalarized:")) {
        std::vector<double> lambda;
        for (auto field : csv::split(text.substr(11))) lambda.push_back(csv::parse_real(field, 0));
        return CostSelector::scalarized(std::move(lambda));
    }
    throw std::invalid_argument("unknown cost selector '" + std::string(text) +
                                "' (expected c, g:i or scalarized:<weights>)");
}

// ---------------------------------------------------------------------------

std::vector<SampleGroup> group_samples(const Dataset& dataset) {
    using Key = std::tuple<StateId, ActionId, StateId, bool, double, std::vector<double>>;
    std::map<Key, double> counts;
    for (const auto& s : dataset.samples()) counts[Key{s.x, s.a, s.x_next, s.done, s.c, s.g}] += 1.0;
    std::vector<SampleGroup> groups;
    groups.reserve(counts.size());
    for (auto& [key, n] : counts) {
        const auto& [x, a, x_next, done, c, g] = key;
        groups.push_back({x, a, x_next, done, c, g, n});
    }
    return groups;
}

namespace {

std::vector<StateAction> sample_inputs(const Dataset& dataset) {
    std::vector<StateAction> inputs;
    inputs.reserve(dataset.size());
    for (const auto& s : dataset.samples()) inputs.push_back({s.x, s.a});
    return inputs;
}

void check_shape(const Dataset& dataset, int num_states, int num_actions) {
    if (dataset.empty()) throw std::invalid_argument("fitted solver: empty dataset");
    if (dataset.state_extent() > num_states || dataset.action_extent() > num_actions)
        throw std::invalid_argument("fitted solver: data refers to states or actions outside the function class");
}

}  // namespace

FittedSolver::FittedSolver(const Dataset& dataset, QFunction q_init, double ridge, double gamma)
    : groups_((check_shape(dataset, q_init.num_states(), q_init.num_actions()), group_samples(dataset))),
      design_(sample_inputs(dataset), q_init, ridge),
      q_init_(std::move(q_init)),
      empirical_chi_(dataset.initial_state_distribution(q_init_.num_states())),
      gamma_(gamma),
      total_count_(static_cast<double>(dataset.size())),
      num_constraints_(dataset.num_constraints()) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("fitted solver: gamma must lie in (0, 1)");
}

FittedRun FittedSolver::iterate(const CostSelector& cost, int K, const StochasticPolicy* policy) const {
    if (K < 1) throw std::invalid_argument("fitted solver: K must be >= 1");
    cost.check(num_constraints_);
    const int S = num_states(), A = num_actions();
    if (policy && (policy->num_states() != S || policy->num_actions() != A))
        throw std::invalid_argument("fitted solver: policy shape does not match the function class");

    std::vector<double> group_cost(groups_.size());
    for (std::size_t i = 0; i < groups_.size(); ++i) group_cost[i] = cost(groups_[i].c, groups_[i].g);

    FittedRun run{q_init_, {}, K};
    run.residuals.reserve(static_cast<std::size_t>(K));
    std::vector<double> next_value(static_cast<std::size_t>(S)), targets(groups_.size());
    std::vector<double> sums(static_cast<std::size_t>(S) * A);
    for (int k = 0; k < K; ++k) {
        const QFunction& q = run.q_final;
        for (StateId x = 0; x < S; ++x)
            next_value[x] = policy ? q.expected_value(x, policy->row(x)) : q.min_value(x);
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t i = 0; i < groups_.size(); ++i) {
            const auto& grp = groups_[i];
            targets[i] = group_cost[i] + (grp.done ? 0.0 : gamma_ * next_value[grp.x_next]);
            sums[static_cast<std::size_t>(grp.x) * A + grp.a] += grp.count * targets[i];
        }
        QFunction fitted = design_.fit_pair_sums(sums, q);
        double sse = 0.0;
        for (std::size_t i = 0; i < groups_.size(); ++i) {
            const double r = fitted(groups_[i].x, groups_[i].a) - targets[i];
            sse += groups_[i].count * r * r;
        }
        run.residuals.push_back(sse / total_count_);
        run.q_final = std::move(fitted);
    }
    return run;
}

FittedRun FittedSolver::fqe(const StochasticPolicy& policy, const CostSelector& cost, int K) const {
    return iterate(cost, K, &policy);
}

FittedRun FittedSolver::fqe(const DeterministicPolicy& policy, const CostSelector& cost, int K) const {
    if (policy.num_states() != num_states())
        throw std::invalid_argument("fqe: policy must assign an action to every state");
    for (ActionId a : policy.action_of)
        if (a < 0 || a >= num_actions()) throw std::invalid_argument("fqe: policy action out of range");
    return fqe(StochasticPolicy::from_deterministic(policy, num_actions()), cost, K);
}

FittedRun FittedSolver::fqi(const CostSelector& cost, int K) const { return iterate(cost, K, nullptr); }

double FittedSolver::initial_value(const QFunction& q, const StochasticPolicy& policy,
                                   std::span<const double> chi) const {
    if (chi.empty()) chi = empirical_chi_;
    if (chi.size() != static_cast<std::size_t>(q.num_states()))
        throw std::invalid_argument("initial distribution length must equal the number of states");
    double v = 0.0;
    for (StateId x = 0; x < q.num_states(); ++x)
        if (chi[x] != 0.0) v += chi[x] * q.expected_value(x, policy.row(x));
    return v;
}

double FittedSolver::initial_value(const QFunction& q, const DeterministicPolicy& policy,
                                   std::span<const double> chi) const {
    if (chi.empty()) chi = empirical_chi_;
    if (chi.size() != static_cast<std::size_t>(q.num_states()))
        throw std::invalid_argument("initial distribution length must equal the number of states");
    double v = 0.0;
    for (StateId x = 0; x < q.num_states(); ++x)
        if (chi[x] != 0.0) v += chi[x] * q(x, policy(x));
    return v;
}

FqeResult fqe(const Dataset& dataset, const DeterministicPolicy& policy, const CostSelector& cost,
              int K, const QFunction& q_init, double ridge, double gamma, std::span<const double> chi) {
    if (K < 1) throw std::invalid_argument("fqe: K must be >= 1");
    FittedSolver solver(dataset, q_init, ridge, gamma);
    auto run = solver.fqe(policy, cost, K);
    const double estimate = solver.initial_value(run.q_final, policy, chi);
    return {estimate, std::move(run)};
}

FqeResult fqe(const Dataset& dataset, const StochasticPolicy& policy, const CostSelector& cost,
              int K, const QFunction& q_init, double ridge, double gamma, std::span<const double> chi) {
    if (K < 1) throw std::invalid_argument("fqe: K must be >= 1");
    FittedSolver solver(dataset, q_init, ridge, gamma);
    auto run = solver.fqe(policy, cost, K);
    const double estimate = solver.initial_value(run.q_final, policy, chi);
    return {estimate, std::move(run)};
}

FqiResult fqi(const Dataset& dataset, const CostSelector& cost, int K, const QFunction& q_init,
              double ridge, double gamma) {
    if (K < 1) throw std::invalid_argument("fqi: K must be >= 1");
    FittedSolver solver(dataset, q_init, ridge, gamma);
    auto run = solver.fqi(cost, K);
    auto policy = greedy_policy(run.q_final);
    return {std::move(policy), std::move(run)};
}

// ---------------------------------------------------------------------------

namespace {

template <typename NextAction>
Eigen::VectorXd lstdq_solve(const Dataset& dataset, const CostSelector& cost,
                            const FeatureMap& features, double gamma, double ridge,
                            NextAction next_action) {
    check_shape(dataset, features.num_states(), features.num_actions());
    cost.check(dataset.num_constraints());
    if (!(ridge >= 0.0)) throw std::invalid_argument("lstdq: ridge must be >= 0");
    const int k = features.dim();
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
    for (const auto& grp : group_samples(dataset)) {
        const Eigen::VectorXd phi = features.phi(grp.x, grp.a).transpose();
        Eigen::VectorXd diff = phi;
        if (!grp.done) diff -= gamma * features.phi(grp.x_next, next_action(grp.x_next)).transpose();
        A.noalias() += grp.count * phi * diff.transpose();
        b.noalias() += grp.count * cost(grp.c, grp.g) * phi;
    }
    A.diagonal().array() += ridge;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible()) throw NumericalError("lstdq: singular system; use a positive ridge");
    return lu.solve(b);
}

}  // namespace

DeterministicPolicy greedy_policy(const FeatureMap& features, const Eigen::VectorXd& w) {
    if (w.size() != features.dim()) throw std::invalid_argument("weight length must equal feature dimension");
    const Eigen::VectorXd q = features.matrix() * w;
    DeterministicPolicy pi{std::vector<ActionId>(static_cast<std::size_t>(features.num_states()), 0)};
    const int A = features.num_actions();
    for (StateId x = 0; x < features.num_states(); ++x)
        for (ActionId a = 1; a < A; ++a)
            if (q(x * A + a) < q(x * A + pi.action_of[x])) pi.action_of[x] = a;
    return pi;
}

Eigen::VectorXd lstdq(const Dataset& dataset, const Eigen::VectorXd& w, const CostSelector& cost,
                      const FeatureMap& features, double gamma, double ridge) {
    const auto greedy = greedy_policy(features, w);
    return lstdq_solve(dataset, cost, features, gamma, ridge, [&](StateId x) { return greedy(x); });
}

Eigen::VectorXd lstdq_policy(const Dataset& dataset, const DeterministicPolicy& policy,
                             const CostSelector& cost, const FeatureMap& features, double gamma,
                             double ridge) {
    if (policy.num_states() != features.num_states())
        throw std::invalid_argument("lstdq: policy must assign an action to every state");
    return lstdq_solve(dataset, cost, features, gamma, ridge, [&](StateId x) { return policy(x); });
}

LspiResult lspi(const Dataset& dataset, const CostSelector& cost, const FeatureMap& features,
                double gamma, const LspiOptions& options) {
    if (!(options.eps_stop > 0.0)) throw std::invalid_argument("lspi: eps_stop must be > 0");
    if (options.max_iters < 1) throw std::invalid_argument("lspi: max_iters must be >= 1");
    LspiResult result{Eigen::VectorXd::Zero(features.dim()), 0, false};
    while (result.iterations < options.max_iters) {
        Eigen::VectorXd next = lstdq(dataset, result.w, cost, features, gamma, options.ridge);
        ++result.iterations;
        const double change = (next - result.w).norm();
        result.w = std::move(next);
        if (change <= options.eps_stop) {
            result.converged = true;
            break;
        }
    }
    return result;
}

}  // namespace cbpl
