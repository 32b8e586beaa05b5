#include "cbpl/ope.hpp"

#include "cbpl/errors.hpp"
#include "cbpl/exact.hpp"
#include "cbpl/random.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cbpl {

namespace {

void check_inputs(const Dataset& dataset, const StochasticPolicy& policy, double gamma,
                  const CostSelector& cost) {
    if (dataset.empty()) throw std::invalid_argument("off-policy estimate of an empty dataset");
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
    if (dataset.state_extent() > policy.num_states() || dataset.action_extent() > policy.num_actions())
        throw std::invalid_argument("evaluation policy does not cover the data's states and actions");
    cost.check(dataset.num_constraints());
}

double ratio(const StochasticPolicy& policy, const TransitionSample& s) {
    if (!(s.behavior_prob > 0.0)) throw DataError("sample with zero behavior probability");
    return policy.prob(s.x, s.a) / s.behavior_prob;
}

double state_value(const QFunction& q, const StochasticPolicy& policy, StateId x) {
    return q.expected_value(x, policy.row(x));
}

void check_q(const QFunction& q, const StochasticPolicy& policy) {
    if (q.num_states() != policy.num_states() || q.num_actions() != policy.num_actions())
        throw std::invalid_argument("control variate shape does not match the evaluation policy");
}

}  // namespace

double pdis(const Dataset& dataset, const StochasticPolicy& eval_policy, double gamma,
            const CostSelector& cost) {
    check_inputs(dataset, eval_policy, gamma, cost);
    double total = 0.0;
    for (std::size_t k = 0; k < dataset.trajectories().size(); ++k) {
        double weight = 1.0, discount = 1.0, value = 0.0;
        for (const auto& s : dataset.trajectory(k)) {
            weight *= ratio(eval_policy, s);
            value += discount * weight * cost(s);
            discount *= gamma;
        }
        total += value;
    }
    return total / static_cast<double>(dataset.trajectories().size());
}

double doubly_robust(const Dataset& dataset, const StochasticPolicy& eval_policy,
                     const QFunction& q_hat, double gamma, const CostSelector& cost) {
    check_inputs(dataset, eval_policy, gamma, cost);
    check_q(q_hat, eval_policy);
    double total = 0.0;
    for (std::size_t k = 0; k < dataset.trajectories().size(); ++k) {
        const auto traj = dataset.trajectory(k);
        const auto& last = traj.back();
        double dr = last.done ? 0.0 : state_value(q_hat, eval_policy, last.x_next);
        for (auto it = traj.rbegin(); it != traj.rend(); ++it) {
            const auto& s = *it;
            dr = state_value(q_hat, eval_policy, s.x) +
                 ratio(eval_policy, s) * (cost(s) + gamma * dr - q_hat(s.x, s.a));
        }
        total += dr;
    }
    return total / static_cast<double>(dataset.trajectories().size());
}

double weighted_doubly_robust(const Dataset& dataset, const StochasticPolicy& eval_policy,
                              const QFunction& q_hat, double gamma, const CostSelector& cost) {
    check_inputs(dataset, eval_policy, gamma, cost);
    check_q(q_hat, eval_policy);
    const auto& trajs = dataset.trajectories();
    const std::size_t n = trajs.size();
    const std::size_t horizon = dataset.max_trajectory_length();

    // prev[i]: normalized weight of trajectory i at step t - 1 (1/n before the first step).
    std::vector<double> cumulative(n, 1.0), prev(n, 1.0 / static_cast<double>(n)), next(n);
    double estimate = 0.0, discount = 1.0;
    for (std::size_t t = 0; t <= horizon; ++t) {
        double weight_sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (t < trajs[i].length()) cumulative[i] *= ratio(eval_policy, dataset[trajs[i].begin + t]);
            weight_sum += cumulative[i];
        }
        for (std::size_t i = 0; i < n; ++i) next[i] = weight_sum > 0.0 ? cumulative[i] / weight_sum : 0.0;

        double term = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t len = trajs[i].length();
            if (t < len) {
                const auto& s = dataset[trajs[i].begin + t];
                term += next[i] * (cost(s) - q_hat(s.x, s.a)) + prev[i] * state_value(q_hat, eval_policy, s.x);
            } else if (t == len) {
                const auto& last = dataset[trajs[i].begin + len - 1];
                if (!last.done) term += prev[i] * state_value(q_hat, eval_policy, last.x_next);
            }
        }
        estimate += discount * term;
        discount *= gamma;
        prev.swap(next);
    }
    return estimate;
}

// ---------------------------------------------------------------------------

std::vector<OpeRow> ope_comparison(const Dataset& dataset, const StochasticPolicy& eval_policy,
                                   const TabularMdp& mdp, const std::vector<double>& fractions,
                                   int trials, const OpeConfig& config) {
    if (trials < 0) throw std::invalid_argument("trials must be >= 0");
    if (config.fqe_iters < 1) throw std::invalid_argument("FQE iterations must be >= 1");
    for (double f : fractions)
        if (!(f > 0.0 && f <= 1.0)) throw std::invalid_argument("fractions must lie in (0, 1]");
    check_policy(mdp, eval_policy);
    if (trials == 0 || fractions.empty()) return {};
    if (dataset.empty()) throw std::invalid_argument("OPE comparison needs a nonempty dataset");

    const double truth = exact_policy_values(mdp, eval_policy).cost;
    const double gamma = mdp.gamma();
    const auto chi = mdp.initial_dist();
    const auto q_init = QFunction::tabular(mdp.num_states(), mdp.num_actions(), 0.0);
    static const char* kMethods[] = {"FQE", "PDIS", "DR", "WDR"};

    const std::size_t cells = fractions.size() * static_cast<std::size_t>(trials);
    std::vector<OpeRow> rows(cells * 4);
    detail::parallel_for(cells, config.jobs, [&](std::size_t cell) {
        const std::size_t f = cell / static_cast<std::size_t>(trials);
        const int trial = static_cast<int>(cell % static_cast<std::size_t>(trials));
        Rng rng(derive_seed(config.seed, "ope-subsample", cell));
        const Dataset sample = subsample(dataset, fractions[f], rng);

        const auto primary = CostSelector::primary();
        const auto full = fqe(sample, eval_policy, primary, config.fqe_iters, q_init, config.ridge, gamma, chi);
        const Dataset* is_data = &sample;
        QFunction q_hat = full.run.q_final;
        Dataset fit_half, is_half;
        if (config.held_out && sample.trajectories().size() >= 2) {
            std::vector<TransitionSample> a, b;
            for (std::size_t k = 0; k < sample.trajectories().size(); ++k)
                for (const auto& s : sample.trajectory(k)) (k % 2 == 0 ? a : b).push_back(s);
            fit_half = Dataset(sample.num_constraints(), std::move(a));
            is_half = Dataset(sample.num_constraints(), std::move(b));
            q_hat = fqe(fit_half, eval_policy, primary, config.fqe_iters, q_init, config.ridge, gamma, chi)
                        .run.q_final;
            is_data = &is_half;
        }
        const double estimates[] = {
            full.estimate,
            pdis(*is_data, eval_policy, gamma),
            doubly_robust(*is_data, eval_policy, q_hat, gamma),
            weighted_doubly_robust(*is_data, eval_policy, q_hat, gamma),
        };
        for (int m = 0; m < 4; ++m)
            rows[cell * 4 + m] = {kMethods[m], fractions[f], trial, estimates[m], std::abs(estimates[m] - truth)};
    });
    return rows;
}

std::optional<double> median_abs_error(const std::vector<OpeRow>& rows, const std::string& method,
                                       double fraction) {
    std::vector<double> errors;
    for (const auto& r : rows)
        if (r.method == method && r.fraction == fraction) errors.push_back(r.abs_error);
    if (errors.empty()) return std::nullopt;
    std::sort(errors.begin(), errors.end());
    const std::size_t mid = errors.size() / 2;
    return errors.size() % 2 == 1 ? errors[mid] : 0.5 * (errors[mid - 1] + errors[mid]);
}

}  // namespace cbpl
