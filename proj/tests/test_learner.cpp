#include "cbpl/errors.hpp"
#include "cbpl/exact.hpp"
#include "cbpl/learner.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <stdexcept>

using namespace cbpl;

namespace {

// Safe action: no cost, no risk. Risky action: cost -1 and one unit of constraint cost.
TabularMdp safe_or_risky() {
    const std::vector<double> P{0, 1, 0, 1, 0, 1, 0, 1};
    return TabularMdp(2, 2, P, {0.0, -1.0, 0.0, 0.0}, {{0.0, 1.0, 0.0, 0.0}}, 0.9, {1.0, 0.0}, {1});
}

const TabularMdp& frozenlake() {
    static const auto mdp = build_frozenlake(standard_layout_8x8());
    return mdp;
}

const Dataset& frozenlake_data() {
    static const auto data = [] {
        Rng rng(derive_seed(1, "collect"));
        return collect(frozenlake(), make_frozenlake_behavior(frozenlake(), 0.95), 5000, 200, rng);
    }();
    return data;
}

LearnerConfig exact_config(std::vector<double> tau, double budget, double eta, long rounds) {
    LearnerConfig config;
    config.flavor = SubroutineFlavor::Exact;
    config.tau = std::move(tau);
    config.budget = budget;
    config.eta = eta;
    config.max_rounds = rounds;
    return config;
}

double lagrangian(double c, const std::vector<double>& g, const std::vector<double>& lambda,
                  const std::vector<double>& tau) {
    double v = c;
    for (std::size_t i = 0; i < tau.size(); ++i) v += lambda[i] * (g[i] - tau[i]);
    return v;
}

}  // namespace

TEST_CASE("lagrangian_max closed form") {
    const std::vector<double> neg{0.1, 0.2}, tau{0.5, 0.5};
    CHECK(lagrangian_max(1.5, neg, tau, 30.0) == 1.5);
    const std::vector<double> g{0.7, 0.4};
    CHECK(lagrangian_max(1.0, g, tau, 10.0) == doctest::Approx(3.0));
    CHECK(lagrangian_max(1.0, g, tau, 0.0) == 1.0);
    const std::vector<double> both{0.8, 0.9};
    CHECK(lagrangian_max_ball(0.0, both, tau, 2.0) == doctest::Approx(2.0 * 0.5));
    CHECK_THROWS_AS(lagrangian_max(0.0, g, std::vector<double>{0.1}, 1.0), std::invalid_argument);
}

TEST_CASE("lagrangian_min at zero multipliers is the unconstrained FQI value") {
    const auto& data = frozenlake_data();
    LearnerConfig config;
    config.tau = {0.1};
    FittedSubroutines sub(data, config, &frozenlake());
    const auto lmin = lagrangian_min(sub, ogd_init(1, 30.0), config.tau);
    const auto fq = fqi(data, CostSelector::primary(), config.k_fqi, QFunction::tabular(64, 4), config.ridge, 0.95);
    CHECK(lmin.policy == fq.policy);
    CHECK(lmin.value == lmin.estimates.cost);
}

TEST_CASE("exact lagrangian_min matches the exact best response") {
    const auto& mdp = frozenlake();
    ExactSubroutines sub(mdp);
    const auto lam = eg_init(1, 30.0);
    const std::vector<double> tau{0.1};
    const auto lmin = lagrangian_min(sub, lam, tau);
    const auto pi = exact_best_response(mdp, lam);
    const auto v = exact_policy_values(mdp, pi);
    CHECK(lmin.value == doctest::Approx(v.cost + 15.0 * (v.constraints[0] - 0.1)).epsilon(1e-8));
}

TEST_CASE("a single-policy class closes the gap in one round when the constraint is tight") {
    // One action everywhere; G = 0.5 exactly, matching tau.
    const TabularMdp mdp(2, 1, {0, 1, 0, 1}, {-2.0, 0.0}, {{0.5, 0.0}}, 0.9, {1.0, 0.0}, {1});
    const auto result = learn(Dataset(1), exact_config({0.5}, 10.0, 1.0, 100), &mdp);
    REQUIRE(result.trace.records.size() == 1u);
    CHECK(result.trace.converged());
    CHECK(result.trace.records[0].gap == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(result.mixture.size() == 1u);
}

TEST_CASE("a slack constraint converges to the unconstrained optimum") {
    const auto& mdp = frozenlake();
    auto config = exact_config({10.0}, 30.0, 50.0, 10000);
    const auto result = learn(Dataset(1), config, &mdp);
    CHECK(result.trace.converged());
    const auto v = exact_policy_values(mdp, result.mixture);
    const auto q = value_iteration(mdp, mdp.cost_table());
    CHECK(std::abs(v.cost - q.min_value(0)) <= config.omega);
    // Mass drifts to the slack coordinate.
    const auto& last = result.trace.records.back();
    CHECK(last.lambda_hat[1] > last.lambda_hat[0]);
}

TEST_CASE("no constraints means no dual game") {
    const auto mdp = build_combination_lock(4);
    const auto data = testing::one_sample_per_pair(mdp);
    LearnerConfig config;
    config.k_fqi = config.k_fqe = 30;
    config.gamma = 0.9;
    const auto result = learn(data, config);
    REQUIRE(result.trace.records.size() == 1u);
    CHECK(result.trace.records[0].gap == 0.0);
    CHECK(result.trace.converged());
    const auto fq = fqi(data, CostSelector::primary(), 30, QFunction::tabular(4, 2), config.ridge, 0.9);
    CHECK(result.mixture.members[0] == fq.policy);
}

TEST_CASE("exact flavor sandwich and Theorem 1 bound hold every round") {
    const auto mdp = safe_or_risky();
    const std::vector<double> tau{0.3};
    const double B = 4.0, omega = 0.05;
    const double g_bar = g_bar_exact(mdp, tau);
    CHECK(g_bar == doctest::Approx(1.0));
    const double eta = theory_learning_rate(omega, g_bar, B);
    auto config = exact_config(tau, B, eta, 0);
    config.omega = omega;
    long rounds = 0, violations = 0;
    config.observer = [&](const RoundRecord& r) {
        ++rounds;
        const std::vector<double> lam(r.lambda_hat.begin(), r.lambda_hat.end() - 1);
        const double mid = lagrangian(r.mixture_cost, r.mixture_constraints, lam, tau);
        if (!(r.l_max >= mid - 1e-12 && mid >= r.l_min - 1e-12)) ++violations;
        const double bound = 2.0 * (B * std::log(2.0) / (eta * static_cast<double>(r.round)) + eta * B * g_bar * g_bar);
        if (r.gap > bound + 1e-12) ++violations;
        if (std::abs(r.gap - (r.l_max - r.l_min)) > 0.0) ++violations;
    };
    config.keep_records = false;
    const auto result = learn(Dataset(1), config, &mdp);
    CHECK(result.trace.converged());
    CHECK(rounds <= theory_rounds(B, g_bar, 1, omega));
    CHECK(violations == 0);
    CHECK(result.trace.records.size() == 1u);
}

TEST_CASE("mixture estimates are means of the cached member estimates") {
    const auto& data = frozenlake_data();
    LearnerConfig config;
    config.tau = {0.1};
    config.max_rounds = 15;
    const auto result = learn(data, config, &frozenlake());
    const auto& mix = result.mixture;
    double c = 0.0, g = 0.0, w = 0.0;
    for (std::size_t k = 0; k < mix.size(); ++k) {
        c += mix.weights[k] * mix.member_costs[k];
        g += mix.weights[k] * mix.member_constraints[k][0];
        w += mix.weights[k];
    }
    CHECK(w == doctest::Approx(1.0).epsilon(1e-12));
    const auto& last = result.trace.records.back();
    CHECK(c == doctest::Approx(last.mixture_cost).epsilon(1e-12));
    CHECK(g == doctest::Approx(last.mixture_constraints[0]).epsilon(1e-12));
    CHECK(static_cast<long>(result.trace.records.size()) == last.round);
}

TEST_CASE("fitted run on frozenlake converges and satisfies the constraint") {
    const auto& data = frozenlake_data();
    LearnerConfig config;
    config.tau = {0.1};
    config.jobs = 2;
    const auto result = learn(data, config, &frozenlake());
    CHECK(result.trace.converged());
    const auto& last = result.trace.records.back();
    const double c_bar = 1.0, g_bar = result.trace.g_bar;
    const double v_bar = c_bar + config.budget * g_bar;
    CHECK(last.mixture_constraints[0] - 0.1 <= 2 * (v_bar + config.omega) / config.budget);
    CHECK(exact_policy_values(frozenlake(), result.mixture).constraints[0] <= 0.1 + 0.01);
}

TEST_CASE("identical inputs give identical traces") {
    const auto& data = frozenlake_data();
    LearnerConfig config;
    config.tau = {0.05};
    config.max_rounds = 12;
    const auto a = learn(data, config, &frozenlake());
    config.jobs = 3;
    const auto b = learn(data, config, &frozenlake());
    REQUIRE(a.trace.records.size() == b.trace.records.size());
    for (std::size_t t = 0; t < a.trace.records.size(); ++t) {
        CHECK(a.trace.records[t].lambda == b.trace.records[t].lambda);
        CHECK(a.trace.records[t].gap == b.trace.records[t].gap);
    }
    CHECK(a.mixture.members == b.mixture.members);
}

TEST_CASE("the dual step moves mass toward a violated constraint") {
    const auto mdp = safe_or_risky();
    // With lambda_1 = 0.5 the risky action is the best response and G = 1 > tau.
    for (auto sign : {DualSign::Ascent, DualSign::Literal}) {
        auto config = exact_config({0.3}, 1.0, 1.0, 2);
        config.sign = sign;
        const auto eg = learn(Dataset(1), config, &mdp);
        REQUIRE(eg.trace.records.size() == 2u);
        const double before = eg.trace.records[0].lambda[0], after = eg.trace.records[1].lambda[0];
        CHECK(eg.trace.records[0].member_constraints[0] == 1.0);
        if (sign == DualSign::Ascent) CHECK(after > before);
        else CHECK(after < before);

        config.dual = DualFlavor::OgdBall;
        const auto ogd = learn(Dataset(1), config, &mdp);
        REQUIRE(ogd.trace.records.size() == 2u);
        CHECK(ogd.trace.records[0].lambda.size() == 1u);
        if (sign == DualSign::Ascent) CHECK(ogd.trace.records[1].lambda[0] > 0.0);
        else CHECK(ogd.trace.records[1].lambda[0] == 0.0);
    }
}

TEST_CASE("OGD flavor reaches the constrained optimum on the toy instance") {
    const auto mdp = safe_or_risky();
    auto config = exact_config({0.3}, 4.0, 0.02, 20000);
    config.dual = DualFlavor::OgdBall;
    config.omega = 0.05;
    const auto result = learn(Dataset(1), config, &mdp);
    CHECK(result.trace.converged());
    const auto v = exact_policy_values(mdp, result.mixture);
    CHECK(std::abs(v.cost + 0.3) <= 0.05 + 1e-9);
}

TEST_CASE("LSPI flavor on full-coverage data") {
    const auto& mdp = frozenlake();
    const auto data = testing::one_sample_per_pair(mdp);
    LearnerConfig config;
    config.flavor = SubroutineFlavor::Lspi;
    config.tau = {0.1};
    config.max_rounds = 60;
    const auto result = learn(data, config, &mdp);
    CHECK(result.trace.converged());
    CHECK(exact_policy_values(mdp, result.mixture).constraints[0] <= 0.1 + 2 * (1.0 + config.omega) / config.budget);
}

TEST_CASE("regularized one-shot and grid search") {
    const auto& data = frozenlake_data();
    LearnerConfig config;
    config.tau = {0.1};
    const std::vector<double> zero{0.0};
    const auto r0 = regularized_one_shot(data, zero, config, &frozenlake());
    const auto fq = fqi(data, CostSelector::primary(), config.k_fqi, QFunction::tabular(64, 4), config.ridge, 0.95);
    CHECK(r0.policy == fq.policy);

    const auto run = learn(data, config, &frozenlake());
    const auto& lam_hat = run.trace.records.back().lambda_hat;
    const std::vector<double> one{lam_hat[0]};
    const auto again = regularized_one_shot(data, one, config, &frozenlake());
    CHECK(again.policy == run.pi_tilde);

    std::vector<std::vector<double>> grid;
    for (int k = 0; k <= 10; ++k) grid.push_back({0.5 * k});
    config.jobs = 4;
    const auto results = grid_search(data, grid, config, &frozenlake());
    REQUIRE(results.size() == grid.size());
    bool feasible = false;
    for (std::size_t k = 0; k < results.size(); ++k) {
        CHECK(results[k].lambda == grid[k]);
        feasible = feasible || exact_policy_values(frozenlake(), results[k].policy).constraints[0] <= 0.1;
    }
    CHECK(feasible);
    CHECK_THROWS_AS(regularized_one_shot(data, std::vector<double>{-1.0}, config, &frozenlake()),
                    std::invalid_argument);
}

TEST_CASE("derandomize picks the cheapest feasible member") {
    MixturePolicy mix;
    mix.members = {DeterministicPolicy{{0}}, DeterministicPolicy{{1}}, DeterministicPolicy{{2}}};
    mix.weights = {0.2, 0.3, 0.5};
    mix.member_costs = {-3.0, -1.0, -2.0};
    mix.member_constraints = {{0.5}, {0.05}, {0.1}};
    const std::vector<double> tau{0.1};
    CHECK(derandomize(mix, tau) == 2u);
    const std::vector<double> tight{0.01};
    CHECK(derandomize(mix, tight) == 1u);
    CHECK_THROWS_AS(derandomize(MixturePolicy{}, tau), std::invalid_argument);
}

TEST_CASE("configuration errors") {
    const auto& data = frozenlake_data();
    LearnerConfig config;
    CHECK_THROWS_AS(learn(data, config), ConfigError);  // tau missing
    config.tau = {0.1};
    config.budget = 0.0;
    CHECK_THROWS_AS(learn(data, config), ConfigError);
    config.budget = 30.0;
    config.tau = {-0.1};
    CHECK_THROWS_AS(learn(data, config), ConfigError);
    config.tau = {0.1};
    config.flavor = SubroutineFlavor::Exact;
    CHECK_THROWS_AS(learn(data, config), ConfigError);
    config.flavor = SubroutineFlavor::Fitted;
    CHECK_THROWS_AS(learn(Dataset(1), config), ConfigError);
    config.k_fqe = 0;
    CHECK_THROWS_AS(learn(data, config), ConfigError);
}

TEST_CASE("G_bar choices") {
    const auto& data = frozenlake_data();
    CHECK(g_bar_from_dataset(data, 0.95) == doctest::Approx(20.0));
    const std::vector<double> tau{0.1};
    const double exact = g_bar_exact(frozenlake(), tau);
    CHECK(exact == doctest::Approx(max_constraint_value(frozenlake(), 0)));
    const std::vector<double> big{3.0};
    CHECK(g_bar_exact(frozenlake(), big) == 3.0);
}
