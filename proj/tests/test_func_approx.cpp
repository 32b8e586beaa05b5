#include "cbpl/errors.hpp"
#include "cbpl/exact.hpp"
#include "cbpl/func_approx.hpp"
#include "cbpl/mdp.hpp"

#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

using namespace cbpl;

TEST_CASE("tabular fit takes cell means and keeps unseen cells") {
    const auto prior = QFunction::tabular(2, 2, 7.0);
    const std::vector<StateAction> one{{1, 0}};
    const std::vector<double> three{3.0};
    const auto q = fit_least_squares(one, three, prior, 0.0);
    CHECK(q(1, 0) == 3.0);
    CHECK(q(0, 0) == 7.0);
    CHECK(q(1, 1) == 7.0);

    const std::vector<StateAction> twice{{0, 1}, {0, 1}};
    const std::vector<double> targets{1.0, 3.0};
    CHECK(fit_least_squares(twice, targets, prior, 0.0)(0, 1) == 2.0);
}

TEST_CASE("one-hot linear fit solves the normal equations") {
    const auto features = one_hot_features(2, 1);
    const auto model = QFunction::linear(features);
    const std::vector<StateAction> inputs{{0, 0}, {1, 0}};
    const std::vector<double> targets{1.0, 3.0};
    const auto q = fit_least_squares(inputs, targets, model, 0.0);
    CHECK(q.weights()(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(q.weights()(1) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(q_value(q, 1, 0) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("singular design without ridge is a numerical error") {
    const auto model = QFunction::linear(one_hot_features(2, 1));
    const std::vector<StateAction> inputs{{0, 0}};
    const std::vector<double> targets{1.0};
    CHECK_THROWS_AS(fit_least_squares(inputs, targets, model, 0.0), NumericalError);
    CHECK_NOTHROW(fit_least_squares(inputs, targets, model, 1e-8));
}

TEST_CASE("argument validation") {
    const auto prior = QFunction::tabular(2, 2);
    const std::vector<StateAction> inputs{{0, 0}};
    const std::vector<double> two{1.0, 2.0};
    CHECK_THROWS_AS(fit_least_squares(inputs, two, prior, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(fit_least_squares({}, {}, prior, 0.0), std::invalid_argument);
    const std::vector<StateAction> outside{{2, 0}};
    const std::vector<double> one{1.0};
    CHECK_THROWS_AS(fit_least_squares(outside, one, prior, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(fit_least_squares(inputs, one, prior, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(q_value(prior, 0, 2), std::invalid_argument);
}

TEST_CASE("q_value lookups") {
    CHECK(q_value(QFunction::tabular(3, 2), 2, 1) == 0.0);
    const auto features = one_hot_features(2, 1);
    CHECK(q_value(QFunction::linear(features), 1, 0) == 0.0);
    Eigen::VectorXd w(2);
    w << 1.0, 3.0;
    CHECK(q_value(QFunction::linear(features, w), 1, 0) == 3.0);
}

TEST_CASE("value bound clips linear evaluations") {
    const auto features = one_hot_features(1, 2);
    Eigen::VectorXd w(2);
    w << -5.0, 0.5;
    auto q = QFunction::linear(features, w);
    q.set_value_bound(2.0);
    CHECK(q(0, 0) == -2.0);
    CHECK(q(0, 1) == 0.5);
    CHECK_THROWS_AS(q.set_value_bound(-1.0), std::invalid_argument);
}

TEST_CASE("greedy policy breaks ties toward the lowest action") {
    CHECK(greedy_policy(QFunction::tabular(2, 3, 4.0)).action_of == std::vector<ActionId>{0, 0});
    const auto q = QFunction::tabular(1, 3, {2.0, 1.0, 5.0});
    CHECK(greedy_policy(q)(0) == 1);
    CHECK(q.min_value(0) == 1.0);
    const std::vector<double> probs{0.5, 0.5, 0.0};
    CHECK(q.expected_value(0, probs) == 1.5);
}

TEST_CASE("greedy policy of Q* on a 1x3 corridor moves east") {
    const auto mdp = build_frozenlake(parse_layout("SFG\n"), 0.95);
    const auto pi = greedy_policy(value_iteration(mdp, mdp.cost_table()));
    CHECK(pi(0) == East);
    CHECK(pi(1) == East);
}

TEST_CASE("one-hot features") {
    const auto mdp = build_frozenlake(parse_layout("SG\n"));
    const auto f = one_hot_features(2, 2);
    CHECK(f->dim() == 4);
    CHECK(f->phi(0, 0).sum() == 1.0);
    CHECK(f->phi(0, 0)(0) == 1.0);
    const Eigen::MatrixXd gram = f->matrix().transpose() * f->matrix();
    CHECK(gram.isApprox(Eigen::MatrixXd::Identity(4, 4)));
    CHECK(one_hot_features(mdp)->dim() == 8);
}

TEST_CASE("feature map validation") {
    CHECK_THROWS_AS(FeatureMap(2, 2, Eigen::MatrixXd::Zero(3, 2)), std::invalid_argument);
    CHECK_THROWS_AS(FeatureMap(2, 2, Eigen::MatrixXd::Zero(4, 0)), std::invalid_argument);
    Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(4, 1);
    bad(0, 0) = std::nan("");
    CHECK_THROWS_AS(FeatureMap(2, 2, bad), std::invalid_argument);
    const auto features = one_hot_features(2, 2);
    CHECK_THROWS_AS(QFunction::linear(features, Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST_CASE("one-hot ridge-free fit equals the tabular fit") {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        Rng rng(seed);
        const int S = 4, A = 3;
        std::vector<StateAction> inputs;
        std::vector<double> targets;
        // Cover every pair so the ridge-free system is nonsingular, then add extras.
        for (int x = 0; x < S; ++x)
            for (int a = 0; a < A; ++a) {
                inputs.push_back({x, a});
                targets.push_back(rng.uniform() * 10.0 - 5.0);
            }
        for (int k = 0; k < 40; ++k) {
            inputs.push_back({static_cast<int>(rng.index(S)), static_cast<int>(rng.index(A))});
            targets.push_back(rng.uniform() * 10.0 - 5.0);
        }
        const auto tab = fit_least_squares(inputs, targets, QFunction::tabular(S, A), 0.0);
        const auto lin = fit_least_squares(inputs, targets, QFunction::linear(one_hot_features(S, A)), 0.0);
        for (int x = 0; x < S; ++x)
            for (int a = 0; a < A; ++a) CHECK(std::abs(tab(x, a) - lin(x, a)) <= 1e-10);
    }
}

TEST_CASE("fitted solution never loses to the template on training MSE") {
    Rng rng(77);
    for (int trial = 0; trial < 25; ++trial) {
        const int S = 5, A = 2;
        const auto prior = QFunction::random_tabular(S, A, 3.0, rng);
        Eigen::MatrixXd rows(S * A, 3);
        for (int i = 0; i < rows.size(); ++i) rows.data()[i] = rng.uniform();
        const auto linear_prior = QFunction::linear(std::make_shared<FeatureMap>(S, A, rows));
        std::vector<StateAction> inputs;
        std::vector<double> targets;
        for (int k = 0; k < 30; ++k) {
            inputs.push_back({static_cast<int>(rng.index(S)), static_cast<int>(rng.index(A))});
            targets.push_back(rng.uniform() * 4.0 - 2.0);
        }
        for (const auto& model : {prior, linear_prior}) {
            const auto fitted = fit_least_squares(inputs, targets, model, 0.0);
            CHECK(training_mse(fitted, inputs, targets) <= training_mse(model, inputs, targets) + 1e-12);
        }
    }
}

TEST_CASE("greedy policy ignores a constant shift") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const auto q = QFunction::random_tabular(6, 4, 1.0, rng);
        auto shifted = q.values();
        for (double& v : shifted) v += 12.5;
        CHECK(greedy_policy(q) == greedy_policy(QFunction::tabular(6, 4, shifted)));
    }
}

TEST_CASE("fit from pair sums matches the per-sample fit") {
    const std::vector<StateAction> inputs{{0, 0}, {0, 0}, {1, 1}, {2, 0}};
    const std::vector<double> targets{1.0, 2.0, -4.0, 0.5};
    for (const auto& model : {QFunction::tabular(3, 2, 9.0), QFunction::linear(one_hot_features(3, 2))}) {
        const LeastSquaresFit fit(inputs, model, 1e-8);
        std::vector<double> sums(6, 0.0);
        for (std::size_t i = 0; i < inputs.size(); ++i) sums[inputs[i].x * 2 + inputs[i].a] += targets[i];
        const auto a = fit.fit(targets, model);
        const auto b = fit.fit_pair_sums(sums, model);
        for (int x = 0; x < 3; ++x)
            for (int u = 0; u < 2; ++u) CHECK(a(x, u) == doctest::Approx(b(x, u)).epsilon(1e-12));
    }
}
