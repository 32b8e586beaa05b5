#pragma once

#include "cbpl/mdp.hpp"
#include "cbpl/policy.hpp"
#include "cbpl/random.hpp"

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace cbpl {

struct StateAction {
    StateId x;
    ActionId a;
};

/// phi(x, a) for a finite state-action space, stored as one row per pair
/// (row index x * |A| + a).
class FeatureMap {
public:
    FeatureMap(int num_states, int num_actions, Eigen::MatrixXd rows);

    int num_states() const { return num_states_; }
    int num_actions() const { return num_actions_; }
    int dim() const { return static_cast<int>(rows_.cols()); }
    const Eigen::MatrixXd& matrix() const { return rows_; }
    auto phi(StateId x, ActionId a) const { return rows_.row(x * num_actions_ + a); }

private:
    int num_states_;
    int num_actions_;
    Eigen::MatrixXd rows_;
};

/// Indicator features, k = |X| * |A|.
std::shared_ptr<const FeatureMap> one_hot_features(int num_states, int num_actions);
std::shared_ptr<const FeatureMap> one_hot_features(const TabularMdp& mdp);

/**
 * Member of the function class F: either a table over (x, a) or w^T phi(x, a).
 * Optionally carries a bound |Q| <= value_bound that fitted values are clipped to.
 */
class QFunction {
public:
    enum class Kind { Tabular, Linear };

    static QFunction tabular(int num_states, int num_actions, double init = 0.0);
    static QFunction tabular(int num_states, int num_actions, std::vector<double> values);
    /// Entries uniform on [-scale, scale].
    static QFunction random_tabular(int num_states, int num_actions, double scale, Rng& rng);
    static QFunction linear(std::shared_ptr<const FeatureMap> features, Eigen::VectorXd weights);
    static QFunction linear(std::shared_ptr<const FeatureMap> features);

    Kind kind() const { return kind_; }
    bool is_tabular() const { return kind_ == Kind::Tabular; }
    int num_states() const { return num_states_; }
    int num_actions() const { return num_actions_; }

    double operator()(StateId x, ActionId a) const;
    /// min_a Q(x, a)
    double min_value(StateId x) const;
    /// sum_a pi(a|x) Q(x, a)
    double expected_value(StateId x, std::span<const double> action_probs) const;

    /// Q over all pairs, row-major (x, a).
    std::vector<double> values() const;
    const std::vector<double>& table() const { return table_; }
    const Eigen::VectorXd& weights() const { return weights_; }
    const std::shared_ptr<const FeatureMap>& features() const { return features_; }

    const std::optional<double>& value_bound() const { return value_bound_; }
    QFunction& set_value_bound(std::optional<double> bound);

private:
    QFunction() = default;

    Kind kind_ = Kind::Tabular;
    int num_states_ = 0;
    int num_actions_ = 0;
    std::vector<double> table_;
    std::shared_ptr<const FeatureMap> features_;
    Eigen::VectorXd weights_;
    std::optional<double> value_bound_;
};

/**
 * Least-squares regression onto F for a fixed set of inputs. The design (cell counts
 * or the factorized normal matrix) is built once so iterative methods can refit
 * against new targets cheaply.
 *
 * Tabular: each visited cell gets the mean of its targets, unvisited cells keep the
 * template's value. Linear: solves (Phi^T Phi + ridge I) w = Phi^T y.
 */
class LeastSquaresFit {
public:
    /// Throws NumericalError if ridge == 0 and the normal equations are singular.
    LeastSquaresFit(std::span<const StateAction> inputs, const QFunction& model, double ridge);

    QFunction fit(std::span<const double> targets, const QFunction& prior) const;
    /// Same fit from per-pair target sums (indexed x * |A| + a); unvisited pairs are ignored.
    QFunction fit_pair_sums(std::span<const double> sums, const QFunction& prior) const;
    std::size_t num_inputs() const { return inputs_.size(); }

private:
    std::vector<int> pair_of_input_;
    std::vector<StateAction> inputs_;
    std::vector<int> cells_;              // distinct pairs present in the inputs
    std::vector<double> cell_count_;      // indexed by pair
    Eigen::LDLT<Eigen::MatrixXd> normal_;  // linear models only
    QFunction::Kind kind_;
    int num_states_;
    int num_actions_;
};

QFunction fit_least_squares(std::span<const StateAction> inputs, std::span<const double> targets,
                            const QFunction& template_q, double ridge);

double q_value(const QFunction& q, StateId x, ActionId a);

/// argmin_a Q(x, a) per state; ties go to the lowest action index.
DeterministicPolicy greedy_policy(const QFunction& q);

/// Mean squared error of q on (inputs, targets).
double training_mse(const QFunction& q, std::span<const StateAction> inputs,
                    std::span<const double> targets);

}  // namespace cbpl
