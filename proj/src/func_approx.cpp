#include "cbpl/func_approx.hpp"

#include "cbpl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cbpl {

FeatureMap::FeatureMap(int num_states, int num_actions, Eigen::MatrixXd rows)
    : num_states_(num_states), num_actions_(num_actions), rows_(std::move(rows)) {
    if (rows_.rows() != static_cast<Eigen::Index>(num_states) * num_actions)
        throw std::invalid_argument("FeatureMap: need one row per state-action pair");
    if (rows_.cols() < 1) throw std::invalid_argument("FeatureMap: feature dimension must be >= 1");
    if (!rows_.allFinite()) throw std::invalid_argument("FeatureMap: non-finite feature");
}

std::shared_ptr<const FeatureMap> one_hot_features(int num_states, int num_actions) {
    const Eigen::Index k = static_cast<Eigen::Index>(num_states) * num_actions;
    return std::make_shared<const FeatureMap>(num_states, num_actions,
                                              Eigen::MatrixXd::Identity(k, k));
}

std::shared_ptr<const FeatureMap> one_hot_features(const TabularMdp& mdp) {
    return one_hot_features(mdp.num_states(), mdp.num_actions());
}

// ---------------------------------------------------------------------------

QFunction QFunction::tabular(int num_states, int num_actions, double init) {
    return tabular(num_states, num_actions,
                   std::vector<double>(static_cast<std::size_t>(num_states) * num_actions, init));
}

QFunction QFunction::tabular(int num_states, int num_actions, std::vector<double> values) {
    if (num_states < 1 || num_actions < 1) throw std::invalid_argument("QFunction: empty shape");
    if (values.size() != static_cast<std::size_t>(num_states) * num_actions)
        throw std::invalid_argument("QFunction: table size does not match shape");
    QFunction q;
    q.kind_ = Kind::Tabular;
    q.num_states_ = num_states;
    q.num_actions_ = num_actions;
    q.table_ = std::move(values);
    return q;
}

QFunction QFunction::random_tabular(int num_states, int num_actions, double scale, Rng& rng) {
    std::vector<double> values(static_cast<std::size_t>(num_states) * num_actions);
    for (double& v : values) v = scale * (2.0 * rng.uniform() - 1.0);
    return tabular(num_states, num_actions, std::move(values));
}

QFunction QFunction::linear(std::shared_ptr<const FeatureMap> features, Eigen::VectorXd weights) {
    if (!features) throw std::invalid_argument("QFunction: null feature map");
    if (weights.size() != features->dim())
        throw std::invalid_argument("QFunction: weight length must equal feature dimension");
    QFunction q;
    q.kind_ = Kind::Linear;
    q.num_states_ = features->num_states();
    q.num_actions_ = features->num_actions();
    q.features_ = std::move(features);
    q.weights_ = std::move(weights);
    return q;
}

QFunction QFunction::linear(std::shared_ptr<const FeatureMap> features) {
    const int k = features ? features->dim() : 0;
    return linear(std::move(features), Eigen::VectorXd::Zero(k));
}

double QFunction::operator()(StateId x, ActionId a) const {
    double v = kind_ == Kind::Tabular ? table_[static_cast<std::size_t>(x) * num_actions_ + a]
                                      : features_->phi(x, a).dot(weights_);
    if (value_bound_ && kind_ == Kind::Linear) v = std::clamp(v, -*value_bound_, *value_bound_);
    return v;
}

double QFunction::min_value(StateId x) const {
    double best = (*this)(x, 0);
    for (ActionId a = 1; a < num_actions_; ++a) best = std::min(best, (*this)(x, a));
    return best;
}

double QFunction::expected_value(StateId x, std::span<const double> action_probs) const {
    double v = 0.0;
    for (ActionId a = 0; a < num_actions_; ++a)
        if (action_probs[a] != 0.0) v += action_probs[a] * (*this)(x, a);
    return v;
}

std::vector<double> QFunction::values() const {
    if (kind_ == Kind::Tabular) return table_;
    std::vector<double> out(static_cast<std::size_t>(num_states_) * num_actions_);
    for (StateId x = 0; x < num_states_; ++x)
        for (ActionId a = 0; a < num_actions_; ++a)
            out[static_cast<std::size_t>(x) * num_actions_ + a] = (*this)(x, a);
    return out;
}

QFunction& QFunction::set_value_bound(std::optional<double> bound) {
    if (bound && !(*bound >= 0.0)) throw std::invalid_argument("QFunction: value bound must be >= 0");
    value_bound_ = bound;
    if (bound && kind_ == Kind::Tabular)
        for (double& v : table_) v = std::clamp(v, -*bound, *bound);
    return *this;
}

// ---------------------------------------------------------------------------

LeastSquaresFit::LeastSquaresFit(std::span<const StateAction> inputs, const QFunction& model,
                                 double ridge)
    : inputs_(inputs.begin(), inputs.end()),
      kind_(model.kind()),
      num_states_(model.num_states()),
      num_actions_(model.num_actions()) {
    if (inputs.empty()) throw std::invalid_argument("least squares: no inputs");
    if (!(ridge >= 0.0)) throw std::invalid_argument("least squares: ridge must be >= 0");
    const auto pairs = static_cast<std::size_t>(num_states_) * num_actions_;
    cell_count_.assign(pairs, 0.0);
    pair_of_input_.reserve(inputs.size());
    for (const auto& in : inputs) {
        if (in.x < 0 || in.x >= num_states_ || in.a < 0 || in.a >= num_actions_)
            throw std::invalid_argument("least squares: input outside the model's state-action space");
        const int p = in.x * num_actions_ + in.a;
        pair_of_input_.push_back(p);
        if (cell_count_[p] == 0.0) cells_.push_back(p);
        cell_count_[p] += 1.0;
    }
    std::sort(cells_.begin(), cells_.end());

    if (kind_ == QFunction::Kind::Linear) {
        const auto& phi = model.features()->matrix();
        const Eigen::Index k = phi.cols();
        Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(k, k);
        for (int p : cells_) gram.noalias() += cell_count_[p] * phi.row(p).transpose() * phi.row(p);
        gram.diagonal().array() += ridge;
        normal_.compute(gram);
        const auto d = normal_.vectorD().cwiseAbs();
        const bool singular = normal_.info() != Eigen::Success || !normal_.isPositive() ||
                              d.minCoeff() <= 1e-12 * std::max(1.0, d.maxCoeff());
        if (singular)
            throw NumericalError(
                "least squares: singular normal equations; use a positive ridge");
    }
}

QFunction LeastSquaresFit::fit(std::span<const double> targets, const QFunction& prior) const {
    if (targets.size() != inputs_.size())
        throw std::invalid_argument("least squares: targets and inputs differ in length");
    std::vector<double> sums(cell_count_.size(), 0.0);
    for (std::size_t i = 0; i < targets.size(); ++i) sums[pair_of_input_[i]] += targets[i];
    return fit_pair_sums(sums, prior);
}

QFunction LeastSquaresFit::fit_pair_sums(std::span<const double> sums, const QFunction& prior) const {
    if (sums.size() != cell_count_.size())
        throw std::invalid_argument("least squares: need one target sum per state-action pair");
    if (prior.kind() != kind_ || prior.num_states() != num_states_ ||
        prior.num_actions() != num_actions_)
        throw std::invalid_argument("least squares: prior does not match the design");

    if (kind_ == QFunction::Kind::Tabular) {
        auto values = prior.table();
        for (int p : cells_) values[p] = sums[p] / cell_count_[p];
        auto q = QFunction::tabular(num_states_, num_actions_, std::move(values));
        q.set_value_bound(prior.value_bound());
        return q;
    }
    const auto& phi = prior.features()->matrix();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(phi.cols());
    for (int p : cells_) rhs.noalias() += sums[p] * phi.row(p).transpose();
    auto q = QFunction::linear(prior.features(), normal_.solve(rhs));
    q.set_value_bound(prior.value_bound());
    return q;
}

QFunction fit_least_squares(std::span<const StateAction> inputs, std::span<const double> targets,
                            const QFunction& template_q, double ridge) {
    if (inputs.size() != targets.size())
        throw std::invalid_argument("least squares: targets and inputs differ in length");
    return LeastSquaresFit(inputs, template_q, ridge).fit(targets, template_q);
}

double q_value(const QFunction& q, StateId x, ActionId a) {
    if (x < 0 || x >= q.num_states() || a < 0 || a >= q.num_actions())
        throw std::invalid_argument("q_value: index out of range");
    return q(x, a);
}

DeterministicPolicy greedy_policy(const QFunction& q) {
    DeterministicPolicy pi{std::vector<ActionId>(static_cast<std::size_t>(q.num_states()), 0)};
    for (StateId x = 0; x < q.num_states(); ++x) {
        double best = q(x, 0);
        for (ActionId a = 1; a < q.num_actions(); ++a) {
            const double v = q(x, a);
            if (v < best) {
                best = v;
                pi.action_of[x] = a;
            }
        }
    }
    return pi;
}

double training_mse(const QFunction& q, std::span<const StateAction> inputs,
                    std::span<const double> targets) {
    if (inputs.empty()) return 0.0;
    double sse = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const double r = q(inputs[i].x, inputs[i].a) - targets[i];
        sse += r * r;
    }
    return sse / static_cast<double>(inputs.size());
}

}  // namespace cbpl
