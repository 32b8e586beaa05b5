#pragma once

#include "cbpl/dataset.hpp"
#include "cbpl/func_approx.hpp"
#include "cbpl/policy.hpp"

#include <Eigen/Dense>

#include <span>
#include <string_view>
#include <vector>

namespace cbpl {

/// Which per-sample scalar cost a solver regresses on: c, g_i, or c + lambda^T g.
class CostSelector {
public:
    enum class Mode { Primary, Constraint, Scalarized };

    static CostSelector primary() { return CostSelector(Mode::Primary, 0, {}); }
    static CostSelector constraint(int index);
    static CostSelector scalarized(std::vector<double> lambda);

    Mode mode() const { return mode_; }
    int index() const { return index_; }
    const std::vector<double>& lambda() const { return lambda_; }

    double operator()(double c, std::span<const double> g) const;
    double operator()(const TransitionSample& s) const { return (*this)(s.c, s.g); }

    /// Throws std::invalid_argument if the selector refers to constraints the data lacks.
    void check(int num_constraints) const;

private:
    CostSelector(Mode mode, int index, std::vector<double> lambda)
        : mode_(mode), index_(index), lambda_(std::move(lambda)) {}

    Mode mode_;
    int index_;
    std::vector<double> lambda_;
};

/// "c", "g:i" (1-based constraint index) or "scalarized:l1,l2,...".
CostSelector parse_cost_selector(std::string_view text);

struct FittedRun {
    QFunction q_final;
    /// Training-set mean squared error of each iterate against its own targets.
    std::vector<double> residuals;
    int K = 0;
};

/// Transitions that agree on (x, a, x', done, c, g), merged with a multiplicity. Fitted
/// updates only depend on these groups, so iterations cost O(distinct transitions).
struct SampleGroup {
    StateId x;
    ActionId a;
    StateId x_next;
    bool done;
    double c;
    std::vector<double> g;
    double count;
};

std::vector<SampleGroup> group_samples(const Dataset& dataset);

/**
 * FQE and FQI over one dataset and function class. The regression design is set up
 * once and reused, so repeated solves (one per round of the constrained learner) only
 * pay for the iterations.
 */
class FittedSolver {
public:
    /// q_init is Q_0 and fixes the function class. Throws NumericalError if the
    /// linear design is singular and ridge is 0.
    FittedSolver(const Dataset& dataset, QFunction q_init, double ridge, double gamma);

    /// Targets c + gamma sum_a' pi(a'|x') Q_{k-1}(x', a'); c alone at terminal transitions.
    FittedRun fqe(const StochasticPolicy& policy, const CostSelector& cost, int K) const;
    FittedRun fqe(const DeterministicPolicy& policy, const CostSelector& cost, int K) const;
    /// Targets c + gamma min_a' Q_{k-1}(x', a').
    FittedRun fqi(const CostSelector& cost, int K) const;

    /// sum_x chi(x) sum_a pi(a|x) Q(x, a); an empty chi means the dataset's empirical
    /// initial-state distribution.
    double initial_value(const QFunction& q, const StochasticPolicy& policy,
                         std::span<const double> chi = {}) const;
    double initial_value(const QFunction& q, const DeterministicPolicy& policy,
                         std::span<const double> chi = {}) const;

    int num_states() const { return q_init_.num_states(); }
    int num_actions() const { return q_init_.num_actions(); }
    int num_constraints() const { return num_constraints_; }
    double gamma() const { return gamma_; }

private:
    FittedRun iterate(const CostSelector& cost, int K, const StochasticPolicy* policy) const;

    std::vector<SampleGroup> groups_;
    LeastSquaresFit design_;
    QFunction q_init_;
    std::vector<double> empirical_chi_;
    double gamma_;
    double total_count_;
    int num_constraints_;
};

struct FqeResult {
    double estimate;
    FittedRun run;
};

/// Fitted Q Evaluation. chi as in FittedSolver::initial_value.
FqeResult fqe(const Dataset& dataset, const DeterministicPolicy& policy, const CostSelector& cost,
              int K, const QFunction& q_init, double ridge, double gamma,
              std::span<const double> chi = {});
FqeResult fqe(const Dataset& dataset, const StochasticPolicy& policy, const CostSelector& cost,
              int K, const QFunction& q_init, double ridge, double gamma,
              std::span<const double> chi = {});

struct FqiResult {
    DeterministicPolicy policy;
    FittedRun run;
};

/// Fitted Q Iteration; the policy is greedy with respect to Q_K.
FqiResult fqi(const Dataset& dataset, const CostSelector& cost, int K, const QFunction& q_init,
              double ridge, double gamma);

/// One LSTDQ solve: the successor action is argmin_a' w^T phi(x', a'), terminal
/// transitions contribute phi phi^T, and w' = (A + ridge I)^{-1} b.
Eigen::VectorXd lstdq(const Dataset& dataset, const Eigen::VectorXd& w, const CostSelector& cost,
                      const FeatureMap& features, double gamma, double ridge);
/// LSTDQ for a fixed policy: the successor action is pi(x').
Eigen::VectorXd lstdq_policy(const Dataset& dataset, const DeterministicPolicy& policy,
                             const CostSelector& cost, const FeatureMap& features, double gamma,
                             double ridge);

struct LspiOptions {
    double eps_stop = 1e-6;
    int max_iters = 50;
    double ridge = 1e-8;
};

struct LspiResult {
    Eigen::VectorXd w;
    int iterations = 0;
    bool converged = false;
};

/// Iterates LSTDQ from w = 0 until ||w' - w||_2 <= eps_stop or max_iters solves.
LspiResult lspi(const Dataset& dataset, const CostSelector& cost, const FeatureMap& features,
                double gamma, const LspiOptions& options = {});

/// Greedy policy of w^T phi.
DeterministicPolicy greedy_policy(const FeatureMap& features, const Eigen::VectorXd& w);

}  // namespace cbpl
