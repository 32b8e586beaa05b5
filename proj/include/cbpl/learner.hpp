#pragma once

#include "cbpl/batch_rl.hpp"
#include "cbpl/dataset.hpp"
#include "cbpl/exact.hpp"
#include "cbpl/func_approx.hpp"
#include "cbpl/mdp.hpp"
#include "cbpl/online.hpp"
#include "cbpl/policy.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace cbpl {

enum class SubroutineFlavor { Fitted, Lspi, Exact };

/// Direction of the EG step. Ascent feeds -z to the update so mass moves toward
/// violated constraints; Literal feeds z as written.
enum class DualSign { Ascent, Literal };

struct RoundRecord;

struct LearnerConfig {
    double budget = 30.0;
    double eta = 50.0;
    double omega = 0.05;
    std::vector<double> tau;
    int k_fqi = 100;
    int k_fqe = 100;
    /// 0 selects ceil(16 B^2 G_bar^2 log(m+1) / omega^2).
    long max_rounds = 0;
    double ridge = 1e-8;
    std::uint64_t seed = 0;
    DualFlavor dual = DualFlavor::EgSimplex;
    SubroutineFlavor flavor = SubroutineFlavor::Fitted;
    DualSign sign = DualSign::Ascent;
    /// Discount used when no MDP is supplied.
    double gamma = 0.95;
    /// Overrides the computed G_bar when set.
    std::optional<double> g_bar;
    /// Fitted flavor: Q_0 and the function class. Defaults to a zero table.
    std::optional<QFunction> q_init;
    /// Lspi flavor: feature map. Defaults to one-hot features.
    std::shared_ptr<const FeatureMap> features;
    LspiOptions lspi;
    /// Worker threads for the m + 1 evaluation channels and grid points.
    int jobs = 1;
    /// When false the trace keeps only the final record; the observer still sees all.
    bool keep_records = true;
    std::function<void(const RoundRecord&)> observer;

    /// Throws ConfigError on invalid settings.
    void validate(int num_constraints) const;
};

/// Best-response and evaluation subroutines of the game.
class Subroutines {
public:
    virtual ~Subroutines() = default;
    /// Policy minimizing C + multipliers^T G.
    virtual DeterministicPolicy best_response(std::span<const double> multipliers) = 0;
    /// Estimated C(pi), G(pi).
    virtual PolicyValues evaluate(const DeterministicPolicy& policy) = 0;
};

/// FQI best responses and FQE evaluations on a dataset.
class FittedSubroutines final : public Subroutines {
public:
    FittedSubroutines(const Dataset& dataset, const LearnerConfig& config, const TabularMdp* mdp);
    DeterministicPolicy best_response(std::span<const double> multipliers) override;
    PolicyValues evaluate(const DeterministicPolicy& policy) override;

private:
    FittedSolver solver_;
    std::vector<double> chi_;
    int k_fqi_;
    int k_fqe_;
    int jobs_;
};

/// LSPI best responses and fixed-policy LSTDQ evaluations.
class LspiSubroutines final : public Subroutines {
public:
    LspiSubroutines(const Dataset& dataset, const LearnerConfig& config, const TabularMdp* mdp,
                    int num_states, int num_actions);
    DeterministicPolicy best_response(std::span<const double> multipliers) override;
    PolicyValues evaluate(const DeterministicPolicy& policy) override;

private:
    const Dataset& dataset_;
    std::shared_ptr<const FeatureMap> features_;
    std::vector<double> chi_;
    LspiOptions options_;
    double gamma_;
};

/// Exact best responses and exact values of the true MDP.
class ExactSubroutines final : public Subroutines {
public:
    explicit ExactSubroutines(const TabularMdp& mdp) : solver_(mdp) {}
    DeterministicPolicy best_response(std::span<const double> multipliers) override {
        return solver_.best_response(multipliers);
    }
    PolicyValues evaluate(const DeterministicPolicy& policy) override {
        return solver_.evaluate(policy).values;
    }

private:
    PolicyIterationSolver solver_;
};

struct RoundRecord {
    long round;
    /// lambda_t played in this round.
    std::vector<double> lambda;
    /// Running mean of lambda_1..lambda_t.
    std::vector<double> lambda_hat;
    /// Estimates of this round's best response pi_t.
    double member_cost;
    std::vector<double> member_constraints;
    /// Estimates of the mixture pi_hat_t (means over members so far).
    double mixture_cost;
    std::vector<double> mixture_constraints;
    double l_max;
    double l_min;
    double gap;
};

enum class Termination { Converged, MaxRounds };

struct RunTrace {
    std::vector<RoundRecord> records;
    Termination termination = Termination::MaxRounds;
    long max_rounds = 0;
    double g_bar = 0.0;
    double eta = 0.0;

    bool converged() const { return termination == Termination::Converged; }
};

struct LearnResult {
    MixturePolicy mixture;
    RunTrace trace;
    /// Best response to the final lambda_hat (evaluation-only, not in the mixture).
    DeterministicPolicy pi_tilde;
};

/// C + B max(0, max_i (G_i - tau_i)): maximum of the Lagrangian over the augmented
/// l1 sphere of radius B.
double lagrangian_max(double c_hat, std::span<const double> g_hat, std::span<const double> tau,
                      double budget);
/// C + B ||max(0, G - tau)||_2: maximum over the nonnegative part of the l2 ball.
double lagrangian_max_ball(double c_hat, std::span<const double> g_hat,
                           std::span<const double> tau, double budget);

struct LagrangianMin {
    double value;
    DeterministicPolicy policy;
    PolicyValues estimates;
};

/// Best response to lambda_hat and its Lagrangian C(pi) + lambda^T (G(pi) - tau).
LagrangianMin lagrangian_min(Subroutines& subroutines, const DualVector& lambda_hat,
                             std::span<const double> tau);

/// The primal-dual game against arbitrary subroutines. Estimates of each distinct
/// member are cached, so a policy is evaluated at most once per run.
LearnResult run_game(Subroutines& subroutines, const LearnerConfig& config, int num_constraints,
                     double g_bar);

/// Algorithm entry point: builds the configured subroutines and runs the game.
/// The MDP, when given, supplies gamma and chi; the Exact flavor requires it.
LearnResult learn(const Dataset& dataset, const LearnerConfig& config,
                  const TabularMdp* mdp = nullptr);

/// max_i max over samples of g_i / (1 - gamma).
double g_bar_from_dataset(const Dataset& dataset, double gamma);
/// max_i max(sup_pi G_i(pi), tau_i).
double g_bar_exact(const TabularMdp& mdp, std::span<const double> tau);

struct RegularizedResult {
    std::vector<double> lambda;
    DeterministicPolicy policy;
    PolicyValues estimates;
};

/// One best-response solve on c + lambda^T g with certification of the result.
RegularizedResult regularized_one_shot(const Dataset& dataset, std::span<const double> lambda,
                                       const LearnerConfig& config,
                                       const TabularMdp* mdp = nullptr);

/// regularized_one_shot for every grid point, config.jobs at a time; results are in
/// grid order.
std::vector<RegularizedResult> grid_search(const Dataset& dataset,
                                           const std::vector<std::vector<double>>& grid,
                                           const LearnerConfig& config,
                                           const TabularMdp* mdp = nullptr);

/// Member with the lowest estimated cost among those with estimated G <= tau;
/// if none is feasible, the member with the smallest worst violation.
std::size_t derandomize(const MixturePolicy& mixture, std::span<const double> tau);

}  // namespace cbpl
