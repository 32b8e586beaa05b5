#include "cbpl/learner.hpp"

#include "cbpl/errors.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace cbpl {

void LearnerConfig::validate(int num_constraints) const {
    auto fail = [](const std::string& what) { throw ConfigError(what); };
    if (!(budget > 0.0) || !std::isfinite(budget)) fail("B must be > 0");
    if (!(eta > 0.0) || !std::isfinite(eta)) fail("eta must be > 0");
    if (!(omega > 0.0)) fail("omega must be > 0");
    if (tau.size() != static_cast<std::size_t>(num_constraints))
        fail("tau has " + std::to_string(tau.size()) + " entries but the data has " +
             std::to_string(num_constraints) + " constraints");
    for (double t : tau)
        if (!(t >= 0.0) || !std::isfinite(t)) fail("tau entries must be finite and >= 0");
    if (k_fqi < 1 || k_fqe < 1) fail("iteration counts must be >= 1");
    if (max_rounds < 0) fail("rounds must be >= 0");
    if (!(ridge >= 0.0)) fail("ridge must be >= 0");
    if (!(gamma > 0.0 && gamma < 1.0)) fail("gamma must lie in (0, 1)");
    if (g_bar && !(*g_bar > 0.0)) fail("G_bar must be > 0");
    if (jobs < 1) fail("jobs must be >= 1");
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> chi_of(const TabularMdp* mdp) {
    return mdp ? std::vector<double>(mdp->initial_dist().begin(), mdp->initial_dist().end())
               : std::vector<double>{};
}

QFunction default_q_init(const Dataset& dataset, const LearnerConfig& config, const TabularMdp* mdp) {
    if (config.q_init) return *config.q_init;
    const int S = mdp ? mdp->num_states() : dataset.state_extent();
    const int A = mdp ? mdp->num_actions() : dataset.action_extent();
    return QFunction::tabular(S, A, 0.0);
}

}  // namespace

FittedSubroutines::FittedSubroutines(const Dataset& dataset, const LearnerConfig& config,
                                     const TabularMdp* mdp)
    : solver_(dataset, default_q_init(dataset, config, mdp), config.ridge,
              mdp ? mdp->gamma() : config.gamma),
      chi_(chi_of(mdp)),
      k_fqi_(config.k_fqi),
      k_fqe_(config.k_fqe),
      jobs_(config.jobs) {}

DeterministicPolicy FittedSubroutines::best_response(std::span<const double> multipliers) {
    auto run = solver_.fqi(CostSelector::scalarized({multipliers.begin(), multipliers.end()}), k_fqi_);
    return greedy_policy(run.q_final);
}

PolicyValues FittedSubroutines::evaluate(const DeterministicPolicy& policy) {
    const int m = solver_.num_constraints();
    std::vector<double> channel(static_cast<std::size_t>(m) + 1);
    detail::parallel_for(channel.size(), jobs_, [&](std::size_t i) {
        const auto cost = i == 0 ? CostSelector::primary() : CostSelector::constraint(static_cast<int>(i) - 1);
        const auto run = solver_.fqe(policy, cost, k_fqe_);
        channel[i] = solver_.initial_value(run.q_final, policy, chi_);
    });
    return {channel[0], {channel.begin() + 1, channel.end()}};
}

LspiSubroutines::LspiSubroutines(const Dataset& dataset, const LearnerConfig& config,
                                 const TabularMdp* mdp, int num_states, int num_actions)
    : dataset_(dataset),
      features_(config.features ? config.features : one_hot_features(num_states, num_actions)),
      chi_(mdp ? chi_of(mdp) : dataset.initial_state_distribution(num_states)),
      options_(config.lspi),
      gamma_(mdp ? mdp->gamma() : config.gamma) {
    options_.ridge = config.ridge;
    if (features_->num_states() != num_states || features_->num_actions() != num_actions)
        throw ConfigError("feature map shape does not match the state-action space");
}

DeterministicPolicy LspiSubroutines::best_response(std::span<const double> multipliers) {
    const auto result = lspi(dataset_, CostSelector::scalarized({multipliers.begin(), multipliers.end()}),
                             *features_, gamma_, options_);
    return greedy_policy(*features_, result.w);
}

PolicyValues LspiSubroutines::evaluate(const DeterministicPolicy& policy) {
    const int m = dataset_.num_constraints();
    auto value = [&](const CostSelector& cost) {
        const auto w = lstdq_policy(dataset_, policy, cost, *features_, gamma_, options_.ridge);
        double v = 0.0;
        for (StateId x = 0; x < features_->num_states(); ++x)
            if (chi_[x] != 0.0) v += chi_[x] * features_->phi(x, policy(x)).dot(w);
        return v;
    };
    PolicyValues out{value(CostSelector::primary()), {}};
    for (int i = 0; i < m; ++i) out.constraints.push_back(value(CostSelector::constraint(i)));
    return out;
}

// ---------------------------------------------------------------------------

double lagrangian_max(double c_hat, std::span<const double> g_hat, std::span<const double> tau,
                      double budget) {
    if (g_hat.size() != tau.size()) throw std::invalid_argument("lagrangian_max: G and tau differ in length");
    double worst = 0.0;
    for (std::size_t i = 0; i < g_hat.size(); ++i) worst = std::max(worst, g_hat[i] - tau[i]);
    return c_hat + budget * worst;
}

double lagrangian_max_ball(double c_hat, std::span<const double> g_hat, std::span<const double> tau,
                           double budget) {
    if (g_hat.size() != tau.size()) throw std::invalid_argument("lagrangian_max: G and tau differ in length");
    double sq = 0.0;
    for (std::size_t i = 0; i < g_hat.size(); ++i) {
        const double v = std::max(0.0, g_hat[i] - tau[i]);
        sq += v * v;
    }
    return c_hat + budget * std::sqrt(sq);
}

LagrangianMin lagrangian_min(Subroutines& subroutines, const DualVector& lambda_hat,
                             std::span<const double> tau) {
    const auto multipliers = lambda_hat.multipliers();
    if (multipliers.size() != tau.size()) throw std::invalid_argument("lagrangian_min: lambda and tau differ in length");
    auto policy = subroutines.best_response(multipliers);
    auto estimates = subroutines.evaluate(policy);
    double value = estimates.cost;
    for (std::size_t i = 0; i < tau.size(); ++i) value += multipliers[i] * (estimates.constraints[i] - tau[i]);
    return {value, std::move(policy), std::move(estimates)};
}

namespace {

// Memoizes evaluations so each distinct policy is evaluated once per run.
class CachedSubroutines final : public Subroutines {
public:
    explicit CachedSubroutines(Subroutines& inner) : inner_(inner) {}
    DeterministicPolicy best_response(std::span<const double> multipliers) override {
        return inner_.best_response(multipliers);
    }
    PolicyValues evaluate(const DeterministicPolicy& policy) override {
        auto it = cache_.find(policy.action_of);
        if (it == cache_.end()) it = cache_.emplace(policy.action_of, inner_.evaluate(policy)).first;
        return it->second;
    }

private:
    Subroutines& inner_;
    std::map<std::vector<ActionId>, PolicyValues> cache_;
};

DualVector average(const std::vector<double>& sum, double count, const DualVector& like) {
    std::vector<double> mean(sum.size());
    for (std::size_t i = 0; i < sum.size(); ++i) mean[i] = sum[i] / count;
    if (like.flavor() == DualFlavor::EgSimplex) {
        // Renormalize away rounding so the mean stays exactly on the simplex.
        double total = 0.0;
        for (double v : mean) total += v;
        for (double& v : mean) v *= like.budget() / total;
    }
    return DualVector(std::move(mean), like.budget(), like.flavor());
}

}  // namespace

LearnResult run_game(Subroutines& subroutines, const LearnerConfig& config, int num_constraints,
                     double g_bar) {
    config.validate(num_constraints);
    const double B = config.budget;
    const auto& tau = config.tau;
    const bool eg = config.dual == DualFlavor::EgSimplex;
    const long max_rounds =
        config.max_rounds > 0 ? config.max_rounds : theory_rounds(B, g_bar, num_constraints, config.omega);

    CachedSubroutines cached(subroutines);
    LearnResult result;
    result.trace.max_rounds = max_rounds;
    result.trace.g_bar = g_bar;
    result.trace.eta = config.eta;

    DualVector lambda = eg ? eg_init(num_constraints, B) : ogd_init(num_constraints, B);
    std::vector<double> lambda_sum(lambda.size(), 0.0);
    std::map<std::vector<ActionId>, std::size_t> member_index;
    std::vector<double> member_count;
    auto& mixture = result.mixture;
    double cost_sum = 0.0;
    std::vector<double> constraint_sum(static_cast<std::size_t>(num_constraints), 0.0);

    for (long t = 1; t <= max_rounds; ++t) {
        auto policy = cached.best_response(lambda.multipliers());
        const auto estimates = cached.evaluate(policy);
        auto [it, inserted] = member_index.emplace(policy.action_of, mixture.members.size());
        if (inserted) {
            mixture.members.push_back(policy);
            mixture.member_costs.push_back(estimates.cost);
            mixture.member_constraints.push_back(estimates.constraints);
            member_count.push_back(0.0);
        }
        member_count[it->second] += 1.0;

        cost_sum += estimates.cost;
        for (int i = 0; i < num_constraints; ++i) constraint_sum[i] += estimates.constraints[i];
        for (std::size_t i = 0; i < lambda.size(); ++i) lambda_sum[i] += lambda[i];

        const double td = static_cast<double>(t);
        RoundRecord rec;
        rec.round = t;
        rec.lambda = lambda.coords();
        const DualVector lambda_hat = average(lambda_sum, td, lambda);
        rec.lambda_hat = lambda_hat.coords();
        rec.member_cost = estimates.cost;
        rec.member_constraints = estimates.constraints;
        rec.mixture_cost = cost_sum / td;
        rec.mixture_constraints.resize(constraint_sum.size());
        for (std::size_t i = 0; i < constraint_sum.size(); ++i) rec.mixture_constraints[i] = constraint_sum[i] / td;
        rec.l_max = eg ? lagrangian_max(rec.mixture_cost, rec.mixture_constraints, tau, B)
                       : lagrangian_max_ball(rec.mixture_cost, rec.mixture_constraints, tau, B);
        auto lmin = lagrangian_min(cached, lambda_hat, tau);
        rec.l_min = lmin.value;
        rec.gap = rec.l_max - rec.l_min;
        result.pi_tilde = std::move(lmin.policy);

        const bool done = rec.gap <= config.omega;
        if (config.observer) config.observer(rec);
        if (config.keep_records || done || t == max_rounds) result.trace.records.push_back(std::move(rec));
        if (done) {
            result.trace.termination = Termination::Converged;
            break;
        }

        DualLoss loss = eg ? eg_loss(estimates.constraints, tau) : ogd_loss(estimates.constraints, tau);
        const bool negate = eg ? config.sign == DualSign::Ascent : config.sign == DualSign::Literal;
        if (negate)
            for (double& z : loss.z) z = -z;
        lambda = eg ? eg_update(lambda, loss, config.eta) : ogd_update(lambda, loss, config.eta);
    }

    double total = 0.0;
    for (double n : member_count) total += n;
    for (double n : member_count) mixture.weights.push_back(n / total);
    return result;
}

double g_bar_from_dataset(const Dataset& dataset, double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
    double g = 0.0;
    for (const auto& s : dataset.samples())
        for (double v : s.g) g = std::max(g, std::abs(v));
    return g / (1.0 - gamma);
}

double g_bar_exact(const TabularMdp& mdp, std::span<const double> tau) {
    double g = 0.0;
    for (int i = 0; i < mdp.num_constraints(); ++i) {
        g = std::max(g, max_constraint_value(mdp, i));
        if (i < static_cast<int>(tau.size())) g = std::max(g, tau[i]);
    }
    return g;
}

namespace {

void check_mdp(const Dataset& dataset, const LearnerConfig& config, const TabularMdp* mdp) {
    if (config.flavor == SubroutineFlavor::Exact && !mdp)
        throw ConfigError("the exact flavor needs the true MDP");
    if (!mdp) return;
    if (mdp->num_constraints() != dataset.num_constraints())
        throw ConfigError("dataset and MDP disagree on the number of constraints");
    if (dataset.state_extent() > mdp->num_states() || dataset.action_extent() > mdp->num_actions())
        throw ConfigError("dataset refers to states or actions outside the MDP");
}

std::unique_ptr<Subroutines> make_subroutines(const Dataset& dataset, const LearnerConfig& config,
                                              const TabularMdp* mdp) {
    switch (config.flavor) {
    case SubroutineFlavor::Exact: return std::make_unique<ExactSubroutines>(*mdp);
    case SubroutineFlavor::Lspi: {
        const int S = mdp ? mdp->num_states() : dataset.state_extent();
        const int A = mdp ? mdp->num_actions() : dataset.action_extent();
        return std::make_unique<LspiSubroutines>(dataset, config, mdp, S, A);
    }
    case SubroutineFlavor::Fitted: break;
    }
    return std::make_unique<FittedSubroutines>(dataset, config, mdp);
}

}  // namespace

LearnResult learn(const Dataset& dataset, const LearnerConfig& config, const TabularMdp* mdp) {
    const int m = dataset.num_constraints();
    config.validate(m);
    check_mdp(dataset, config, mdp);
    if (dataset.empty() && config.flavor != SubroutineFlavor::Exact)
        throw ConfigError("empty dataset");
    const double g_bar = config.g_bar ? *config.g_bar
                         : mdp       ? g_bar_exact(*mdp, config.tau)
                                     : g_bar_from_dataset(dataset, config.gamma);
    auto subroutines = make_subroutines(dataset, config, mdp);
    return run_game(*subroutines, config, m, std::max(g_bar, std::numeric_limits<double>::min()));
}

RegularizedResult regularized_one_shot(const Dataset& dataset, std::span<const double> lambda,
                                       const LearnerConfig& config, const TabularMdp* mdp) {
    const int m = dataset.num_constraints();
    config.validate(m);
    check_mdp(dataset, config, mdp);
    if (lambda.size() != static_cast<std::size_t>(m))
        throw std::invalid_argument("regularization weights must have one entry per constraint");
    for (double l : lambda)
        if (!(l >= 0.0)) throw std::invalid_argument("regularization weights must be >= 0");
    auto subroutines = make_subroutines(dataset, config, mdp);
    RegularizedResult out;
    out.lambda.assign(lambda.begin(), lambda.end());
    out.policy = subroutines->best_response(lambda);
    out.estimates = subroutines->evaluate(out.policy);
    return out;
}

std::vector<RegularizedResult> grid_search(const Dataset& dataset,
                                           const std::vector<std::vector<double>>& grid,
                                           const LearnerConfig& config, const TabularMdp* mdp) {
    std::vector<RegularizedResult> results(grid.size());
    LearnerConfig inner = config;
    inner.jobs = 1;
    detail::parallel_for(grid.size(), config.jobs, [&](std::size_t k) {
        results[k] = regularized_one_shot(dataset, grid[k], inner, mdp);
    });
    return results;
}

std::size_t derandomize(const MixturePolicy& mixture, std::span<const double> tau) {
    if (mixture.size() == 0) throw std::invalid_argument("derandomize: empty mixture");
    std::size_t best = 0;
    bool best_feasible = false;
    double best_key = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < mixture.size(); ++k) {
        double violation = 0.0;
        for (std::size_t i = 0; i < tau.size(); ++i)
            violation = std::max(violation, mixture.member_constraints[k][i] - tau[i]);
        const bool feasible = violation <= 0.0;
        const double key = feasible ? mixture.member_costs[k] : violation;
        if ((feasible && !best_feasible) || (feasible == best_feasible && key < best_key)) {
            best = k;
            best_feasible = feasible;
            best_key = key;
        }
    }
    return best;
}

}  // namespace cbpl
