#include "cli.hpp"

#include "cbpl/batch_rl.hpp"
#include "cbpl/dataset.hpp"
#include "cbpl/errors.hpp"
#include "cbpl/exact.hpp"
#include "cbpl/exact_constrained.hpp"
#include "cbpl/io.hpp"
#include "cbpl/learner.hpp"
#include "cbpl/mdp.hpp"
#include "cbpl/ope.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace cbpl::cli {

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<double> parse_reals(const std::string& text, const char* what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string field;
    while (std::getline(ss, field, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(field, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != field.size())
            throw ConfigError(std::string(what) + ": not a number: '" + field + "'");
        out.push_back(v);
    }
    if (out.empty()) throw ConfigError(std::string(what) + ": empty list");
    return out;
}

TabularMdp load_map(const std::string& map, double gamma) {
    if (map == "8x8") return build_frozenlake(standard_layout_8x8(), gamma);
    if (map == "4x4") return build_frozenlake(standard_layout_4x4(), gamma);
    return build_frozenlake(load_layout(map), gamma);
}

// Fails before any work is done if the file could not be created later.
void check_writable(const std::string& path) {
    if (path.empty()) return;
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty() && !std::filesystem::is_directory(parent))
        throw ConfigError("output directory does not exist: " + parent.string());
}

StochasticPolicy as_stochastic(const AnyPolicy& policy, int num_actions) {
    if (const auto* det = std::get_if<DeterministicPolicy>(&policy))
        return StochasticPolicy::from_deterministic(*det, num_actions);
    if (const auto* sto = std::get_if<StochasticPolicy>(&policy)) return *sto;
    const auto& mix = std::get<MixturePolicy>(policy);
    if (mix.size() == 1) return StochasticPolicy::from_deterministic(mix.members[0], num_actions);
    throw ConfigError("a mixture policy cannot be used here; pick one member");
}

std::string values_header(int m) {
    std::string h = "policy,C";
    for (int i = 1; i <= m; ++i) h += ",G_" + std::to_string(i);
    return h + "\n";
}

std::string values_row(const std::string& name, const PolicyValues& v) {
    std::string row = name + "," + fmt(v.cost);
    for (double g : v.constraints) row += "," + fmt(g);
    return row + "\n";
}

// Options shared by the learner-facing subcommands.
struct LearnOptions {
    std::string tau = "0.1";
    double budget = 30.0;
    double eta = 50.0;
    double omega = 0.05;
    int iters_fqi = 100;
    int iters_fqe = 100;
    long rounds = 0;
    std::string dual = "eg";
    std::string flavor = "fitted";
    double ridge = 1e-8;
    int jobs = 1;
};

void add_learn_options(CLI::App& cmd, LearnOptions& o) {
    cmd.add_option("--tau", o.tau, "Constraint thresholds, comma separated")->capture_default_str();
    cmd.add_option("--B", o.budget, "l1 budget of the dual player")->capture_default_str();
    cmd.add_option("--eta", o.eta, "Dual learning rate")->capture_default_str();
    cmd.add_option("--omega", o.omega, "Duality-gap threshold")->capture_default_str();
    cmd.add_option("--iters-fqi", o.iters_fqi, "FQI iterations per best response")->capture_default_str();
    cmd.add_option("--iters-fqe", o.iters_fqe, "FQE iterations per evaluation")->capture_default_str();
    cmd.add_option("--rounds", o.rounds, "Round cap (0: theory default)")->capture_default_str();
    cmd.add_option("--dual", o.dual, "Dual update")->check(CLI::IsMember({"eg", "ogd"}))->capture_default_str();
    cmd.add_option("--flavor", o.flavor, "Subroutines")
        ->check(CLI::IsMember({"fitted", "lspi", "exact"}))
        ->capture_default_str();
    cmd.add_option("--ridge", o.ridge, "Ridge of the regressions")->capture_default_str();
    cmd.add_option("--jobs", o.jobs, "Worker threads")->capture_default_str();
}

LearnerConfig make_config(const LearnOptions& o, std::uint64_t seed, double gamma) {
    LearnerConfig c;
    c.budget = o.budget;
    c.eta = o.eta;
    c.omega = o.omega;
    c.tau = parse_reals(o.tau, "--tau");
    c.k_fqi = o.iters_fqi;
    c.k_fqe = o.iters_fqe;
    c.max_rounds = o.rounds;
    c.ridge = o.ridge;
    c.seed = seed;
    c.dual = o.dual == "ogd" ? DualFlavor::OgdBall : DualFlavor::EgSimplex;
    c.flavor = o.flavor == "exact" ? SubroutineFlavor::Exact
               : o.flavor == "lspi" ? SubroutineFlavor::Lspi
                                    : SubroutineFlavor::Fitted;
    c.gamma = gamma;
    c.jobs = o.jobs;
    return c;
}

std::string summary(const LearnResult& r) {
    const auto& last = r.trace.records.back();
    std::string s = "rounds," + std::to_string(last.round) + "\n";
    s += std::string("converged,") + (r.trace.converged() ? "1" : "0") + "\n";
    s += "gap," + fmt(last.gap) + "\n";
    s += "C_hat," + fmt(last.mixture_cost) + "\n";
    for (std::size_t i = 0; i < last.mixture_constraints.size(); ++i)
        s += "G_" + std::to_string(i + 1) + "_hat," + fmt(last.mixture_constraints[i]) + "\n";
    s += "members," + std::to_string(r.mixture.size()) + "\n";
    return s;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Batch constrained policy learning toolkit", "cbpl"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every subcommand");

    std::uint64_t seed = 0;
    double gamma = 0.95;
    std::string map = "8x8";

    // collect
    auto* collect_cmd = app.add_subcommand("collect", "Roll out the FrozenLake behavior policy");
    int trajs = 5000, horizon = 200;
    double epsilon = 0.95;
    std::string out_path;
    collect_cmd->add_option("--map", map, "8x8, 4x4 or a layout file")->capture_default_str();
    collect_cmd->add_option("--trajs", trajs, "Number of trajectories")->capture_default_str();
    collect_cmd->add_option("--horizon", horizon, "Maximum trajectory length")->capture_default_str();
    collect_cmd->add_option("--epsilon", epsilon, "Probability of a uniformly random action")->capture_default_str();
    collect_cmd->add_option("--gamma", gamma, "Discount factor")->capture_default_str();
    collect_cmd->add_option("--seed", seed, "Random seed")->capture_default_str();
    collect_cmd->add_option("--out", out_path, "Dataset CSV")->required();

    // learn
    auto* learn_cmd = app.add_subcommand("learn", "Constrained batch policy learning");
    LearnOptions learn_opts;
    std::string data_path, trace_out, values_out, policy_out, learn_map;
    bool derandomized = false;
    learn_cmd->add_option("--data", data_path, "Dataset CSV")->required();
    add_learn_options(*learn_cmd, learn_opts);
    learn_cmd->add_option("--seed", seed, "Random seed")->capture_default_str();
    learn_cmd->add_option("--gamma", gamma, "Discount factor")->capture_default_str();
    learn_cmd->add_option("--map", learn_map, "True MDP (required by --flavor exact; supplies chi)");
    learn_cmd->add_option("--trace-out", trace_out, "Duality-gap trace CSV");
    learn_cmd->add_option("--values-out", values_out, "Per-round value CSV");
    learn_cmd->add_option("--policy-out", policy_out, "Mixture policy CSV");
    learn_cmd->add_flag("--derandomize", derandomized, "Write the best feasible member instead of the mixture");

    // fqe / fqi / lspi
    std::string cost_text = "c", policy_path, fitted_map;
    int iters = 100, max_iters = 50;
    double ridge = 1e-8, eps_stop = 1e-6;
    auto* fqe_cmd = app.add_subcommand("fqe", "Fitted Q evaluation of a policy");
    auto* fqi_cmd = app.add_subcommand("fqi", "Fitted Q iteration");
    auto* lspi_cmd = app.add_subcommand("lspi", "Least-squares policy iteration (one-hot features)");
    for (auto* cmd : {fqe_cmd, fqi_cmd, lspi_cmd}) {
        cmd->add_option("--data", data_path, "Dataset CSV")->required();
        cmd->add_option("--cost", cost_text, "c, g:i or scalarized:<weights>")->capture_default_str();
        cmd->add_option("--ridge", ridge, "Ridge of the regressions")->capture_default_str();
        cmd->add_option("--seed", seed, "Random seed")->capture_default_str();
        cmd->add_option("--gamma", gamma, "Discount factor")->capture_default_str();
        cmd->add_option("--map", fitted_map, "True MDP: fixes the state space and chi");
    }
    fqe_cmd->add_option("--policy", policy_path, "Policy CSV")->required();
    for (auto* cmd : {fqe_cmd, fqi_cmd})
        cmd->add_option("--iters", iters, "Iterations K")->capture_default_str();
    lspi_cmd->add_option("--iters", max_iters, "Maximum LSTDQ solves")->capture_default_str();
    lspi_cmd->add_option("--eps", eps_stop, "Stop when the weight change is at most this")->capture_default_str();

    // oracle
    auto* oracle_cmd = app.add_subcommand("oracle", "Exact values of a policy");
    oracle_cmd->add_option("--map", map, "8x8, 4x4 or a layout file")->capture_default_str();
    oracle_cmd->add_option("--policy", policy_path, "Policy CSV")->required();
    oracle_cmd->add_option("--gamma", gamma, "Discount factor")->capture_default_str();

    // ope-compare
    auto* ope_cmd = app.add_subcommand("ope-compare", "FQE against PDIS, DR and WDR");
    std::string fractions_text = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1";
    int trials = 30, jobs = 1;
    bool held_out = false;
    ope_cmd->add_option("--data", data_path, "Dataset CSV")->required();
    ope_cmd->add_option("--policy", policy_path, "Evaluation policy CSV")->required();
    ope_cmd->add_option("--map", map, "True MDP for the reference value")->capture_default_str();
    ope_cmd->add_option("--fractions", fractions_text, "Data fractions")->capture_default_str();
    ope_cmd->add_option("--trials", trials, "Trials per fraction")->capture_default_str();
    ope_cmd->add_option("--iters", iters, "FQE iterations")->capture_default_str();
    ope_cmd->add_option("--ridge", ridge, "Ridge of the regressions")->capture_default_str();
    ope_cmd->add_option("--seed", seed, "Random seed")->capture_default_str();
    ope_cmd->add_option("--gamma", gamma, "Discount factor")->capture_default_str();
    ope_cmd->add_option("--jobs", jobs, "Worker threads")->capture_default_str();
    ope_cmd->add_flag("--held-out", held_out, "Fit the DR control variate on a disjoint half");
    ope_cmd->add_option("--out", out_path, "Report CSV")->required();

    // frozenlake-experiment
    auto* exp_cmd = app.add_subcommand("frozenlake-experiment", "End-to-end FrozenLake safety experiment");
    LearnOptions exp_opts;
    std::string out_dir = ".";
    exp_cmd->add_option("--map", map, "8x8, 4x4 or a layout file")->capture_default_str();
    exp_cmd->add_option("--trajs", trajs, "Number of trajectories")->capture_default_str();
    exp_cmd->add_option("--horizon", horizon, "Maximum trajectory length")->capture_default_str();
    exp_cmd->add_option("--epsilon", epsilon, "Behavior randomization")->capture_default_str();
    exp_cmd->add_option("--gamma", gamma, "Discount factor")->capture_default_str();
    exp_cmd->add_option("--seed", seed, "Random seed")->capture_default_str();
    add_learn_options(*exp_cmd, exp_opts);
    exp_cmd->add_option("--out-dir", out_dir, "Directory for the output files")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n";
        const auto subs = app.get_subcommands();
        err << (subs.empty() ? app.help() : subs.front()->help());
        return kInvalid;
    }

    try {
        if (collect_cmd->parsed()) {
            if (trajs < 1 || horizon < 1) throw ConfigError("--trajs and --horizon must be >= 1");
            if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("--epsilon must lie in [0, 1]");
            check_writable(out_path);
            const auto mdp = load_map(map, gamma);
            Rng rng(derive_seed(seed, "collect"));
            const auto data = collect(mdp, make_frozenlake_behavior(mdp, epsilon), trajs, horizon, rng);
            save_dataset(data, out_path);
            out << "trajectories," << data.trajectories().size() << "\ntransitions," << data.size() << "\n";
            return kOk;
        }

        if (learn_cmd->parsed()) {
            for (const auto* p : {&trace_out, &values_out, &policy_out}) check_writable(*p);
            const auto config = make_config(learn_opts, seed, gamma);
            const auto data = load_dataset(data_path);
            std::optional<TabularMdp> mdp;
            if (!learn_map.empty()) mdp = load_map(learn_map, gamma);
            const auto result = learn(data, config, mdp ? &*mdp : nullptr);
            if (!trace_out.empty()) write_text(trace_out, trace_to_csv(result.trace));
            if (!values_out.empty()) write_text(values_out, round_values_to_csv(result.trace));
            if (!policy_out.empty()) {
                if (derandomized)
                    write_text(policy_out, to_csv(result.mixture.members[derandomize(result.mixture, config.tau)]));
                else
                    write_text(policy_out, to_csv(result.mixture));
            }
            out << summary(result);
            return result.trace.converged() ? kOk : kNotConverged;
        }

        if (fqe_cmd->parsed() || fqi_cmd->parsed() || lspi_cmd->parsed()) {
            const auto cost = parse_cost_selector(cost_text);
            const auto data = load_dataset(data_path);
            std::optional<TabularMdp> mdp;
            if (!fitted_map.empty()) mdp = load_map(fitted_map, gamma);
            const int S = mdp ? mdp->num_states() : data.state_extent();
            const int A = mdp ? mdp->num_actions() : data.action_extent();
            std::span<const double> chi;
            if (mdp) chi = mdp->initial_dist();
            const auto q_init = QFunction::tabular(S, A, 0.0);
            if (fqe_cmd->parsed()) {
                const auto policy = as_stochastic(load_policy(policy_path), A);
                if (policy.num_states() < S) throw ConfigError("policy does not cover every state");
                const auto r = fqe(data, policy, cost, iters, q_init, ridge, gamma, chi);
                out << "estimate," << fmt(r.estimate) << "\n";
                return kOk;
            }
            if (fqi_cmd->parsed()) {
                out << to_csv(fqi(data, cost, iters, q_init, ridge, gamma).policy);
                return kOk;
            }
            const auto features = one_hot_features(S, A);
            const auto r = lspi(data, cost, *features, gamma, {eps_stop, max_iters, ridge});
            out << to_csv(greedy_policy(*features, r.w));
            if (!r.converged) {
                err << "lspi: no convergence after " << r.iterations << " iterations\n";
                return kNotConverged;
            }
            return kOk;
        }

        if (oracle_cmd->parsed()) {
            const auto mdp = load_map(map, gamma);
            const auto policy = load_policy(policy_path);
            out << values_header(mdp.num_constraints());
            if (const auto* mix = std::get_if<MixturePolicy>(&policy)) {
                check_policy(mdp, *mix);
                for (std::size_t k = 0; k < mix->size(); ++k)
                    out << values_row("member_" + std::to_string(k), exact_policy_values(mdp, mix->members[k]));
                out << values_row("mixture", exact_policy_values(mdp, *mix));
            } else if (const auto* det = std::get_if<DeterministicPolicy>(&policy)) {
                out << values_row("policy", exact_policy_values(mdp, *det));
            } else {
                out << values_row("policy", exact_policy_values(mdp, std::get<StochasticPolicy>(policy)));
            }
            return kOk;
        }

        if (ope_cmd->parsed()) {
            check_writable(out_path);
            const auto fractions = parse_reals(fractions_text, "--fractions");
            const auto mdp = load_map(map, gamma);
            const auto data = load_dataset(data_path);
            const auto policy = as_stochastic(load_policy(policy_path), mdp.num_actions());
            OpeConfig config{iters, ridge, seed, jobs, held_out};
            const auto rows = ope_comparison(data, policy, mdp, fractions, trials, config);
            write_text(out_path, to_csv(rows));
            out << "rows," << rows.size() << "\n";
            return kOk;
        }

        if (exp_cmd->parsed()) {
            if (trajs < 1 || horizon < 1) throw ConfigError("--trajs and --horizon must be >= 1");
            if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("--epsilon must lie in [0, 1]");
            if (!std::filesystem::is_directory(out_dir)) throw ConfigError("--out-dir does not exist: " + out_dir);
            auto config = make_config(exp_opts, seed, gamma);
            const auto mdp = load_map(map, gamma);
            config.validate(mdp.num_constraints());
            const auto behavior = make_frozenlake_behavior(mdp, epsilon);
            Rng rng(derive_seed(seed, "collect"));
            const auto data = collect(mdp, behavior, trajs, horizon, rng);
            const auto result = learn(data, config, &mdp);
            const auto optimum = exact_constrained_optimum(mdp, config.tau, config.budget, std::nullopt, config.omega);
            const auto& best = result.mixture.members[derandomize(result.mixture, config.tau)];

            std::string report = values_header(mdp.num_constraints());
            report += values_row("pi_hat", exact_policy_values(mdp, result.mixture));
            report += values_row("pi_hat_derandomized", exact_policy_values(mdp, best));
            report += values_row("pi_D", exact_policy_values(mdp, behavior));
            report += values_row("exact_optimum", {optimum.cost, optimum.constraints});

            const auto dir = std::filesystem::path(out_dir);
            save_dataset(data, (dir / "frozenlake_data.csv").string());
            write_text((dir / "frozenlake_trace.csv").string(), trace_to_csv(result.trace));
            write_text((dir / "frozenlake_values.csv").string(), round_values_to_csv(result.trace));
            write_text((dir / "frozenlake_policy.csv").string(), to_csv(result.mixture));
            write_text((dir / "frozenlake_report.csv").string(), report);
            out << summary(result) << report;
            return result.trace.converged() ? kOk : kNotConverged;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kInvalid;
    }
    return kInvalid;
}

}  // namespace cbpl::cli
