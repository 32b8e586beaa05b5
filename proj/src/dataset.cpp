#include "cbpl/dataset.hpp"

#include "cbpl/errors.hpp"
#include "csv_util.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace cbpl {

namespace {

// Carries the offending sample index so that file loading can report a line number.
class InvalidSample : public DataError {
public:
    InvalidSample(std::size_t index, const std::string& what)
        : DataError(what + " (sample " + std::to_string(index) + ")"), index_(index), reason_(what) {}
    std::size_t index() const { return index_; }
    const std::string& reason() const { return reason_; }

private:
    std::size_t index_;
    std::string reason_;
};

}  // namespace

Dataset::Dataset(int num_constraints, std::vector<TransitionSample> samples)
    : num_constraints_(num_constraints), samples_(std::move(samples)) {
    if (num_constraints_ < 0) throw DataError("dataset: negative constraint count");
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        const auto& s = samples_[i];
        auto fail = [i](const std::string& msg) { throw InvalidSample(i, "dataset: " + msg); };
        if (static_cast<int>(s.g.size()) != num_constraints_)
            fail("constraint vector length differs from m");
        for (double v : s.g)
            if (!(v >= 0.0)) fail("negative constraint cost");
        if (!(s.behavior_prob > 0.0 && s.behavior_prob <= 1.0))
            fail("behavior propensity outside (0, 1]");
        if (s.x < 0 || s.x_next < 0 || s.a < 0) fail("negative index");

        const bool continues = i > 0 && samples_[i - 1].traj_id == s.traj_id;
        if (continues) {
            const auto& prev = samples_[i - 1];
            if (s.t != prev.t + 1) fail("timestep does not increment");
            if (prev.done) fail("trajectory continues after done");
            if (prev.x_next != s.x)
                fail("state does not chain from previous sample");
            trajectories_.back().end = i + 1;
        } else {
            for (const auto& tr : trajectories_)
                if (tr.traj_id == s.traj_id)
                    fail("trajectory samples are not contiguous");
            trajectories_.push_back({s.traj_id, i, i + 1});
        }
    }
}

std::size_t Dataset::max_trajectory_length() const {
    std::size_t m = 0;
    for (const auto& tr : trajectories_) m = std::max(m, tr.length());
    return m;
}

int Dataset::state_extent() const {
    int m = 0;
    for (const auto& s : samples_) m = std::max({m, s.x + 1, s.x_next + 1});
    return m;
}

int Dataset::action_extent() const {
    int m = 0;
    for (const auto& s : samples_) m = std::max(m, s.a + 1);
    return m;
}

std::vector<double> Dataset::initial_state_distribution(int num_states) const {
    std::vector<double> dist(static_cast<std::size_t>(num_states), 0.0);
    if (trajectories_.empty()) return dist;
    for (const auto& tr : trajectories_) {
        const StateId x = samples_[tr.begin].x;
        if (x >= num_states) throw std::invalid_argument("initial state outside the state range");
        dist[x] += 1.0;
    }
    for (double& p : dist) p /= static_cast<double>(trajectories_.size());
    return dist;
}

// ---------------------------------------------------------------------------

Dataset collect(const TabularMdp& mdp, const StochasticPolicy& behavior, int num_trajectories,
                int max_horizon, Rng& rng) {
    check_policy(mdp, behavior);
    if (num_trajectories < 0) throw std::invalid_argument("collect: negative trajectory count");
    if (max_horizon < 1) throw std::invalid_argument("collect: horizon must be >= 1");

    std::vector<TransitionSample> samples;
    for (int k = 0; k < num_trajectories; ++k) {
        auto x = static_cast<StateId>(rng.categorical(mdp.initial_dist()));
        for (int t = 0; t < max_horizon && !mdp.is_terminal(x); ++t) {
            const auto a = static_cast<ActionId>(rng.categorical(behavior.row(x)));
            auto r = step(mdp, x, a, rng);
            samples.push_back({k, t, x, a, r.next, r.cost, std::move(r.constraint_costs), r.terminal,
                               behavior.prob(x, a)});
            x = r.next;
        }
    }
    return Dataset(mdp.num_constraints(), std::move(samples));
}

Dataset collect_full_coverage(const TabularMdp& mdp, int samples_per_pair, Rng& rng) {
    if (samples_per_pair < 1) throw std::invalid_argument("coverage: samples_per_pair must be >= 1");
    std::vector<TransitionSample> samples;
    const double prop = 1.0 / mdp.num_actions();
    int id = 0;
    for (StateId x = 0; x < mdp.num_states(); ++x) {
        if (mdp.is_terminal(x)) continue;
        for (ActionId a = 0; a < mdp.num_actions(); ++a) {
            for (int k = 0; k < samples_per_pair; ++k) {
                auto r = step(mdp, x, a, rng);
                samples.push_back({id++, 0, x, a, r.next, r.cost, std::move(r.constraint_costs),
                                   r.terminal, prop});
            }
        }
    }
    return Dataset(mdp.num_constraints(), std::move(samples));
}

ShortestPaths shortest_paths_to_goal(const TabularMdp& mdp) {
    const int S = mdp.num_states(), A = mdp.num_actions();
    constexpr int unreachable = std::numeric_limits<int>::max();

    // Goals are terminal states entered with negative primary cost.
    std::vector<bool> goal(S, false);
    for (StateId x = 0; x < S; ++x) {
        if (mdp.is_terminal(x)) continue;
        for (ActionId a = 0; a < A; ++a)
            for (const auto& s : mdp.successors(x, a))
                if (mdp.is_terminal(s.state) && mdp.cost(x, a) < 0.0) goal[s.state] = true;
    }
    auto likely_next = [&](StateId x, ActionId a) {
        const auto succ = mdp.successors(x, a);
        return std::max_element(succ.begin(), succ.end(),
                                [](const Successor& l, const Successor& r) { return l.prob < r.prob; })
            ->state;
    };

    std::vector<int> dist(S, unreachable);
    for (StateId x = 0; x < S; ++x)
        if (goal[x]) dist[x] = 0;
    // Unit-weight relaxation; converges in at most S sweeps.
    for (bool changed = true; changed;) {
        changed = false;
        for (StateId x = 0; x < S; ++x) {
            if (mdp.is_terminal(x)) continue;
            for (ActionId a = 0; a < A; ++a) {
                const StateId y = likely_next(x, a);
                if (mdp.is_terminal(y) && !goal[y]) continue;
                if (dist[y] != unreachable && dist[y] + 1 < dist[x]) {
                    dist[x] = dist[y] + 1;
                    changed = true;
                }
            }
        }
    }

    ShortestPaths out{std::vector<int>(S, -1), std::vector<ActionId>(S, -1)};
    for (StateId x = 0; x < S; ++x) {
        if (dist[x] == unreachable) continue;
        out.distance[x] = dist[x];
        if (mdp.is_terminal(x)) continue;
        for (ActionId a = 0; a < A; ++a) {
            const StateId y = likely_next(x, a);
            if (mdp.is_terminal(y) && !goal[y]) continue;
            if (dist[y] != unreachable && dist[y] + 1 == dist[x]) {
                out.action[x] = a;
                break;
            }
        }
    }
    return out;
}

StochasticPolicy make_frozenlake_behavior(const TabularMdp& mdp, double epsilon_random) {
    if (!(epsilon_random >= 0.0 && epsilon_random <= 1.0))
        throw std::invalid_argument("behavior: epsilon_random must lie in [0, 1]");
    const int S = mdp.num_states(), A = mdp.num_actions();
    const auto paths = shortest_paths_to_goal(mdp);
    std::vector<double> probs(static_cast<std::size_t>(S) * A, 1.0 / A);
    for (StateId x = 0; x < S; ++x) {
        const ActionId best = paths.action[x];
        if (best < 0) continue;
        for (ActionId a = 0; a < A; ++a)
            probs[static_cast<std::size_t>(x) * A + a] =
                epsilon_random / A + (a == best ? 1.0 - epsilon_random : 0.0);
    }
    return StochasticPolicy(S, A, std::move(probs));
}

Dataset subsample(const Dataset& dataset, double fraction, Rng& rng) {
    if (dataset.empty()) throw std::invalid_argument("subsample: empty dataset");
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw std::invalid_argument("subsample: fraction must lie in (0, 1]");
    const auto& trajs = dataset.trajectories();
    std::vector<std::size_t> order(trajs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);

    const double target = fraction * static_cast<double>(dataset.size());
    std::vector<TransitionSample> picked;
    for (std::size_t k : order) {
        if (static_cast<double>(picked.size()) >= target) break;
        const auto tr = dataset.trajectory(k);
        picked.insert(picked.end(), tr.begin(), tr.end());
    }
    return Dataset(dataset.num_constraints(), std::move(picked));
}

// ---------------------------------------------------------------------------

std::string to_csv(const Dataset& dataset) {
    std::string out = "traj_id,t,x,a,x_next,c,";
    for (int i = 1; i <= dataset.num_constraints(); ++i) out += "g_" + std::to_string(i) + ",";
    out += "done,behavior_prob\n";
    for (const auto& s : dataset.samples()) {
        out += std::to_string(s.traj_id) + ',' + std::to_string(s.t) + ',' + std::to_string(s.x) +
               ',' + std::to_string(s.a) + ',' + std::to_string(s.x_next) + ',' +
               csv::format_real(s.c) + ',';
        for (double g : s.g) out += csv::format_real(g) + ',';
        out += s.done ? "1," : "0,";
        out += csv::format_real(s.behavior_prob);
        out += '\n';
    }
    return out;
}

Dataset dataset_from_csv(std::string_view text) {
    const auto rows = csv::lines(text);
    if (rows.empty()) throw ParseError(1, "missing header");
    const auto header = csv::split(rows[0]);
    if (header.size() < 8) throw ParseError(1, "header has too few columns");
    const int m = static_cast<int>(header.size()) - 8;
    const char* fixed[] = {"traj_id", "t", "x", "a", "x_next", "c"};
    for (int i = 0; i < 6; ++i)
        if (header[i] != fixed[i]) throw ParseError(1, "unexpected column '" + std::string(header[i]) + "'");
    for (int i = 0; i < m; ++i)
        if (header[6 + i] != "g_" + std::to_string(i + 1))
            throw ParseError(1, "unexpected column '" + std::string(header[6 + i]) + "'");
    if (header[6 + m] != "done" || header[7 + m] != "behavior_prob")
        throw ParseError(1, "header must end with done,behavior_prob");

    std::vector<TransitionSample> samples;
    std::vector<std::size_t> sample_lines;
    samples.reserve(rows.size());
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const std::size_t line_no = r + 1;
        if (rows[r].empty()) continue;
        const auto f = csv::split(rows[r]);
        if (f.size() != header.size())
            throw ParseError(line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                                          std::to_string(f.size()));
        TransitionSample s;
        s.traj_id = static_cast<int>(csv::parse_int(f[0], line_no));
        s.t = static_cast<int>(csv::parse_int(f[1], line_no));
        s.x = static_cast<StateId>(csv::parse_int(f[2], line_no));
        s.a = static_cast<ActionId>(csv::parse_int(f[3], line_no));
        s.x_next = static_cast<StateId>(csv::parse_int(f[4], line_no));
        s.c = csv::parse_real(f[5], line_no);
        for (int i = 0; i < m; ++i) s.g.push_back(csv::parse_real(f[6 + i], line_no));
        const long done = csv::parse_int(f[6 + m], line_no);
        if (done != 0 && done != 1) throw ParseError(line_no, "done must be 0 or 1");
        s.done = done == 1;
        s.behavior_prob = csv::parse_real(f[7 + m], line_no);
        samples.push_back(std::move(s));
        sample_lines.push_back(line_no);
    }
    try {
        return Dataset(m, std::move(samples));
    } catch (const InvalidSample& e) {
        throw ParseError(sample_lines[e.index()], e.reason());
    }
}

void save_dataset(const Dataset& dataset, const std::string& path) {
    csv::write_file(path, to_csv(dataset));
}

Dataset load_dataset(const std::string& path) { return dataset_from_csv(csv::read_file(path)); }

std::uint64_t checksum(const Dataset& dataset) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : to_csv(dataset)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace cbpl
