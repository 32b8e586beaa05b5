#pragma once

#include "cbpl/mdp.hpp"
#include "cbpl/policy.hpp"
#include "cbpl/random.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cbpl {

/// One logged transition (x, a, x', c, g_1..g_m) with its trajectory position and
/// the behavior policy's propensity pi_D(a | x).
struct TransitionSample {
    int traj_id = 0;
    int t = 0;
    StateId x = 0;
    ActionId a = 0;
    StateId x_next = 0;
    double c = 0.0;
    std::vector<double> g;
    /// x_next is terminal. A trajectory cut off by the horizon ends with done = false.
    bool done = false;
    double behavior_prob = 1.0;

    bool operator==(const TransitionSample&) const = default;
};

/**
 * Batch of transitions grouped into trajectories. Samples of one trajectory are
 * contiguous and ordered by t; the trajectory index is rebuilt on construction.
 */
class Dataset {
public:
    struct Trajectory {
        int traj_id;
        std::size_t begin;
        std::size_t end;
        std::size_t length() const { return end - begin; }
    };

    explicit Dataset(int num_constraints = 0) : num_constraints_(num_constraints) {}
    /// Validates the sample invariants; throws DataError on violation.
    Dataset(int num_constraints, std::vector<TransitionSample> samples);

    int num_constraints() const { return num_constraints_; }
    std::size_t size() const { return samples_.size(); }
    bool empty() const { return samples_.empty(); }
    const std::vector<TransitionSample>& samples() const { return samples_; }
    const TransitionSample& operator[](std::size_t i) const { return samples_[i]; }

    const std::vector<Trajectory>& trajectories() const { return trajectories_; }
    std::span<const TransitionSample> trajectory(std::size_t k) const {
        const auto& tr = trajectories_[k];
        return {samples_.data() + tr.begin, tr.length()};
    }
    std::size_t max_trajectory_length() const;

    /// One past the largest state / action index that appears in the data.
    int state_extent() const;
    int action_extent() const;

    /// Distribution of the first state of each trajectory.
    std::vector<double> initial_state_distribution(int num_states) const;

    bool operator==(const Dataset& other) const {
        return num_constraints_ == other.num_constraints_ && samples_ == other.samples_;
    }

private:
    int num_constraints_;
    std::vector<TransitionSample> samples_;
    std::vector<Trajectory> trajectories_;
};

/// Rolls out the behavior policy from the initial distribution until a terminal state or
/// the horizon. Trajectory ids are 0..num_trajectories-1.
Dataset collect(const TabularMdp& mdp, const StochasticPolicy& behavior, int num_trajectories,
                int max_horizon, Rng& rng);

/// Samples every non-terminal (x, a) pair samples_per_pair times, each as its own
/// one-step trajectory with behavior propensity 1/|A|.
Dataset collect_full_coverage(const TabularMdp& mdp, int samples_per_pair, Rng& rng);

/// Number of moves along the most likely successor needed to reach a goal (a terminal
/// state entered with negative primary cost) without entering any other terminal state,
/// and the lowest-index action realizing it. States without a path get -1.
struct ShortestPaths {
    std::vector<int> distance;
    std::vector<ActionId> action;
};
ShortestPaths shortest_paths_to_goal(const TabularMdp& mdp);

/// pi_D(a|x) = eps/|A| + (1 - eps) [a = shortest-path action]; uniform where no path exists.
StochasticPolicy make_frozenlake_behavior(const TabularMdp& mdp, double epsilon_random);

/// Whole trajectories, drawn uniformly without replacement, until the transition count
/// first reaches fraction * size().
Dataset subsample(const Dataset& dataset, double fraction, Rng& rng);

std::string to_csv(const Dataset& dataset);
/// Throws ParseError naming the offending line.
Dataset dataset_from_csv(std::string_view text);
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

/// FNV-1a hash of the CSV serialization.
std::uint64_t checksum(const Dataset& dataset);

}  // namespace cbpl
