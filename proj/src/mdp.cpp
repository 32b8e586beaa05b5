#include "cbpl/mdp.hpp"

#include "cbpl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cbpl {

TabularMdp::TabularMdp(int num_states, int num_actions, std::vector<double> transition,
                       std::vector<double> cost_c, std::vector<std::vector<double>> cost_g,
                       double gamma, std::vector<double> initial_dist,
                       std::vector<StateId> terminal_states)
    : num_states_(num_states),
      num_actions_(num_actions),
      transition_(std::move(transition)),
      cost_c_(std::move(cost_c)),
      cost_g_(std::move(cost_g)),
      gamma_(gamma),
      initial_dist_(std::move(initial_dist)),
      terminal_states_(std::move(terminal_states)) {
    if (num_states_ < 1 || num_actions_ < 1)
        throw std::invalid_argument("TabularMdp: need at least one state and one action");
    if (!(gamma_ > 0.0 && gamma_ < 1.0))
        throw std::invalid_argument("TabularMdp: gamma must lie in (0, 1)");
    const auto S = static_cast<std::size_t>(num_states_);
    const auto pairs = static_cast<std::size_t>(num_pairs());
    if (transition_.size() != pairs * S)
        throw std::invalid_argument("TabularMdp: transition table has wrong size");
    if (cost_c_.size() != pairs)
        throw std::invalid_argument("TabularMdp: cost table has wrong size");
    for (const auto& g : cost_g_) {
        if (g.size() != pairs)
            throw std::invalid_argument("TabularMdp: constraint cost table has wrong size");
        for (double v : g)
            if (!(v >= 0.0)) throw std::invalid_argument("TabularMdp: constraint costs must be >= 0");
    }
    if (initial_dist_.size() != S)
        throw std::invalid_argument("TabularMdp: initial distribution has wrong size");

    terminal_flags_.assign(S, false);
    std::sort(terminal_states_.begin(), terminal_states_.end());
    terminal_states_.erase(std::unique(terminal_states_.begin(), terminal_states_.end()),
                           terminal_states_.end());
    for (StateId x : terminal_states_) {
        if (!valid_state(x)) throw std::invalid_argument("TabularMdp: terminal state out of range");
        terminal_flags_[x] = true;
        for (ActionId a = 0; a < num_actions_; ++a) {
            const auto p = static_cast<std::size_t>(pair_index(x, a));
            std::fill_n(transition_.begin() + static_cast<std::ptrdiff_t>(p * S), S, 0.0);
            transition_[p * S + x] = 1.0;
            cost_c_[p] = 0.0;
            for (auto& g : cost_g_) g[p] = 0.0;
        }
    }

    double init_sum = 0.0;
    for (double p : initial_dist_) {
        if (!(p >= 0.0)) throw std::invalid_argument("TabularMdp: negative initial probability");
        init_sum += p;
    }
    if (std::abs(init_sum - 1.0) > 1e-12)
        throw std::invalid_argument("TabularMdp: initial distribution does not sum to 1");

    successor_offsets_.reserve(pairs + 1);
    successor_offsets_.push_back(0);
    for (std::size_t p = 0; p < pairs; ++p) {
        double row_sum = 0.0;
        for (std::size_t y = 0; y < S; ++y) {
            const double prob = transition_[p * S + y];
            if (!(prob >= 0.0)) throw std::invalid_argument("TabularMdp: negative transition probability");
            row_sum += prob;
            if (prob > 0.0) successors_.push_back({static_cast<StateId>(y), prob});
        }
        if (std::abs(row_sum - 1.0) > 1e-12)
            throw std::invalid_argument("TabularMdp: transition row does not sum to 1");
        successor_offsets_.push_back(successors_.size());
    }
}

TabularMdp TabularMdp::with_gamma(double gamma) const {
    return TabularMdp(num_states_, num_actions_, transition_, cost_c_, cost_g_, gamma,
                      initial_dist_, terminal_states_);
}

double TabularMdp::max_abs_cost() const {
    double m = 0.0;
    for (double c : cost_c_) m = std::max(m, std::abs(c));
    return m;
}

double TabularMdp::max_constraint_cost() const {
    double m = 0.0;
    for (const auto& g : cost_g_)
        for (double v : g) m = std::max(m, v);
    return m;
}

std::vector<double> scalarized_cost(const TabularMdp& mdp, std::span<const double> lambda) {
    if (lambda.size() != static_cast<std::size_t>(mdp.num_constraints()))
        throw std::invalid_argument("scalarized_cost: lambda length must equal constraint count");
    auto out = std::vector<double>(mdp.cost_table().begin(), mdp.cost_table().end());
    for (int i = 0; i < mdp.num_constraints(); ++i) {
        const auto g = mdp.constraint_table(i);
        for (std::size_t p = 0; p < out.size(); ++p) out[p] += lambda[i] * g[p];
    }
    return out;
}

StepResult step(const TabularMdp& mdp, StateId x, ActionId a, Rng& rng) {
    if (!mdp.valid_state(x)) throw std::invalid_argument("step: state index out of range");
    if (!mdp.valid_action(a)) throw std::invalid_argument("step: action index out of range");
    const auto succ = mdp.successors(x, a);
    StateId next = succ.back().state;
    if (succ.size() > 1) {
        const double u = rng.uniform();
        double acc = 0.0;
        for (const auto& s : succ) {
            acc += s.prob;
            if (u < acc) {
                next = s.state;
                break;
            }
        }
    }
    StepResult r{next, mdp.cost(x, a), {}, mdp.is_terminal(next)};
    r.constraint_costs.reserve(static_cast<std::size_t>(mdp.num_constraints()));
    for (int i = 0; i < mdp.num_constraints(); ++i) r.constraint_costs.push_back(mdp.constraint_cost(i, x, a));
    return r;
}

// ---------------------------------------------------------------------------

GridLayout parse_layout(std::string_view text) {
    GridLayout layout;
    std::istringstream in{std::string(text)};
    std::string line;
    int starts = 0, goals = 0;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
            line.pop_back();
        if (line.empty()) continue;
        if (layout.rows == 0) {
            layout.cols = static_cast<int>(line.size());
        } else if (static_cast<int>(line.size()) != layout.cols) {
            throw ConfigError("layout: row " + std::to_string(layout.rows + 1) +
                              " has a different width than row 1");
        }
        for (char ch : line) {
            switch (ch) {
                case 'S': ++starts; break;
                case 'G': ++goals; break;
                case 'F':
                case 'H': break;
                default:
                    throw ConfigError(std::string("layout: unknown cell character '") + ch + "'");
            }
            layout.cells.push_back(static_cast<Cell>(ch));
        }
        ++layout.rows;
    }
    if (layout.rows == 0) throw ConfigError("layout: empty");
    if (starts != 1) throw ConfigError("layout: expected exactly one start cell");
    if (goals < 1) throw ConfigError("layout: expected at least one goal cell");
    return layout;
}

GridLayout load_layout(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open layout file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_layout(buf.str());
}

GridLayout standard_layout_8x8() {
    return parse_layout(
        "SFFFFFFF\n"
        "FFFFFFFF\n"
        "FFFHFFFF\n"
        "FFFFFHFF\n"
        "FFFHFFFF\n"
        "FHHFFFHF\n"
        "FHFFHFHF\n"
        "FFFHFFFG\n");
}

GridLayout standard_layout_4x4() {
    return parse_layout(
        "SFFF\n"
        "FHFH\n"
        "FFFH\n"
        "HFFG\n");
}

TabularMdp build_frozenlake(const GridLayout& layout, double gamma) {
    if (layout.rows < 1 || layout.cols < 1 ||
        layout.cells.size() != static_cast<std::size_t>(layout.rows) * layout.cols)
        throw ConfigError("frozenlake: layout is not rectangular");
    const int S = layout.rows * layout.cols;
    constexpr int A = 4;
    constexpr int dr[A] = {-1, 1, 0, 0};
    constexpr int dc[A] = {0, 0, 1, -1};

    std::vector<double> transition(static_cast<std::size_t>(S) * A * S, 0.0);
    std::vector<double> cost_c(static_cast<std::size_t>(S) * A, 0.0);
    std::vector<double> cost_g(static_cast<std::size_t>(S) * A, 0.0);
    std::vector<double> initial(S, 0.0);
    std::vector<StateId> terminals;
    int starts = 0;

    for (int r = 0; r < layout.rows; ++r) {
        for (int c = 0; c < layout.cols; ++c) {
            const StateId x = layout.state_of(r, c);
            const Cell cell = layout.at(r, c);
            if (cell == Cell::Start) {
                initial[x] = 1.0;
                ++starts;
            }
            if (cell == Cell::Hole || cell == Cell::Goal) terminals.push_back(x);
            for (int a = 0; a < A; ++a) {
                int nr = r + dr[a], nc = c + dc[a];
                if (nr < 0 || nr >= layout.rows || nc < 0 || nc >= layout.cols) {
                    nr = r;
                    nc = c;
                }
                const StateId y = layout.state_of(nr, nc);
                const std::size_t p = static_cast<std::size_t>(x) * A + a;
                transition[p * S + y] = 1.0;
                if (layout.at(nr, nc) == Cell::Goal) cost_c[p] = -1.0;
                if (layout.at(nr, nc) == Cell::Hole) cost_g[p] = 1.0;
            }
        }
    }
    if (starts != 1) throw ConfigError("frozenlake: expected exactly one start cell");
    if (terminals.empty()) throw ConfigError("frozenlake: expected at least one goal cell");
    return TabularMdp(S, A, std::move(transition), std::move(cost_c), {std::move(cost_g)}, gamma,
                      std::move(initial), std::move(terminals));
}

TabularMdp build_combination_lock(int n, double gamma) {
    if (n < 2) throw std::invalid_argument("combination lock: need n >= 2");
    constexpr int A = 2;
    std::vector<double> transition(static_cast<std::size_t>(n) * A * n, 0.0);
    std::vector<double> cost_c(static_cast<std::size_t>(n) * A, 0.0);
    for (StateId x = 0; x < n; ++x) {
        const std::size_t left = static_cast<std::size_t>(x) * A;
        const std::size_t right = left + 1;
        transition[left * n + 0] = 1.0;
        const StateId y = std::min(x + 1, n - 1);
        transition[right * n + y] = 1.0;
        if (y == n - 1) cost_c[right] = -1.0;
    }
    std::vector<double> initial(n, 0.0);
    initial[0] = 1.0;
    return TabularMdp(n, A, std::move(transition), std::move(cost_c), {}, gamma, std::move(initial),
                      {n - 1});
}

TabularMdp build_random_mdp(int num_states, int num_actions, int num_constraints,
                            std::uint64_t seed, double gamma) {
    if (num_states < 1 || num_actions < 1 || num_constraints < 0)
        throw std::invalid_argument("random mdp: counts must be positive");
    Rng rng(seed);
    const auto S = static_cast<std::size_t>(num_states);
    const auto pairs = S * static_cast<std::size_t>(num_actions);

    auto simplex = [&rng](double* out, std::size_t n) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += (out[i] = rng.exponential());
        for (std::size_t i = 0; i < n; ++i) out[i] /= total;
    };

    std::vector<double> transition(pairs * S);
    for (std::size_t p = 0; p < pairs; ++p) simplex(transition.data() + p * S, S);
    std::vector<double> cost_c(pairs);
    for (double& c : cost_c) c = rng.uniform();
    std::vector<std::vector<double>> cost_g(static_cast<std::size_t>(num_constraints),
                                            std::vector<double>(pairs));
    for (auto& g : cost_g)
        for (double& v : g) v = rng.uniform();
    std::vector<double> initial(S);
    simplex(initial.data(), S);
    return TabularMdp(num_states, num_actions, std::move(transition), std::move(cost_c),
                      std::move(cost_g), gamma, std::move(initial));
}

}  // namespace cbpl
