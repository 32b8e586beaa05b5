#include "cbpl/errors.hpp"
#include "cbpl/exact.hpp"
#include "cbpl/mdp.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <stdexcept>

using namespace cbpl;

namespace {

// Two-cell MDP used to exercise constructor validation.
struct Tables {
    std::vector<double> P{1.0, 0.0, 0.0, 1.0};
    std::vector<double> c{0.0, 0.0};
    std::vector<std::vector<double>> g{{0.0, 0.0}};
    std::vector<double> chi{1.0, 0.0};
};

TabularMdp absorbing_one_state() {
    return TabularMdp(1, 2, {1.0, 1.0}, {0.0, 0.0}, {{0.0, 0.0}}, 0.9, {1.0}, {0});
}

}  // namespace

TEST_CASE("constructor validates its tables") {
    Tables t;
    CHECK_NOTHROW(TabularMdp(2, 1, t.P, t.c, t.g, 0.9, t.chi));
    CHECK_THROWS_AS(TabularMdp(2, 1, t.P, t.c, t.g, 1.0, t.chi), std::invalid_argument);
    CHECK_THROWS_AS(TabularMdp(2, 1, t.P, t.c, t.g, 0.0, t.chi), std::invalid_argument);
    CHECK_THROWS_AS(TabularMdp(2, 1, {0.5, 0.4, 0.0, 1.0}, t.c, t.g, 0.9, t.chi), std::invalid_argument);
    CHECK_THROWS_AS(TabularMdp(2, 1, t.P, t.c, {{-1.0, 0.0}}, 0.9, t.chi), std::invalid_argument);
    CHECK_THROWS_AS(TabularMdp(2, 1, t.P, {0.0}, t.g, 0.9, t.chi), std::invalid_argument);
    CHECK_THROWS_AS(TabularMdp(2, 1, t.P, t.c, t.g, 0.9, {0.5, 0.4}), std::invalid_argument);
    CHECK_THROWS_AS(TabularMdp(2, 1, t.P, t.c, t.g, 0.9, t.chi, {2}), std::invalid_argument);
}

TEST_CASE("terminal states become zero-cost self-loops") {
    TabularMdp mdp(2, 1, {0.0, 1.0, 1.0, 0.0}, {1.0, 5.0}, {{1.0, 7.0}}, 0.9, {1.0, 0.0}, {1});
    CHECK(mdp.transition(1, 0, 1) == 1.0);
    CHECK(mdp.transition(1, 0, 0) == 0.0);
    CHECK(mdp.cost(1, 0) == 0.0);
    CHECK(mdp.constraint_cost(0, 1, 0) == 0.0);
    CHECK(mdp.cost(0, 0) == 1.0);
}

TEST_CASE("step on an absorbing state") {
    const auto mdp = absorbing_one_state();
    Rng rng(1);
    for (ActionId a = 0; a < 2; ++a) {
        const auto r = step(mdp, 0, a, rng);
        CHECK(r.next == 0);
        CHECK(r.cost == 0.0);
        CHECK(r.constraint_costs == std::vector<double>{0.0});
        CHECK(r.terminal);
    }
}

TEST_CASE("step rejects bad indices") {
    const auto mdp = absorbing_one_state();
    Rng rng(1);
    CHECK_THROWS_AS(step(mdp, 1, 0, rng), std::invalid_argument);
    CHECK_THROWS_AS(step(mdp, -1, 0, rng), std::invalid_argument);
    CHECK_THROWS_AS(step(mdp, 0, 2, rng), std::invalid_argument);
}

TEST_CASE("step is a function of the rng state") {
    const auto mdp = build_random_mdp(6, 3, 1, 11);
    Rng a(5), b(5);
    for (int i = 0; i < 200; ++i) {
        const auto ra = step(mdp, i % 6, i % 3, a);
        const auto rb = step(mdp, i % 6, i % 3, b);
        CHECK(ra.next == rb.next);
        CHECK(ra.cost == rb.cost);
    }
}

TEST_CASE("frozenlake goal and hole transitions") {
    const auto layout = standard_layout_8x8();
    const auto mdp = build_frozenlake(layout);
    Rng rng(0);

    // (7,6) sits left of the goal at (7,7).
    const auto to_goal = step(mdp, layout.state_of(7, 6), East, rng);
    CHECK(to_goal.next == layout.state_of(7, 7));
    CHECK(to_goal.cost == -1.0);
    CHECK(to_goal.constraint_costs == std::vector<double>{0.0});
    CHECK(to_goal.terminal);

    // (1,3) sits above the hole at (2,3).
    const auto to_hole = step(mdp, layout.state_of(1, 3), South, rng);
    CHECK(to_hole.next == layout.state_of(2, 3));
    CHECK(to_hole.cost == 0.0);
    CHECK(to_hole.constraint_costs == std::vector<double>{1.0});
    CHECK(to_hole.terminal);
}

TEST_CASE("frozenlake 8x8 shape") {
    const auto mdp = build_frozenlake(standard_layout_8x8());
    CHECK(mdp.num_states() == 64);
    CHECK(mdp.num_actions() == 4);
    CHECK(mdp.num_constraints() == 1);
    CHECK(mdp.gamma() == 0.95);
    CHECK(mdp.initial_dist()[0] == 1.0);
}

TEST_CASE("1x2 grid reaches the goal with one step east") {
    const auto layout = parse_layout("SG\n");
    const auto mdp = build_frozenlake(layout);
    Rng rng(0);
    const auto r = step(mdp, 0, East, rng);
    CHECK(r.next == 1);
    CHECK(r.cost == -1.0);
    CHECK(r.terminal);
    // West walks off the grid and stays.
    const auto w = step(mdp, 0, West, rng);
    CHECK(w.next == 0);
    CHECK_FALSE(w.terminal);
}

TEST_CASE("2x2 grid with a hole matches hand enumeration") {
    // S H
    // F G
    const auto mdp = build_frozenlake(parse_layout("SH\nFG\n"));
    // next state per (cell, action) in order N, S, E, W
    const int expected[4][4] = {{0, 2, 1, 0}, {1, 1, 1, 1}, {0, 2, 3, 2}, {3, 3, 3, 3}};
    for (StateId x = 0; x < 4; ++x)
        for (ActionId a = 0; a < 4; ++a) {
            CAPTURE(x);
            CAPTURE(a);
            CHECK(mdp.transition(x, a, expected[x][a]) == 1.0);
        }
    CHECK(mdp.constraint_cost(0, 0, East) == 1.0);
    CHECK(mdp.cost(2, East) == -1.0);
    double total_g = 0.0, total_c = 0.0;
    for (StateId x = 0; x < 4; ++x)
        for (ActionId a = 0; a < 4; ++a) {
            total_g += mdp.constraint_cost(0, x, a);
            total_c += mdp.cost(x, a);
        }
    CHECK(total_g == 1.0);
    CHECK(total_c == -1.0);
    CHECK(mdp.is_terminal(1));
    CHECK(mdp.is_terminal(3));
}

TEST_CASE("frozenlake hole-entering pairs match enumeration") {
    const auto layout = standard_layout_8x8();
    const auto mdp = build_frozenlake(layout);
    const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, 1, -1};
    int enumerated = 0, marked = 0;
    for (int r = 0; r < layout.rows; ++r)
        for (int c = 0; c < layout.cols; ++c) {
            if (layout.at(r, c) == Cell::Hole || layout.at(r, c) == Cell::Goal) continue;
            for (int a = 0; a < 4; ++a) {
                const int nr = r + dr[a], nc = c + dc[a];
                if (nr < 0 || nr >= layout.rows || nc < 0 || nc >= layout.cols) continue;
                if (layout.at(nr, nc) == Cell::Hole) ++enumerated;
            }
        }
    for (StateId x = 0; x < mdp.num_states(); ++x)
        for (ActionId a = 0; a < 4; ++a) marked += mdp.constraint_cost(0, x, a) == 1.0;
    CHECK(marked == enumerated);
    CHECK(marked > 0);
}

TEST_CASE("layout parsing errors") {
    CHECK_THROWS_AS(parse_layout("SF\nF\n"), ConfigError);
    CHECK_THROWS_AS(parse_layout("SX\nFG\n"), ConfigError);
    CHECK_THROWS_AS(parse_layout("FF\nFG\n"), ConfigError);
    CHECK_THROWS_AS(parse_layout("SS\nFG\n"), ConfigError);
    CHECK_THROWS_AS(parse_layout("SF\nFF\n"), ConfigError);
    CHECK_THROWS_AS(parse_layout(""), ConfigError);
    CHECK_NOTHROW(parse_layout("\nSF\n\nFG\n"));
}

TEST_CASE("combination lock dynamics") {
    const auto mdp = build_combination_lock(3);
    CHECK(mdp.num_constraints() == 0);
    Rng rng(0);
    auto r = step(mdp, 0, 1, rng);
    CHECK(r.next == 1);
    CHECK(r.cost == 0.0);
    r = step(mdp, r.next, 1, rng);
    CHECK(r.next == 2);
    CHECK(r.cost == -1.0);
    CHECK(r.terminal);
    CHECK(step(mdp, 1, 0, rng).next == 0);
    CHECK_THROWS_AS(build_combination_lock(1), std::invalid_argument);
}

TEST_CASE("combination lock n=5 optimal value is -gamma^3") {
    const auto mdp = build_combination_lock(5, 0.9);
    const auto q = value_iteration(mdp, mdp.cost_table());
    CHECK(q.min_value(0) == doctest::Approx(-std::pow(0.9, 3)).epsilon(1e-9));
}

TEST_CASE("random mdp is reproducible and stochastic") {
    const auto a = build_random_mdp(2, 2, 1, 7);
    const auto b = build_random_mdp(2, 2, 1, 7);
    for (StateId x = 0; x < 2; ++x)
        for (ActionId u = 0; u < 2; ++u) {
            CHECK(a.cost(x, u) == b.cost(x, u));
            CHECK(a.constraint_cost(0, x, u) == b.constraint_cost(0, x, u));
            for (StateId y = 0; y < 2; ++y) CHECK(a.transition(x, u, y) == b.transition(x, u, y));
        }
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto mdp = build_random_mdp(5, 3, 2, seed);
        for (StateId x = 0; x < 5; ++x)
            for (ActionId u = 0; u < 3; ++u) {
                double s = 0.0;
                for (double p : mdp.transition_row(x, u)) s += p;
                CHECK(std::abs(s - 1.0) <= 1e-12);
            }
    }
    CHECK_THROWS_AS(build_random_mdp(0, 1, 0, 1), std::invalid_argument);
}

TEST_CASE("random mdp exact values agree with Monte Carlo") {
    const auto mdp = build_random_mdp(5, 3, 2, 1);
    const auto pi = StochasticPolicy::uniform(5, 3);
    const auto exact = exact_policy_values(mdp, pi);
    Rng rng(123);
    // Horizon 250 leaves 0.9^250 < 1e-11 of the tail.
    const auto c = testing::monte_carlo(mdp, pi, -1, 40000, 250, rng);
    CHECK(std::abs(c.mean - exact.cost) <= 3.0 * c.std_error);
    for (int i = 0; i < 2; ++i) {
        const auto g = testing::monte_carlo(mdp, pi, i, 40000, 250, rng);
        CHECK(std::abs(g.mean - exact.constraints[i]) <= 3.0 * g.std_error);
    }
}

TEST_CASE("scalarized cost and bounds") {
    const auto mdp = build_frozenlake(standard_layout_4x4());
    const std::vector<double> lambda{2.0};
    const auto s = scalarized_cost(mdp, lambda);
    for (int p = 0; p < mdp.num_pairs(); ++p)
        CHECK(s[p] == mdp.cost_table()[p] + 2.0 * mdp.constraint_table(0)[p]);
    CHECK(mdp.max_abs_cost() == 1.0);
    CHECK(mdp.max_constraint_cost() == 1.0);
    CHECK_THROWS_AS(scalarized_cost(mdp, std::vector<double>{}), std::invalid_argument);
    CHECK(mdp.with_gamma(0.5).gamma() == 0.5);
}
