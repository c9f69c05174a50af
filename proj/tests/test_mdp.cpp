#include <doctest.h>

#include "helpers.hpp"
#include "sapp/envs.hpp"
#include "sapp/mdp.hpp"

using namespace sapp;
using namespace sapp::testing;

TEST_CASE("activity matrix: identity case") {
    PolicyTable pi = PolicyTable::uniform(1, 1);
    const Mat act = activity_matrix(pi, 1, 1);
    CHECK(act.rows() == 1);
    CHECK(act.cols() == 1);
    CHECK(act(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("activity matrix: 2x2 uniform layout") {
    PolicyTable pi = PolicyTable::uniform(2, 2);
    const Mat act = activity_matrix(pi, 2, 2);
    CHECK(act(0, 0) == doctest::Approx(0.5));
    CHECK(act(0, 1) == doctest::Approx(0.5));
    CHECK(act(0, 2) == 0.0);
    CHECK(act(0, 3) == 0.0);
    CHECK(act(1, 0) == 0.0);
    CHECK(act(1, 1) == 0.0);
    CHECK(act(1, 2) == doctest::Approx(0.5));
    CHECK(act(1, 3) == doctest::Approx(0.5));
}

TEST_CASE("activity matrix: rows are stochastic for random policies") {
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const int S = 3 + trial % 4;
        const int A = 2 + trial % 3;
        const PolicyTable pi = random_policy(S, A, rng);
        const Vec ones = activity_matrix(pi, S, A) * Vec::Ones(S * A);
        CHECK((ones - Vec::Ones(S)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("activity matrix: dimension mismatch is rejected") {
    PolicyTable pi = PolicyTable::uniform(2, 2);
    CHECK_THROWS_AS(activity_matrix(pi, 3, 2), std::invalid_argument);
}

TEST_CASE("exact evaluation: geometric series on a self-loop") {
    const TabularMdp mdp = single_state({1.0}, 0.5);
    const PolicyTable pi = PolicyTable::uniform(1, 1);
    const ValueSolution sol = exact_policy_values(mdp, pi);
    CHECK(sol.v(0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(sol.occupancy_raw(0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(expected_return(mdp, pi) == doctest::Approx(2.0));
}

TEST_CASE("exact evaluation: two-state absorbing hand expansion") {
    const TabularMdp mdp = two_state_absorbing(0.9);
    const PolicyTable pi = PolicyTable::uniform(2, 1);
    const ValueSolution sol = exact_policy_values(mdp, pi);
    CHECK(sol.v(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sol.v(1) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(sol.occupancy_raw(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sol.occupancy_raw(1) == doctest::Approx(9.0).epsilon(1e-12));
    CHECK(sol.occupancy_norm(0) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(sol.occupancy_norm(1) == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(expected_return(mdp, pi) == doctest::Approx(1.0));
}

TEST_CASE("exact evaluation: value solution invariants on random garnets") {
    Rng rng(23);
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        const TabularMdp mdp = build_garnet(6, 3, 3, seed, 0.9);
        const PolicyTable pi = random_policy(6, 3, rng);
        const ValueSolution sol = exact_policy_values(mdp, pi);
        const Mat act = activity_matrix(pi, 6, 3);

        CHECK((sol.v - act * sol.q).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(sol.occupancy_raw.sum() == doctest::Approx(10.0).epsilon(1e-9));
        CHECK(sol.occupancy_raw.minCoeff() >= 0.0);
        CHECK(sol.occupancy_norm.sum() == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(sol.q.cwiseAbs().maxCoeff() <= 10.0 + 1e-9);
        // return-occupancy duality
        const double lhs = mdp.initial_dist.dot(sol.v);
        const double rhs = (sol.occupancy_norm / (1.0 - mdp.discount)).dot(act * mdp.reward);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
    }
}

TEST_CASE("exact evaluation: linear solve matches 500-step iteration") {
    Rng rng(31);
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const TabularMdp mdp = build_garnet(5, 2, 2, seed, 0.85);
        const PolicyTable pi = random_policy(5, 2, rng);
        const ValueSolution sol = exact_policy_values(mdp, pi);
        const Vec iterated = iterate_penalized_values(mdp.transition, mdp.reward,
                                                      mdp.discount, pi, Vec::Zero(5));
        CHECK((sol.v - iterated).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("exact evaluation matches Monte-Carlo oracle") {
    const int horizon = truncation_horizon(0.9, 1e-4);
    for (std::uint64_t seed : {3ull, 14ull}) {
        const TabularMdp mdp = build_garnet(6, 2, 3, seed, 0.9);
        Rng rng(seed);
        const PolicyTable pi = random_policy(6, 2, rng);
        const double exact = expected_return(mdp, pi);
        const MonteCarloResult mc =
            monte_carlo_return(mdp, pi, 100000, horizon, derive_seed(seed, 9));
        CHECK(std::abs(mc.mean - exact) < 3.0 * mc.stderr_ + 2e-3);
    }
}

TEST_CASE("monte carlo: trivial instances and determinism") {
    const TabularMdp single = single_state({1.0}, 0.5);
    const PolicyTable pi1 = PolicyTable::uniform(1, 1);
    const MonteCarloResult a = monte_carlo_return(single, pi1, 500, 40, 5);
    CHECK(a.mean == doctest::Approx(2.0).epsilon(1e-6));

    const TabularMdp pair = two_state_absorbing(0.9);
    const PolicyTable pi2 = PolicyTable::uniform(2, 1);
    const MonteCarloResult b = monte_carlo_return(pair, pi2, 500, 200, 5);
    CHECK(b.mean == doctest::Approx(1.0).epsilon(1e-6));

    const MonteCarloResult c = monte_carlo_return(pair, pi2, 500, 200, 5);
    CHECK(b.mean == c.mean);
    CHECK(b.stderr_ == c.stderr_);

    CHECK_THROWS_AS(monte_carlo_return(pair, pi2, 0, 10, 1), std::invalid_argument);
}

TEST_CASE("optimal policy: dominant action on a single state") {
    const TabularMdp mdp = single_state({1.0, -1.0}, 0.5);
    const auto [pi, sol] = optimal_policy(mdp, 1e-10);
    CHECK(pi.probs(0, 0) == 1.0);
    CHECK(pi.probs(0, 1) == 0.0);
    CHECK(sol.v(0) == doctest::Approx(2.0));
}

TEST_CASE("optimal policy: chain routes toward the rewarding terminal") {
    const TabularMdp mdp = build_chain_mdp(1, 1, 1.0, 0.0, 0.9);
    const auto [pi, sol] = optimal_policy(mdp, 1e-10);
    const ChainLayout l = chain_layout(1, 1);
    CHECK(pi.probs(l.s0, 0) == 1.0);  // the reward sits on the left branch
    CHECK(sol.v(l.s0) == doctest::Approx(0.9));
}

TEST_CASE("optimal policy: greedy policy is a fixed point of value iteration") {
    for (std::uint64_t seed : {2ull, 9ull, 17ull}) {
        const TabularMdp mdp = build_garnet(5, 3, 3, seed, 0.9);
        const auto [pi, sol] = optimal_policy(mdp, 1e-12);
        const Vec q = mdp.reward + mdp.discount * (mdp.transition * sol.v);
        for (int s = 0; s < 5; ++s) {
            int best = 0;
            for (int a = 1; a < 3; ++a)
                if (q(mdp.index(s, a)) > q(mdp.index(s, best)) + 1e-12) best = a;
            CHECK(pi.probs(s, best) == 1.0);
        }
        Rng rng(seed);
        for (int k = 0; k < 5; ++k) {
            const PolicyTable other = random_policy(5, 3, rng);
            CHECK(expected_return(mdp, pi) >= expected_return(mdp, other) - 1e-9);
        }
    }
}

TEST_CASE("tabular mdp validation rejects malformed inputs") {
    TabularMdp mdp = single_state({1.0}, 0.5);
    TabularMdp bad = mdp;
    bad.reward(0) = 1.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = mdp;
    bad.discount = 1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = mdp;
    bad.transition(0, 0) = 0.9;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("chain: symmetric rewards break ties toward the lowest action") {
    const TabularMdp mdp = build_chain_mdp(1, 1, 0.6, 0.6, 0.9);
    const auto [pi, sol] = optimal_policy(mdp, 1e-10);
    CHECK(pi.probs(0, 0) == 1.0);
}

TEST_CASE("garnet: seed determinism and reward-vector collisions") {
    const TabularMdp a = build_garnet(6, 2, 3, 12345, 0.9);
    const TabularMdp b = build_garnet(6, 2, 3, 12345, 0.9);
    CHECK((a.transition - b.transition).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.reward - b.reward).cwiseAbs().maxCoeff() == 0.0);

    int collisions = 0;
    for (std::uint64_t pair = 0; pair < 100; ++pair) {
        const TabularMdp x = build_garnet(5, 2, 3, derive_seed(1, pair), 0.9);
        const TabularMdp y = build_garnet(5, 2, 3, derive_seed(2, pair), 0.9);
        if ((x.reward - y.reward).cwiseAbs().maxCoeff() < 1e-12) ++collisions;
    }
    CHECK(collisions == 0);
}
