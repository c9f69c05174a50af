#pragma once

#include <vector>

#include "sapp/envs.hpp"
#include "sapp/mdp.hpp"
#include "sapp/offline_data.hpp"
#include "sapp/pessimism.hpp"

namespace sapp::testing {

/// Single state, `num_actions` self-loop actions with the given rewards.
inline TabularMdp single_state(const std::vector<double>& rewards, double discount) {
    TabularMdp mdp;
    mdp.num_states = 1;
    mdp.num_actions = static_cast<int>(rewards.size());
    mdp.discount = discount;
    mdp.transition = Mat::Ones(mdp.num_actions, 1);
    mdp.reward = Eigen::Map<const Vec>(rewards.data(), mdp.num_actions);
    mdp.initial_dist = Vec::Ones(1);
    mdp.validate();
    return mdp;
}

/// s0 -> s1 (absorbing), r(s0,.) = 1, r(s1,.) = 0, one action.
inline TabularMdp two_state_absorbing(double discount) {
    TabularMdp mdp;
    mdp.num_states = 2;
    mdp.num_actions = 1;
    mdp.discount = discount;
    mdp.transition = Mat::Zero(2, 2);
    mdp.transition(0, 1) = 1.0;
    mdp.transition(1, 1) = 1.0;
    mdp.reward = Vec::Zero(2);
    mdp.reward(0) = 1.0;
    mdp.initial_dist = Vec::Zero(2);
    mdp.initial_dist(0) = 1.0;
    mdp.validate();
    return mdp;
}

/// 500-iteration Bellman evaluation with penalty; the iterative oracle used
/// against the direct linear solve.
inline Vec iterate_penalized_values(const Mat& transition, const Vec& reward,
                                    double discount, const PolicyTable& policy,
                                    const Vec& penalty, int iters = 500) {
    const Mat act = activity_matrix(policy, policy.num_states(), policy.num_actions());
    Vec v = Vec::Zero(policy.num_states());
    for (int i = 0; i < iters; ++i)
        v = act * (reward + discount * (transition * v)) - penalty;
    return v;
}

/// Uniform-behavior trajectory dataset over a garnet built from one seed.
inline std::pair<TabularMdp, OfflineDataset> garnet_with_data(
    int num_states, int num_actions, int branching, double discount, int episodes,
    int horizon, std::uint64_t seed) {
    const TabularMdp mdp = build_garnet(num_states, num_actions, branching, seed, discount);
    const PolicyTable beta = PolicyTable::uniform(num_states, num_actions);
    const OfflineDataset data =
        generate_dataset(mdp, beta, episodes, horizon, derive_seed(seed, 1));
    return {mdp, data};
}

/// Random policy table with rows on the simplex.
inline PolicyTable random_policy(int num_states, int num_actions, Rng& rng) {
    std::uniform_real_distribution<double> unif(0.05, 1.0);
    PolicyTable pi;
    pi.probs = Mat::Zero(num_states, num_actions);
    for (int s = 0; s < num_states; ++s) {
        for (int a = 0; a < num_actions; ++a) pi.probs(s, a) = unif(rng);
        pi.probs.row(s) /= pi.probs.row(s).sum();
    }
    return pi;
}

}  // namespace sapp::testing
