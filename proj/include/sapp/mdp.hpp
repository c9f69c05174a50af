#pragma once

#include <cstdint>
#include <utility>

#include "sapp/common.hpp"

namespace sapp {

/// Exact finite MDP. `transition` stacks the next-state distribution of every
/// state-action pair row-major: row index(s,a) = s*num_actions + a.
struct TabularMdp {
    int num_states = 0;
    int num_actions = 0;
    Mat transition;    // (S*A) x S, row-stochastic
    Vec reward;        // S*A, entries in [-1, 1]
    double discount = 0.0;
    Vec initial_dist;  // S

    int index(int s, int a) const { return s * num_actions + a; }
    int joint_size() const { return num_states * num_actions; }

    /// Throws std::invalid_argument when any structural invariant fails.
    void validate() const;
};

/// Row-stochastic state x action table.
struct PolicyTable {
    Mat probs;  // S x A

    int num_states() const { return static_cast<int>(probs.rows()); }
    int num_actions() const { return static_cast<int>(probs.cols()); }
    void validate() const;

    static PolicyTable uniform(int num_states, int num_actions);
    static PolicyTable deterministic(const std::vector<int>& actions, int num_actions);
};

struct ValueSolution {
    Vec q;               // S*A
    Vec v;               // S
    Vec occupancy_raw;   // S, sums to 1/(1-gamma)
    Vec occupancy_norm;  // S, probability vector
};

/// A^pi: entry (s, <s~,a>) = pi(a|s) when s == s~, else 0. Each row sums to 1.
Mat activity_matrix(const PolicyTable& policy, int num_states, int num_actions);

/// Solves the Bellman fixed point (I - gamma A P) v = A r exactly (dense LU),
/// plus the occupancy row rho^T (I - gamma A P)^{-1}.
ValueSolution exact_policy_values(const TabularMdp& mdp, const PolicyTable& policy);

/// Evaluates a policy on explicit (P, r, rho) with an additive per-state
/// penalty subtracted inside the fixed point:
///   v = A (r + gamma P v) - penalty.
/// This is the shared engine behind exact and pessimistic evaluation.
ValueSolution penalized_policy_values(const Mat& transition, const Vec& reward,
                                      double discount, const Vec& initial_dist,
                                      const PolicyTable& policy, const Vec& penalty);

/// Value iteration to tolerance, greedy-deterministic extraction (ties break
/// to the lowest action index), then an exact evaluation of the greedy policy.
std::pair<PolicyTable, ValueSolution> optimal_policy(const TabularMdp& mdp, double tol);

/// <rho, V^pi>.
double expected_return(const TabularMdp& mdp, const PolicyTable& policy);

struct MonteCarloResult {
    double mean = 0.0;
    double stderr_ = 0.0;
};

/// Truncated-rollout return estimate from rho; deterministic given seed.
MonteCarloResult monte_carlo_return(const TabularMdp& mdp, const PolicyTable& policy,
                                    int num_rollouts, int horizon, std::uint64_t seed);

/// Horizon such that gamma^h / (1-gamma) <= eps.
int truncation_horizon(double discount, double eps = 1e-4);

}  // namespace sapp
