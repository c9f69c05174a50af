#pragma once

#include <cstdint>
#include <vector>

#include "sapp/mdp.hpp"

namespace sapp {

struct Transition {
    int s = 0;
    int a = 0;
    double r = 0.0;
    int s_next = 0;
    bool is_initial = false;
};

struct OfflineDataset {
    std::vector<Transition> transitions;
    std::uint64_t source_seed = 0;

    int size() const { return static_cast<int>(transitions.size()); }
};

/// Counts, empirical behavior policy, empirical state distribution and the
/// empirical MDP (P_D, r_D) derived from a dataset. Out-of-support (s,a)
/// pairs are flagged in `support`; their p_hat rows carry the pessimistic
/// substitution (self-loop, reward -1) used by all downstream evaluators.
struct EmpiricalModel {
    int num_states = 0;
    int num_actions = 0;
    int dataset_size = 0;

    Eigen::VectorXi count_s;                 // S
    Eigen::MatrixXi count_sa;                // S x A
    std::vector<Eigen::VectorXi> count_sas;  // per supported row, length S

    Mat beta_hat;  // S x A; rows of unvisited states are uniform placeholders
    Vec d_data;    // S, n_D(s)/|D|
    Mat p_hat;     // (S*A) x S
    Vec r_hat;     // S*A
    std::vector<std::vector<bool>> support;  // S x A
    std::vector<bool> visited;               // S

    int index(int s, int a) const { return s * num_actions + a; }
    bool supported(int s, int a) const { return support[s][a]; }
    /// Probability mass pi places on out-of-support actions at s.
    double unsupported_mass(const PolicyTable& policy, int s) const;
};

/// Fixed-horizon episodes from rho following `behavior`; the step at t=0 of
/// each episode is flagged is_initial.
OfflineDataset generate_dataset(const TabularMdp& mdp, const PolicyTable& behavior,
                                int num_episodes, int horizon, std::uint64_t seed);

/// Episodes with geometric length (P(len > t) = gamma^t, truncated), so the
/// aggregate state-action frequency matches the discounted occupancy of the
/// behavior policy. Used by the on-policy ratio-estimation oracles.
OfflineDataset generate_dataset_discounted(const TabularMdp& mdp, const PolicyTable& behavior,
                                           int num_episodes, int max_horizon,
                                           std::uint64_t seed);

/// Independent transition samples s ~ state_dist, a ~ behavior(.|s), s' ~ P.
OfflineDataset generate_dataset_iid(const TabularMdp& mdp, const Vec& state_dist,
                                    const PolicyTable& behavior, int num_samples,
                                    std::uint64_t seed);

EmpiricalModel build_empirical_model(const OfflineDataset& dataset, int num_states,
                                     int num_actions);

/// n^{-1/2}_{D,pi}: entry(s) = sum_a pi(a|s) min(n_D(s,a)^{-1/2}, cap), with
/// zero counts contributing cap.
Vec uncertainty_vector(const EmpiricalModel& model, const PolicyTable& policy,
                       double cap = 1.0);

}  // namespace sapp
