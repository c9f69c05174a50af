#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "sapp/offline_data.hpp"

namespace sapp {

enum class DisKind { CQL, TV, KL };

/// State-wise distance family between a policy and the empirical behavior
/// policy. CQL: E_pi[pi/beta_hat - 1]; TV: half L1; KL: E_pi[log(pi/beta_hat)].
/// Probability mass on out-of-support actions is charged
/// out_of_support_penalty per unit mass (CQL and KL kinds).
struct DisSpec {
    DisKind kind = DisKind::CQL;
    double out_of_support_penalty = 1e6;

    void validate() const { require(out_of_support_penalty > 0.0, "DisSpec: penalty <= 0"); }
};

enum class FKind { Identity, NormalizedLog, Clip };

/// Monotone transform applied to raw state-distribution ratios.
/// NormalizedLog maps the ratio vector into [b0, b1] by min/max-normalized
/// logs; Clip is w -> min(w, clip_max).
struct FTransform {
    FKind kind = FKind::Identity;
    double b0 = 0.5;
    double b1 = 5.0;
    double clip_max = 1.0;

    void validate() const;
    Vec apply(const Vec& raw) const;
};

struct PessimismSpec {
    DisSpec dis;
    double alpha = 0.0;  // conservative weight, any value >= 0
    bool state_aware = false;
    FTransform f;

    void validate() const;
};

enum class PolicyClassKind { DeterministicEnumeration, EpsilonSupportedSoftmax };

struct PolicyClass {
    PolicyClassKind kind = PolicyClassKind::DeterministicEnumeration;
    double epsilon_beta = 0.01;
    int steps = 2000;
    double learning_rate = 0.05;
    int restarts = 8;
    std::uint64_t seed = 0;

    /// |Pi| used inside C0; infinite for the softmax class so the union bound
    /// falls back to the state-action branch.
    double size(int num_states, int num_actions) const;
};

/// Dis(pi, beta_hat) per state; always >= 0 with the default penalty.
Vec dis_vector(const DisSpec& spec, const PolicyTable& policy, const Mat& beta_hat,
               const std::vector<std::vector<bool>>& support);

/// Raw occupancy ratios occ_norm^pi_{M_D}(s) / d_data(s); never-visited states
/// use a half-count floor 1/(2|D|) in the denominator.
Vec raw_state_ratios(const EmpiricalModel& model, const PolicyTable& policy,
                     double discount, const Vec& initial_dist);

/// f(raw_state_ratios); the w^{pi/D} weights of state-aware pessimism.
Vec state_aware_weights(const EmpiricalModel& model, const PolicyTable& policy,
                        double discount, const Vec& initial_dist, const FTransform& f);

/// The alpha-scaled penalty vector this spec induces for a policy.
Vec pessimism_penalty(const EmpiricalModel& model, const PolicyTable& policy,
                      const PessimismSpec& spec, double discount, const Vec& initial_dist);

/// Fixed point v = A^pi (r_D + gamma P_D v) - alpha Dis, solved exactly on the
/// empirical MDP (out-of-support rows substituted). spec.state_aware must be
/// false.
ValueSolution proximal_eval(const EmpiricalModel& model, const PolicyTable& policy,
                            const PessimismSpec& spec, double discount,
                            const Vec& initial_dist);

/// Fixed point with penalty alpha * w^{pi/D} . Dis; spec.state_aware must be
/// true. With f = identity and w == 1 this matches proximal_eval bit-for-bit.
ValueSolution sa_proximal_eval(const EmpiricalModel& model, const PolicyTable& policy,
                               const PessimismSpec& spec, double discount,
                               const Vec& initial_dist);

struct OptimizeResult {
    PolicyTable policy;
    double objective = 0.0;  // <rho, v> re-evaluated exactly
};

/// <rho, v(pi)> under the spec's penalty; the softmax optimizer's objective.
double policy_objective(const EmpiricalModel& model, const PessimismSpec& spec,
                        double discount, const Vec& initial_dist, const PolicyTable& policy);

/// Exact adjoint gradient of policy_objective with respect to the policy
/// probabilities (off the min/max kinks of normalized_log).
Mat policy_objective_gradient(const EmpiricalModel& model, const PessimismSpec& spec,
                              double discount, const Vec& initial_dist,
                              const PolicyTable& policy);

/// argmax_pi <rho, E(pi, D)> over the policy class. Enumeration is exact;
/// the softmax class runs projected gradient ascent with restarts.
OptimizeResult optimize_policy(const EmpiricalModel& model, const PessimismSpec& spec,
                               const PolicyClass& policy_class, double discount,
                               const Vec& initial_dist);

/// Visits every deterministic policy (A^S of them) as an action vector.
void for_each_deterministic_policy(int num_states, int num_actions,
                                   const std::function<void(const std::vector<int>&)>& fn);

}  // namespace sapp
