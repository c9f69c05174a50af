#pragma once

#include <cstdint>
#include <vector>

#include "sapp/dice.hpp"
#include "sapp/pessimism.hpp"

namespace sapp {

enum class WeightMode { ExactRatio, DualDice, ConstantOne, RandomUniform };

struct TrainConfig {
    double alpha = 5.0;
    FTransform f;  // b0/b1 double as the random_uniform range
    WeightMode weight_mode = WeightMode::ExactRatio;
    double temperature = 0.1;
    int steps = 50;

    int pretrain_steps = 100000;  // G_pre, SGD ratio pretraining
    int g_zeta = 1;               // ratio refresh steps per outer iteration
    int g_q = 10;                 // Q gradient steps per outer iteration
    int g_pi = 1;                 // policy steps when full_improvement is off
    double lr_q = 0.5;
    double lr_pi = 0.5;
    std::uint64_t seed = 0;

    bool full_improvement = true;  // closed-form softmax(Q/temperature)
    DiceSolver dice_solver = DiceSolver::ClosedForm;
    bool minibatch = false;
    int batch_size = 256;
    double out_of_support_penalty = 1e6;

    void validate() const;
};

struct TrainCheckpoint {
    int iteration = 0;
    std::uint64_t q_hash = 0;
    double true_return = 0.0;
    double est_return = 0.0;
    double omega_min = 0.0;
    double omega_mean = 0.0;
    double omega_max = 0.0;
};

struct TrainTrace {
    std::vector<TrainCheckpoint> checkpoints;
    PolicyTable final_policy;
    Vec final_q;
};

/// One empirical Bellman backup r_D + gamma P_D A^pi q (substituted rows on
/// out-of-support pairs).
Vec empirical_bellman(const Vec& q, const PolicyTable& policy, const EmpiricalModel& model,
                      double discount);

/// One synchronous SA-CQL Q update:
///   Q'(s,a) = (B_D^pi q)(s,a) - alpha w(s) (pi(a|s)-beta_hat(a|s))/beta_hat(a|s).
/// Out-of-support actions are charged (out_of_support_penalty + 1) per unit pi
/// mass so the A^pi contraction of the per-action penalty equals the
/// state-level Dis-CQL exactly.
Vec sacql_q_step(const Vec& q, const PolicyTable& policy, const EmpiricalModel& model,
                 const Vec& weights, double alpha, double discount,
                 double out_of_support_penalty = 1e6);

struct LossGrad {
    double loss = 0.0;
    Vec grad;  // dL/dQ, S*A
};

/// CQL(H)-style objective with a fixed regression target:
///   alpha E_{d^D}[omega(s)(logsumexp_a Q - E_{beta_hat} Q)]
///   + 1/2 E_D[(Q - target)^2],
/// exact tabular loss and analytic gradient.
LossGrad sacql_h_loss(const Vec& q, const PolicyTable& policy_k, const EmpiricalModel& model,
                      const Vec& omega, double alpha, const Vec& target);

/// Closed-form entropy-regularized improvement target softmax(Q/temperature).
PolicyTable softmax_policy(const Vec& q, int num_states, int num_actions,
                           double temperature);

/// Tabular mirror-ascent step: logits += eta (Q(s,.) - temperature (log pi + 1)).
PolicyTable policy_improvement_step(const Vec& q, const PolicyTable& policy,
                                    double temperature, double eta_pi);

/// The full training loop; mdp_for_eval is used only at evaluation
/// checkpoints, never by the learner.
TrainTrace train(const TabularMdp& mdp_for_eval, const OfflineDataset& dataset,
                 const TrainConfig& config);

}  // namespace sapp
