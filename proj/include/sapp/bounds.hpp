#pragma once

#include <optional>

#include "sapp/pessimism.hpp"

namespace sapp {

/// Constants entering the theorem conditions. All fields can be measured from
/// an instance via measure_constants or supplied by the caller.
struct TheoremConstants {
    double delta = 0.1;
    double eps_beta = 0.0;            // min supported beta_hat(a|s)
    double eps_d = 0.0;               // d^{pi_0}_D(s1), raw occupancy
    double delta_beta = 0.0;          // max_s Dis(pi_0, beta_hat)(s)
    double c_slack = 0.0;             // max_s d^{pi_bar_2}_D/d^D - 1
    double alpha_prime = 0.0;
    double policy_class_size = 0.0;   // |Pi|
};

enum class PenaltyKind { Dis, SADis, FSADis };

struct BoundReport {
    double c0 = 0.0;
    double inf_term = 0.0;
    PolicyTable pi_bar_2;  // argmin of this report's INF
    double sup_term = 0.0;
    PolicyTable pi_bar_1;  // argmax of this report's SUP
    double total_ub = 0.0;
    double true_subopt = 0.0;  // of the matching optimize_policy output
    PenaltyKind penalty_kind = PenaltyKind::Dis;
    PolicyTable optimized_policy;
    double optimized_objective = 0.0;
};

/// C0 = 1/(1-gamma) min( sqrt(ln(2 S A / delta)/2), sqrt(ln(2 S |Pi| / delta)/2) ).
double c0_constant(double delta, int num_states, int num_actions,
                   double policy_class_size, double discount);

/// <rho, V^{pi*} - V^pi> in the true MDP; clipped at 0 against roundoff.
double true_suboptimality(const TabularMdp& mdp, const PolicyTable& policy);

/// Evaluates the suboptimality upper bound
///   inf_pi ( <rho, V*-V^pi> + <d^pi_D, C0 n^{-1/2}_{D,pi} + alpha p> )
///   + sup_pi <d^pi_D, C0 n^{-1/2}_{D,pi} - alpha p>
/// by exact enumeration of the policy class (sampled search for the softmax
/// class, giving one-sided bounds), together with the matching optimizer run
/// and its true suboptimality. d^pi_D is the raw (unnormalized) occupancy in
/// the empirical MDP; the ratios inside state-aware penalties are normalized.
BoundReport subopt_upper_bound(const TabularMdp& mdp, const EmpiricalModel& model,
                               const PolicyClass& policy_class, const PessimismSpec& spec,
                               const TheoremConstants& constants);

struct Theorem2Result {
    bool condition_holds = false;
    double lhs = 0.0;
    double rhs = 0.0;
    bool conclusion_holds = false;  // total_ub_SA <= total_ub_Dis
};

/// Condition: <d^{pi1}_D, (f(w^{pi1}) - 1) Dis(pi1)> >= same for pi2, with
/// pi1 = report_sa.pi_bar_1 and pi2 = report_dis.pi_bar_2. The f transform is
/// taken from sa_spec (identity reproduces the plain condition).
Theorem2Result theorem2_check(const BoundReport& report_dis, const BoundReport& report_sa,
                              const EmpiricalModel& model, const PessimismSpec& sa_spec,
                              double discount, const Vec& initial_dist);

struct Theorem3Result {
    bool applicable = false;      // alpha' < C0 eps_d / Delta_beta
    bool condition_holds = false;
    double lhs = 0.0;
    double c_m = 0.0;
    double c_m_prime = 0.0;
    bool f_hypothesis_holds = true;  // f(x) >= sqrt(x) gate for the f-variant
};

/// Evaluates C'_M (eps_beta / d^D(s1) - sqrt(eps_beta)) Dis(pi_bar_1)(s1) > 1+c
/// with C_M = C0 eps_d - alpha' Delta_beta and C'_M = C_M^2 / Delta_beta.
/// When f_transform is given, d^D(s1) is replaced by f(d^D)(s1) and the
/// f(x) >= sqrt(x) hypothesis is verified on the transformed vector.
Theorem3Result theorem3_check(const EmpiricalModel& model, const TheoremConstants& constants,
                              const PolicyTable& pi_bar_1, int s1, const DisSpec& dis_spec,
                              double discount,
                              const std::optional<FTransform>& f_transform = std::nullopt);

struct Theorem4Result {
    bool applicable = false;  // alpha above the largeness threshold
    double threshold = 0.0;
    double clip_c = 1.0;
    double ub_clipped_sa = 0.0;  // INF-term bound at the returned clip
    double ub_dis = 0.0;         // INF-term bound of the plain penalty
    double max_ratio = 1.0;
};

/// The largeness threshold C0 max_s (w . Dis . n_D^{-1/2})(s), maximized over
/// the enumerated policy class (n_D uses capped state counts).
double theorem4_threshold(const TabularMdp& mdp, const EmpiricalModel& model,
                          const PolicyClass& policy_class, const PessimismSpec& spec,
                          const TheoremConstants& constants);

/// Searches the largest clip value C in [1, max ratio] with
/// UB(clip-SA) <= UB(Dis). Above the largeness threshold the SUP term is
/// non-positive and drops from the bound, so both sides are the INF terms
/// (the quantity the clip argument is monotone in); validity of the dropped
/// term is re-checked at every probed clip.
Theorem4Result theorem4_clip_search(const TabularMdp& mdp, const EmpiricalModel& model,
                                    const PolicyClass& policy_class,
                                    const PessimismSpec& spec_large_alpha,
                                    const TheoremConstants& constants);

struct Theorem5Result {
    bool pointwise_bound_holds = false;
    bool large_alpha_applicable = false;
    bool large_alpha_underestimates = false;
    double alpha_threshold = 0.0;
};

/// Pointwise: V_hat(s) <= V(s) - alpha w(s) Dis(s) + C0 n^{-1/2}_{D,pi}(s) on
/// visited states; large-alpha branch: V_hat <= V on visited states.
Theorem5Result underestimation_check(const TabularMdp& mdp, const EmpiricalModel& model,
                                     const PolicyTable& policy, const PessimismSpec& spec,
                                     const TheoremConstants& constants);

/// Measures eps_beta, (eps_d, Delta_beta) via the shortest-supported-path
/// policy pi_0 toward s1 = argmin_{visited} d^D, and c from pi_bar_2.
TheoremConstants measure_constants(const EmpiricalModel& model, const DisSpec& dis_spec,
                                   double discount, const Vec& initial_dist,
                                   const PolicyTable& pi_bar_2, double delta,
                                   double alpha_prime, double policy_class_size);

/// argmin over visited states of d^D.
int argmin_visited_d_data(const EmpiricalModel& model);

/// Deterministic policy routing every state toward `target` along shortest
/// supported paths in the empirical MDP (Remark-style construction).
PolicyTable shortest_path_policy(const EmpiricalModel& model, int target);

}  // namespace sapp
