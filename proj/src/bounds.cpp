#include "sapp/bounds.hpp"

#include <cmath>
#include <deque>
#include <limits>

namespace sapp {

double c0_constant(double delta, int num_states, int num_actions,
                   double policy_class_size, double discount) {
    require(delta > 0.0 && delta < 1.0, "c0_constant: delta must lie in (0,1)");
    // log-space so |Pi| = A^S cannot overflow
    const double log_sa = std::log(2.0 * num_states * num_actions / delta);
    const double log_pi = std::isfinite(policy_class_size)
                              ? std::log(2.0 * num_states / delta) + std::log(policy_class_size)
                              : std::numeric_limits<double>::infinity();
    const double inner = std::min(std::sqrt(0.5 * std::max(0.0, log_sa)),
                                  std::sqrt(0.5 * std::max(0.0, log_pi)));
    return inner / (1.0 - discount);
}

double true_suboptimality(const TabularMdp& mdp, const PolicyTable& policy) {
    const auto [pi_star, sol_star] = optimal_policy(mdp, 1e-10);
    const double gap =
        mdp.initial_dist.dot(sol_star.v) - expected_return(mdp, policy);
    return std::max(0.0, gap);
}

namespace {

PenaltyKind classify(const PessimismSpec& spec) {
    if (!spec.state_aware) return PenaltyKind::Dis;
    return spec.f.kind == FKind::Identity ? PenaltyKind::SADis : PenaltyKind::FSADis;
}

struct PolicyTerms {
    double inf_value = 0.0;
    double sup_value = 0.0;
    double objective = 0.0;  // <rho, pessimistic v>
};

PolicyTerms evaluate_policy_terms(const TabularMdp& mdp, const EmpiricalModel& model,
                                  const PessimismSpec& spec, double c0, const Vec& v_star,
                                  const PolicyTable& pi) {
    const Vec penalty =
        pessimism_penalty(model, pi, spec, mdp.discount, mdp.initial_dist);
    const ValueSolution emp = penalized_policy_values(
        model.p_hat, model.r_hat, mdp.discount, mdp.initial_dist, pi, penalty);
    const Vec u = uncertainty_vector(model, pi);
    const double uncertainty = emp.occupancy_raw.dot(c0 * u);
    const double pen_inner = emp.occupancy_raw.dot(penalty);

    const ValueSolution truth = exact_policy_values(mdp, pi);
    const double subopt = mdp.initial_dist.dot(v_star - truth.v);

    PolicyTerms t;
    t.inf_value = subopt + uncertainty + pen_inner;
    t.sup_value = uncertainty - pen_inner;
    t.objective = mdp.initial_dist.dot(emp.v);
    return t;
}

}  // namespace

BoundReport subopt_upper_bound(const TabularMdp& mdp, const EmpiricalModel& model,
                               const PolicyClass& policy_class, const PessimismSpec& spec,
                               const TheoremConstants& constants) {
    spec.validate();
    const int S = model.num_states;
    const int A = model.num_actions;
    const double class_size = constants.policy_class_size > 0.0
                                  ? constants.policy_class_size
                                  : policy_class.size(S, A);

    BoundReport report;
    report.penalty_kind = classify(spec);
    report.c0 = c0_constant(constants.delta, S, A, class_size, mdp.discount);

    const auto [pi_star, sol_star] = optimal_policy(mdp, 1e-10);
    const Vec v_star = sol_star.v;

    double best_inf = std::numeric_limits<double>::infinity();
    double best_sup = -std::numeric_limits<double>::infinity();
    double best_obj = -std::numeric_limits<double>::infinity();
    PolicyTable best_policy;

    auto consider = [&](const PolicyTable& pi) {
        const PolicyTerms t =
            evaluate_policy_terms(mdp, model, spec, report.c0, v_star, pi);
        if (t.inf_value < best_inf) {
            best_inf = t.inf_value;
            report.pi_bar_2 = pi;
        }
        if (t.sup_value > best_sup) {
            best_sup = t.sup_value;
            report.pi_bar_1 = pi;
        }
        if (t.objective > best_obj) {
            best_obj = t.objective;
            best_policy = pi;
        }
    };

    if (policy_class.kind == PolicyClassKind::DeterministicEnumeration) {
        require(policy_class.size(S, A) <= 1e6,
                "subopt_upper_bound: enumeration class too large");
        for_each_deterministic_policy(S, A, [&](const std::vector<int>& actions) {
            consider(PolicyTable::deterministic(actions, A));
        });
    } else {
        // sampled search over deterministic policies: the sampled min upper
        // bounds the true inf and the sampled max lower bounds the true sup
        require(policy_class.restarts > 0 || policy_class.steps > 0,
                "subopt_upper_bound: optimizer budget is zero");
        Rng rng(derive_seed(policy_class.seed, 0x5eedb0d5ull));
        std::uniform_int_distribution<int> pick(0, A - 1);
        const int samples = std::max(64, policy_class.restarts * policy_class.steps / 8);
        for (int i = 0; i < samples; ++i) {
            std::vector<int> actions(S);
            for (int s = 0; s < S; ++s) actions[s] = pick(rng);
            consider(PolicyTable::deterministic(actions, A));
        }
        consider(optimize_policy(model, spec, policy_class, mdp.discount, mdp.initial_dist)
                     .policy);
    }

    report.inf_term = best_inf;
    report.sup_term = best_sup;
    report.total_ub = best_inf + best_sup;
    report.optimized_policy = best_policy;
    report.optimized_objective = best_obj;
    report.true_subopt =
        mdp.initial_dist.dot(v_star) - expected_return(mdp, best_policy);
    report.true_subopt = std::max(0.0, report.true_subopt);
    return report;
}

namespace {

double theorem2_side(const EmpiricalModel& model, const PessimismSpec& sa_spec,
                     double discount, const Vec& initial_dist, const PolicyTable& pi) {
    const ValueSolution sol = penalized_policy_values(
        model.p_hat, model.r_hat, discount, initial_dist, pi, Vec::Zero(model.num_states));
    const Vec weights =
        sa_spec.f.apply(raw_state_ratios(model, pi, discount, initial_dist));
    const Vec dis = dis_vector(sa_spec.dis, pi, model.beta_hat, model.support);
    return sol.occupancy_raw.dot((weights.array() - 1.0).matrix().cwiseProduct(dis));
}

}  // namespace

Theorem2Result theorem2_check(const BoundReport& report_dis, const BoundReport& report_sa,
                              const EmpiricalModel& model, const PessimismSpec& sa_spec,
                              double discount, const Vec& initial_dist) {
    Theorem2Result res;
    res.lhs = theorem2_side(model, sa_spec, discount, initial_dist, report_sa.pi_bar_1);
    res.rhs = theorem2_side(model, sa_spec, discount, initial_dist, report_dis.pi_bar_2);
    res.condition_holds = res.lhs >= res.rhs;
    const double tol = 1e-9 * std::max(1.0, std::abs(report_dis.total_ub));
    res.conclusion_holds = report_sa.total_ub <= report_dis.total_ub + tol;
    return res;
}

int argmin_visited_d_data(const EmpiricalModel& model) {
    int s1 = -1;
    for (int s = 0; s < model.num_states; ++s) {
        if (!model.visited[s]) continue;
        if (s1 < 0 || model.d_data(s) < model.d_data(s1)) s1 = s;
    }
    require(s1 >= 0, "argmin_visited_d_data: no visited state");
    return s1;
}

PolicyTable shortest_path_policy(const EmpiricalModel& model, int target) {
    const int S = model.num_states;
    const int A = model.num_actions;
    // BFS over the reversed supported-transition graph
    std::vector<int> dist(S, -1);
    dist[target] = 0;
    std::deque<int> queue{target};
    std::vector<std::vector<std::pair<int, int>>> incoming(S);  // (s,a) reaching key
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            if (!model.support[s][a]) continue;
            for (int sn = 0; sn < S; ++sn)
                if (model.p_hat(model.index(s, a), sn) > 0.0)
                    incoming[sn].push_back({s, a});
        }
    while (!queue.empty()) {
        const int sn = queue.front();
        queue.pop_front();
        for (auto [s, a] : incoming[sn])
            if (dist[s] < 0) {
                dist[s] = dist[sn] + 1;
                queue.push_back(s);
            }
    }

    std::vector<int> actions(S, 0);
    for (int s = 0; s < S; ++s) {
        int chosen = -1;
        if (dist[s] >= 0) {
            // supported action with the most probability mass on strictly
            // closer states; at the target itself prefer returning mass
            double best_mass = -1.0;
            for (int a = 0; a < A; ++a) {
                if (!model.support[s][a]) continue;
                double mass = 0.0;
                for (int sn = 0; sn < S; ++sn) {
                    const bool closer = s == target ? sn == target
                                                    : (dist[sn] >= 0 && dist[sn] < dist[s]);
                    if (closer) mass += model.p_hat(model.index(s, a), sn);
                }
                if (mass > best_mass + 1e-15) {
                    best_mass = mass;
                    chosen = a;
                }
            }
        }
        if (chosen < 0) {
            // unreachable or unvisited: fall back to the most-seen action
            int best_count = -1;
            for (int a = 0; a < A; ++a)
                if (model.count_sa(s, a) > best_count) {
                    best_count = model.count_sa(s, a);
                    chosen = a;
                }
        }
        actions[s] = chosen;
    }
    return PolicyTable::deterministic(actions, A);
}

TheoremConstants measure_constants(const EmpiricalModel& model, const DisSpec& dis_spec,
                                   double discount, const Vec& initial_dist,
                                   const PolicyTable& pi_bar_2, double delta,
                                   double alpha_prime, double policy_class_size) {
    TheoremConstants c;
    c.delta = delta;
    c.alpha_prime = alpha_prime;
    c.policy_class_size = policy_class_size;

    double eps_beta = 1.0;
    for (int s = 0; s < model.num_states; ++s)
        for (int a = 0; a < model.num_actions; ++a)
            if (model.support[s][a]) eps_beta = std::min(eps_beta, model.beta_hat(s, a));
    c.eps_beta = eps_beta;

    const int s1 = argmin_visited_d_data(model);
    const PolicyTable pi0 = shortest_path_policy(model, s1);
    const ValueSolution sol0 = penalized_policy_values(
        model.p_hat, model.r_hat, discount, initial_dist, pi0, Vec::Zero(model.num_states));
    c.eps_d = sol0.occupancy_raw(s1);
    c.delta_beta =
        dis_vector(dis_spec, pi0, model.beta_hat, model.support).maxCoeff();
    c.delta_beta = std::max(c.delta_beta, 1e-12);

    const Vec ratios = raw_state_ratios(model, pi_bar_2, discount, initial_dist);
    double worst = 0.0;
    for (int s = 0; s < model.num_states; ++s)
        if (model.visited[s]) worst = std::max(worst, ratios(s) - 1.0);
    c.c_slack = std::max(worst, 1e-9);
    return c;
}

Theorem3Result theorem3_check(const EmpiricalModel& model, const TheoremConstants& constants,
                              const PolicyTable& pi_bar_1, int s1, const DisSpec& dis_spec,
                              double discount,
                              const std::optional<FTransform>& f_transform) {
    Theorem3Result res;
    const double c0 = c0_constant(constants.delta, model.num_states, model.num_actions,
                                  constants.policy_class_size, discount);
    res.c_m = c0 * constants.eps_d - constants.alpha_prime * constants.delta_beta;
    res.applicable =
        constants.alpha_prime < c0 * constants.eps_d / constants.delta_beta;
    if (!res.applicable) return res;
    res.c_m_prime = res.c_m * res.c_m / constants.delta_beta;

    double d_s1 = model.d_data(s1);
    if (f_transform) {
        const Vec transformed = f_transform->apply(model.d_data.cwiseMax(1e-300));
        d_s1 = transformed(s1);
        for (int s = 0; s < model.num_states; ++s) {
            if (!model.visited[s]) continue;
            if (transformed(s) < std::sqrt(model.d_data(s))) res.f_hypothesis_holds = false;
        }
        if (!res.f_hypothesis_holds) {
            res.applicable = false;
            return res;
        }
    }

    const Vec dis = dis_vector(dis_spec, pi_bar_1, model.beta_hat, model.support);
    res.lhs = res.c_m_prime *
              (constants.eps_beta / d_s1 - std::sqrt(constants.eps_beta)) * dis(s1);
    res.condition_holds = res.lhs > 1.0 + constants.c_slack;
    return res;
}

namespace {

Vec capped_state_counts(const EmpiricalModel& model) {
    Vec n_state(model.num_states);
    for (int s = 0; s < model.num_states; ++s)
        n_state(s) = model.count_s(s) > 0
                         ? std::min(1.0 / std::sqrt(double(model.count_s(s))), 1.0)
                         : 1.0;
    return n_state;
}

}  // namespace

double theorem4_threshold(const TabularMdp& mdp, const EmpiricalModel& model,
                          const PolicyClass& policy_class, const PessimismSpec& spec,
                          const TheoremConstants& constants) {
    require(policy_class.kind == PolicyClassKind::DeterministicEnumeration,
            "theorem4_threshold: needs the enumeration class");
    const int S = model.num_states;
    const int A = model.num_actions;
    const double c0 = c0_constant(constants.delta, S, A,
                                  constants.policy_class_size > 0.0
                                      ? constants.policy_class_size
                                      : policy_class.size(S, A),
                                  mdp.discount);
    const Vec n_state = capped_state_counts(model);
    double threshold = 0.0;
    for_each_deterministic_policy(S, A, [&](const std::vector<int>& actions) {
        const PolicyTable pi = PolicyTable::deterministic(actions, A);
        const Vec w =
            spec.f.apply(raw_state_ratios(model, pi, mdp.discount, mdp.initial_dist));
        const Vec dis = dis_vector(spec.dis, pi, model.beta_hat, model.support);
        threshold =
            std::max(threshold, (w.cwiseProduct(dis).cwiseProduct(n_state)).maxCoeff());
    });
    return c0 * threshold;
}

Theorem4Result theorem4_clip_search(const TabularMdp& mdp, const EmpiricalModel& model,
                                    const PolicyClass& policy_class,
                                    const PessimismSpec& spec_large_alpha,
                                    const TheoremConstants& constants) {
    require(policy_class.kind == PolicyClassKind::DeterministicEnumeration,
            "theorem4_clip_search: needs the enumeration class");
    const int S = model.num_states;
    const int A = model.num_actions;
    Theorem4Result res;
    res.threshold =
        theorem4_threshold(mdp, model, policy_class, spec_large_alpha, constants);

    double max_ratio = 1.0;
    for_each_deterministic_policy(S, A, [&](const std::vector<int>& actions) {
        const PolicyTable pi = PolicyTable::deterministic(actions, A);
        const Vec raw = raw_state_ratios(model, pi, mdp.discount, mdp.initial_dist);
        max_ratio = std::max(max_ratio, raw.maxCoeff());
    });
    res.max_ratio = max_ratio;
    res.applicable = spec_large_alpha.alpha > res.threshold;
    if (!res.applicable) return res;

    // In the large-alpha regime the SUP term is non-positive and drops from
    // the bound, so the operative suboptimality upper bound is the INF term
    // alone; that is also the quantity the clip argument is monotone in.
    PessimismSpec plain = spec_large_alpha;
    plain.state_aware = false;
    const BoundReport dis_report =
        subopt_upper_bound(mdp, model, policy_class, plain, constants);
    res.ub_dis = dis_report.inf_term;
    const double tol = 1e-9 * std::max(1.0, std::abs(res.ub_dis));

    auto clipped_inf = [&](double clip) {
        PessimismSpec sa = spec_large_alpha;
        sa.state_aware = true;
        sa.f.kind = FKind::Clip;
        sa.f.clip_max = clip;
        return subopt_upper_bound(mdp, model, policy_class, sa, constants);
    };
    auto admissible = [&](const BoundReport& rep) {
        // the INF-only bound is valid only while the dropped SUP term is <= 0
        return rep.sup_term <= tol && rep.inf_term <= res.ub_dis + tol;
    };

    const BoundReport at_max = clipped_inf(max_ratio);
    if (dis_report.sup_term <= tol && admissible(at_max)) {
        res.clip_c = max_ratio;
        res.ub_clipped_sa = at_max.inf_term;
        return res;
    }
    double lo = 1.0, hi = max_ratio;
    BoundReport at_lo = clipped_inf(lo);
    for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (lo + hi);
        const BoundReport rep = clipped_inf(mid);
        if (admissible(rep)) {
            lo = mid;
            at_lo = rep;
        } else {
            hi = mid;
        }
    }
    res.clip_c = lo;
    res.ub_clipped_sa = at_lo.inf_term;
    return res;
}

Theorem5Result underestimation_check(const TabularMdp& mdp, const EmpiricalModel& model,
                                     const PolicyTable& policy, const PessimismSpec& spec,
                                     const TheoremConstants& constants) {
    Theorem5Result res;
    const double c0 = c0_constant(constants.delta, model.num_states, model.num_actions,
                                  constants.policy_class_size, mdp.discount);

    const Vec v_true = exact_policy_values(mdp, policy).v;
    PessimismSpec sa = spec;
    sa.state_aware = true;
    const Vec v_hat =
        sa_proximal_eval(model, policy, sa, mdp.discount, mdp.initial_dist).v;
    const Vec w =
        state_aware_weights(model, policy, mdp.discount, mdp.initial_dist, sa.f);
    const Vec dis = dis_vector(sa.dis, policy, model.beta_hat, model.support);
    const Vec u = uncertainty_vector(model, policy);

    Vec n_state(model.num_states);
    for (int s = 0; s < model.num_states; ++s)
        n_state(s) = model.count_s(s) > 0
                         ? std::min(1.0 / std::sqrt(double(model.count_s(s))), 1.0)
                         : 1.0;
    res.alpha_threshold = c0 * (w.cwiseProduct(dis).cwiseProduct(n_state)).maxCoeff();
    res.large_alpha_applicable = sa.alpha > res.alpha_threshold;

    res.pointwise_bound_holds = true;
    res.large_alpha_underestimates = true;
    for (int s = 0; s < model.num_states; ++s) {
        if (!model.visited[s]) continue;
        const double bound = v_true(s) - sa.alpha * w(s) * dis(s) + c0 * u(s);
        if (v_hat(s) > bound + 1e-9) res.pointwise_bound_holds = false;
        if (v_hat(s) > v_true(s) + 1e-9) res.large_alpha_underestimates = false;
    }
    return res;
}

}  // namespace sapp
