#include "sapp/pessimism.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sapp {

void FTransform::validate() const {
    if (kind == FKind::NormalizedLog)
        require(b1 >= b0, "FTransform: b1 < b0");
    if (kind == FKind::Clip)
        require(clip_max > 0.0, "FTransform: clip_max <= 0");
}

Vec FTransform::apply(const Vec& raw) const {
    switch (kind) {
        case FKind::Identity:
            return raw;
        case FKind::Clip:
            return raw.cwiseMin(clip_max);
        case FKind::NormalizedLog: {
            require(raw.minCoeff() > 0.0, "FTransform: normalized_log needs positive ratios");
            // Dividing by the max first makes the transform invariant to
            // power-of-two rescalings bit-for-bit (exponent shift only) and to
            // arbitrary positive rescalings up to an ulp.
            const double xmax = raw.maxCoeff();
            Vec u(raw.size());
            for (int i = 0; i < raw.size(); ++i) u(i) = std::log(raw(i) / xmax);
            const double umin = u.minCoeff();
            const double umax = u.maxCoeff();
            Vec out(raw.size());
            if (umax - umin <= 0.0) {
                // no relative information; no state-aware modulation
                out.setConstant(std::clamp(1.0, b0, b1));
                return out;
            }
            const double k = (b1 - b0) / (umax - umin);
            for (int i = 0; i < raw.size(); ++i) out(i) = b0 + k * (u(i) - umin);
            return out;
        }
    }
    throw std::logic_error("FTransform: unknown kind");
}

void PessimismSpec::validate() const {
    dis.validate();
    f.validate();
    require(std::isfinite(alpha) && alpha >= 0.0, "PessimismSpec: alpha must be finite, >= 0");
}

double PolicyClass::size(int num_states, int num_actions) const {
    if (kind == PolicyClassKind::DeterministicEnumeration)
        return std::pow(static_cast<double>(num_actions), static_cast<double>(num_states));
    return std::numeric_limits<double>::infinity();
}

Vec dis_vector(const DisSpec& spec, const PolicyTable& policy, const Mat& beta_hat,
               const std::vector<std::vector<bool>>& support) {
    spec.validate();
    const int S = policy.num_states();
    const int A = policy.num_actions();
    require(beta_hat.rows() == S && beta_hat.cols() == A,
            "dis_vector: beta_hat dimensions mismatch");
    Vec d = Vec::Zero(S);
    for (int s = 0; s < S; ++s) {
        double supported_term = 0.0;
        double supported_mass = 0.0;
        double unsupported_mass = 0.0;
        for (int a = 0; a < A; ++a) {
            const double pi = policy.probs(s, a);
            if (!support[s][a]) {
                unsupported_mass += pi;
                if (spec.kind == DisKind::TV) supported_term += 0.5 * pi;
                continue;
            }
            const double beta = beta_hat(s, a);
            switch (spec.kind) {
                case DisKind::CQL:
                    supported_term += pi * pi / beta;
                    supported_mass += pi;
                    break;
                case DisKind::TV:
                    supported_term += 0.5 * std::abs(pi - beta);
                    break;
                case DisKind::KL:
                    if (pi > 0.0) supported_term += pi * std::log(pi / beta);
                    break;
            }
        }
        switch (spec.kind) {
            case DisKind::CQL:
                // E_pi[pi/beta_hat - 1] restricted to support; out-of-support
                // mass is charged (penalty + 1) per unit so the total always
                // dominates penalty * mass and contracts from the per-action
                // form (pi - beta)/beta exactly
                d(s) = supported_term - supported_mass +
                       (spec.out_of_support_penalty + 1.0) * unsupported_mass;
                break;
            case DisKind::TV:
                d(s) = supported_term;
                break;
            case DisKind::KL:
                d(s) = supported_term + spec.out_of_support_penalty * unsupported_mass;
                break;
        }
    }
    return d;
}

Vec raw_state_ratios(const EmpiricalModel& model, const PolicyTable& policy,
                     double discount, const Vec& initial_dist) {
    const ValueSolution sol =
        penalized_policy_values(model.p_hat, model.r_hat, discount, initial_dist, policy,
                                Vec::Zero(model.num_states));
    const double floor = 1.0 / (2.0 * model.dataset_size);
    Vec ratios(model.num_states);
    for (int s = 0; s < model.num_states; ++s) {
        const double denom = model.d_data(s) > 0.0 ? model.d_data(s) : floor;
        ratios(s) = sol.occupancy_norm(s) / denom;
    }
    return ratios;
}

Vec state_aware_weights(const EmpiricalModel& model, const PolicyTable& policy,
                        double discount, const Vec& initial_dist, const FTransform& f) {
    return f.apply(raw_state_ratios(model, policy, discount, initial_dist));
}

Vec pessimism_penalty(const EmpiricalModel& model, const PolicyTable& policy,
                      const PessimismSpec& spec, double discount, const Vec& initial_dist) {
    Vec p = dis_vector(spec.dis, policy, model.beta_hat, model.support);
    if (spec.state_aware)
        p = p.cwiseProduct(state_aware_weights(model, policy, discount, initial_dist, spec.f));
    return spec.alpha * p;
}

ValueSolution proximal_eval(const EmpiricalModel& model, const PolicyTable& policy,
                            const PessimismSpec& spec, double discount,
                            const Vec& initial_dist) {
    spec.validate();
    require(!spec.state_aware, "proximal_eval: spec must have state_aware=false");
    const Vec penalty = pessimism_penalty(model, policy, spec, discount, initial_dist);
    return penalized_policy_values(model.p_hat, model.r_hat, discount, initial_dist, policy,
                                   penalty);
}

ValueSolution sa_proximal_eval(const EmpiricalModel& model, const PolicyTable& policy,
                               const PessimismSpec& spec, double discount,
                               const Vec& initial_dist) {
    spec.validate();
    require(spec.state_aware, "sa_proximal_eval: spec must have state_aware=true");
    const Vec penalty = pessimism_penalty(model, policy, spec, discount, initial_dist);
    return penalized_policy_values(model.p_hat, model.r_hat, discount, initial_dist, policy,
                                   penalty);
}

void for_each_deterministic_policy(int num_states, int num_actions,
                                   const std::function<void(const std::vector<int>&)>& fn) {
    std::vector<int> actions(num_states, 0);
    while (true) {
        fn(actions);
        int s = 0;
        while (s < num_states) {
            if (++actions[s] < num_actions) break;
            actions[s] = 0;
            ++s;
        }
        if (s == num_states) return;
    }
}


double policy_objective(const EmpiricalModel& model, const PessimismSpec& spec,
                        double discount, const Vec& initial_dist,
                        const PolicyTable& policy) {
    const Vec penalty = pessimism_penalty(model, policy, spec, discount, initial_dist);
    const ValueSolution sol = penalized_policy_values(model.p_hat, model.r_hat, discount,
                                                      initial_dist, policy, penalty);
    return initial_dist.dot(sol.v);
}

namespace {

double dis_derivative(const EmpiricalModel& model, const DisSpec& dis, int s, int a,
                      const PolicyTable& pi) {
    if (!model.support[s][a]) {
        switch (dis.kind) {
            case DisKind::CQL:
                return dis.out_of_support_penalty + 1.0;
            case DisKind::KL:
                return dis.out_of_support_penalty;
            case DisKind::TV:
                return 0.5;
        }
    }
    const double p = pi.probs(s, a);
    const double beta = model.beta_hat(s, a);
    switch (dis.kind) {
        case DisKind::CQL:
            return 2.0 * p / beta - 1.0;
        case DisKind::TV:
            return 0.5 * (p > beta ? 1.0 : (p < beta ? -1.0 : 0.0));
        case DisKind::KL:
            return std::log(std::max(p, 1e-300) / beta) + 1.0;
    }
    return 0.0;
}

/// c(j) = -alpha sum_i lambda_i Dis_i dF_i/dx_j (1-gamma)/d~(j); F is the
/// Jacobian of the f transform (diagonal plus argmin/argmax columns for
/// normalized_log).
Vec weight_chain_vector(const EmpiricalModel& model, const PessimismSpec& spec,
                        double discount, const Vec& raw, const Vec& dis,
                        const Vec& lambda) {
    const int S = model.num_states;
    const double floor = 1.0 / (2.0 * model.dataset_size);
    Vec dtilde(S);
    for (int s = 0; s < S; ++s)
        dtilde(s) = model.d_data(s) > 0.0 ? model.d_data(s) : floor;

    Vec c = Vec::Zero(S);
    switch (spec.f.kind) {
        case FKind::Identity:
            for (int j = 0; j < S; ++j)
                c(j) = -spec.alpha * lambda(j) * dis(j) * (1.0 - discount) / dtilde(j);
            break;
        case FKind::Clip:
            for (int j = 0; j < S; ++j)
                if (raw(j) < spec.f.clip_max)
                    c(j) = -spec.alpha * lambda(j) * dis(j) * (1.0 - discount) / dtilde(j);
            break;
        case FKind::NormalizedLog: {
            Eigen::Index jmin = 0, jmax = 0;
            raw.minCoeff(&jmin);
            raw.maxCoeff(&jmax);
            const double umin = std::log(raw(jmin));
            const double umax = std::log(raw(jmax));
            if (umax - umin <= 0.0) break;  // constant transform
            const double k = (spec.f.b1 - spec.f.b0) / (umax - umin);
            // dF_i/du_j = k [delta_ij - (1 - t_i) delta_{j,jmin} - t_i delta_{j,jmax}]
            Vec acc = Vec::Zero(S);  // sum_i lambda_i Dis_i dF_i/du_j
            double lam_dis_total = 0.0, lam_dis_t_total = 0.0;
            for (int i = 0; i < S; ++i) {
                const double t = (std::log(raw(i)) - umin) / (umax - umin);
                const double ld = lambda(i) * dis(i);
                acc(i) += k * ld;
                lam_dis_total += k * ld;
                lam_dis_t_total += k * ld * t;
            }
            acc(jmin) -= lam_dis_total - lam_dis_t_total;
            acc(jmax) -= lam_dis_t_total;
            for (int j = 0; j < S; ++j)
                c(j) = -spec.alpha * acc(j) / raw(j) * (1.0 - discount) / dtilde(j);
            break;
        }
    }
    return c;
}

}  // namespace

Mat policy_objective_gradient(const EmpiricalModel& model, const PessimismSpec& spec,
                              double discount, const Vec& initial_dist,
                              const PolicyTable& pi) {
    const int S = model.num_states;
    const int A = model.num_actions;
    const double gamma = discount;

    const Vec dis = dis_vector(spec.dis, pi, model.beta_hat, model.support);
    Vec weights = Vec::Ones(S);
    Vec raw;
    if (spec.state_aware) {
        raw = raw_state_ratios(model, pi, gamma, initial_dist);
        weights = spec.f.apply(raw);
    }
    const Vec penalty = spec.alpha * dis.cwiseProduct(weights);

    const Mat act = activity_matrix(pi, S, A);
    const Mat system = Mat::Identity(S, S) - gamma * act * model.p_hat;
    Eigen::PartialPivLU<Mat> lu(system);
    const Vec v = lu.solve(act * model.r_hat - penalty);
    const Vec lambda = system.transpose().partialPivLu().solve(initial_dist);
    const Vec pv = model.p_hat * v;  // (P v)(s,a)

    Mat grad = Mat::Zero(S, A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const int z = model.index(s, a);
            grad(s, a) = lambda(s) * (model.r_hat(z) + gamma * pv(z));
            grad(s, a) -= lambda(s) * spec.alpha * weights(s) *
                          dis_derivative(model, spec.dis, s, a, pi);
        }

    if (spec.state_aware && spec.alpha != 0.0) {
        // chain through w = f((1-gamma) lambda / d~): c^T dlambda reduces to
        // one more solve u = system^{-1} c
        const Vec c = weight_chain_vector(model, spec, discount, raw, dis, lambda);
        if (c.cwiseAbs().maxCoeff() > 0.0) {
            const Vec u = lu.solve(c);
            const Vec pu = model.p_hat * u;
            for (int s = 0; s < S; ++s)
                for (int a = 0; a < A; ++a)
                    grad(s, a) += gamma * lambda(s) * pu(model.index(s, a));
        }
    }
    return grad;
}

namespace {

std::vector<std::vector<int>> supported_action_lists(const EmpiricalModel& model) {
    std::vector<std::vector<int>> acts(model.num_states);
    for (int s = 0; s < model.num_states; ++s)
        for (int a = 0; a < model.num_actions; ++a)
            if (model.support[s][a]) acts[s].push_back(a);
    return acts;
}

PolicyTable materialize_softmax(const EmpiricalModel& model,
                                const std::vector<std::vector<int>>& supported,
                                const Mat& logits) {
    const int S = model.num_states;
    const int A = model.num_actions;
    PolicyTable pi;
    pi.probs = Mat::Zero(S, A);
    for (int s = 0; s < S; ++s) {
        const auto& acts = supported[s];
        if (acts.empty()) {
            pi.probs.row(s).setConstant(1.0 / A);
            continue;
        }
        double zmax = -std::numeric_limits<double>::infinity();
        for (int a : acts) zmax = std::max(zmax, logits(s, a));
        double norm = 0.0;
        for (int a : acts) {
            pi.probs(s, a) = std::exp(logits(s, a) - zmax);
            norm += pi.probs(s, a);
        }
        for (int a : acts) pi.probs(s, a) /= norm;
    }
    return pi;
}

OptimizeResult optimize_softmax(const EmpiricalModel& model, const PessimismSpec& spec,
                                const PolicyClass& cls, double discount,
                                const Vec& initial_dist) {
    const auto supported = supported_action_lists(model);

    OptimizeResult best;
    best.objective = -std::numeric_limits<double>::infinity();
    for (int r = 0; r < cls.restarts; ++r) {
        Rng rng(derive_seed(cls.seed, static_cast<std::uint64_t>(r)));
        std::normal_distribution<double> noise(0.0, 1.0);
        Mat logits = Mat::Zero(model.num_states, model.num_actions);
        if (r > 0)
            for (int s = 0; s < model.num_states; ++s)
                for (int a = 0; a < model.num_actions; ++a) logits(s, a) = noise(rng);

        for (int step = 0; step < cls.steps; ++step) {
            const PolicyTable pi = materialize_softmax(model, supported, logits);
            const Mat grad_pi =
                policy_objective_gradient(model, spec, discount, initial_dist, pi);
            for (int s = 0; s < model.num_states; ++s) {
                const auto& acts = supported[s];
                if (acts.size() < 2) continue;
                double mean = 0.0;
                for (int a : acts) mean += pi.probs(s, a) * grad_pi(s, a);
                for (int a : acts) {
                    const double g = pi.probs(s, a) * (grad_pi(s, a) - mean);
                    logits(s, a) =
                        std::clamp(logits(s, a) + cls.learning_rate * g, -40.0, 40.0);
                }
            }
        }
        const PolicyTable pi = materialize_softmax(model, supported, logits);
        const double obj = policy_objective(model, spec, discount, initial_dist, pi);
        if (obj > best.objective) {
            best.objective = obj;
            best.policy = pi;
        }
        // deterministic rounding of the final iterate as one more candidate;
        // recovers corner optima the ascent only approaches asymptotically
        PolicyTable rounded;
        rounded.probs = Mat::Zero(model.num_states, model.num_actions);
        for (int s = 0; s < model.num_states; ++s) {
            Eigen::Index amax = 0;
            pi.probs.row(s).maxCoeff(&amax);
            rounded.probs(s, amax) = 1.0;
        }
        const double robj = policy_objective(model, spec, discount, initial_dist, rounded);
        if (robj > best.objective) {
            best.objective = robj;
            best.policy = rounded;
        }
    }
    return best;
}

}  // namespace

OptimizeResult optimize_policy(const EmpiricalModel& model, const PessimismSpec& spec,
                               const PolicyClass& policy_class, double discount,
                               const Vec& initial_dist) {
    spec.validate();
    if (policy_class.kind == PolicyClassKind::DeterministicEnumeration) {
        const double count = policy_class.size(model.num_states, model.num_actions);
        require(count <= 1e6,
                "optimize_policy: enumeration class too large (use the softmax class)");
        OptimizeResult best;
        best.objective = -std::numeric_limits<double>::infinity();
        for_each_deterministic_policy(
            model.num_states, model.num_actions, [&](const std::vector<int>& actions) {
                const PolicyTable pi = PolicyTable::deterministic(actions, model.num_actions);
                const double obj = policy_objective(model, spec, discount, initial_dist, pi);
                if (obj > best.objective) {
                    best.objective = obj;
                    best.policy = pi;
                }
            });
        return best;
    }
    return optimize_softmax(model, spec, policy_class, discount, initial_dist);
}

}  // namespace sapp
