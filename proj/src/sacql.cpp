#include "sapp/sacql.hpp"

#include <cmath>

namespace sapp {

void TrainConfig::validate() const {
    require(steps >= 1, "TrainConfig: steps must be >= 1");
    require(temperature > 0.0, "TrainConfig: temperature must be positive");
    require(g_q >= 1 && g_zeta >= 0 && g_pi >= 1, "TrainConfig: step counts invalid");
    require(lr_q > 0.0 && lr_pi > 0.0, "TrainConfig: learning rates must be positive");
    f.validate();
}

Vec empirical_bellman(const Vec& q, const PolicyTable& policy, const EmpiricalModel& model,
                      double discount) {
    const Mat act = activity_matrix(policy, model.num_states, model.num_actions);
    return model.r_hat + discount * (model.p_hat * (act * q));
}

Vec sacql_q_step(const Vec& q, const PolicyTable& policy, const EmpiricalModel& model,
                 const Vec& weights, double alpha, double discount,
                 double out_of_support_penalty) {
    require(weights.size() == model.num_states, "sacql_q_step: weights length mismatch");
    Vec next = empirical_bellman(q, policy, model, discount);
    for (int s = 0; s < model.num_states; ++s)
        for (int a = 0; a < model.num_actions; ++a) {
            const int z = model.index(s, a);
            const double g =
                model.support[s][a]
                    ? (policy.probs(s, a) - model.beta_hat(s, a)) / model.beta_hat(s, a)
                    : out_of_support_penalty + 1.0;
            next(z) -= alpha * weights(s) * g;
        }
    return next;
}

LossGrad sacql_h_loss(const Vec& q, const PolicyTable& policy_k, const EmpiricalModel& model,
                      const Vec& omega, double alpha, const Vec& target) {
    (void)policy_k;  // the policy enters through `target`; kept for call-site clarity
    const int S = model.num_states;
    const int A = model.num_actions;
    require(omega.size() == S, "sacql_h_loss: omega length mismatch");
    require(target.size() == S * A, "sacql_h_loss: target length mismatch");

    LossGrad out;
    out.grad = Vec::Zero(S * A);
    for (int s = 0; s < S; ++s) {
        const double ds = model.d_data(s);
        // logsumexp over all actions, stabilized
        double qmax = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < A; ++a) qmax = std::max(qmax, q(model.index(s, a)));
        double z = 0.0;
        for (int a = 0; a < A; ++a) z += std::exp(q(model.index(s, a)) - qmax);
        const double lse = qmax + std::log(z);

        double data_mean = 0.0;
        for (int a = 0; a < A; ++a) data_mean += model.beta_hat(s, a) * q(model.index(s, a));

        if (ds > 0.0) out.loss += alpha * ds * omega(s) * (lse - data_mean);

        for (int a = 0; a < A; ++a) {
            const int idx = model.index(s, a);
            const double softmax = std::exp(q(idx) - qmax) / z;
            if (ds > 0.0)
                out.grad(idx) += alpha * ds * omega(s) * (softmax - model.beta_hat(s, a));
            const double dsa = static_cast<double>(model.count_sa(s, a)) / model.dataset_size;
            if (dsa > 0.0) {
                const double diff = q(idx) - target(idx);
                out.loss += 0.5 * dsa * diff * diff;
                out.grad(idx) += dsa * diff;
            }
        }
    }
    return out;
}

PolicyTable softmax_policy(const Vec& q, int num_states, int num_actions,
                           double temperature) {
    require(temperature > 0.0, "softmax_policy: temperature must be positive");
    PolicyTable pi;
    pi.probs = Mat::Zero(num_states, num_actions);
    for (int s = 0; s < num_states; ++s) {
        double qmax = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < num_actions; ++a)
            qmax = std::max(qmax, q(s * num_actions + a));
        double z = 0.0;
        for (int a = 0; a < num_actions; ++a) {
            pi.probs(s, a) = std::exp((q(s * num_actions + a) - qmax) / temperature);
            z += pi.probs(s, a);
        }
        pi.probs.row(s) /= z;
    }
    return pi;
}

PolicyTable policy_improvement_step(const Vec& q, const PolicyTable& policy,
                                    double temperature, double eta_pi) {
    require(temperature > 0.0, "policy_improvement_step: temperature must be positive");
    const int S = policy.num_states();
    const int A = policy.num_actions();
    PolicyTable next;
    next.probs = Mat::Zero(S, A);
    for (int s = 0; s < S; ++s) {
        Vec logits(A);
        for (int a = 0; a < A; ++a) {
            const double logpi = std::log(std::max(policy.probs(s, a), 1e-300));
            logits(a) = logpi + eta_pi * (q(s * A + a) - temperature * (logpi + 1.0));
        }
        const double lmax = logits.maxCoeff();
        double z = 0.0;
        for (int a = 0; a < A; ++a) {
            next.probs(s, a) = std::exp(logits(a) - lmax);
            z += next.probs(s, a);
        }
        next.probs.row(s) /= z;
    }
    return next;
}

namespace {

PolicyTable initial_policy(const EmpiricalModel& model) {
    PolicyTable pi;
    pi.probs = model.beta_hat;  // unvisited rows are uniform placeholders
    return pi;
}

struct WeightContext {
    const TrainConfig& cfg;
    const EmpiricalModel& model;
    const OfflineDataset& dataset;
    double discount;
    Vec initial_dist;
    DualDiceState dice;
    Rng random_weight_rng;

    Vec compute(const PolicyTable& policy) {
        switch (cfg.weight_mode) {
            case WeightMode::ConstantOne:
                return Vec::Ones(model.num_states);
            case WeightMode::RandomUniform: {
                std::uniform_real_distribution<double> unif(cfg.f.b0, cfg.f.b1);
                Vec w(model.num_states);
                for (int s = 0; s < model.num_states; ++s) w(s) = unif(random_weight_rng);
                return w;
            }
            case WeightMode::ExactRatio:
                return cfg.f.apply(
                    raw_state_ratios(model, policy, discount, initial_dist)
                        .cwiseMax(1e-12));
            case WeightMode::DualDice: {
                if (cfg.dice_solver == DiceSolver::ClosedForm) {
                    dice = solve_dualdice(dataset, policy, discount, initial_dist, dice);
                } else {
                    DualDiceState cont = dice;
                    cont.steps = cfg.g_zeta;
                    dice = solve_dualdice(dataset, policy, discount, initial_dist, cont);
                }
                const Vec omega = omega_state_weights(dice, model, policy);
                return cfg.f.apply(omega.cwiseMax(1e-12));
            }
        }
        throw std::logic_error("train: unknown weight mode");
    }
};

}  // namespace

TrainTrace train(const TabularMdp& mdp_for_eval, const OfflineDataset& dataset,
                 const TrainConfig& config) {
    config.validate();
    require(dataset.size() >= 1, "train: dataset has no visited state");
    const int S = mdp_for_eval.num_states;
    const int A = mdp_for_eval.num_actions;
    const double gamma = mdp_for_eval.discount;
    const EmpiricalModel model = build_empirical_model(dataset, S, A);

    WeightContext wctx{config,
                       model,
                       dataset,
                       gamma,
                       mdp_for_eval.initial_dist,
                       DualDiceState{},
                       Rng(derive_seed(config.seed, 0x77eeull))};
    wctx.dice.solver = config.dice_solver;
    wctx.dice.seed = derive_seed(config.seed, 0xd1ceull);
    if (config.weight_mode == WeightMode::DualDice &&
        config.dice_solver == DiceSolver::AlternatingSgd) {
        DualDiceState pre = wctx.dice;
        pre.steps = config.pretrain_steps;
        wctx.dice = solve_dualdice(dataset, initial_policy(model), gamma,
                                   mdp_for_eval.initial_dist, pre);
    }

    Rng batch_rng(derive_seed(config.seed, 0xba7c4ull));
    PolicyTable policy = initial_policy(model);
    Vec q = Vec::Zero(S * A);

    TrainTrace trace;
    const int every = std::max(1, config.steps / 10);

    for (int k = 0; k < config.steps; ++k) {
        const Vec weights = wctx.compute(policy);
        const Vec target = empirical_bellman(q, policy, model, gamma);

        for (int j = 0; j < config.g_q; ++j) {
            LossGrad lg;
            if (!config.minibatch) {
                lg = sacql_h_loss(q, policy, model, weights, config.alpha, target);
            } else {
                // minibatch mirror of the same gradient: resample transition
                // indices and re-weight the TD term with batch frequencies
                std::uniform_int_distribution<int> pick(0, dataset.size() - 1);
                Vec batch_freq = Vec::Zero(S * A);
                for (int b = 0; b < config.batch_size; ++b) {
                    const Transition& tr = dataset.transitions[pick(batch_rng)];
                    batch_freq(tr.s * A + tr.a) += 1.0 / config.batch_size;
                }
                lg = sacql_h_loss(q, policy, model, weights, config.alpha, target);
                // replace the TD part with the batch-weighted one
                for (int z = 0; z < S * A; ++z) {
                    const int s = z / A, a = z % A;
                    const double dsa =
                        static_cast<double>(model.count_sa(s, a)) / model.dataset_size;
                    lg.grad(z) += (batch_freq(z) - dsa) * (q(z) - target(z));
                }
            }
            q -= config.lr_q * lg.grad;
        }

        if (config.full_improvement) {
            policy = softmax_policy(q, S, A, config.temperature);
        } else {
            for (int j = 0; j < config.g_pi; ++j)
                policy = policy_improvement_step(q, policy, config.temperature,
                                                 config.lr_pi);
        }

        if ((k + 1) % every == 0 || k + 1 == config.steps) {
            TrainCheckpoint cp;
            cp.iteration = k + 1;
            cp.q_hash = hash_vector(q);
            cp.true_return = expected_return(mdp_for_eval, policy);
            if (config.weight_mode == WeightMode::DualDice && wctx.dice.solved) {
                cp.est_return =
                    ratio_policy_value(wctx.dice, dataset, A) / (1.0 - gamma);
            } else {
                const Mat act = activity_matrix(policy, S, A);
                cp.est_return = mdp_for_eval.initial_dist.dot(act * q);
            }
            double wmin = std::numeric_limits<double>::infinity();
            double wmax = -std::numeric_limits<double>::infinity();
            double wsum = 0.0;
            int count = 0;
            for (int s = 0; s < S; ++s) {
                if (!model.visited[s]) continue;
                wmin = std::min(wmin, weights(s));
                wmax = std::max(wmax, weights(s));
                wsum += weights(s);
                ++count;
            }
            cp.omega_min = wmin;
            cp.omega_max = wmax;
            cp.omega_mean = wsum / std::max(1, count);
            trace.checkpoints.push_back(cp);
        }
    }
    trace.final_policy = policy;
    trace.final_q = q;
    return trace;
}

}  // namespace sapp
