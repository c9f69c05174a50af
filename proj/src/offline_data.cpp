#include "sapp/offline_data.hpp"

#include <cmath>

namespace sapp {

namespace {

void check_behavior(const TabularMdp& mdp, const PolicyTable& behavior) {
    mdp.validate();
    require(behavior.num_states() == mdp.num_states &&
                behavior.num_actions() == mdp.num_actions,
            "dataset generation: behavior dimensions mismatch");
    for (int s = 0; s < mdp.num_states; ++s)
        require(behavior.probs.row(s).sum() > 0.0,
                "dataset generation: behavior has a zero row");
}

Transition step(const TabularMdp& mdp, const PolicyTable& behavior, int s, bool initial,
                Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Transition tr;
    tr.s = s;
    tr.a = sample_categorical(behavior.probs.row(s), unif(rng));
    const int z = mdp.index(tr.s, tr.a);
    tr.r = mdp.reward(z);
    tr.s_next = sample_categorical(mdp.transition.row(z), unif(rng));
    tr.is_initial = initial;
    return tr;
}

}  // namespace

OfflineDataset generate_dataset(const TabularMdp& mdp, const PolicyTable& behavior,
                                int num_episodes, int horizon, std::uint64_t seed) {
    check_behavior(mdp, behavior);
    require(num_episodes >= 1, "generate_dataset: num_episodes must be >= 1");
    require(horizon >= 1, "generate_dataset: horizon must be >= 1");

    OfflineDataset data;
    data.source_seed = seed;
    data.transitions.reserve(static_cast<std::size_t>(num_episodes) * horizon);
    Rng rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int e = 0; e < num_episodes; ++e) {
        int s = sample_categorical(mdp.initial_dist, unif(rng));
        for (int t = 0; t < horizon; ++t) {
            data.transitions.push_back(step(mdp, behavior, s, t == 0, rng));
            s = data.transitions.back().s_next;
        }
    }
    return data;
}

OfflineDataset generate_dataset_discounted(const TabularMdp& mdp, const PolicyTable& behavior,
                                           int num_episodes, int max_horizon,
                                           std::uint64_t seed) {
    check_behavior(mdp, behavior);
    require(num_episodes >= 1, "generate_dataset_discounted: num_episodes must be >= 1");
    require(max_horizon >= 1, "generate_dataset_discounted: max_horizon must be >= 1");

    OfflineDataset data;
    data.source_seed = seed;
    Rng rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int e = 0; e < num_episodes; ++e) {
        int s = sample_categorical(mdp.initial_dist, unif(rng));
        for (int t = 0; t < max_horizon; ++t) {
            // include step t with probability gamma^t: continue-test per step
            if (t > 0 && unif(rng) >= mdp.discount) break;
            data.transitions.push_back(step(mdp, behavior, s, t == 0, rng));
            s = data.transitions.back().s_next;
        }
    }
    return data;
}

OfflineDataset generate_dataset_iid(const TabularMdp& mdp, const Vec& state_dist,
                                    const PolicyTable& behavior, int num_samples,
                                    std::uint64_t seed) {
    check_behavior(mdp, behavior);
    require(state_dist.size() == mdp.num_states,
            "generate_dataset_iid: state_dist length mismatch");
    require(state_dist.minCoeff() >= 0.0 && std::abs(state_dist.sum() - 1.0) <= 1e-9,
            "generate_dataset_iid: state_dist is not a distribution");
    require(num_samples >= 1, "generate_dataset_iid: num_samples must be >= 1");

    OfflineDataset data;
    data.source_seed = seed;
    data.transitions.reserve(num_samples);
    Rng rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int i = 0; i < num_samples; ++i) {
        const int s = sample_categorical(state_dist, unif(rng));
        data.transitions.push_back(step(mdp, behavior, s, false, rng));
    }
    return data;
}

EmpiricalModel build_empirical_model(const OfflineDataset& dataset, int num_states,
                                     int num_actions) {
    require(dataset.size() >= 1, "build_empirical_model: dataset is empty");
    EmpiricalModel m;
    m.num_states = num_states;
    m.num_actions = num_actions;
    m.dataset_size = dataset.size();
    m.count_s = Eigen::VectorXi::Zero(num_states);
    m.count_sa = Eigen::MatrixXi::Zero(num_states, num_actions);
    m.count_sas.assign(static_cast<std::size_t>(num_states) * num_actions,
                       Eigen::VectorXi::Zero(num_states));
    Vec reward_sum = Vec::Zero(num_states * num_actions);

    for (const Transition& tr : dataset.transitions) {
        require(tr.s >= 0 && tr.s < num_states && tr.a >= 0 && tr.a < num_actions &&
                    tr.s_next >= 0 && tr.s_next < num_states,
                "build_empirical_model: transition index out of range");
        m.count_s(tr.s) += 1;
        m.count_sa(tr.s, tr.a) += 1;
        m.count_sas[m.index(tr.s, tr.a)](tr.s_next) += 1;
        reward_sum(m.index(tr.s, tr.a)) += tr.r;
    }

    m.beta_hat = Mat::Constant(num_states, num_actions, 1.0 / num_actions);
    m.d_data = m.count_s.cast<double>() / static_cast<double>(m.dataset_size);
    m.p_hat = Mat::Zero(num_states * num_actions, num_states);
    m.r_hat = Vec::Zero(num_states * num_actions);
    m.support.assign(num_states, std::vector<bool>(num_actions, false));
    m.visited.assign(num_states, false);

    for (int s = 0; s < num_states; ++s) {
        if (m.count_s(s) > 0) {
            m.visited[s] = true;
            m.beta_hat.row(s) =
                m.count_sa.row(s).cast<double>() / static_cast<double>(m.count_s(s));
        }
        for (int a = 0; a < num_actions; ++a) {
            const int z = m.index(s, a);
            if (m.count_sa(s, a) > 0) {
                m.support[s][a] = true;
                m.p_hat.row(z) = m.count_sas[z].cast<double>().transpose() /
                                 static_cast<double>(m.count_sa(s, a));
                m.r_hat(z) = reward_sum(z) / m.count_sa(s, a);
            } else {
                // pessimistic substitution: absorbing self-loop at worst reward
                m.p_hat(z, s) = 1.0;
                m.r_hat(z) = -1.0;
            }
        }
    }
    return m;
}

double EmpiricalModel::unsupported_mass(const PolicyTable& policy, int s) const {
    double mass = 0.0;
    for (int a = 0; a < num_actions; ++a)
        if (!support[s][a]) mass += policy.probs(s, a);
    return mass;
}

Vec uncertainty_vector(const EmpiricalModel& model, const PolicyTable& policy, double cap) {
    require(cap > 0.0, "uncertainty_vector: cap must be positive");
    require(policy.num_states() == model.num_states &&
                policy.num_actions() == model.num_actions,
            "uncertainty_vector: policy dimensions mismatch");
    Vec u = Vec::Zero(model.num_states);
    for (int s = 0; s < model.num_states; ++s)
        for (int a = 0; a < model.num_actions; ++a) {
            const int n = model.count_sa(s, a);
            const double term = n > 0 ? std::min(1.0 / std::sqrt(double(n)), cap) : cap;
            u(s) += policy.probs(s, a) * term;
        }
    return u;
}

}  // namespace sapp
