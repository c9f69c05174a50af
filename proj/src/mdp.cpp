#include "sapp/mdp.hpp"

#include <cmath>
#include <vector>

namespace sapp {

void TabularMdp::validate() const {
    require(num_states > 0 && num_actions > 0, "TabularMdp: dimensions must be positive");
    require(transition.rows() == joint_size() && transition.cols() == num_states,
            "TabularMdp: transition shape mismatch");
    require(reward.size() == joint_size(), "TabularMdp: reward length mismatch");
    require(initial_dist.size() == num_states, "TabularMdp: initial_dist length mismatch");
    require(discount >= 0.0 && discount < 1.0, "TabularMdp: discount must lie in [0,1)");
    for (int z = 0; z < joint_size(); ++z) {
        require(transition.row(z).minCoeff() >= 0.0, "TabularMdp: negative transition entry");
        require(std::abs(transition.row(z).sum() - 1.0) <= kStochasticTol,
                "TabularMdp: transition row does not sum to 1");
        require(std::abs(reward(z)) <= 1.0 + kStochasticTol, "TabularMdp: |reward| > 1");
    }
    require(initial_dist.minCoeff() >= 0.0, "TabularMdp: negative initial probability");
    require(std::abs(initial_dist.sum() - 1.0) <= kStochasticTol,
            "TabularMdp: initial_dist does not sum to 1");
}

void PolicyTable::validate() const {
    require(probs.rows() > 0 && probs.cols() > 0, "PolicyTable: empty table");
    for (int s = 0; s < probs.rows(); ++s) {
        require(probs.row(s).minCoeff() >= 0.0, "PolicyTable: negative probability");
        require(std::abs(probs.row(s).sum() - 1.0) <= kStochasticTol,
                "PolicyTable: row does not sum to 1");
    }
}

PolicyTable PolicyTable::uniform(int num_states, int num_actions) {
    PolicyTable pi;
    pi.probs = Mat::Constant(num_states, num_actions, 1.0 / num_actions);
    return pi;
}

PolicyTable PolicyTable::deterministic(const std::vector<int>& actions, int num_actions) {
    PolicyTable pi;
    pi.probs = Mat::Zero(static_cast<int>(actions.size()), num_actions);
    for (int s = 0; s < static_cast<int>(actions.size()); ++s) {
        require(actions[s] >= 0 && actions[s] < num_actions,
                "PolicyTable: action index out of range");
        pi.probs(s, actions[s]) = 1.0;
    }
    return pi;
}

Mat activity_matrix(const PolicyTable& policy, int num_states, int num_actions) {
    require(policy.num_states() == num_states && policy.num_actions() == num_actions,
            "activity_matrix: policy dimensions mismatch");
    Mat act = Mat::Zero(num_states, num_states * num_actions);
    for (int s = 0; s < num_states; ++s)
        for (int a = 0; a < num_actions; ++a)
            act(s, s * num_actions + a) = policy.probs(s, a);
    return act;
}

ValueSolution penalized_policy_values(const Mat& transition, const Vec& reward,
                                      double discount, const Vec& initial_dist,
                                      const PolicyTable& policy, const Vec& penalty) {
    const int S = policy.num_states();
    const int A = policy.num_actions();
    require(transition.rows() == S * A && transition.cols() == S,
            "penalized_policy_values: transition shape mismatch");
    require(penalty.size() == S, "penalized_policy_values: penalty length mismatch");

    const Mat act = activity_matrix(policy, S, A);
    const Mat kernel = act * transition;  // S x S state-to-state kernel under pi
    const Mat system = Mat::Identity(S, S) - discount * kernel;

    Eigen::PartialPivLU<Mat> lu(system);
    ValueSolution sol;
    sol.v = lu.solve(act * reward - penalty);
    sol.q = reward + discount * (transition * sol.v);
    sol.occupancy_raw = system.transpose().partialPivLu().solve(initial_dist);
    sol.occupancy_norm = (1.0 - discount) * sol.occupancy_raw;

    const double residual =
        (sol.v - (act * (reward + discount * (transition * sol.v)) - penalty))
            .cwiseAbs()
            .maxCoeff();
    if (!(residual <= 1e-9))
        throw std::runtime_error("policy evaluation: Bellman residual " +
                                 std::to_string(residual));
    return sol;
}

ValueSolution exact_policy_values(const TabularMdp& mdp, const PolicyTable& policy) {
    return penalized_policy_values(mdp.transition, mdp.reward, mdp.discount,
                                   mdp.initial_dist, policy, Vec::Zero(mdp.num_states));
}

std::pair<PolicyTable, ValueSolution> optimal_policy(const TabularMdp& mdp, double tol) {
    require(tol > 0.0, "optimal_policy: tol must be positive");
    const int S = mdp.num_states;
    const int A = mdp.num_actions;
    const double gamma = mdp.discount;
    const double stop = gamma > 0.0 ? tol * (1.0 - gamma) / (2.0 * gamma) : tol;

    Vec v = Vec::Zero(S);
    std::vector<int> greedy(S, 0);
    for (int iter = 0; iter < 1000000; ++iter) {
        Vec q = mdp.reward + gamma * (mdp.transition * v);
        Vec v_next(S);
        for (int s = 0; s < S; ++s) {
            int best = 0;
            double best_q = q(mdp.index(s, 0));
            for (int a = 1; a < A; ++a) {
                const double qa = q(mdp.index(s, a));
                if (qa > best_q) {
                    best_q = qa;
                    best = a;
                }
            }
            v_next(s) = best_q;
            greedy[s] = best;
        }
        const double change = (v_next - v).cwiseAbs().maxCoeff();
        v = v_next;
        if (change <= stop) break;
    }
    PolicyTable pi = PolicyTable::deterministic(greedy, A);
    return {pi, exact_policy_values(mdp, pi)};
}

double expected_return(const TabularMdp& mdp, const PolicyTable& policy) {
    return mdp.initial_dist.dot(exact_policy_values(mdp, policy).v);
}

int truncation_horizon(double discount, double eps) {
    if (discount <= 0.0) return 1;
    const double h = std::ceil(std::log(eps * (1.0 - discount)) / std::log(discount));
    return std::max(1, static_cast<int>(h));
}

MonteCarloResult monte_carlo_return(const TabularMdp& mdp, const PolicyTable& policy,
                                    int num_rollouts, int horizon, std::uint64_t seed) {
    require(num_rollouts > 0, "monte_carlo_return: num_rollouts must be positive");
    require(horizon > 0, "monte_carlo_return: horizon must be positive");
    Rng rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < num_rollouts; ++i) {
        int s = sample_categorical(mdp.initial_dist, unif(rng));
        double ret = 0.0, disc = 1.0;
        for (int t = 0; t < horizon; ++t) {
            const int a = sample_categorical(policy.probs.row(s), unif(rng));
            const int z = mdp.index(s, a);
            ret += disc * mdp.reward(z);
            disc *= mdp.discount;
            s = sample_categorical(mdp.transition.row(z), unif(rng));
        }
        sum += ret;
        sumsq += ret * ret;
    }
    MonteCarloResult out;
    out.mean = sum / num_rollouts;
    const double var =
        num_rollouts > 1 ? (sumsq - sum * sum / num_rollouts) / (num_rollouts - 1) : 0.0;
    out.stderr_ = std::sqrt(std::max(0.0, var) / num_rollouts);
    return out;
}

}  // namespace sapp
