#include "sapp/envs.hpp"

#include <cmath>
#include <numeric>
#include <vector>

namespace sapp {

ChainLayout chain_layout(int num_left, int num_right) {
    ChainLayout l;
    l.s0 = 0;
    l.left_first = 1;
    l.left_terminal = num_left + 1;
    l.right_first = num_left + 2;
    l.right_terminal = num_left + 2 + num_right;
    return l;
}

namespace {

TabularMdp chain_like(int num_left, int num_right, double reward_left, double reward_right,
                      double discount, int num_actions) {
    require(num_left >= 1 && num_right >= 1, "chain: segment lengths must be >= 1");
    require(std::abs(reward_left) <= 1.0 && std::abs(reward_right) <= 1.0,
            "chain: rewards must lie in [-1,1]");
    const ChainLayout l = chain_layout(num_left, num_right);
    const int S = num_left + num_right + 3;

    TabularMdp mdp;
    mdp.num_states = S;
    mdp.num_actions = num_actions;
    mdp.discount = discount;
    mdp.transition = Mat::Zero(S * num_actions, S);
    mdp.reward = Vec::Zero(S * num_actions);
    mdp.initial_dist = Vec::Zero(S);
    mdp.initial_dist(l.s0) = 1.0;

    auto corridor = [&](int first, int terminal, double terminal_reward) {
        for (int i = 0; i < terminal - first + 1; ++i) {
            const int s = first + i;
            const int next = s == terminal ? terminal : s + 1;
            for (int a = 0; a < num_actions; ++a) {
                mdp.transition(mdp.index(s, a), next) = 1.0;
                if (s != terminal && next == terminal)
                    mdp.reward(mdp.index(s, a)) = terminal_reward;
            }
        }
    };
    // s0: action 0 enters the left corridor, every other action the right one
    for (int a = 0; a < num_actions; ++a)
        mdp.transition(mdp.index(l.s0, a), a == 0 ? l.left_first : l.right_first) = 1.0;
    corridor(l.left_first, l.left_terminal, reward_left);
    corridor(l.right_first, l.right_terminal, reward_right);
    return mdp;
}

}  // namespace

TabularMdp build_chain_mdp(int num_left, int num_right, double reward_left,
                           double reward_right, double discount) {
    TabularMdp mdp = chain_like(num_left, num_right, reward_left, reward_right, discount, 2);
    mdp.validate();
    return mdp;
}

PolicyTable chain_behavior(int num_left, int num_right, double p_left) {
    require(p_left > 0.0 && p_left < 1.0, "chain_behavior: p_left must lie in (0,1)");
    const ChainLayout l = chain_layout(num_left, num_right);
    const int S = num_left + num_right + 3;
    PolicyTable pi = PolicyTable::uniform(S, 2);
    pi.probs(l.s0, 0) = p_left;
    pi.probs(l.s0, 1) = 1.0 - p_left;
    for (int s = l.left_first; s < l.left_terminal; ++s) {
        pi.probs(s, 0) = 1.0;
        pi.probs(s, 1) = 0.0;
    }
    for (int s = l.right_first; s < l.right_terminal; ++s) {
        pi.probs(s, 0) = 0.0;
        pi.probs(s, 1) = 1.0;
    }
    return pi;  // terminals stay uniform
}

TabularMdp build_trap_chain_mdp(int num_left, int num_right, double reward_left,
                                double reward_right, double reward_trap,
                                double discount) {
    require(std::abs(reward_trap) <= 1.0, "trap chain: |reward_trap| > 1");
    // base chain with 3 actions, then append a 2-state trap corridor
    TabularMdp base = chain_like(num_left, num_right, reward_left, reward_right, discount, 3);
    const int S0 = base.num_states;
    const int S = S0 + 2;  // trap interior + trap terminal
    const int trap_first = S0;
    const int trap_terminal = S0 + 1;

    TabularMdp mdp;
    mdp.num_states = S;
    mdp.num_actions = 3;
    mdp.discount = discount;
    mdp.transition = Mat::Zero(S * 3, S);
    mdp.reward = Vec::Zero(S * 3);
    mdp.initial_dist = Vec::Zero(S);
    mdp.initial_dist(0) = 1.0;
    mdp.transition.topLeftCorner(S0 * 3, S0) = base.transition;
    mdp.reward.head(S0 * 3) = base.reward;

    // redirect s0 action 2 into the trap corridor
    mdp.transition.row(mdp.index(0, 2)).setZero();
    mdp.transition(mdp.index(0, 2), trap_first) = 1.0;
    for (int a = 0; a < 3; ++a) {
        mdp.transition(mdp.index(trap_first, a), trap_terminal) = 1.0;
        mdp.reward(mdp.index(trap_first, a)) = reward_trap;
        mdp.transition(mdp.index(trap_terminal, a), trap_terminal) = 1.0;
    }
    mdp.validate();
    return mdp;
}

PolicyTable trap_chain_behavior(int num_left, int num_right, double p_left,
                                double p_right, double p_trap) {
    require(p_left > 0.0 && p_right > 0.0 && p_trap > 0.0 &&
                std::abs(p_left + p_right + p_trap - 1.0) <= 1e-12,
            "trap_chain_behavior: branch probabilities must be positive and sum to 1");
    const ChainLayout l = chain_layout(num_left, num_right);
    const int S = num_left + num_right + 3 + 2;
    PolicyTable pi = PolicyTable::uniform(S, 3);
    pi.probs.row(l.s0) << p_left, p_right, p_trap;
    for (int s = l.left_first; s < l.left_terminal; ++s)
        pi.probs.row(s) << 1.0, 0.0, 0.0;
    for (int s = l.right_first; s < l.right_terminal; ++s)
        pi.probs.row(s) << 0.0, 1.0, 0.0;
    return pi;
}

TabularMdp build_garnet(int num_states, int num_actions, int branching,
                        std::uint64_t seed, double discount) {
    require(branching >= 1 && branching <= num_states,
            "build_garnet: branching must lie in [1, num_states]");
    Rng rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::exponential_distribution<double> expo(1.0);

    TabularMdp mdp;
    mdp.num_states = num_states;
    mdp.num_actions = num_actions;
    mdp.discount = discount;
    mdp.transition = Mat::Zero(num_states * num_actions, num_states);
    mdp.reward = Vec::Zero(num_states * num_actions);
    mdp.initial_dist = Vec::Constant(num_states, 1.0 / num_states);

    std::vector<int> perm(num_states);
    for (int z = 0; z < num_states * num_actions; ++z) {
        std::iota(perm.begin(), perm.end(), 0);
        // partial Fisher-Yates for `branching` distinct targets
        for (int i = 0; i < branching; ++i) {
            const int j = i + static_cast<int>(unif(rng) * (num_states - i));
            std::swap(perm[i], perm[std::min(j, num_states - 1)]);
        }
        double total = 0.0;
        std::vector<double> w(branching);
        for (int i = 0; i < branching; ++i) {
            w[i] = expo(rng);
            total += w[i];
        }
        for (int i = 0; i < branching; ++i) mdp.transition(z, perm[i]) = w[i] / total;
        // exact row normalization against roundoff
        mdp.transition.row(z) /= mdp.transition.row(z).sum();
        mdp.reward(z) = 2.0 * unif(rng) - 1.0;
    }
    mdp.validate();
    return mdp;
}

TabularMdp build_gridworld(int rows, int cols, int goal_row, int goal_col,
                           double goal_reward, double step_cost, double slip,
                           double discount) {
    require(rows >= 1 && cols >= 1, "build_gridworld: empty grid");
    require(goal_row >= 0 && goal_row < rows && goal_col >= 0 && goal_col < cols,
            "build_gridworld: goal outside grid");
    require(slip >= 0.0 && slip < 1.0, "build_gridworld: slip must lie in [0,1)");
    const int S = rows * cols;
    const int A = 4;
    const int goal = goal_row * cols + goal_col;
    const int dr[4] = {-1, 1, 0, 0};
    const int dc[4] = {0, 0, -1, 1};

    TabularMdp mdp;
    mdp.num_states = S;
    mdp.num_actions = A;
    mdp.discount = discount;
    mdp.transition = Mat::Zero(S * A, S);
    mdp.reward = Vec::Zero(S * A);
    mdp.initial_dist = Vec::Zero(S);
    mdp.initial_dist(0) = 1.0;

    for (int s = 0; s < S; ++s) {
        const int r = s / cols, c = s % cols;
        for (int a = 0; a < A; ++a) {
            const int z = mdp.index(s, a);
            if (s == goal) {
                mdp.transition(z, goal) = 1.0;
                continue;
            }
            auto move = [&](int action) {
                const int nr = std::clamp(r + dr[action], 0, rows - 1);
                const int nc = std::clamp(c + dc[action], 0, cols - 1);
                return nr * cols + nc;
            };
            const int intended = move(a);
            mdp.transition(z, intended) += 1.0 - slip;
            for (int other = 0; other < A; ++other)
                if (other != a) mdp.transition(z, move(other)) += slip / 3.0;
            const int target = move(a);
            mdp.reward(z) = target == goal ? goal_reward : -step_cost;
        }
    }
    mdp.validate();
    return mdp;
}

}  // namespace sapp
