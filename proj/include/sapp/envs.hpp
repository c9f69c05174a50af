#pragma once

#include <cstdint>

#include "sapp/mdp.hpp"

namespace sapp {

/// Two-branch chain: s0 picks a branch (action 0 left, action 1 right), each
/// branch is a corridor of interior states ending in an absorbing terminal.
/// The reward is paid on the transition entering the terminal; both actions
/// advance inside a corridor. State layout:
///   0 = s0, 1..num_left = left corridor, num_left+1 = left terminal,
///   then the right corridor and right terminal.
TabularMdp build_chain_mdp(int num_left, int num_right, double reward_left,
                           double reward_right, double discount);

/// Indices into the chain layout.
struct ChainLayout {
    int s0 = 0;
    int left_first = 1;
    int left_terminal = 0;
    int right_first = 0;
    int right_terminal = 0;
};
ChainLayout chain_layout(int num_left, int num_right);

/// Branch-deterministic behavior for the chain: p_left on action 0 at s0,
/// the corridor action inside each branch, uniform at terminals.
PolicyTable chain_behavior(int num_left, int num_right, double p_left);

/// Chain variant with a third action at s0 leading into a separate absorbing
/// trap corridor with terminal reward `reward_trap`. Interior/terminal states
/// ignore the extra action (it behaves like the corridor action).
TabularMdp build_trap_chain_mdp(int num_left, int num_right, double reward_left,
                                double reward_right, double reward_trap,
                                double discount);
PolicyTable trap_chain_behavior(int num_left, int num_right, double p_left,
                                double p_right, double p_trap);

/// Random MDP: every (s,a) reaches `branching` distinct uniformly chosen
/// states with Dirichlet(1) weights; rewards uniform in [-1,1]; uniform rho.
TabularMdp build_garnet(int num_states, int num_actions, int branching,
                        std::uint64_t seed, double discount = 0.9);

/// Deterministic 4-connected gridworld with a rewarding absorbing goal, an
/// optional slip probability and a per-step cost. Actions: up/down/left/right.
TabularMdp build_gridworld(int rows, int cols, int goal_row, int goal_col,
                           double goal_reward, double step_cost, double slip,
                           double discount);

}  // namespace sapp
