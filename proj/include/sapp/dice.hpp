#pragma once

#include <cstdint>

#include "sapp/offline_data.hpp"

namespace sapp {

enum class DiceSolver { ClosedForm, AlternatingSgd };

/// Tabular DualDICE state: nu and zeta live on state-action pairs.
struct DualDiceState {
    Vec nu;    // S*A
    Vec zeta;  // S*A, projected to [0, inf)
    DiceSolver solver = DiceSolver::ClosedForm;

    int steps = 100000;     // alternating-SGD iterations
    double lr_nu = 0.5;
    double lr_zeta = 0.5;
    std::uint64_t seed = 0;

    bool solved = false;
    bool ridge_used = false;      // closed form fell back to a ridge solve
    double ridge_lambda = 1e-8;
};

/// Solves the saddle point min_nu max_zeta of
///   E_D[(nu(s,a) - gamma nu(s',a')) zeta(s,a) - zeta(s,a)^2/2]
///     - (1-gamma) E_{rho,pi}[nu],
/// with a' integrated exactly over pi(.|s'). The closed form eliminates
/// zeta = B nu and solves the resulting weighted least squares directly; the
/// alternating mode mirrors the two-timescale gradient loop.
DualDiceState solve_dualdice(const OfflineDataset& dataset, const PolicyTable& target_policy,
                             double discount, const Vec& initial_dist, DualDiceState state);

/// omega(s) = sum_{a supported} beta_hat(a|s) zeta(s,a) beta_hat(a|s) / max(pi(a|s), 1e-8);
/// unvisited states get 0 and are excluded downstream.
Vec omega_state_weights(const DualDiceState& state, const EmpiricalModel& model,
                        const PolicyTable& target_policy);

/// (1/|D|) sum_D zeta(s,a) r; divided by (1-gamma) it estimates <rho, V^pi>.
double ratio_policy_value(const DualDiceState& state, const OfflineDataset& dataset,
                          int num_actions);

}  // namespace sapp
