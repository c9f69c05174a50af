#include "sapp/dice.hpp"

#include <cmath>

namespace sapp {

namespace {

struct DiceSystem {
    Mat bellman;   // B = I - gamma P_hat A_pi, (S*A) x (S*A)
    Vec d_sa;      // empirical state-action frequencies
    Vec m;         // (1-gamma) rho(s) pi(a|s)
    std::vector<bool> supported;
};

DiceSystem assemble(const OfflineDataset& dataset, const PolicyTable& pi, double discount,
                    const Vec& initial_dist) {
    const int S = pi.num_states();
    const int A = pi.num_actions();
    const EmpiricalModel model = build_empirical_model(dataset, S, A);

    DiceSystem sys;
    sys.bellman = Mat::Identity(S * A, S * A);
    sys.d_sa = Vec::Zero(S * A);
    sys.m = Vec::Zero(S * A);
    sys.supported.assign(static_cast<std::size_t>(S) * A, false);

    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const int z = s * A + a;
            sys.d_sa(z) =
                static_cast<double>(model.count_sa(s, a)) / model.dataset_size;
            sys.m(z) = (1.0 - discount) * initial_dist(s) * pi.probs(s, a);
            sys.supported[z] = model.support[s][a];
            if (!model.support[s][a]) continue;
            // B nu (s,a) = nu(s,a) - gamma E_{s' ~ p_hat, a' ~ pi} nu(s',a')
            for (int sn = 0; sn < S; ++sn) {
                const double p = model.p_hat(z, sn);
                if (p == 0.0) continue;
                for (int an = 0; an < A; ++an)
                    sys.bellman(z, sn * A + an) -= discount * p * pi.probs(sn, an);
            }
        }
    return sys;
}

void solve_closed_form(const DiceSystem& sys, DualDiceState& state) {
    const int n = static_cast<int>(sys.d_sa.size());
    const Mat weighted = sys.bellman.transpose() * sys.d_sa.asDiagonal() * sys.bellman;
    Eigen::LDLT<Mat> ldlt(weighted);
    bool ok = ldlt.info() == Eigen::Success;
    Vec nu;
    if (ok) {
        nu = ldlt.solve(sys.m);
        const double residual = (weighted * nu - sys.m).cwiseAbs().maxCoeff();
        ok = std::isfinite(residual) && residual <= 1e-8 * std::max(1.0, sys.m.cwiseAbs().maxCoeff());
    }
    if (!ok) {
        state.ridge_used = true;
        const Mat ridge = weighted + state.ridge_lambda * Mat::Identity(n, n);
        nu = ridge.ldlt().solve(sys.m);
    }
    state.nu = nu;
    state.zeta = (sys.bellman * nu).cwiseMax(0.0);
    for (int z = 0; z < n; ++z)
        if (!sys.supported[z]) state.zeta(z) = 0.0;
}

void solve_alternating(const DiceSystem& sys, DualDiceState& state) {
    const int n = static_cast<int>(sys.d_sa.size());
    Vec nu = Vec::Zero(n);
    Vec zeta = Vec::Zero(n);
    // nu step size scaled by the quadratic form's largest diagonal weight so
    // the loop stays stable across dataset sizes
    const double scale = std::max(sys.d_sa.maxCoeff(), 1e-12);
    const double lr_nu = state.lr_nu / scale;
    for (int it = 0; it < state.steps; ++it) {
        const Vec bnu = sys.bellman * nu;
        for (int z = 0; z < n; ++z)
            if (sys.supported[z])
                zeta(z) = std::max(0.0, zeta(z) + state.lr_zeta * (bnu(z) - zeta(z)));
        const Vec grad = sys.bellman.transpose() * sys.d_sa.cwiseProduct(zeta) - sys.m;
        nu -= lr_nu * grad;
    }
    state.nu = nu;
    state.zeta = zeta;
}

}  // namespace

DualDiceState solve_dualdice(const OfflineDataset& dataset, const PolicyTable& target_policy,
                             double discount, const Vec& initial_dist, DualDiceState state) {
    require(dataset.size() >= 1, "solve_dualdice: dataset is empty");
    target_policy.validate();
    const DiceSystem sys = assemble(dataset, target_policy, discount, initial_dist);
    if (state.solver == DiceSolver::ClosedForm)
        solve_closed_form(sys, state);
    else
        solve_alternating(sys, state);
    state.solved = true;
    return state;
}

Vec omega_state_weights(const DualDiceState& state, const EmpiricalModel& model,
                        const PolicyTable& target_policy) {
    require(state.solved, "omega_state_weights: DualDICE state not solved");
    Vec omega = Vec::Zero(model.num_states);
    for (int s = 0; s < model.num_states; ++s) {
        if (!model.visited[s]) continue;
        double acc = 0.0;
        for (int a = 0; a < model.num_actions; ++a) {
            if (!model.support[s][a]) continue;
            const double beta = model.beta_hat(s, a);
            const double pi = std::max(target_policy.probs(s, a), 1e-8);
            acc += beta * state.zeta(model.index(s, a)) * beta / pi;
        }
        omega(s) = acc;
    }
    return omega;
}

double ratio_policy_value(const DualDiceState& state, const OfflineDataset& dataset,
                          int num_actions) {
    require(state.solved, "ratio_policy_value: DualDICE state not solved");
    double acc = 0.0;
    for (const Transition& tr : dataset.transitions)
        acc += state.zeta(tr.s * num_actions + tr.a) * tr.r;
    return acc / dataset.size();
}

}  // namespace sapp
