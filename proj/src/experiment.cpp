#include "sapp/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

namespace sapp {

namespace fs = std::filesystem;

void parallel_for(int count, int jobs, const std::function<void(int)>& fn) {
    if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
    jobs = std::max(1, std::min(jobs, count));
    if (jobs == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    int first_error_index = count;
    auto worker = [&] {
        while (true) {
            const int i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (i < first_error_index) {
                    first_error_index = i;
                    first_error = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// environment / dataset construction
// ---------------------------------------------------------------------------

namespace {

double jreal(const Json& j, const std::string& key, double fallback) {
    return j.contains(key) ? j.at(key).get<double>() : fallback;
}
int jint(const Json& j, const std::string& key, int fallback) {
    return j.contains(key) ? j.at(key).get<int>() : fallback;
}

}  // namespace

TabularMdp EnvironmentSpec::build() const {
    if (kind == "chain")
        return build_chain_mdp(jint(params, "num_left", 1), jint(params, "num_right", 1),
                               jreal(params, "reward_left", 1.0),
                               jreal(params, "reward_right", 0.0),
                               jreal(params, "discount", 0.9));
    if (kind == "trap_chain")
        return build_trap_chain_mdp(jint(params, "num_left", 1), jint(params, "num_right", 1),
                                    jreal(params, "reward_left", 1.0),
                                    jreal(params, "reward_right", 0.0),
                                    jreal(params, "reward_trap", -1.0),
                                    jreal(params, "discount", 0.9));
    if (kind == "garnet")
        return build_garnet(jint(params, "num_states", 8), jint(params, "num_actions", 2),
                            jint(params, "branching", 3),
                            params.contains("seed") ? params.at("seed").get<std::uint64_t>() : 7u,
                            jreal(params, "discount", 0.9));
    if (kind == "gridworld")
        return build_gridworld(jint(params, "rows", 3), jint(params, "cols", 3),
                               jint(params, "goal_row", 2), jint(params, "goal_col", 2),
                               jreal(params, "goal_reward", 1.0),
                               jreal(params, "step_cost", 0.01), jreal(params, "slip", 0.0),
                               jreal(params, "discount", 0.9));
    throw std::invalid_argument("config.environment.kind: unknown kind '" + kind + "'");
}

PolicyTable DatasetSpec::build_behavior(const TabularMdp& mdp,
                                        const EnvironmentSpec& env) const {
    if (behavior == "uniform") return PolicyTable::uniform(mdp.num_states, mdp.num_actions);
    if (behavior == "chain")
        return chain_behavior(jint(env.params, "num_left", 1),
                              jint(env.params, "num_right", 1), p_left);
    if (behavior == "trap_chain")
        return trap_chain_behavior(jint(env.params, "num_left", 1),
                                   jint(env.params, "num_right", 1), p_left, p_right, p_trap);
    throw std::invalid_argument("config.dataset.behavior: unknown kind '" + behavior + "'");
}

OfflineDataset DatasetSpec::build(const TabularMdp& mdp, const EnvironmentSpec& env,
                                  std::uint64_t seed) const {
    const PolicyTable beta = build_behavior(mdp, env);
    if (mode == "trajectory") return generate_dataset(mdp, beta, episodes, horizon, seed);
    if (mode == "discounted")
        return generate_dataset_discounted(mdp, beta, episodes, horizon, seed);
    if (mode == "iid") {
        Vec dist;
        if (iid_state_dist.empty()) {
            dist = Vec::Constant(mdp.num_states, 1.0 / mdp.num_states);
        } else {
            require(static_cast<int>(iid_state_dist.size()) == mdp.num_states,
                    "config.dataset.iid_state_dist: length mismatch");
            dist = Eigen::Map<const Vec>(iid_state_dist.data(), mdp.num_states);
            dist /= dist.sum();
        }
        return generate_dataset_iid(mdp, dist, beta, samples, seed);
    }
    throw std::invalid_argument("config.dataset.mode: unknown mode '" + mode + "'");
}

// ---------------------------------------------------------------------------
// config parsing
// ---------------------------------------------------------------------------

namespace {

FTransform parse_f(const Json& j) {
    FTransform f;
    if (j.is_null()) return f;
    const std::string kind = j.value("kind", "identity");
    if (kind == "identity")
        f.kind = FKind::Identity;
    else if (kind == "normalized_log")
        f.kind = FKind::NormalizedLog;
    else if (kind == "clip")
        f.kind = FKind::Clip;
    else
        throw std::invalid_argument("f.kind: unknown kind '" + kind + "'");
    f.b0 = jreal(j, "b0", 0.5);
    f.b1 = jreal(j, "b1", 5.0);
    f.clip_max = jreal(j, "clip_max", 1.0);
    f.validate();
    return f;
}

Json f_to_json(const FTransform& f) {
    const char* kind = f.kind == FKind::Identity
                           ? "identity"
                           : (f.kind == FKind::NormalizedLog ? "normalized_log" : "clip");
    return Json{{"kind", kind}, {"b0", f.b0}, {"b1", f.b1}, {"clip_max", f.clip_max}};
}

WeightMode parse_weight_mode(const std::string& s) {
    if (s == "exact_ratio") return WeightMode::ExactRatio;
    if (s == "dualdice") return WeightMode::DualDice;
    if (s == "constant_one") return WeightMode::ConstantOne;
    if (s == "random_uniform") return WeightMode::RandomUniform;
    throw std::invalid_argument("algorithm.weight_mode: unknown mode '" + s + "'");
}

const char* weight_mode_name(WeightMode m) {
    switch (m) {
        case WeightMode::ExactRatio: return "exact_ratio";
        case WeightMode::DualDice: return "dualdice";
        case WeightMode::ConstantOne: return "constant_one";
        case WeightMode::RandomUniform: return "random_uniform";
    }
    return "?";
}

AlgorithmSpec parse_algorithm(const Json& j) {
    AlgorithmSpec spec;
    if (!j.contains("name"))
        throw std::invalid_argument("algorithm.name: missing required field");
    spec.name = j.at("name").get<std::string>();
    TrainConfig& c = spec.config;
    c.weight_mode = parse_weight_mode(j.value("weight_mode", "exact_ratio"));
    c.alpha = jreal(j, "alpha", 5.0);
    c.f = parse_f(j.contains("f") ? j.at("f") : Json());
    c.temperature = jreal(j, "temperature", 0.1);
    c.steps = jint(j, "steps", 50);
    c.pretrain_steps = jint(j, "pretrain_steps", 100000);
    c.g_zeta = jint(j, "g_zeta", 1);
    c.g_q = jint(j, "g_q", 10);
    c.g_pi = jint(j, "g_pi", 1);
    c.lr_q = jreal(j, "lr_q", 0.5);
    c.lr_pi = jreal(j, "lr_pi", 0.5);
    c.full_improvement = j.value("full_improvement", true);
    c.dice_solver = j.value("dice_solver", std::string("closed_form")) == "alternating_sgd"
                        ? DiceSolver::AlternatingSgd
                        : DiceSolver::ClosedForm;
    c.minibatch = j.value("minibatch", false);
    c.batch_size = jint(j, "batch_size", 256);
    c.validate();
    return spec;
}

Json algorithm_to_json(const AlgorithmSpec& spec) {
    const TrainConfig& c = spec.config;
    return Json{{"name", spec.name},
                {"weight_mode", weight_mode_name(c.weight_mode)},
                {"alpha", c.alpha},
                {"f", f_to_json(c.f)},
                {"temperature", c.temperature},
                {"steps", c.steps},
                {"pretrain_steps", c.pretrain_steps},
                {"g_zeta", c.g_zeta},
                {"g_q", c.g_q},
                {"g_pi", c.g_pi},
                {"lr_q", c.lr_q},
                {"lr_pi", c.lr_pi},
                {"full_improvement", c.full_improvement},
                {"dice_solver", c.dice_solver == DiceSolver::AlternatingSgd
                                    ? "alternating_sgd"
                                    : "closed_form"},
                {"minibatch", c.minibatch},
                {"batch_size", c.batch_size}};
}

}  // namespace

ExperimentConfig parse_config(const Json& j) {
    ExperimentConfig cfg;
    if (!j.contains("environment") || !j.at("environment").contains("kind"))
        throw std::invalid_argument("config.environment.kind: missing required field");
    cfg.environment.kind = j.at("environment").at("kind").get<std::string>();
    cfg.environment.params = j.at("environment");

    if (j.contains("dataset")) {
        const Json& d = j.at("dataset");
        cfg.dataset.mode = d.value("mode", "trajectory");
        cfg.dataset.behavior = d.value("behavior", "uniform");
        cfg.dataset.p_left = jreal(d, "p_left", 0.1);
        cfg.dataset.p_right = jreal(d, "p_right", 0.45);
        cfg.dataset.p_trap = jreal(d, "p_trap", 0.45);
        cfg.dataset.episodes = jint(d, "episodes", 100);
        cfg.dataset.horizon = jint(d, "horizon", 10);
        cfg.dataset.samples = jint(d, "samples", 1000);
        if (d.contains("iid_state_dist"))
            cfg.dataset.iid_state_dist = d.at("iid_state_dist").get<std::vector<double>>();
    }

    if (j.contains("algorithms"))
        for (const Json& a : j.at("algorithms")) cfg.algorithms.push_back(parse_algorithm(a));
    if (j.contains("validations"))
        for (const Json& v : j.at("validations")) {
            ValidationSpec spec;
            if (!v.contains("kind"))
                throw std::invalid_argument("validation.kind: missing required field");
            spec.kind = v.at("kind").get<std::string>();
            const bool known = spec.kind == "lemma1" || spec.kind == "theorem2" ||
                               spec.kind == "theorem3" || spec.kind == "theorem4" ||
                               spec.kind == "theorem5";
            if (!known)
                throw std::invalid_argument("validation.kind: unknown kind '" + spec.kind + "'");
            spec.params = v;
            cfg.validations.push_back(spec);
        }
    if (cfg.algorithms.empty() && cfg.validations.empty())
        throw std::invalid_argument(
            "config: at least one algorithm or validation is required");

    cfg.output_dir = j.value("output_dir", "out");
    cfg.seeds = jint(j, "seeds", 10);
    require(cfg.seeds >= 1, "config.seeds: must be >= 1");
    cfg.root_seed = j.contains("root_seed") ? j.at("root_seed").get<std::uint64_t>() : 1u;
    cfg.jobs = jint(j, "jobs", 0);
    return cfg;
}

Json config_to_json(const ExperimentConfig& cfg) {
    Json j;
    j["environment"] = cfg.environment.params;
    j["environment"]["kind"] = cfg.environment.kind;
    j["dataset"] = Json{{"mode", cfg.dataset.mode},
                        {"behavior", cfg.dataset.behavior},
                        {"p_left", cfg.dataset.p_left},
                        {"p_right", cfg.dataset.p_right},
                        {"p_trap", cfg.dataset.p_trap},
                        {"episodes", cfg.dataset.episodes},
                        {"horizon", cfg.dataset.horizon},
                        {"samples", cfg.dataset.samples}};
    if (!cfg.dataset.iid_state_dist.empty())
        j["dataset"]["iid_state_dist"] = cfg.dataset.iid_state_dist;
    j["algorithms"] = Json::array();
    for (const AlgorithmSpec& a : cfg.algorithms) j["algorithms"].push_back(algorithm_to_json(a));
    j["validations"] = Json::array();
    for (const ValidationSpec& v : cfg.validations) j["validations"].push_back(v.params);
    j["output_dir"] = cfg.output_dir;
    j["seeds"] = cfg.seeds;
    j["root_seed"] = cfg.root_seed;
    j["jobs"] = cfg.jobs;
    return j;
}

// ---------------------------------------------------------------------------
// validation batches
// ---------------------------------------------------------------------------

Lemma1Outcome run_lemma1_validation(const Lemma1Params& p, int jobs) {
    Lemma1Outcome out;
    out.rows.resize(p.seeds);
    parallel_for(p.seeds, jobs, [&](int i) {
        const std::uint64_t seed = derive_seed(p.seed_base, i);
        const TabularMdp mdp =
            build_garnet(p.num_states, p.num_actions, p.branching, seed, p.discount);
        const PolicyTable beta = PolicyTable::uniform(p.num_states, p.num_actions);
        const OfflineDataset data =
            generate_dataset(mdp, beta, p.episodes, p.horizon, derive_seed(seed, 1));
        const EmpiricalModel model = build_empirical_model(data, p.num_states, p.num_actions);

        PolicyClass cls;
        cls.kind = PolicyClassKind::DeterministicEnumeration;
        TheoremConstants constants;
        constants.delta = p.delta;
        constants.policy_class_size = cls.size(p.num_states, p.num_actions);

        PessimismSpec dis;
        dis.alpha = p.alpha;
        const BoundReport rep_dis = subopt_upper_bound(mdp, model, cls, dis, constants);

        PessimismSpec sa = dis;
        sa.state_aware = true;
        const BoundReport rep_sa = subopt_upper_bound(mdp, model, cls, sa, constants);

        Lemma1Row row;
        row.seed = i;
        row.ub_dis = rep_dis.total_ub;
        row.ub_sa = rep_sa.total_ub;
        row.subopt_dis = rep_dis.true_subopt;
        row.subopt_sa = rep_sa.true_subopt;
        row.ok_dis = row.subopt_dis <= row.ub_dis + 1e-9;
        row.ok_sa = row.subopt_sa <= row.ub_sa + 1e-9;
        out.rows[i] = row;
    });
    int bad_dis = 0, bad_sa = 0;
    for (const auto& r : out.rows) {
        bad_dis += r.ok_dis ? 0 : 1;
        bad_sa += r.ok_sa ? 0 : 1;
    }
    out.violation_rate_dis = static_cast<double>(bad_dis) / p.seeds;
    out.violation_rate_sa = static_cast<double>(bad_sa) / p.seeds;
    return out;
}

Theorem2Outcome run_theorem2_validation(const Theorem2Params& p, int jobs) {
    Theorem2Outcome out;
    out.rows.resize(p.instances);
    parallel_for(p.instances, jobs, [&](int i) {
        const std::uint64_t seed = derive_seed(p.seed_base, i);
        const TabularMdp mdp =
            build_garnet(p.num_states, p.num_actions, p.branching, seed, p.discount);
        const PolicyTable beta = PolicyTable::uniform(p.num_states, p.num_actions);
        const OfflineDataset data =
            generate_dataset(mdp, beta, p.episodes, p.horizon, derive_seed(seed, 1));
        const EmpiricalModel model = build_empirical_model(data, p.num_states, p.num_actions);

        PolicyClass cls;
        cls.kind = PolicyClassKind::DeterministicEnumeration;
        TheoremConstants constants;
        constants.delta = p.delta;
        constants.policy_class_size = cls.size(p.num_states, p.num_actions);

        PessimismSpec dis;
        dis.alpha = p.alpha;
        PessimismSpec sa = dis;
        sa.state_aware = true;
        if (p.use_f) {
            sa.f.kind = FKind::NormalizedLog;
            sa.f.b0 = p.b0;
            sa.f.b1 = p.b1;
        }
        const BoundReport rep_dis = subopt_upper_bound(mdp, model, cls, dis, constants);
        const BoundReport rep_sa = subopt_upper_bound(mdp, model, cls, sa, constants);
        const Theorem2Result check =
            theorem2_check(rep_dis, rep_sa, model, sa, mdp.discount, mdp.initial_dist);

        Theorem2Row row;
        row.seed = i;
        row.condition = check.condition_holds;
        row.conclusion = check.conclusion_holds;
        row.ub_dis = rep_dis.total_ub;
        row.ub_sa = rep_sa.total_ub;
        row.subopt = rep_sa.true_subopt;
        out.rows[i] = row;
    });
    for (const auto& r : out.rows) {
        if (r.condition) {
            ++out.condition_count;
            if (!r.conclusion) ++out.counterexamples;
        }
    }
    return out;
}

Theorem3Outcome run_theorem3_validation(const Theorem3Params& p, int jobs) {
    (void)jobs;  // three instances; sequential so intrinsic constants can be shared
    Theorem3Outcome out;
    out.rows.resize(p.skews.size());

    const TabularMdp mdp = build_chain_mdp(p.num_left, p.num_right, p.reward_left,
                                           p.reward_right, p.discount);
    const ChainLayout layout = chain_layout(p.num_left, p.num_right);
    const PolicyTable beta = PolicyTable::uniform(mdp.num_states, mdp.num_actions);
    PolicyClass cls;
    cls.kind = PolicyClassKind::DeterministicEnumeration;
    TheoremConstants base;
    base.delta = p.delta;
    base.policy_class_size = cls.size(mdp.num_states, mdp.num_actions);

    // eps_beta, eps_d and Delta_beta are intrinsic to the MDP and the (fixed)
    // behavior policy, so they are measured once on the least skewed instance
    // and shared across the family; only d^D-dependent quantities vary
    std::optional<TheoremConstants> shared;

    for (int idx = 0; idx < static_cast<int>(p.skews.size()); ++idx) {
        const int skew = p.skews[idx];
        // weakly coupled regime: fixed uniform behavior, skewed state draw
        Vec d_mu = Vec::Ones(mdp.num_states);
        for (int s = layout.right_first; s <= layout.right_terminal; ++s) d_mu(s) = skew;
        d_mu /= d_mu.sum();
        const OfflineDataset data = generate_dataset_iid(
            mdp, d_mu, beta, p.samples, derive_seed(p.seed_base, idx));
        const EmpiricalModel model =
            build_empirical_model(data, mdp.num_states, mdp.num_actions);

        PessimismSpec dis;
        dis.alpha = p.alpha_prime / data.size();
        PessimismSpec sa = dis;
        sa.state_aware = true;
        std::optional<FTransform> f;
        if (p.use_f) {
            sa.f.kind = FKind::NormalizedLog;
            sa.f.b0 = p.b0;
            sa.f.b1 = p.b1;
            f = sa.f;
        }
        const BoundReport rep_dis = subopt_upper_bound(mdp, model, cls, dis, base);
        const BoundReport rep_sa = subopt_upper_bound(mdp, model, cls, sa, base);

        TheoremConstants constants = measure_constants(
            model, dis.dis, mdp.discount, mdp.initial_dist, rep_dis.pi_bar_2, p.delta,
            p.alpha_prime, base.policy_class_size);
        if (!shared) shared = constants;
        constants.eps_beta = shared->eps_beta;
        constants.eps_d = shared->eps_d;
        constants.delta_beta = shared->delta_beta;
        const int s1 = argmin_visited_d_data(model);
        const Theorem3Result check = theorem3_check(model, constants, rep_sa.pi_bar_1, s1,
                                                    dis.dis, mdp.discount, f);

        Theorem3Row row;
        row.skew = skew;
        row.applicable = check.applicable;
        row.condition = check.condition_holds;
        row.lhs = check.lhs;
        row.one_plus_c = 1.0 + constants.c_slack;
        row.ub_dis = rep_dis.total_ub;
        row.ub_sa = rep_sa.total_ub;
        row.conclusion =
            rep_sa.total_ub <= rep_dis.total_ub + 1e-9 * std::max(1.0, std::abs(rep_dis.total_ub));
        out.rows[idx] = row;
    }
    out.lhs_strictly_increasing = true;
    for (std::size_t i = 1; i < out.rows.size(); ++i)
        if (!(out.rows[i].lhs > out.rows[i - 1].lhs)) out.lhs_strictly_increasing = false;
    for (const auto& r : out.rows)
        if (r.applicable && r.condition && !r.conclusion) out.implication_holds = false;
    return out;
}

Theorem4Outcome run_theorem4_validation(const Theorem4Params& p, int jobs) {
    Theorem4Outcome out;
    out.rows.resize(p.seeds);
    parallel_for(p.seeds, jobs, [&](int i) {
        const std::uint64_t seed = derive_seed(p.seed_base, i);
        const TabularMdp mdp =
            build_garnet(p.num_states, p.num_actions, p.branching, seed, p.discount);
        const PolicyTable beta = PolicyTable::uniform(p.num_states, p.num_actions);
        const OfflineDataset data =
            generate_dataset(mdp, beta, p.episodes, p.horizon, derive_seed(seed, 1));
        const EmpiricalModel model = build_empirical_model(data, p.num_states, p.num_actions);

        PolicyClass cls;
        cls.kind = PolicyClassKind::DeterministicEnumeration;
        TheoremConstants constants;
        constants.delta = p.delta;
        constants.policy_class_size = cls.size(p.num_states, p.num_actions);

        PessimismSpec spec;
        spec.state_aware = true;
        spec.alpha = p.alpha_margin *
                     theorem4_threshold(mdp, model, cls, spec, constants);
        const Theorem4Result res = theorem4_clip_search(mdp, model, cls, spec, constants);

        Theorem4Row row;
        row.seed = i;
        row.applicable = res.applicable;
        row.clip_c = res.clip_c;
        row.ub_clipped_sa = res.ub_clipped_sa;
        row.ub_dis = res.ub_dis;
        out.rows[i] = row;
    });
    for (const auto& r : out.rows)
        if (r.applicable && r.clip_c > 1.0) ++out.clip_gt_one;
    return out;
}

Theorem5Outcome run_theorem5_validation(const Theorem5Params& p, int jobs) {
    Theorem5Outcome out;
    out.rows.resize(p.seeds);
    parallel_for(p.seeds, jobs, [&](int i) {
        const std::uint64_t seed = derive_seed(p.seed_base, i);
        const TabularMdp mdp =
            build_garnet(p.num_states, p.num_actions, p.branching, seed, p.discount);
        const PolicyTable beta = PolicyTable::uniform(p.num_states, p.num_actions);
        const OfflineDataset data =
            generate_dataset(mdp, beta, p.episodes, p.horizon, derive_seed(seed, 1));
        const EmpiricalModel model = build_empirical_model(data, p.num_states, p.num_actions);

        // random policy over supported actions
        Rng rng(derive_seed(seed, 2));
        std::vector<int> actions(p.num_states, 0);
        for (int s = 0; s < p.num_states; ++s) {
            std::vector<int> options;
            for (int a = 0; a < p.num_actions; ++a)
                if (model.support[s][a]) options.push_back(a);
            if (options.empty()) options.push_back(0);
            std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
            actions[s] = options[pick(rng)];
        }
        const PolicyTable pi = PolicyTable::deterministic(actions, p.num_actions);

        PolicyClass cls;
        cls.kind = PolicyClassKind::DeterministicEnumeration;
        TheoremConstants constants;
        constants.delta = p.delta;
        constants.policy_class_size = cls.size(p.num_states, p.num_actions);

        PessimismSpec probe;
        probe.state_aware = true;
        probe.alpha = 0.0;
        const Theorem5Result probe_res =
            underestimation_check(mdp, model, pi, probe, constants);
        PessimismSpec spec = probe;
        spec.alpha = std::max(p.alpha_margin * probe_res.alpha_threshold, 1e-6);
        const Theorem5Result res = underestimation_check(mdp, model, pi, spec, constants);

        Theorem5Row row;
        row.seed = i;
        row.applicable = res.large_alpha_applicable;
        row.pointwise = res.pointwise_bound_holds;
        row.underestimates = res.large_alpha_underestimates;
        out.rows[i] = row;
    });
    for (const auto& r : out.rows) {
        if (!r.pointwise) ++out.pointwise_failures;
        if (r.applicable && !r.underestimates) ++out.underestimation_failures;
    }
    return out;
}

// ---------------------------------------------------------------------------
// experiment runner
// ---------------------------------------------------------------------------

namespace {

double median_of(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    if (n == 0) return 0.0;
    return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

double quantile_of(std::vector<double> xs, double q) {
    std::sort(xs.begin(), xs.end());
    if (xs.empty()) return 0.0;
    const double pos = q * (xs.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, xs.size() - 1);
    const double frac = pos - lo;
    return xs[lo] * (1.0 - frac) + xs[hi] * frac;
}

std::string validation_csv_header() { return "seed,condition,conclusion,ub_dis,ub_sa,subopt\n"; }

Json run_validation(const ValidationSpec& spec, const ExperimentConfig& cfg,
                    std::string* csv) {
    const Json& p = spec.params;
    std::ostringstream rows;
    rows << validation_csv_header();
    Json summary;
    summary["kind"] = spec.kind;
    if (spec.kind == "lemma1") {
        Lemma1Params params;
        params.seeds = jint(p, "seeds", params.seeds);
        params.num_states = jint(p, "num_states", params.num_states);
        params.num_actions = jint(p, "num_actions", params.num_actions);
        params.branching = jint(p, "branching", params.branching);
        params.discount = jreal(p, "discount", params.discount);
        params.episodes = jint(p, "episodes", params.episodes);
        params.horizon = jint(p, "horizon", params.horizon);
        params.alpha = jreal(p, "alpha", params.alpha);
        params.delta = jreal(p, "delta", params.delta);
        params.seed_base = derive_seed(cfg.root_seed, 0x1e11a1ull);
        const Lemma1Outcome res = run_lemma1_validation(params, cfg.jobs);
        for (const auto& r : res.rows)
            rows << r.seed << ',' << 1 << ',' << (r.ok_dis && r.ok_sa ? 1 : 0) << ','
                 << r.ub_dis << ',' << r.ub_sa << ',' << r.subopt_dis << '\n';
        summary["violation_rate_dis"] = res.violation_rate_dis;
        summary["violation_rate_sa"] = res.violation_rate_sa;
        summary["delta"] = params.delta;
    } else if (spec.kind == "theorem2") {
        Theorem2Params params;
        params.instances = jint(p, "seeds", params.instances);
        params.num_states = jint(p, "num_states", params.num_states);
        params.num_actions = jint(p, "num_actions", params.num_actions);
        params.branching = jint(p, "branching", params.branching);
        params.discount = jreal(p, "discount", params.discount);
        params.episodes = jint(p, "episodes", params.episodes);
        params.horizon = jint(p, "horizon", params.horizon);
        params.alpha = jreal(p, "alpha", params.alpha);
        params.delta = jreal(p, "delta", params.delta);
        params.use_f = p.value("use_f", false);
        params.b0 = jreal(p, "b0", params.b0);
        params.b1 = jreal(p, "b1", params.b1);
        params.seed_base = derive_seed(cfg.root_seed, 0x7e02ull);
        const Theorem2Outcome res = run_theorem2_validation(params, cfg.jobs);
        for (const auto& r : res.rows)
            rows << r.seed << ',' << r.condition << ',' << r.conclusion << ',' << r.ub_dis
                 << ',' << r.ub_sa << ',' << r.subopt << '\n';
        summary["condition_count"] = res.condition_count;
        summary["counterexamples"] = res.counterexamples;
    } else if (spec.kind == "theorem3") {
        Theorem3Params params;
        if (p.contains("skews")) params.skews = p.at("skews").get<std::vector<int>>();
        params.num_left = jint(p, "num_left", params.num_left);
        params.num_right = jint(p, "num_right", params.num_right);
        params.reward_left = jreal(p, "reward_left", params.reward_left);
        params.reward_right = jreal(p, "reward_right", params.reward_right);
        params.discount = jreal(p, "discount", params.discount);
        params.samples = jint(p, "samples", params.samples);
        params.alpha_prime = jreal(p, "alpha_prime", params.alpha_prime);
        params.delta = jreal(p, "delta", params.delta);
        params.use_f = p.value("use_f", false);
        params.b0 = jreal(p, "b0", params.b0);
        params.b1 = jreal(p, "b1", params.b1);
        params.seed_base = derive_seed(cfg.root_seed, 0x7e03ull);
        const Theorem3Outcome res = run_theorem3_validation(params, cfg.jobs);
        for (const auto& r : res.rows)
            rows << r.skew << ',' << r.condition << ',' << r.conclusion << ',' << r.ub_dis
                 << ',' << r.ub_sa << ',' << r.lhs << '\n';
        summary["lhs_strictly_increasing"] = res.lhs_strictly_increasing;
        summary["implication_holds"] = res.implication_holds;
    } else if (spec.kind == "theorem4") {
        Theorem4Params params;
        params.seeds = jint(p, "seeds", params.seeds);
        params.num_states = jint(p, "num_states", params.num_states);
        params.num_actions = jint(p, "num_actions", params.num_actions);
        params.branching = jint(p, "branching", params.branching);
        params.discount = jreal(p, "discount", params.discount);
        params.episodes = jint(p, "episodes", params.episodes);
        params.horizon = jint(p, "horizon", params.horizon);
        params.alpha_margin = jreal(p, "alpha_margin", params.alpha_margin);
        params.delta = jreal(p, "delta", params.delta);
        params.seed_base = derive_seed(cfg.root_seed, 0x7e04ull);
        const Theorem4Outcome res = run_theorem4_validation(params, cfg.jobs);
        for (const auto& r : res.rows)
            rows << r.seed << ',' << r.applicable << ',' << (r.clip_c > 1.0) << ','
                 << r.ub_dis << ',' << r.ub_clipped_sa << ',' << r.clip_c << '\n';
        summary["clip_gt_one"] = res.clip_gt_one;
        summary["seeds"] = params.seeds;
    } else if (spec.kind == "theorem5") {
        Theorem5Params params;
        params.seeds = jint(p, "seeds", params.seeds);
        params.num_states = jint(p, "num_states", params.num_states);
        params.num_actions = jint(p, "num_actions", params.num_actions);
        params.branching = jint(p, "branching", params.branching);
        params.discount = jreal(p, "discount", params.discount);
        params.episodes = jint(p, "episodes", params.episodes);
        params.horizon = jint(p, "horizon", params.horizon);
        params.alpha_margin = jreal(p, "alpha_margin", params.alpha_margin);
        params.delta = jreal(p, "delta", params.delta);
        params.seed_base = derive_seed(cfg.root_seed, 0x7e05ull);
        const Theorem5Outcome res = run_theorem5_validation(params, cfg.jobs);
        for (const auto& r : res.rows)
            rows << r.seed << ',' << r.applicable << ','
                 << (r.pointwise && r.underestimates) << ',' << 0.0 << ',' << 0.0 << ','
                 << 0.0 << '\n';
        summary["underestimation_failures"] = res.underestimation_failures;
        summary["pointwise_failures"] = res.pointwise_failures;
        summary["seeds"] = params.seeds;
    }
    *csv = rows.str();
    return summary;
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg) {
    const TabularMdp mdp = cfg.environment.build();
    fs::create_directories(cfg.output_dir);

    Json summary;
    summary["config"] = config_to_json(cfg);
    Json failures = Json::array();
    std::mutex failure_mutex;

    // --- algorithms, each across the seed sweep ---
    Json algorithms = Json::array();
    std::vector<std::pair<std::string, double>> medians;
    for (const AlgorithmSpec& alg : cfg.algorithms) {
        std::vector<double> finals(cfg.seeds, std::numeric_limits<double>::quiet_NaN());
        std::vector<std::string> files(cfg.seeds);
        parallel_for(cfg.seeds, cfg.jobs, [&](int i) {
            try {
                const OfflineDataset data = cfg.dataset.build(
                    mdp, cfg.environment, derive_seed(cfg.root_seed, 7000 + i));
                TrainConfig tc = alg.config;
                tc.seed = derive_seed(cfg.root_seed, 9000 + i);
                const TrainTrace trace = train(mdp, data, tc);
                const std::string rel = alg.name + "/seed_" + std::to_string(i) + ".csv";
                write_file_atomic((fs::path(cfg.output_dir) / rel).string(),
                                  trace_to_csv(trace));
                files[i] = rel;
                finals[i] = trace.checkpoints.back().true_return;
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                failures.push_back(
                    {{"algorithm", alg.name}, {"seed", i}, {"error", e.what()}});
            }
        });
        std::vector<double> ok;
        for (double v : finals)
            if (std::isfinite(v)) ok.push_back(v);
        Json entry;
        entry["name"] = alg.name;
        entry["final_true_returns"] = ok;
        entry["median"] = median_of(ok);
        entry["iqr"] = quantile_of(ok, 0.75) - quantile_of(ok, 0.25);
        entry["trace_files"] = files;
        algorithms.push_back(entry);
        medians.push_back({alg.name, median_of(ok)});
    }
    summary["algorithms"] = algorithms;
    std::stable_sort(medians.begin(), medians.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    Json ranking = Json::array();
    for (const auto& [name, med] : medians) ranking.push_back(name);
    summary["ranking"] = ranking;

    // --- validations ---
    Json validations = Json::array();
    for (const ValidationSpec& v : cfg.validations) {
        std::string csv;
        Json vsummary = run_validation(v, cfg, &csv);
        const std::string rel = "validation_" + v.kind + ".csv";
        write_file_atomic((fs::path(cfg.output_dir) / rel).string(), csv);
        vsummary["csv"] = rel;
        validations.push_back(vsummary);
    }
    summary["validations"] = validations;

    // --- self-check: recompute medians from the files just written ---
    bool self_check = true;
    for (const Json& entry : algorithms) {
        std::vector<double> finals;
        for (const auto& rel : entry.at("trace_files")) {
            const std::string file = rel.get<std::string>();
            if (file.empty()) continue;
            const std::string text = read_file((fs::path(cfg.output_dir) / file).string());
            std::istringstream in(text);
            std::string line, last;
            std::getline(in, line);  // header
            while (std::getline(in, line))
                if (!line.empty()) last = line;
            // second column is true_return
            std::istringstream row(last);
            std::string cell;
            std::getline(row, cell, ',');
            std::getline(row, cell, ',');
            finals.push_back(std::stod(cell));
        }
        if (std::abs(median_of(finals) - entry.at("median").get<double>()) > 1e-12)
            self_check = false;
    }
    summary["self_check"] = self_check;
    summary["failures"] = failures;

    write_file_atomic((fs::path(cfg.output_dir) / "summary.json").string(),
                      summary.dump(2) + "\n");
    return failures.empty() ? 0 : 3;
}

}  // namespace sapp
