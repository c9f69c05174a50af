#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sapp/envs.hpp"
#include "sapp/serialization.hpp"

namespace sapp {

// ---------------------------------------------------------------------------
// Experiment configuration (JSON schema documented in README)
// ---------------------------------------------------------------------------

struct EnvironmentSpec {
    std::string kind;  // chain | trap_chain | garnet | gridworld
    Json params;

    TabularMdp build() const;
};

struct DatasetSpec {
    std::string mode = "trajectory";  // trajectory | discounted | iid
    std::string behavior = "uniform";  // uniform | chain | trap_chain
    double p_left = 0.1;
    double p_right = 0.45;
    double p_trap = 0.45;
    int episodes = 100;
    int horizon = 10;
    int samples = 1000;                       // iid mode
    std::vector<double> iid_state_dist;       // optional; uniform when empty

    PolicyTable build_behavior(const TabularMdp& mdp, const EnvironmentSpec& env) const;
    OfflineDataset build(const TabularMdp& mdp, const EnvironmentSpec& env,
                         std::uint64_t seed) const;
};

struct AlgorithmSpec {
    std::string name;
    TrainConfig config;
};

struct ValidationSpec {
    std::string kind;  // lemma1 | theorem2 | theorem3 | theorem4 | theorem5
    Json params;
};

struct ExperimentConfig {
    EnvironmentSpec environment;
    DatasetSpec dataset;
    std::vector<AlgorithmSpec> algorithms;
    std::vector<ValidationSpec> validations;
    std::string output_dir = "out";
    int seeds = 10;
    std::uint64_t root_seed = 1;
    int jobs = 0;  // 0 = hardware concurrency
};

/// Parses and schema-checks a config; throws std::invalid_argument with a
/// field path on violation.
ExperimentConfig parse_config(const Json& j);
Json config_to_json(const ExperimentConfig& config);

/// Runs algorithms and validations, writes artifacts under output_dir.
/// Returns 0 on success, 3 when some seeds failed (recorded in the summary).
int run_experiment(const ExperimentConfig& config);

// ---------------------------------------------------------------------------
// Theorem/lemma validation batches (shared by the CLI and acceptance suite)
// ---------------------------------------------------------------------------

struct Lemma1Params {
    int seeds = 200;
    int num_states = 5;
    int num_actions = 2;
    int branching = 3;
    double discount = 0.9;
    int episodes = 80;
    int horizon = 10;
    double alpha = 0.5;
    double delta = 0.1;
    std::uint64_t seed_base = 20001;
};

struct Lemma1Row {
    int seed = 0;
    double ub_dis = 0.0, ub_sa = 0.0;
    double subopt_dis = 0.0, subopt_sa = 0.0;
    bool ok_dis = true, ok_sa = true;
};

struct Lemma1Outcome {
    std::vector<Lemma1Row> rows;
    double violation_rate_dis = 0.0;
    double violation_rate_sa = 0.0;
};

Lemma1Outcome run_lemma1_validation(const Lemma1Params& params, int jobs);

struct Theorem2Params {
    int instances = 500;
    int num_states = 4;
    int num_actions = 2;
    int branching = 2;
    double discount = 0.9;
    int episodes = 40;
    int horizon = 8;
    double alpha = 0.5;
    double delta = 0.1;
    bool use_f = false;  // run the f-variant (normalized_log) condition
    double b0 = 0.5, b1 = 5.0;
    std::uint64_t seed_base = 30001;
};

struct Theorem2Row {
    int seed = 0;
    bool condition = false;
    bool conclusion = false;
    double ub_dis = 0.0, ub_sa = 0.0, subopt = 0.0;
};

struct Theorem2Outcome {
    std::vector<Theorem2Row> rows;
    int condition_count = 0;
    int counterexamples = 0;  // condition true but conclusion false
};

Theorem2Outcome run_theorem2_validation(const Theorem2Params& params, int jobs);

struct Theorem3Params {
    std::vector<int> skews = {9, 99, 999};
    int num_left = 1;
    int num_right = 1;
    double reward_left = 1.0;
    double reward_right = 0.0;
    double discount = 0.9;
    int samples = 40000;
    double alpha_prime = 0.05;
    double delta = 0.1;
    bool use_f = false;
    double b0 = 0.5, b1 = 5.0;
    std::uint64_t seed_base = 40001;
};

struct Theorem3Row {
    int skew = 0;
    bool applicable = false;
    bool condition = false;
    bool conclusion = false;  // UB_SA <= UB_Dis
    double lhs = 0.0;
    double one_plus_c = 0.0;
    double ub_dis = 0.0, ub_sa = 0.0;
};

struct Theorem3Outcome {
    std::vector<Theorem3Row> rows;
    bool lhs_strictly_increasing = false;
    bool implication_holds = true;  // condition => conclusion on every row
};

Theorem3Outcome run_theorem3_validation(const Theorem3Params& params, int jobs);

struct Theorem4Params {
    int seeds = 20;
    int num_states = 5;
    int num_actions = 2;
    int branching = 3;
    double discount = 0.9;
    int episodes = 80;
    int horizon = 10;
    double alpha_margin = 2.0;  // alpha = margin * threshold
    double delta = 0.1;
    std::uint64_t seed_base = 50001;
};

struct Theorem4Row {
    int seed = 0;
    bool applicable = false;
    double clip_c = 1.0;
    double ub_clipped_sa = 0.0, ub_dis = 0.0;
};

struct Theorem4Outcome {
    std::vector<Theorem4Row> rows;
    int clip_gt_one = 0;
};

Theorem4Outcome run_theorem4_validation(const Theorem4Params& params, int jobs);

struct Theorem5Params {
    int seeds = 20;
    int num_states = 5;
    int num_actions = 2;
    int branching = 3;
    double discount = 0.9;
    int episodes = 100;
    int horizon = 10;
    double alpha_margin = 1.5;
    double delta = 0.1;
    std::uint64_t seed_base = 60001;
};

struct Theorem5Row {
    int seed = 0;
    bool applicable = false;
    bool pointwise = false;
    bool underestimates = false;
};

struct Theorem5Outcome {
    std::vector<Theorem5Row> rows;
    int underestimation_failures = 0;
    int pointwise_failures = 0;
};

Theorem5Outcome run_theorem5_validation(const Theorem5Params& params, int jobs);

/// Runs fn(i) for i in [0, count) on `jobs` worker threads; exceptions are
/// captured and rethrown from the first failing index.
void parallel_for(int count, int jobs, const std::function<void(int)>& fn);

}  // namespace sapp
