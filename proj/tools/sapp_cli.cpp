// Command-line front end: environment generation, dataset generation,
// experiment runs, theorem validation batches and single-instance inspection.
//
// Exit codes: 0 success, 2 config/usage error, 3 partial seed failures.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sapp/experiment.hpp"

namespace fs = std::filesystem;
using namespace sapp;

namespace {

int cmd_gen_mdp(const std::string& kind, const Json& params, const std::string& out) {
    EnvironmentSpec env{kind, params};
    const TabularMdp mdp = env.build();
    const std::string text = mdp_to_json(mdp).dump(2) + "\n";
    if (out.empty())
        std::cout << text;
    else
        write_file_atomic(out, text);
    return 0;
}

int cmd_gen_dataset(const std::string& mdp_path, const std::string& behavior,
                    const std::string& mode, int episodes, int horizon, int samples,
                    double p_left, double p_right, double p_trap, int num_left,
                    int num_right, std::uint64_t seed, const std::string& out) {
    const TabularMdp mdp = mdp_from_json(Json::parse(read_file(mdp_path)));
    EnvironmentSpec env;
    env.kind = "chain";
    env.params = Json{{"num_left", num_left}, {"num_right", num_right}};
    DatasetSpec spec;
    spec.mode = mode;
    spec.behavior = behavior;
    spec.p_left = p_left;
    spec.p_right = p_right;
    spec.p_trap = p_trap;
    spec.episodes = episodes;
    spec.horizon = horizon;
    spec.samples = samples;
    const OfflineDataset data = spec.build(mdp, env, seed);
    const bool json = out.size() > 5 && out.substr(out.size() - 5) == ".json";
    const std::string text = json ? dataset_to_json(data).dump(2) + "\n" : dataset_to_csv(data);
    if (out.empty())
        std::cout << text;
    else
        write_file_atomic(out, text);
    return 0;
}

ExperimentConfig load_config(const std::string& path, const std::string& out_override,
                             int seeds_override, int jobs_override) {
    Json j;
    try {
        j = Json::parse(read_file(path));
    } catch (const Json::parse_error& e) {
        throw std::invalid_argument(std::string("config parse error: ") + e.what());
    }
    ExperimentConfig cfg = parse_config(j);
    if (!out_override.empty()) cfg.output_dir = out_override;
    if (seeds_override > 0) cfg.seeds = seeds_override;
    if (jobs_override > 0) cfg.jobs = jobs_override;
    return cfg;
}

int cmd_inspect(const std::string& mdp_path, const std::string& dataset_path, double alpha,
                const std::string& out_dir) {
    const TabularMdp mdp = mdp_from_json(Json::parse(read_file(mdp_path)));
    const std::string text = read_file(dataset_path);
    const OfflineDataset data =
        dataset_path.size() > 5 && dataset_path.substr(dataset_path.size() - 5) == ".json"
            ? dataset_from_json(Json::parse(text))
            : dataset_from_csv(text);
    const EmpiricalModel model = build_empirical_model(data, mdp.num_states, mdp.num_actions);
    const PolicyTable target = PolicyTable::uniform(mdp.num_states, mdp.num_actions);

    DualDiceState dice;
    dice = solve_dualdice(data, target, mdp.discount, mdp.initial_dist, dice);
    write_file_atomic((fs::path(out_dir) / "zeta.csv").string(),
                      zeta_to_csv(dice, mdp.num_states, mdp.num_actions));
    write_file_atomic((fs::path(out_dir) / "omega.csv").string(),
                      omega_to_csv(omega_state_weights(dice, model, target)));

    PolicyClass cls;
    cls.kind = PolicyClassKind::DeterministicEnumeration;
    if (cls.size(mdp.num_states, mdp.num_actions) <= 1e6) {
        TheoremConstants constants;
        constants.policy_class_size = cls.size(mdp.num_states, mdp.num_actions);
        PessimismSpec dis;
        dis.alpha = alpha;
        PessimismSpec sa = dis;
        sa.state_aware = true;
        const BoundReport rep_dis = subopt_upper_bound(mdp, model, cls, dis, constants);
        const BoundReport rep_sa = subopt_upper_bound(mdp, model, cls, sa, constants);
        Json bounds;
        bounds["dis"] = bound_report_to_json(rep_dis);
        bounds["sa_dis"] = bound_report_to_json(rep_sa);
        write_file_atomic((fs::path(out_dir) / "bounds.json").string(),
                          bounds.dump(2) + "\n");
    }
    std::cout << "wrote " << out_dir << "/{zeta.csv,omega.csv,bounds.json}\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tabular offline RL workbench: state-aware proximal pessimism, "
                 "SA-CQL and suboptimality-bound validation"};
    app.require_subcommand(1);

    // gen-mdp
    auto* gen_mdp = app.add_subcommand("gen-mdp", "Generate an MDP as JSON");
    std::string kind = "garnet", out;
    int num_states = 8, num_actions = 2, branching = 3, num_left = 1, num_right = 1;
    int rows = 3, cols = 3, goal_row = 2, goal_col = 2;
    double discount = 0.9, reward_left = 1.0, reward_right = 0.0, reward_trap = -1.0;
    double goal_reward = 1.0, step_cost = 0.01, slip = 0.0;
    std::uint64_t seed = 7;
    gen_mdp->add_option("--kind", kind, "garnet | chain | trap_chain | gridworld");
    gen_mdp->add_option("--num-states", num_states);
    gen_mdp->add_option("--num-actions", num_actions);
    gen_mdp->add_option("--branching", branching);
    gen_mdp->add_option("--num-left", num_left);
    gen_mdp->add_option("--num-right", num_right);
    gen_mdp->add_option("--reward-left", reward_left);
    gen_mdp->add_option("--reward-right", reward_right);
    gen_mdp->add_option("--reward-trap", reward_trap);
    gen_mdp->add_option("--rows", rows);
    gen_mdp->add_option("--cols", cols);
    gen_mdp->add_option("--goal-row", goal_row);
    gen_mdp->add_option("--goal-col", goal_col);
    gen_mdp->add_option("--goal-reward", goal_reward);
    gen_mdp->add_option("--step-cost", step_cost);
    gen_mdp->add_option("--slip", slip);
    gen_mdp->add_option("--discount", discount);
    gen_mdp->add_option("--seed", seed);
    gen_mdp->add_option("--out", out, "Output path (stdout when omitted)");

    // gen-dataset
    auto* gen_data = app.add_subcommand("gen-dataset", "Generate an offline dataset");
    std::string mdp_path, behavior = "uniform", mode = "trajectory", data_out;
    int episodes = 100, horizon = 10, samples = 1000;
    double p_left = 0.1, p_right = 0.45, p_trap = 0.45;
    std::uint64_t data_seed = 1;
    gen_data->add_option("--mdp", mdp_path, "MDP JSON path")->required();
    gen_data->add_option("--behavior", behavior, "uniform | chain | trap_chain");
    gen_data->add_option("--mode", mode, "trajectory | discounted | iid");
    gen_data->add_option("--episodes", episodes);
    gen_data->add_option("--horizon", horizon);
    gen_data->add_option("--samples", samples);
    gen_data->add_option("--p-left", p_left);
    gen_data->add_option("--p-right", p_right);
    gen_data->add_option("--p-trap", p_trap);
    gen_data->add_option("--num-left", num_left);
    gen_data->add_option("--num-right", num_right);
    gen_data->add_option("--seed", data_seed);
    gen_data->add_option("--out", data_out, "Output path (.csv or .json)");

    // run / validate
    std::string config_path, out_dir_override;
    int seeds_override = 0, jobs_override = 0;
    auto* run = app.add_subcommand("run", "Run an experiment config");
    run->add_option("--config", config_path, "Config JSON path")->required();
    run->add_option("--out", out_dir_override, "Override output directory");
    run->add_option("--seeds", seeds_override, "Override seed sweep size");
    run->add_option("--jobs", jobs_override, "Worker threads");

    auto* validate = app.add_subcommand("validate", "Run only the config's validations");
    validate->add_option("--config", config_path, "Config JSON path")->required();
    validate->add_option("--out", out_dir_override, "Override output directory");
    validate->add_option("--seeds", seeds_override, "Override seed sweep size");
    validate->add_option("--jobs", jobs_override, "Worker threads");

    // inspect
    auto* inspect = app.add_subcommand("inspect", "Dump zeta/omega/bounds for one instance");
    std::string inspect_mdp, inspect_dataset, inspect_out = "inspect_out";
    double inspect_alpha = 0.5;
    inspect->add_option("--mdp", inspect_mdp, "MDP JSON path")->required();
    inspect->add_option("--dataset", inspect_dataset, "Dataset CSV/JSON path")->required();
    inspect->add_option("--alpha", inspect_alpha);
    inspect->add_option("--out", inspect_out, "Output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen_mdp->parsed()) {
            Json params{{"num_states", num_states}, {"num_actions", num_actions},
                        {"branching", branching},   {"num_left", num_left},
                        {"num_right", num_right},   {"reward_left", reward_left},
                        {"reward_right", reward_right}, {"reward_trap", reward_trap},
                        {"rows", rows},             {"cols", cols},
                        {"goal_row", goal_row},     {"goal_col", goal_col},
                        {"goal_reward", goal_reward}, {"step_cost", step_cost},
                        {"slip", slip},             {"discount", discount},
                        {"seed", seed}};
            return cmd_gen_mdp(kind, params, out);
        }
        if (gen_data->parsed())
            return cmd_gen_dataset(mdp_path, behavior, mode, episodes, horizon, samples,
                                   p_left, p_right, p_trap, num_left, num_right, data_seed,
                                   data_out);
        if (run->parsed()) {
            const ExperimentConfig cfg =
                load_config(config_path, out_dir_override, seeds_override, jobs_override);
            return run_experiment(cfg);
        }
        if (validate->parsed()) {
            ExperimentConfig cfg =
                load_config(config_path, out_dir_override, seeds_override, jobs_override);
            cfg.algorithms.clear();
            if (cfg.validations.empty())
                throw std::invalid_argument("config.validations: empty for `validate`");
            return run_experiment(cfg);
        }
        if (inspect->parsed())
            return cmd_inspect(inspect_mdp, inspect_dataset, inspect_alpha, inspect_out);
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
