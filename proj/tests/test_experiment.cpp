#include <doctest.h>

#include <filesystem>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "sapp/experiment.hpp"

using namespace sapp;
namespace fs = std::filesystem;

namespace {

Json tiny_config(const std::string& out_dir) {
    return Json{
        {"environment",
         {{"kind", "chain"}, {"num_left", 1}, {"num_right", 1}, {"reward_left", 1.0},
          {"reward_right", 0.0}, {"discount", 0.9}}},
        {"dataset",
         {{"mode", "trajectory"}, {"behavior", "chain"}, {"p_left", 0.2},
          {"episodes", 60}, {"horizon", 6}}},
        {"algorithms",
         Json::array({Json{{"name", "cql"}, {"weight_mode", "constant_one"},
                           {"alpha", 0.2}, {"steps", 10}, {"g_q", 4}},
                      Json{{"name", "sa-cql"}, {"weight_mode", "exact_ratio"},
                           {"alpha", 0.2}, {"steps", 10}, {"g_q", 4}}})},
        {"validations", Json::array()},
        {"output_dir", out_dir},
        {"seeds", 3},
        {"root_seed", 11},
        {"jobs", 2}};
}

}  // namespace

TEST_CASE("config: parse/serialize round-trip is canonical") {
    const Json j = tiny_config("rt_out");
    const ExperimentConfig once = parse_config(j);
    const Json canonical = config_to_json(once);
    const ExperimentConfig twice = parse_config(canonical);
    CHECK(config_to_json(twice) == canonical);
}

TEST_CASE("config: schema violations carry field diagnostics") {
    Json no_env = tiny_config("x");
    no_env.erase("environment");
    CHECK_THROWS_WITH_AS(parse_config(no_env), doctest::Contains("environment"),
                         std::invalid_argument);

    Json empty = tiny_config("x");
    empty["algorithms"] = Json::array();
    empty["validations"] = Json::array();
    CHECK_THROWS_WITH_AS(parse_config(empty),
                         doctest::Contains("at least one algorithm or validation"),
                         std::invalid_argument);

    Json bad_mode = tiny_config("x");
    bad_mode["algorithms"][0]["weight_mode"] = "nope";
    CHECK_THROWS_WITH_AS(parse_config(bad_mode), doctest::Contains("weight_mode"),
                         std::invalid_argument);

    Json bad_val = tiny_config("x");
    bad_val["validations"] = Json::array({Json{{"kind", "theorem99"}}});
    CHECK_THROWS_WITH_AS(parse_config(bad_val), doctest::Contains("validation.kind"),
                         std::invalid_argument);
}

TEST_CASE("run_experiment: artifacts, ranking, self-check and reproducibility") {
    const std::string out1 = "test_out/run_a";
    const std::string out2 = "test_out/run_b";
    fs::remove_all("test_out");

    ExperimentConfig cfg = parse_config(tiny_config(out1));
    REQUIRE(run_experiment(cfg) == 0);
    CHECK(fs::exists(fs::path(out1) / "summary.json"));
    CHECK(fs::exists(fs::path(out1) / "cql" / "seed_0.csv"));
    CHECK(fs::exists(fs::path(out1) / "sa-cql" / "seed_2.csv"));

    const Json summary = Json::parse(read_file((fs::path(out1) / "summary.json").string()));
    CHECK(summary.at("self_check").get<bool>());
    CHECK(summary.at("ranking").size() == 2);
    CHECK(summary.at("failures").empty());

    // identical config, different directory: outputs match byte for byte
    ExperimentConfig cfg2 = parse_config(tiny_config(out2));
    REQUIRE(run_experiment(cfg2) == 0);
    for (const std::string rel : {"cql/seed_0.csv", "cql/seed_1.csv", "sa-cql/seed_2.csv"}) {
        CHECK(read_file((fs::path(out1) / rel).string()) ==
              read_file((fs::path(out2) / rel).string()));
    }

    // single-threaded run reproduces the parallel outputs
    ExperimentConfig serial = parse_config(tiny_config("test_out/run_c"));
    serial.jobs = 1;
    REQUIRE(run_experiment(serial) == 0);
    CHECK(read_file((fs::path(out1) / "cql" / "seed_1.csv").string()) ==
          read_file("test_out/run_c/cql/seed_1.csv"));
    fs::remove_all("test_out");
}

TEST_CASE("run_experiment: validation-only config writes the batch CSV") {
    const std::string out = "test_out/validate_only";
    fs::remove_all(out);
    Json j = tiny_config(out);
    j["algorithms"] = Json::array();
    j["validations"] = Json::array(
        {Json{{"kind", "lemma1"}, {"seeds", 6}, {"episodes", 30}, {"alpha", 0.4}}});
    const ExperimentConfig cfg = parse_config(j);
    REQUIRE(run_experiment(cfg) == 0);
    const std::string csv = read_file((fs::path(out) / "validation_lemma1.csv").string());
    CHECK(csv.rfind("seed,condition,conclusion,ub_dis,ub_sa,subopt\n", 0) == 0);
    const Json summary = Json::parse(read_file((fs::path(out) / "summary.json").string()));
    CHECK(summary.at("validations")[0].at("violation_rate_dis").get<double>() <= 0.2);
    fs::remove_all("test_out");
}

TEST_CASE("parallel_for propagates the first exception") {
    CHECK_THROWS_AS(parallel_for(8, 4,
                                 [](int i) {
                                     if (i == 3) throw std::runtime_error("boom");
                                 }),
                    std::runtime_error);
}

TEST_CASE("environment specs build every supported kind") {
    for (const std::string kind : {"chain", "trap_chain", "garnet", "gridworld"}) {
        EnvironmentSpec env;
        env.kind = kind;
        env.params = Json{{"kind", kind}};
        const TabularMdp mdp = env.build();
        CHECK(mdp.num_states > 0);
        mdp.validate();
    }
    EnvironmentSpec bad;
    bad.kind = "mystery";
    bad.params = Json::object();
    CHECK_THROWS_AS(bad.build(), std::invalid_argument);
}

TEST_CASE("mdp JSON round-trip preserves the model exactly") {
    const TabularMdp mdp = build_garnet(5, 3, 3, 99, 0.9);
    const TabularMdp back = mdp_from_json(mdp_to_json(mdp));
    CHECK(back.num_states == mdp.num_states);
    CHECK(back.num_actions == mdp.num_actions);
    CHECK(back.discount == mdp.discount);
    CHECK((back.transition - mdp.transition).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.reward - mdp.reward).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.initial_dist - mdp.initial_dist).cwiseAbs().maxCoeff() == 0.0);

    Json bad = mdp_to_json(mdp);
    bad["reward"][0] = 2.0;
    CHECK_THROWS_AS(mdp_from_json(bad), std::invalid_argument);
}

TEST_CASE("dice and bound-report exports carry the documented columns") {
    const TabularMdp mdp = build_garnet(3, 2, 2, 5, 0.9);
    const PolicyTable pi = PolicyTable::uniform(3, 2);
    const OfflineDataset data = generate_dataset(mdp, pi, 50, 8, 3);
    const EmpiricalModel m = build_empirical_model(data, 3, 2);
    DualDiceState state;
    state = solve_dualdice(data, pi, mdp.discount, mdp.initial_dist, state);

    const std::string zeta = zeta_to_csv(state, 3, 2);
    CHECK(zeta.rfind("s,a,zeta\n", 0) == 0);
    CHECK(std::count(zeta.begin(), zeta.end(), '\n') == 7);  // header + 6 rows

    const std::string omega = omega_to_csv(omega_state_weights(state, m, pi));
    CHECK(omega.rfind("s,omega\n", 0) == 0);

    PolicyClass cls;
    TheoremConstants constants;
    constants.policy_class_size = cls.size(3, 2);
    PessimismSpec spec;
    spec.alpha = 0.3;
    const BoundReport rep = subopt_upper_bound(mdp, m, cls, spec, constants);
    const Json j = bound_report_to_json(rep);
    CHECK(j.at("penalty_kind") == "Dis");
    CHECK(j.at("total_ub").get<double>() ==
          doctest::Approx(rep.inf_term + rep.sup_term));

    TrainConfig tc;
    tc.steps = 5;
    tc.weight_mode = WeightMode::ConstantOne;
    const TrainTrace trace = train(mdp, data, tc);
    const std::string csv = trace_to_csv(trace);
    CHECK(csv.rfind("iter,true_return,est_return,omega_min,omega_mean,omega_max\n", 0) == 0);
    const Json tj = trace_to_json(trace);
    CHECK(tj.at("checkpoints").size() == trace.checkpoints.size());
}

TEST_CASE("harness ranking reproduces the ablation ordering on the trap chain") {
    const std::string out = "test_out/ranking";
    fs::remove_all("test_out");
    Json j{{"environment",
            {{"kind", "trap_chain"}, {"num_left", 1}, {"num_right", 1},
             {"reward_left", 1.0}, {"reward_right", 0.3}, {"reward_trap", -1.0},
             {"discount", 0.9}}},
           {"dataset",
            {{"mode", "trajectory"}, {"behavior", "trap_chain"}, {"p_left", 0.1},
             {"p_right", 0.5}, {"p_trap", 0.4}, {"episodes", 400}, {"horizon", 5}}},
           {"algorithms",
            Json::array(
                {Json{{"name", "sa-cql"}, {"weight_mode", "exact_ratio"}, {"alpha", 0.20},
                      {"temperature", 0.05}, {"steps", 40}, {"g_q", 10}},
                 Json{{"name", "cql"}, {"weight_mode", "constant_one"}, {"alpha", 0.20},
                      {"temperature", 0.05}, {"steps", 40}, {"g_q", 10}},
                 Json{{"name", "s-sa-cql"}, {"weight_mode", "random_uniform"},
                      {"alpha", 0.20}, {"temperature", 0.05}, {"steps", 40},
                      {"g_q", 10}}})},
           {"output_dir", out},
           {"seeds", 5},
           {"root_seed", 4242}};
    REQUIRE(run_experiment(parse_config(j)) == 0);
    const Json summary = Json::parse(read_file((fs::path(out) / "summary.json").string()));
    const auto ranking = summary.at("ranking");
    CHECK(ranking[0] == "sa-cql");
    CHECK(ranking[1] == "cql");
    CHECK(ranking[2] == "s-sa-cql");
    fs::remove_all("test_out");
}
