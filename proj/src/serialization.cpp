#include "sapp/serialization.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace sapp {

namespace {

std::string format_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

const char* penalty_kind_name(PenaltyKind kind) {
    switch (kind) {
        case PenaltyKind::Dis: return "Dis";
        case PenaltyKind::SADis: return "SA-Dis";
        case PenaltyKind::FSADis: return "f-SA-Dis";
    }
    return "?";
}

}  // namespace

Json mdp_to_json(const TabularMdp& mdp) {
    Json j;
    j["num_states"] = mdp.num_states;
    j["num_actions"] = mdp.num_actions;
    // Eigen stores column-major; emit row-major explicitly
    std::vector<double> rowmajor;
    rowmajor.reserve(mdp.transition.size());
    for (int r = 0; r < mdp.transition.rows(); ++r)
        for (int c = 0; c < mdp.transition.cols(); ++c)
            rowmajor.push_back(mdp.transition(r, c));
    j["transition"] = rowmajor;
    j["reward"] = std::vector<double>(mdp.reward.data(), mdp.reward.data() + mdp.reward.size());
    j["discount"] = mdp.discount;
    j["initial_dist"] = std::vector<double>(mdp.initial_dist.data(),
                                            mdp.initial_dist.data() + mdp.initial_dist.size());
    return j;
}

TabularMdp mdp_from_json(const Json& j) {
    TabularMdp mdp;
    mdp.num_states = j.at("num_states").get<int>();
    mdp.num_actions = j.at("num_actions").get<int>();
    mdp.discount = j.at("discount").get<double>();
    const auto trans = j.at("transition").get<std::vector<double>>();
    const auto reward = j.at("reward").get<std::vector<double>>();
    const auto rho = j.at("initial_dist").get<std::vector<double>>();
    const int rows = mdp.num_states * mdp.num_actions;
    require(static_cast<int>(trans.size()) == rows * mdp.num_states,
            "mdp_from_json: transition length mismatch");
    require(static_cast<int>(reward.size()) == rows, "mdp_from_json: reward length mismatch");
    require(static_cast<int>(rho.size()) == mdp.num_states,
            "mdp_from_json: initial_dist length mismatch");
    mdp.transition = Mat::Zero(rows, mdp.num_states);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < mdp.num_states; ++c)
            mdp.transition(r, c) = trans[r * mdp.num_states + c];
    mdp.reward = Eigen::Map<const Vec>(reward.data(), rows);
    mdp.initial_dist = Eigen::Map<const Vec>(rho.data(), mdp.num_states);
    mdp.validate();
    return mdp;
}

std::string dataset_to_csv(const OfflineDataset& dataset) {
    std::ostringstream out;
    out << "s,a,r,s_next,is_initial\n";
    for (const Transition& tr : dataset.transitions)
        out << tr.s << ',' << tr.a << ',' << format_double(tr.r) << ',' << tr.s_next << ','
            << (tr.is_initial ? 1 : 0) << '\n';
    return out.str();
}

OfflineDataset dataset_from_csv(const std::string& text) {
    OfflineDataset data;
    std::istringstream in(text);
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "dataset_from_csv: empty input");
    require(line == "s,a,r,s_next,is_initial", "dataset_from_csv: unexpected header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Transition tr;
        int initial = 0;
        std::istringstream row(line);
        char comma;
        row >> tr.s >> comma >> tr.a >> comma >> tr.r >> comma >> tr.s_next >> comma >> initial;
        require(!row.fail(), "dataset_from_csv: malformed row: " + line);
        tr.is_initial = initial != 0;
        data.transitions.push_back(tr);
    }
    return data;
}

Json dataset_to_json(const OfflineDataset& dataset) {
    Json j;
    j["source_seed"] = dataset.source_seed;
    Json rows = Json::array();
    for (const Transition& tr : dataset.transitions)
        rows.push_back({{"s", tr.s},
                        {"a", tr.a},
                        {"r", tr.r},
                        {"s_next", tr.s_next},
                        {"is_initial", tr.is_initial}});
    j["transitions"] = rows;
    return j;
}

OfflineDataset dataset_from_json(const Json& j) {
    OfflineDataset data;
    data.source_seed = j.value("source_seed", 0ull);
    for (const Json& row : j.at("transitions")) {
        Transition tr;
        tr.s = row.at("s").get<int>();
        tr.a = row.at("a").get<int>();
        tr.r = row.at("r").get<double>();
        tr.s_next = row.at("s_next").get<int>();
        tr.is_initial = row.at("is_initial").get<bool>();
        data.transitions.push_back(tr);
    }
    return data;
}

std::string zeta_to_csv(const DualDiceState& state, int num_states, int num_actions) {
    std::ostringstream out;
    out << "s,a,zeta\n";
    for (int s = 0; s < num_states; ++s)
        for (int a = 0; a < num_actions; ++a)
            out << s << ',' << a << ',' << format_double(state.zeta(s * num_actions + a))
                << '\n';
    return out.str();
}

std::string omega_to_csv(const Vec& omega) {
    std::ostringstream out;
    out << "s,omega\n";
    for (int s = 0; s < omega.size(); ++s)
        out << s << ',' << format_double(omega(s)) << '\n';
    return out.str();
}

Json bound_report_to_json(const BoundReport& report) {
    Json j;
    j["c0"] = report.c0;
    j["inf_term"] = report.inf_term;
    j["sup_term"] = report.sup_term;
    j["total_ub"] = report.total_ub;
    j["true_subopt"] = report.true_subopt;
    j["penalty_kind"] = penalty_kind_name(report.penalty_kind);
    j["optimized_objective"] = report.optimized_objective;
    auto policy_rows = [](const PolicyTable& pi) {
        std::vector<std::vector<double>> rows;
        for (int s = 0; s < pi.num_states(); ++s) {
            std::vector<double> row(pi.num_actions());
            for (int a = 0; a < pi.num_actions(); ++a) row[a] = pi.probs(s, a);
            rows.push_back(std::move(row));
        }
        return rows;
    };
    j["pi_bar_1"] = policy_rows(report.pi_bar_1);
    j["pi_bar_2"] = policy_rows(report.pi_bar_2);
    j["optimized_policy"] = policy_rows(report.optimized_policy);
    return j;
}

std::string trace_to_csv(const TrainTrace& trace) {
    std::ostringstream out;
    out << "iter,true_return,est_return,omega_min,omega_mean,omega_max\n";
    for (const TrainCheckpoint& cp : trace.checkpoints)
        out << cp.iteration << ',' << format_double(cp.true_return) << ','
            << format_double(cp.est_return) << ',' << format_double(cp.omega_min) << ','
            << format_double(cp.omega_mean) << ',' << format_double(cp.omega_max) << '\n';
    return out.str();
}

Json trace_to_json(const TrainTrace& trace) {
    Json rows = Json::array();
    for (const TrainCheckpoint& cp : trace.checkpoints)
        rows.push_back({{"iter", cp.iteration},
                        {"q_hash", cp.q_hash},
                        {"true_return", cp.true_return},
                        {"est_return", cp.est_return},
                        {"omega_min", cp.omega_min},
                        {"omega_mean", cp.omega_mean},
                        {"omega_max", cp.omega_max}});
    return Json{{"checkpoints", rows}};
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "read_file: cannot open " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(out.good(), "write_file_atomic: cannot open " + tmp.string());
        out << content;
    }
    fs::rename(tmp, target);
}

}  // namespace sapp
