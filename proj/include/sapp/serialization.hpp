#pragma once

#include <string>

#include <nlohmann/json_fwd.hpp>

#include "sapp/bounds.hpp"
#include "sapp/dice.hpp"
#include "sapp/offline_data.hpp"
#include "sapp/sacql.hpp"

namespace sapp {

using Json = nlohmann::json;

// ---- TabularMdp <-> JSON ({num_states, num_actions, transition (row-major),
// reward, discount, initial_dist}) ----
Json mdp_to_json(const TabularMdp& mdp);
TabularMdp mdp_from_json(const Json& j);

// ---- OfflineDataset <-> CSV ("s,a,r,s_next,is_initial") and JSON ----
std::string dataset_to_csv(const OfflineDataset& dataset);
OfflineDataset dataset_from_csv(const std::string& text);
Json dataset_to_json(const OfflineDataset& dataset);
OfflineDataset dataset_from_json(const Json& j);

// ---- DualDICE dumps ----
std::string zeta_to_csv(const DualDiceState& state, int num_states, int num_actions);
std::string omega_to_csv(const Vec& omega);

// ---- BoundReport ----
Json bound_report_to_json(const BoundReport& report);

// ---- TrainTrace ----
std::string trace_to_csv(const TrainTrace& trace);
Json trace_to_json(const TrainTrace& trace);

// ---- file helpers ----
std::string read_file(const std::string& path);
/// Writes via a temporary file and rename so concurrent writers never leave a
/// torn file.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace sapp
