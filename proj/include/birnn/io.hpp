#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "birnn/compartmental_model.hpp"
#include "birnn/evaluation.hpp"
#include "birnn/gru.hpp"
#include "birnn/scenario.hpp"
#include "birnn/training.hpp"
#include "birnn/virtual_patient.hpp"

namespace birnn {

using json = nlohmann::json;

void to_json(json& j, const ModelParams& p);
void from_json(const json& j, ModelParams& p);
void to_json(json& j, const ScenarioConfig& c);
void from_json(const json& j, ScenarioConfig& c);
void to_json(json& j, const VirtualPatientConfig& c);
void from_json(const json& j, VirtualPatientConfig& c);
void to_json(json& j, const TrainConfig& c);
void from_json(const json& j, TrainConfig& c);
void to_json(json& j, const Standardizer& s);
void from_json(const json& j, Standardizer& s);
void to_json(json& j, const GruParams& p);
void from_json(const json& j, GruParams& p);

inline constexpr const char* kCheckpointFormat = "birnn-checkpoint/1";

struct Checkpoint {
    BirnnModel model;
    TrainConfig config;
    int best_iteration = 0;
    double best_val_mse = 0.0;
    std::string stop_reason;
    std::string config_hash;
};

void to_json(json& j, const Checkpoint& c);
void from_json(const json& j, Checkpoint& c);

// Scenario event log with the draws behind every realized event.
json scenario_log(const ScenarioConfig& config, const Scenario& scenario);
json report_json(const EvalReport& report, const std::string& config_hash);

// Shortest round-trip decimal representation.
std::string format_double(double v);

// 64-bit FNV-1a of the compact JSON dump, as 16 hex digits.
std::string config_hash(const json& config);

json read_json(const std::filesystem::path& path);
// Pretty-printed with a trailing newline; parent directories are created.
void write_json(const std::filesystem::path& path, const json& j);
void write_text(const std::filesystem::path& path, const std::string& text);

// CSV tables: an optional run of '#' comment lines, one header row, numeric rows.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::vector<double> column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);
// Throws Error(Io) unless the header starts with the expected columns.
CsvTable read_csv(const std::filesystem::path& path, const std::vector<std::string>& expected_header);
std::string to_csv(const CsvTable& table, const std::string& comment = "");

// Fixed-layout files.
CsvTable scenario_csv(std::span<const ModelInput> inputs);                    // t_min,u,r
std::vector<ModelInput> inputs_from_csv(const CsvTable& table);
CsvTable trace_csv(const GroundTruthTrace& trace);                              // t_min,glucose_meas,y1..y5,p2_eff
GroundTruthTrace trace_from_csv(const CsvTable& table);
// t_min,y1,y2,y3,y4,y5,u,r,iob,ra with row k holding the state before inputs[k].
CsvTable trajectory_csv(std::span<const State> states, std::span<const ModelInput> inputs, const ModelParams& p);
CsvTable history_csv(std::span<const HistoryRow> history);                      // iter,loss,L_D,L_B,L_A,val_mse,clipped
CsvTable comparison_csv(const ComparisonTrace& trace);

} // namespace birnn
