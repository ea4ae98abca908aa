#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "birnn/evaluation.hpp"
#include "birnn/io.hpp"
#include "birnn/scenario.hpp"
#include "birnn/training.hpp"
#include "birnn/virtual_patient.hpp"

namespace birnn {

struct ExperimentConfig {
    std::string name = "experiment";
    CohortConfig cohort;
    // Per-patient FIT therapy: basal rate = U_b, carb ratio = p2/p3. Meal
    // draws stay identical across the cohort since they share seeds.
    bool individualize_therapy = true;
    Protocols protocols;
    double ridge = 1e-6;
    RlsOptions rls;
    TrainConfig train;
    struct Paths {
        std::string data = "data";
        std::string linear = "linear";
        std::string checkpoints = "ckpts";
        std::string report = "report";
    } paths;
};

void to_json(json& j, const ExperimentConfig& c);
void from_json(const json& j, ExperimentConfig& c);

enum class Stage { Generate, Simulate, FitLinear, Train, Evaluate };

Stage parse_stage(const std::string& name);
std::string_view to_string(Stage stage);

struct PipelineResult {
    EvalReport report;
    json report_json;
    std::string config_hash;
};

// Runs every stage from `first` onward, writing artifacts under out_dir.
// Stage failures are rethrown with the stage name prefixed.
PipelineResult run_pipeline(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                            Stage first = Stage::Generate);

std::string patient_id(int index);
std::string experiment_hash(const ExperimentConfig& config);

// Scenario configs for one patient after therapy individualization.
Protocols patient_protocols(const ExperimentConfig& config, const VirtualPatientConfig& patient);

// Per-patient data directory layout: {split}_inputs.csv, {split}_trace.csv,
// {split}_events.json and patient.json, split in {train, val, test}.
MeasuredSequence load_measured(const std::filesystem::path& patient_dir, const std::string& split);
std::vector<State> load_true_states(const std::filesystem::path& patient_dir, const std::string& split);

// Reads provenance stamps and throws Error(ProvenanceMismatch) when they
// disagree, unless force is set.
void check_provenance(const std::vector<std::string>& hashes, bool force);

// Cohort evaluation over directory artifacts (ckpts/<id>.json,
// linear/<id>.json, data/<id>/test_*), writing report.json and
// traces/<id>.csv under out_dir.
PipelineResult evaluate_directories(const std::filesystem::path& ckpts, const std::filesystem::path& linear,
                                    const std::filesystem::path& data, const std::filesystem::path& out_dir,
                                    bool force);

} // namespace birnn
