#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "birnn/compartmental_model.hpp"
#include "birnn/training.hpp"

namespace birnn {

double rmse(std::span<const double> measured, std::span<const double> predicted);

struct GofResult {
    double value = 0.0;       // percent
    std::size_t counted = 0;
    std::size_t skipped = 0;  // samples with |y - mean| below the threshold
};

inline constexpr double kGofDegenerateThreshold = 1e-9;

// Goodness of fit (100/N) * sum(1 - |y - yhat| / |y - mean(y)|) over the
// non-degenerate samples.
GofResult gof_detailed(std::span<const double> measured, std::span<const double> predicted);
double gof(std::span<const double> measured, std::span<const double> predicted);

// Linear interpolation between order statistics at rank q*(n-1), q in [0, 1].
double percentile(std::vector<double> values, double q);

struct PatientTestData {
    std::string id;
    std::vector<ModelInput> inputs;
    std::vector<double> glucose_meas;
    std::vector<State> true_states;  // optional; enables the *_true trace columns
    ModelParams true_params;
};

struct ComparisonTrace {
    std::vector<double> glucose_true, glucose_birnn, glucose_linear;
    std::vector<double> iob_true, iob_birnn, iob_linear;
    std::vector<double> ra_true, ra_birnn, ra_linear;
};

struct PatientEvaluation {
    std::string id;
    double rmse_birnn = 0.0;
    double rmse_linear = 0.0;
    double gof_birnn = 0.0;
    double gof_linear = 0.0;
    std::size_t gof_skipped = 0;
    ComparisonTrace trace;
};

struct MetricSummary {
    double median = 0.0;
    double p25 = 0.0;
    double p75 = 0.0;
};

struct EvalReport {
    std::vector<PatientEvaluation> patients;
    MetricSummary rmse_birnn, rmse_linear, gof_birnn, gof_linear;
    int birnn_gof_wins = 0;  // patients where the network's GoF is strictly higher
};

// Linear-model open-loop glucose aligned with the measurements: element k is
// the state before inputs[k] acts, starting at the fasting equilibrium.
std::vector<State> linear_states(const ModelParams& p, std::span<const ModelInput> inputs);

PatientEvaluation evaluate_patient(const BirnnModel& model, const ModelParams& linear_fit,
                                   const PatientTestData& test);

EvalReport evaluate_cohort(std::span<const BirnnModel> models, std::span<const ModelParams> linear_fits,
                           std::span<const PatientTestData> test_data);

} // namespace birnn
