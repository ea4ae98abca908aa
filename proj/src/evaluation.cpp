#include "birnn/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "birnn/error.hpp"

namespace birnn {

namespace {

void check_pair(std::span<const double> a, std::span<const double> b)
{
    if (a.empty() || b.empty())
        throw Error(ErrorKind::EmptyInput, "metric on an empty sequence");
    if (a.size() != b.size())
        throw Error(ErrorKind::ShapeMismatch, "metric sequences differ in length");
}

MetricSummary summarize(const std::vector<double>& v)
{
    return {percentile(v, 0.5), percentile(v, 0.25), percentile(v, 0.75)};
}

} // namespace

double rmse(std::span<const double> measured, std::span<const double> predicted)
{
    check_pair(measured, predicted);
    double sum = 0.0;
    for (std::size_t k = 0; k < measured.size(); ++k) {
        const double e = measured[k] - predicted[k];
        sum += e * e;
    }
    return std::sqrt(sum / static_cast<double>(measured.size()));
}

GofResult gof_detailed(std::span<const double> measured, std::span<const double> predicted)
{
    check_pair(measured, predicted);
    double mean = 0.0;
    for (double y : measured)
        mean += y;
    mean /= static_cast<double>(measured.size());

    GofResult res;
    double sum = 0.0;
    for (std::size_t k = 0; k < measured.size(); ++k) {
        const double spread = std::abs(measured[k] - mean);
        if (spread < kGofDegenerateThreshold) {
            ++res.skipped;
            continue;
        }
        sum += 1.0 - std::abs(measured[k] - predicted[k]) / spread;
        ++res.counted;
    }
    if (res.counted == 0)
        throw Error(ErrorKind::DegenerateData, "GoF undefined for a constant measurement sequence");
    res.value = 100.0 * sum / static_cast<double>(res.counted);
    return res;
}

double gof(std::span<const double> measured, std::span<const double> predicted)
{
    return gof_detailed(measured, predicted).value;
}

double percentile(std::vector<double> values, double q)
{
    if (values.empty())
        throw Error(ErrorKind::EmptyInput, "percentile of an empty set");
    if (!(q >= 0 && q <= 1))
        throw Error(ErrorKind::InvalidConfig, "percentile rank must be in [0, 1]");
    std::sort(values.begin(), values.end());
    const double rank = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<State> linear_states(const ModelParams& p, std::span<const ModelInput> inputs)
{
    const LinearModel model = build_linear_model(p, 1.0);
    std::vector<State> out;
    out.reserve(inputs.size());
    State y = equilibrium_state(p);
    for (const auto& in : inputs) {
        out.push_back(y);
        y = model.step(y, in);
    }
    return out;
}

PatientEvaluation evaluate_patient(const BirnnModel& model, const ModelParams& linear_fit,
                                   const PatientTestData& test)
{
    const std::size_t N = test.inputs.size();
    if (N == 0 || test.glucose_meas.size() != N)
        throw Error(ErrorKind::ShapeMismatch, "test inputs and glucose must be non-empty and equal length");
    const bool have_truth = !test.true_states.empty();
    if (have_truth && test.true_states.size() != N)
        throw Error(ErrorKind::ShapeMismatch, "true states must match the test length");

    const Eigen::MatrixXd net = model.predict(test.inputs);
    const std::vector<State> lin = linear_states(linear_fit, test.inputs);

    PatientEvaluation ev;
    ev.id = test.id;
    auto& t = ev.trace;
    for (std::size_t k = 0; k < N; ++k) {
        const State yn = net.col(static_cast<Eigen::Index>(k));
        t.glucose_birnn.push_back(yn(0));
        t.glucose_linear.push_back(lin[k](0));
        t.iob_birnn.push_back(iob(yn, model.model_params));
        t.iob_linear.push_back(iob(lin[k], linear_fit));
        t.ra_birnn.push_back(ra(yn, model.model_params));
        t.ra_linear.push_back(ra(lin[k], linear_fit));
        if (have_truth) {
            t.glucose_true.push_back(test.true_states[k](0));
            t.iob_true.push_back(iob(test.true_states[k], test.true_params));
            t.ra_true.push_back(ra(test.true_states[k], test.true_params));
        }
    }
    ev.rmse_birnn = rmse(test.glucose_meas, t.glucose_birnn);
    ev.rmse_linear = rmse(test.glucose_meas, t.glucose_linear);
    const GofResult g_net = gof_detailed(test.glucose_meas, t.glucose_birnn);
    ev.gof_birnn = g_net.value;
    ev.gof_linear = gof(test.glucose_meas, t.glucose_linear);
    ev.gof_skipped = g_net.skipped;
    return ev;
}

EvalReport evaluate_cohort(std::span<const BirnnModel> models, std::span<const ModelParams> linear_fits,
                           std::span<const PatientTestData> test_data)
{
    if (models.size() != linear_fits.size() || models.size() != test_data.size())
        throw Error(ErrorKind::PatientCountMismatch, "need one checkpoint, one linear fit and one test set per patient");
    if (models.empty())
        throw Error(ErrorKind::EmptyInput, "empty cohort");
    EvalReport report;
    std::vector<double> rb, rl, gb, gl;
    for (std::size_t i = 0; i < models.size(); ++i) {
        auto ev = evaluate_patient(models[i], linear_fits[i], test_data[i]);
        rb.push_back(ev.rmse_birnn);
        rl.push_back(ev.rmse_linear);
        gb.push_back(ev.gof_birnn);
        gl.push_back(ev.gof_linear);
        if (ev.gof_birnn > ev.gof_linear)
            ++report.birnn_gof_wins;
        report.patients.push_back(std::move(ev));
    }
    report.rmse_birnn = summarize(rb);
    report.rmse_linear = summarize(rl);
    report.gof_birnn = summarize(gb);
    report.gof_linear = summarize(gl);
    return report;
}

} // namespace birnn
