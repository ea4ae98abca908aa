#include "birnn/virtual_patient.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "birnn/error.hpp"
#include "birnn/rng.hpp"

namespace birnn {

namespace {

constexpr double kBlowUp = 1e6;

double saturation(const VirtualPatientConfig& c, double y2)
{
    return 1.0 + c.nonlinearity_gain * y2 / c.base_params.U_b;
}

} // namespace

void VirtualPatientConfig::validate() const
{
    base_params.validate();
    if (!(circadian_amplitude >= 0 && circadian_amplitude < 1))
        throw Error(ErrorKind::InvalidConfig, "circadian_amplitude must be in [0, 1)");
    if (!(cgm_noise_std >= 0))
        throw Error(ErrorKind::InvalidConfig, "cgm_noise_std must be non-negative");
    if (!(nonlinearity_gain >= 0))
        throw Error(ErrorKind::InvalidConfig, "nonlinearity_gain must be non-negative");
    if (nonlinearity_gain > 0 && !(base_params.U_b > 0))
        throw Error(ErrorKind::InvalidConfig, "saturation requires U_b > 0");
}

double effective_p2(const VirtualPatientConfig& config, double t_min)
{
    const double day_minute = std::fmod(t_min, static_cast<double>(kMinutesPerDay));
    const double angle = 2.0 * std::numbers::pi * (day_minute - config.circadian_phase) / kMinutesPerDay;
    return config.base_params.p2 * (1.0 + config.circadian_amplitude * std::sin(angle));
}

State surrogate_equilibrium(const VirtualPatientConfig& config)
{
    const auto& p = config.base_params;
    State y = equilibrium_state(p);
    if (config.circadian_amplitude != 0.0 || config.nonlinearity_gain != 0.0)
        y(0) = (p.p0 - effective_p2(config, 0.0) * p.U_b / saturation(config, p.U_b)) / p.p1;
    return y;
}

GroundTruthTrace simulate_patient(const VirtualPatientConfig& config, std::span<const ModelInput> inputs)
{
    config.validate();
    LinearModel model = build_linear_model(config.base_params, 1.0);
    Rng noise(config.seed);

    GroundTruthTrace trace;
    trace.states.reserve(inputs.size());
    trace.measured_glucose.reserve(inputs.size());
    trace.p2_trace.reserve(inputs.size());

    State y = surrogate_equilibrium(config);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const double p2 = effective_p2(config, static_cast<double>(k) * model.T);
        trace.states.push_back(y);
        trace.p2_trace.push_back(p2);
        const double reading = config.cgm_noise_std > 0 ? y(0) + config.cgm_noise_std * noise.normal() : y(0);
        trace.measured_glucose.push_back(reading);

        model.A_d(0, 1) = model.T * (-(p2 / saturation(config, y(1))));
        y = model.step(y, inputs[k]);
        if (!y.allFinite() || y.cwiseAbs().maxCoeff() > kBlowUp) {
            std::ostringstream os;
            os << "surrogate state exceeded " << kBlowUp << " at minute " << k + 1;
            throw Error(ErrorKind::UnstableConfiguration, os.str());
        }
    }
    return trace;
}

GroundTruthTrace simulate_patient(const VirtualPatientConfig& config, const Scenario& scenario)
{
    return simulate_patient(config, std::span<const ModelInput>(scenario.inputs));
}

std::vector<VirtualPatientConfig> make_cohort(const CohortConfig& config)
{
    config.nominal.validate();
    if (config.size < 1 || !(config.spread >= 0 && config.spread < 1))
        throw Error(ErrorKind::InvalidConfig, "cohort size must be >= 1 and spread in [0, 1)");
    Rng rng(config.seed);
    std::vector<VirtualPatientConfig> cohort;
    const auto& n = config.nominal.base_params;
    for (int i = 0; i < config.size; ++i) {
        auto draw = [&](double v) { return v * rng.uniform(1.0 - config.spread, 1.0 + config.spread); };
        const double p1 = draw(n.p1), p2 = draw(n.p2), p3 = draw(n.p3), p4 = draw(n.p4), p5 = draw(n.p5);
        const double G_b = draw(n.G_b), U_b = draw(n.U_b);
        VirtualPatientConfig member = config.nominal;
        member.base_params = ModelParams::from_basal(p1, p2, p3, p4, p5, G_b, U_b);
        member.seed = derive_seed(config.seed, "cgm-noise-" + std::to_string(i));
        member.validate();
        cohort.push_back(member);
    }
    return cohort;
}

ModelParams nominal_patient_params()
{
    return ModelParams::from_basal(/*p1=*/0.005, /*p2=*/40.0, /*p3=*/3.0, /*p4=*/60.0, /*p5=*/40.0,
                                   /*G_b=*/120.0, /*U_b=*/0.015);
}

} // namespace birnn
