#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "birnn/compartmental_model.hpp"
#include "birnn/scenario.hpp"

namespace birnn {

// Surrogate patient: the 5-state model with a circadian insulin-sensitivity
// profile
//   p2(t) = p2 * (1 + a * sin(2*pi*((t mod 1440) - phase) / 1440))
// and a saturating insulin action -p2(t) * y2 / (1 + gain * y2 / U_b) in place
// of the bilinear -p2 * y2 glucose drain. CGM readings add i.i.d. Gaussian
// noise to y1.
struct VirtualPatientConfig {
    ModelParams base_params;
    double circadian_amplitude = 0.0;  // fraction of p2, in [0, 1)
    double circadian_phase = 0.0;      // min
    double nonlinearity_gain = 0.0;
    double cgm_noise_std = 0.0;        // mg/dL
    std::uint64_t seed = 0;

    void validate() const;
    bool operator==(const VirtualPatientConfig&) const = default;
};

struct GroundTruthTrace {
    std::vector<State> states;            // true state at minute k, states[0] is the initial state
    std::vector<double> measured_glucose;  // states[k](0) + noise
    std::vector<double> p2_trace;          // circadian p2 in effect during minute k
};

double effective_p2(const VirtualPatientConfig& config, double t_min);

// Fasting equilibrium of the surrogate at t = 0; equals equilibrium_state()
// when the circadian amplitude and the saturation gain are zero.
State surrogate_equilibrium(const VirtualPatientConfig& config);

GroundTruthTrace simulate_patient(const VirtualPatientConfig& config, std::span<const ModelInput> inputs);
GroundTruthTrace simulate_patient(const VirtualPatientConfig& config, const Scenario& scenario);

struct CohortConfig {
    VirtualPatientConfig nominal;
    int size = 10;
    double spread = 0.2;  // uniform +/- fraction on p1..p5, G_b, U_b
    std::uint64_t seed = 0;
};

// p0 of each member is re-derived from its perturbed basal pair.
std::vector<VirtualPatientConfig> make_cohort(const CohortConfig& config);

// Reference nominal parameters for the surrogate cohort.
ModelParams nominal_patient_params();

} // namespace birnn
