#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace birnn {

inline constexpr int kStates = 5;
inline constexpr int kInputs = 2;

using State = Eigen::Matrix<double, kStates, 1>;
using StateMatrix = Eigen::Matrix<double, kStates, kStates>;
using InputMatrix = Eigen::Matrix<double, kStates, kInputs>;
using InputVector = Eigen::Matrix<double, kInputs, 1>;

// Physiological parameters of the 5-state glucose-insulin model.
//
//   p0  endogenous glucose production     [mg/(dL min)]
//   p1  glucose effectiveness             [1/min]
//   p2  insulin sensitivity               [mg/(dL U)]
//   p3  carbohydrate factor               [mg/(dL g)]
//   p4  insulin absorption time constant  [min]
//   p5  meal absorption time constant     [min]
//   G_b basal glucose                     [mg/dL]
//   U_b basal insulin rate                [U/min]
//
// The basal pair must be an equilibrium of the glucose state:
// p0 - p1*G_b - p2*U_b = 0.
struct ModelParams {
    double p0 = 0.0;
    double p1 = 0.0;
    double p2 = 0.0;
    double p3 = 0.0;
    double p4 = 0.0;
    double p5 = 0.0;
    double G_b = 0.0;
    double U_b = 0.0;

    static constexpr double kBasalTolerance = 1e-9;

    // Builds a consistent parameter set, deriving p0 from the basal pair.
    static ModelParams from_basal(double p1, double p2, double p3, double p4, double p5,
                                  double G_b, double U_b);

    double basal_residual() const { return p0 - p1 * G_b - p2 * U_b; }

    // Throws Error(InvalidParams) if any invariant is violated.
    void validate() const;

    bool operator==(const ModelParams&) const = default;
};

// Insulin u [U] and carbohydrate r [g] delivered during one sampling step.
struct ModelInput {
    double u = 0.0;
    double r = 0.0;

    InputVector vec() const { return {u, r}; }
    bool operator==(const ModelInput&) const = default;
};

struct LinearModel {
    StateMatrix A;
    InputMatrix B;
    State E;
    Eigen::Matrix<double, 1, kStates> C;

    // Forward Euler: A_d = T*A + I, B_d = T*B, E_d = T*E.
    StateMatrix A_d;
    InputMatrix B_d;
    State E_d;
    double T = 1.0;

    State step(const State& y, const ModelInput& in) const { return A_d * y + B_d * in.vec() + E_d; }
};

LinearModel build_linear_model(const ModelParams& params, double T = 1.0);

// Fasting equilibrium [G_b, U_b, U_b, 0, 0].
State equilibrium_state(const ModelParams& params);

// Discrete rollout; returns y_1..y_N for inputs u_0..u_{N-1}.
std::vector<State> simulate(const LinearModel& model, const State& y0,
                            std::span<const ModelInput> inputs);

// Insulin on board [U].
double iob(const State& y, const ModelParams& params);
// Rate of glucose appearance [mg/(dL min)].
double ra(const State& y, const ModelParams& params);

// Input sequence with the glucose measured at the same instants. glucose[k]
// is the reading taken before inputs[k] acts.
struct MeasuredSequence {
    std::vector<ModelInput> inputs;
    std::vector<double> glucose;
};

struct RlsOptions {
    // Leading window (truncated at the first carbohydrate intake) from which
    // the basal pair is read.
    std::size_t fasting_window = 60;
    double min_time_constant = 1.5;
    double max_time_constant = 1000.0;
    int max_iterations = 2000;
};

struct RlsDiagnostics {
    double cost = 0.0;
    int iterations = 0;
};

// Ridge-regularized one-step-ahead identification of p1..p5 on measured
// glucose. p0 is tied to the basal pair read from the fasting window.
ModelParams fit_rls(std::span<const MeasuredSequence> episodes, double T, double ridge,
                    const RlsOptions& options = {}, RlsDiagnostics* diagnostics = nullptr);

} // namespace birnn
