#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "birnn/compartmental_model.hpp"
#include "birnn/gru.hpp"
#include "birnn/rng.hpp"

namespace birnn {

// Channel order: u, r, y1 .. y5.
inline constexpr int kChannels = 7;
inline constexpr int kChannelU = 0;
inline constexpr int kChannelR = 1;
inline constexpr int kChannelY1 = 2;

// One training/validation/test sequence. aux_states holds y2..y5 of the
// identified linear model simulated on the same inputs (4 x N); y0_ref is the
// identified model's fasting equilibrium.
struct Episode {
    std::vector<ModelInput> inputs;
    std::vector<double> glucose_meas;
    Eigen::Matrix4Xd aux_states;
    State y0_ref;

    std::size_t size() const { return inputs.size(); }
};

// Builds an episode whose auxiliary states come from the linear model with
// the given parameters, started at its equilibrium.
Episode make_episode(std::vector<ModelInput> inputs, std::vector<double> glucose_meas, const ModelParams& p);

struct Standardizer {
    static constexpr double kStdFloor = 1e-8;

    std::array<double, kChannels> mean{};
    std::array<double, kChannels> std{};

    double apply(int channel, double value) const { return (value - mean[channel]) / std[channel]; }
    double invert(int channel, double value) const { return mean[channel] + std[channel] * value; }

    Eigen::MatrixXd inputs(std::span<const ModelInput> in) const;  // 2 x N
    State state(const State& physical) const;
    State physical(const State& standardized) const;

    bool operator==(const Standardizer&) const = default;
};

// Population mean/std per channel pooled over every training timestep.
// Constant channels get std = kStdFloor and a warning on stderr.
Standardizer fit_standardizer(std::span<const Episode> train);

struct LossWeights {
    double alpha_D = 0.5;
    double alpha_B = 0.25;
    double alpha_A = 0.25;
    double xi = 0.5;

    void validate() const;
};

// Raw loss components averaged over episodes. The auxiliary loss is
// (state + zero + positive) / 3.
struct LossComponents {
    double data = 0.0;
    double bio = 0.0;
    double state = 0.0;
    double zero = 0.0;
    double positive = 0.0;

    double aux() const { return (state + zero + positive) / 3.0; }
};

// Per-component multipliers; the augmented loss uses
// (alpha_D, alpha_B, alpha_A/3, alpha_A/3, alpha_A/3).
struct TermWeights {
    double data = 0.0;
    double bio = 0.0;
    double state = 0.0;
    double zero = 0.0;
    double positive = 0.0;

    static TermWeights from(const LossWeights& w);
    double combine(const LossComponents& c) const
    {
        return data * c.data + bio * c.bio + state * c.state + zero * c.zero + positive * c.positive;
    }
};

// Random subset of step indices per episode for the state and positivity terms.
using Subsets = std::vector<std::vector<std::size_t>>;

// Episodes pre-transformed for loss evaluation: standardized inputs and
// targets plus the discretized model of the identified parameters.
class LossProblem {
public:
    LossProblem(std::span<const Episode> episodes, const Standardizer& standardizer, const ModelParams& p);
    // Data term only; bio/aux terms are unavailable.
    LossProblem(std::span<const Episode> episodes, const Standardizer& standardizer);

    std::size_t episodes() const { return items_.size(); }
    std::size_t length(std::size_t e) const { return static_cast<std::size_t>(items_[e].inputs.cols()); }
    const Eigen::MatrixXd& inputs(std::size_t e) const { return items_[e].inputs; }
    const Standardizer& standardizer() const { return standardizer_; }
    bool has_model() const { return has_model_; }

    Subsets draw_subsets(double xi, Rng& rng) const;
    Subsets full_subsets() const;

    // Components for given standardized predictions (5 x N each).
    LossComponents components(std::span<const Eigen::MatrixXd> predictions, const Subsets& subsets) const;

    // Weighted loss of one episode's predictions, accumulating
    // d(loss)/d(predictions) into dY. Episode averaging is applied here.
    LossComponents accumulate(std::size_t e, const Eigen::MatrixXd& Y, const std::vector<std::size_t>& subset,
                              const TermWeights& w, Eigen::MatrixXd* dY) const;

private:
    struct Item {
        Eigen::MatrixXd inputs;          // standardized, 2 x N
        std::vector<ModelInput> raw;     // physical
        Eigen::VectorXd glucose;         // standardized
        Eigen::Matrix4Xd aux;            // standardized
        State y0;                        // standardized
    };

    std::vector<Item> items_;
    Standardizer standardizer_;
    LinearModel model_{};
    bool has_model_ = false;
};

struct LossResult {
    double total = 0.0;
    LossComponents components;
    GruParams gradient;  // empty unless requested
};

// Value (and optionally exact BPTT gradient) of the weighted loss for a fixed
// subset draw. Throws Error(NonFiniteGradient) naming the first offending entry.
LossResult evaluate_loss(const GruParams& params, const LossProblem& problem, const TermWeights& weights,
                         const Subsets& subsets, bool with_gradient);

double data_loss(const GruParams& params, std::span<const Episode> episodes, const Standardizer& s);
double biological_loss(const GruParams& params, const ModelParams& p, std::span<const Episode> episodes,
                       const Standardizer& s);
double auxiliary_loss(const GruParams& params, const ModelParams& p, std::span<const Episode> episodes,
                      const Standardizer& s, double xi, Rng& rng);

struct AugmentedLoss {
    double total = 0.0;
    std::array<double, 3> components{};  // L_D, L_B, L_A
};

AugmentedLoss augmented_loss(const GruParams& params, const ModelParams& p, std::span<const Episode> episodes,
                             const Standardizer& s, const LossWeights& weights, Rng& rng);
GruParams gradient(const GruParams& params, const ModelParams& p, std::span<const Episode> episodes,
                   const Standardizer& s, const LossWeights& weights, Rng& rng);

struct TrainConfig {
    double eta = 0.01;
    int kappa_max = 500;
    int kappa_val = 5;
    int rho_val = 20;
    LossWeights weights;
    std::uint64_t seed = 0;
    int n_hu = 96;
    double clip_norm = 10.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;

    void validate() const;
};

struct HistoryRow {
    int iter = 0;
    double loss = 0.0;  // weighted loss at the parameters before the update
    double L_D = 0.0;
    double L_B = 0.0;
    double L_A = 0.0;
    double val_mse = std::numeric_limits<double>::quiet_NaN();  // after the update; NaN when not checked
    bool clipped = false;
};

struct TrainResult {
    GruParams best;
    int best_iteration = 0;
    double best_val_mse = std::numeric_limits<double>::infinity();
    Standardizer standardizer;
    std::vector<HistoryRow> history;
    std::string stop_reason;  // "max-iterations", "patience" or "diverged"
};

// Adam with global-norm clipping and validation-based early stopping. The
// objective draws its own subsets and returns the loss and gradient; the
// validator returns the validation MSE.
struct Objective {
    std::function<LossResult(const GruParams&)> loss_and_gradient;
    std::function<double(const GruParams&)> validation_mse;
};

TrainResult optimize(const TrainConfig& config, GruParams init, const Objective& objective);

// Fits the standardizer on train, initializes from config.seed and runs optimize().
TrainResult train(const TrainConfig& config, std::span<const Episode> train_eps,
                  std::span<const Episode> val_eps, const ModelParams& p);

} // namespace birnn

namespace birnn {

// Trained network bundled with the transforms needed to run it on raw inputs.
struct BirnnModel {
    GruParams params;
    Standardizer standardizer;
    ModelParams model_params;  // identified parameters the network was trained against

    // Open-loop predicted states in physical units, 5 x N.
    Eigen::MatrixXd predict(std::span<const ModelInput> inputs) const;
};

} // namespace birnn
