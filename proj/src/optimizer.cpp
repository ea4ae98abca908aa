#include <cmath>

#include "birnn/error.hpp"
#include "birnn/training.hpp"

namespace birnn {

namespace {

constexpr TermWeights kDataOnly{1.0, 0.0, 0.0, 0.0, 0.0};

Subsets empty_subsets(const LossProblem& problem)
{
    return Subsets(problem.episodes());
}

Subsets subsets_for(const LossProblem& problem, double xi, Rng& rng)
{
    return xi > 0.0 ? problem.draw_subsets(xi, rng) : empty_subsets(problem);
}

} // namespace

double data_loss(const GruParams& params, std::span<const Episode> episodes, const Standardizer& s)
{
    const LossProblem problem(episodes, s);
    return evaluate_loss(params, problem, kDataOnly, empty_subsets(problem), false).components.data;
}

double biological_loss(const GruParams& params, const ModelParams& p, std::span<const Episode> episodes,
                       const Standardizer& s)
{
    const LossProblem problem(episodes, s, p);
    return evaluate_loss(params, problem, TermWeights{0.0, 1.0, 0.0, 0.0, 0.0}, empty_subsets(problem), false)
        .components.bio;
}

double auxiliary_loss(const GruParams& params, const ModelParams& p, std::span<const Episode> episodes,
                      const Standardizer& s, double xi, Rng& rng)
{
    LossWeights w{0.0, 0.0, 1.0, xi};
    const LossProblem problem(episodes, s, p);
    const TermWeights tw = TermWeights::from(w);
    return evaluate_loss(params, problem, tw, problem.draw_subsets(xi, rng), false).components.aux();
}

AugmentedLoss augmented_loss(const GruParams& params, const ModelParams& p, std::span<const Episode> episodes,
                             const Standardizer& s, const LossWeights& weights, Rng& rng)
{
    const TermWeights tw = TermWeights::from(weights);
    const LossProblem problem(episodes, s, p);
    const auto r = evaluate_loss(params, problem, tw, subsets_for(problem, weights.xi, rng), false);
    AugmentedLoss out;
    out.components = {r.components.data, r.components.bio, r.components.aux()};
    out.total = weights.alpha_D * out.components[0] + weights.alpha_B * out.components[1] +
                weights.alpha_A * out.components[2];
    return out;
}

GruParams gradient(const GruParams& params, const ModelParams& p, std::span<const Episode> episodes,
                   const Standardizer& s, const LossWeights& weights, Rng& rng)
{
    const TermWeights tw = TermWeights::from(weights);
    const LossProblem problem(episodes, s, p);
    return evaluate_loss(params, problem, tw, subsets_for(problem, weights.xi, rng), true).gradient;
}

void TrainConfig::validate() const
{
    if (!(eta > 0))
        throw Error(ErrorKind::InvalidConfig, "eta must be positive");
    if (kappa_max < 1 || kappa_val < 1 || kappa_val > kappa_max)
        throw Error(ErrorKind::InvalidConfig, "need 1 <= kappa_val <= kappa_max");
    if (rho_val < 1)
        throw Error(ErrorKind::InvalidConfig, "rho_val must be >= 1");
    if (n_hu < 1)
        throw Error(ErrorKind::InvalidConfig, "n_hu must be >= 1");
    if (!(clip_norm > 0))
        throw Error(ErrorKind::InvalidConfig, "clip_norm must be positive");
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && adam_eps > 0))
        throw Error(ErrorKind::InvalidConfig, "invalid Adam hyperparameters");
    weights.validate();
}

TrainResult optimize(const TrainConfig& config, GruParams init, const Objective& objective)
{
    config.validate();
    init.validate();

    TrainResult res;
    GruParams theta = std::move(init);
    Eigen::VectorXd x = theta.flatten();
    Eigen::VectorXd m = Eigen::VectorXd::Zero(x.size());
    Eigen::VectorXd v = Eigen::VectorXd::Zero(x.size());
    double b1_pow = 1.0, b2_pow = 1.0;
    int failed_checks = 0;
    bool have_best = false;
    res.stop_reason = "max-iterations";

    for (int it = 1; it <= config.kappa_max; ++it) {
        LossResult lr;
        bool finite = true;
        try {
            lr = objective.loss_and_gradient(theta);
            finite = std::isfinite(lr.total);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::NonFiniteGradient)
                throw;
            finite = false;
        }
        if (!finite) {
            res.stop_reason = "diverged";
            break;
        }

        Eigen::VectorXd g = lr.gradient.flatten();
        HistoryRow row;
        row.iter = it;
        row.loss = lr.total;
        row.L_D = lr.components.data;
        row.L_B = lr.components.bio;
        row.L_A = lr.components.aux();
        const double norm = g.norm();
        if (norm > config.clip_norm) {
            g *= config.clip_norm / norm;
            row.clipped = true;
        }

        b1_pow *= config.beta1;
        b2_pow *= config.beta2;
        m = config.beta1 * m + (1.0 - config.beta1) * g;
        v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseProduct(g);
        const Eigen::ArrayXd m_hat = m.array() / (1.0 - b1_pow);
        const Eigen::ArrayXd v_hat = v.array() / (1.0 - b2_pow);
        const Eigen::VectorXd x_prev = x;
        x.array() -= config.eta * m_hat / (v_hat.sqrt() + config.adam_eps);
        theta.unflatten(x);

        bool stop = false;
        if (it % config.kappa_val == 0) {
            const double val = objective.validation_mse(theta);
            row.val_mse = val;
            if (!std::isfinite(val)) {
                theta.unflatten(x_prev);
                res.history.push_back(row);
                res.stop_reason = "diverged";
                break;
            }
            if (!have_best || val < res.best_val_mse) {
                res.best = theta;
                res.best_val_mse = val;
                res.best_iteration = it;
                have_best = true;
                failed_checks = 0;
            } else if (++failed_checks >= config.rho_val) {
                res.stop_reason = "patience";
                stop = true;
            }
        }
        res.history.push_back(row);
        if (stop)
            break;
    }
    if (!have_best) {
        // Diverged before the first validation check: keep the last finite parameters.
        res.best = theta;
        res.best_iteration = 0;
    }
    return res;
}

TrainResult train(const TrainConfig& config, std::span<const Episode> train_eps, std::span<const Episode> val_eps,
                  const ModelParams& p)
{
    config.validate();
    if (train_eps.empty() || val_eps.empty())
        throw Error(ErrorKind::EmptyInput, "training and validation sets must be non-empty");

    const Standardizer standardizer = fit_standardizer(train_eps);
    const LossProblem train_problem(train_eps, standardizer, p);
    const LossProblem val_problem(val_eps, standardizer);
    const TermWeights weights = TermWeights::from(config.weights);
    Rng subset_rng(derive_seed(config.seed, "subsets"));

    Objective objective;
    objective.loss_and_gradient = [&](const GruParams& theta) {
        return evaluate_loss(theta, train_problem, weights, subsets_for(train_problem, config.weights.xi, subset_rng),
                             true);
    };
    objective.validation_mse = [&](const GruParams& theta) {
        return evaluate_loss(theta, val_problem, kDataOnly, empty_subsets(val_problem), false).components.data;
    };

    TrainResult res = optimize(config, init_params(config.n_hu, config.seed), objective);
    res.standardizer = standardizer;
    return res;
}

} // namespace birnn

namespace birnn {

Eigen::MatrixXd BirnnModel::predict(std::span<const ModelInput> inputs) const
{
    Eigen::MatrixXd Y = rollout(params, standardizer.inputs(inputs));
    for (Eigen::Index k = 0; k < Y.cols(); ++k)
        Y.col(k) = standardizer.physical(Y.col(k));
    return Y;
}

} // namespace birnn
