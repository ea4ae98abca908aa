#include "birnn/training.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>

#include "birnn/error.hpp"

namespace birnn {

Episode make_episode(std::vector<ModelInput> inputs, std::vector<double> glucose_meas, const ModelParams& p)
{
    if (inputs.size() != glucose_meas.size())
        throw Error(ErrorKind::ShapeMismatch, "episode inputs and glucose differ in length");
    if (inputs.empty())
        throw Error(ErrorKind::EmptyInput, "empty episode");
    Episode ep;
    ep.y0_ref = equilibrium_state(p);
    const LinearModel model = build_linear_model(p, 1.0);
    ep.aux_states.resize(4, static_cast<Eigen::Index>(inputs.size()));
    State y = ep.y0_ref;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        ep.aux_states.col(static_cast<Eigen::Index>(k)) = y.tail<4>();
        y = model.step(y, inputs[k]);
    }
    ep.inputs = std::move(inputs);
    ep.glucose_meas = std::move(glucose_meas);
    return ep;
}

Eigen::MatrixXd Standardizer::inputs(std::span<const ModelInput> in) const
{
    Eigen::MatrixXd out(2, static_cast<Eigen::Index>(in.size()));
    for (std::size_t k = 0; k < in.size(); ++k) {
        out(0, static_cast<Eigen::Index>(k)) = apply(kChannelU, in[k].u);
        out(1, static_cast<Eigen::Index>(k)) = apply(kChannelR, in[k].r);
    }
    return out;
}

State Standardizer::state(const State& physical) const
{
    State s;
    for (int j = 0; j < kStates; ++j)
        s(j) = apply(kChannelY1 + j, physical(j));
    return s;
}

State Standardizer::physical(const State& standardized) const
{
    State s;
    for (int j = 0; j < kStates; ++j)
        s(j) = invert(kChannelY1 + j, standardized(j));
    return s;
}

Standardizer fit_standardizer(std::span<const Episode> train)
{
    if (train.empty())
        throw Error(ErrorKind::EmptyInput, "cannot fit a standardizer without training data");
    std::array<double, kChannels> sum{}, sq{};
    double count = 0;
    auto channels = [](const Episode& ep, std::size_t k) {
        const auto col = static_cast<Eigen::Index>(k);
        return std::array<double, kChannels>{ep.inputs[k].u, ep.inputs[k].r, ep.glucose_meas[k],
                                             ep.aux_states(0, col), ep.aux_states(1, col),
                                             ep.aux_states(2, col), ep.aux_states(3, col)};
    };
    for (const auto& ep : train) {
        for (std::size_t k = 0; k < ep.size(); ++k) {
            const auto v = channels(ep, k);
            for (int c = 0; c < kChannels; ++c)
                sum[c] += v[c];
        }
        count += static_cast<double>(ep.size());
    }
    if (count == 0)
        throw Error(ErrorKind::EmptyInput, "training episodes are empty");
    Standardizer s;
    for (int c = 0; c < kChannels; ++c)
        s.mean[c] = sum[c] / count;
    for (const auto& ep : train) {
        for (std::size_t k = 0; k < ep.size(); ++k) {
            const auto v = channels(ep, k);
            for (int c = 0; c < kChannels; ++c)
                sq[c] += (v[c] - s.mean[c]) * (v[c] - s.mean[c]);
        }
    }
    static constexpr const char* kNames[kChannels] = {"u", "r", "y1", "y2", "y3", "y4", "y5"};
    for (int c = 0; c < kChannels; ++c) {
        s.std[c] = std::sqrt(sq[c] / count);
        if (s.std[c] < Standardizer::kStdFloor) {
            std::cerr << "warning: channel " << kNames[c] << " is constant; std floored at "
                      << Standardizer::kStdFloor << '\n';
            s.std[c] = Standardizer::kStdFloor;
        }
    }
    return s;
}

void LossWeights::validate() const
{
    if (!(alpha_D >= 0 && alpha_B >= 0 && alpha_A >= 0))
        throw Error(ErrorKind::InvalidConfig, "loss weights must be non-negative");
    if (!(alpha_D > 0 || alpha_B > 0 || alpha_A > 0))
        throw Error(ErrorKind::InvalidConfig, "at least one loss weight must be positive");
    if (!(xi >= 0 && xi <= 1))
        throw Error(ErrorKind::InvalidConfig, "xi must lie in [0, 1]");
    if (alpha_A > 0 && xi == 0)
        throw Error(ErrorKind::InvalidConfig, "xi = 0 leaves the auxiliary subset empty");
}

TermWeights TermWeights::from(const LossWeights& w)
{
    w.validate();
    return {w.alpha_D, w.alpha_B, w.alpha_A / 3.0, w.alpha_A / 3.0, w.alpha_A / 3.0};
}

LossProblem::LossProblem(std::span<const Episode> episodes, const Standardizer& standardizer)
    : standardizer_(standardizer)
{
    if (episodes.empty())
        throw Error(ErrorKind::EmptyInput, "loss requires at least one episode");
    for (const auto& ep : episodes) {
        if (ep.size() == 0 || ep.glucose_meas.size() != ep.size() ||
            static_cast<std::size_t>(ep.aux_states.cols()) != ep.size())
            throw Error(ErrorKind::ShapeMismatch, "episode sequences must be non-empty and of equal length");
        Item it;
        it.inputs = standardizer.inputs(ep.inputs);
        it.raw = ep.inputs;
        it.glucose.resize(static_cast<Eigen::Index>(ep.size()));
        it.aux.resize(4, static_cast<Eigen::Index>(ep.size()));
        for (std::size_t k = 0; k < ep.size(); ++k) {
            const auto col = static_cast<Eigen::Index>(k);
            it.glucose(col) = standardizer.apply(kChannelY1, ep.glucose_meas[k]);
            for (int j = 0; j < 4; ++j)
                it.aux(j, col) = standardizer.apply(kChannelY1 + 1 + j, ep.aux_states(j, col));
        }
        it.y0 = standardizer.state(ep.y0_ref);
        items_.push_back(std::move(it));
    }
}

LossProblem::LossProblem(std::span<const Episode> episodes, const Standardizer& standardizer, const ModelParams& p)
    : LossProblem(episodes, standardizer)
{
    model_ = build_linear_model(p, 1.0);
    has_model_ = true;
}

Subsets LossProblem::draw_subsets(double xi, Rng& rng) const
{
    if (!(xi >= 0 && xi <= 1))
        throw Error(ErrorKind::InvalidConfig, "xi must lie in [0, 1]");
    Subsets out;
    out.reserve(items_.size());
    for (std::size_t e = 0; e < items_.size(); ++e) {
        const std::size_t n = length(e);
        const auto k = static_cast<std::size_t>(std::ceil(xi * static_cast<double>(n)));
        out.push_back(rng.sample_without_replacement(n, std::min(k, n)));
    }
    return out;
}

Subsets LossProblem::full_subsets() const
{
    Subsets out;
    for (std::size_t e = 0; e < items_.size(); ++e) {
        std::vector<std::size_t> all(length(e));
        for (std::size_t k = 0; k < all.size(); ++k)
            all[k] = k;
        out.push_back(std::move(all));
    }
    return out;
}

LossComponents LossProblem::accumulate(std::size_t e, const Eigen::MatrixXd& Y,
                                       const std::vector<std::size_t>& subset, const TermWeights& w,
                                       Eigen::MatrixXd* dY) const
{
    const Item& it = items_[e];
    const Eigen::Index N = it.inputs.cols();
    if (Y.rows() != kStates || Y.cols() != N)
        throw Error(ErrorKind::ShapeMismatch, "predictions must be 5 x N");
    if (dY && (dY->rows() != kStates || dY->cols() != N))
        throw Error(ErrorKind::ShapeMismatch, "output gradient must be 5 x N");
    const bool model_terms = w.bio != 0.0 || w.state != 0.0 || w.zero != 0.0 || w.positive != 0.0;
    if (model_terms && !has_model_)
        throw Error(ErrorKind::InvalidConfig, "biological/auxiliary terms need model parameters");

    const double inv_episodes = 1.0 / static_cast<double>(items_.size());
    const double invN = 1.0 / static_cast<double>(N);
    const auto& s = standardizer_;
    LossComponents c;

    for (Eigen::Index k = 0; k < N; ++k) {
        const double r = Y(0, k) - it.glucose(k);
        c.data += r * r;
        if (dY)
            (*dY)(0, k) += w.data * inv_episodes * 2.0 * invN * r;
    }
    c.data *= invN;

    if (!has_model_)
        return c;

    State sigma;
    for (int j = 0; j < kStates; ++j)
        sigma(j) = s.std[kChannelY1 + j];

    if (N < 2) {
        if (w.bio != 0.0)
            throw Error(ErrorKind::DegenerateData, "biological loss needs episodes of at least 2 steps");
    } else {
        // Residuals in physical units, rescaled by the y-channel stds.
        const StateMatrix M = sigma.asDiagonal().inverse() * model_.A_d * sigma.asDiagonal();
        const double g = w.bio * inv_episodes * 2.0 * invN;
        State phys = s.physical(Y.col(0));
        for (Eigen::Index k = 0; k + 1 < N; ++k) {
            const State next = s.physical(Y.col(k + 1));
            const State res =
                (model_.step(phys, it.raw[static_cast<std::size_t>(k)]) - next).cwiseQuotient(sigma);
            c.bio += res.squaredNorm();
            if (dY && g != 0.0) {
                dY->col(k) += g * (M.transpose() * res);
                dY->col(k + 1) -= g * res;
            }
            phys = next;
        }
        c.bio *= invN;
    }

    const State r0 = Y.col(0) - it.y0;
    c.zero = r0.squaredNorm();
    if (dY)
        dY->col(0) += w.zero * inv_episodes * 2.0 * r0;

    if (subset.empty()) {
        if (w.state != 0.0 || w.positive != 0.0)
            throw Error(ErrorKind::InvalidConfig, "auxiliary terms need a non-empty subset");
        return c;
    }
    const double inv_sub = 1.0 / static_cast<double>(subset.size());
    for (std::size_t kk : subset) {
        if (kk >= static_cast<std::size_t>(N))
            throw Error(ErrorKind::ShapeMismatch, "subset index beyond episode length");
        const auto k = static_cast<Eigen::Index>(kk);
        for (int j = 0; j < 4; ++j) {
            const int row = j + 1;
            const double rs = Y(row, k) - it.aux(j, k);
            c.state += rs * rs;
            // max(0, -y) in physical units, divided by the channel std.
            const double phys = s.invert(kChannelY1 + row, Y(row, k));
            const double neg = phys < 0.0 ? -phys / sigma(row) : 0.0;
            c.positive += neg * neg;
            if (dY) {
                (*dY)(row, k) += w.state * inv_episodes * inv_sub * 2.0 * rs;
                if (neg > 0.0)
                    (*dY)(row, k) -= w.positive * inv_episodes * inv_sub * 2.0 * neg;
            }
        }
    }
    c.state *= inv_sub;
    c.positive *= inv_sub;
    return c;
}

namespace {

void add_scaled(LossComponents& total, const LossComponents& c, double s)
{
    total.data += s * c.data;
    total.bio += s * c.bio;
    total.state += s * c.state;
    total.zero += s * c.zero;
    total.positive += s * c.positive;
}

} // namespace

LossComponents LossProblem::components(std::span<const Eigen::MatrixXd> predictions, const Subsets& subsets) const
{
    if (predictions.size() != items_.size() || subsets.size() != items_.size())
        throw Error(ErrorKind::ShapeMismatch, "one prediction matrix and subset per episode required");
    LossComponents total;
    const double inv = 1.0 / static_cast<double>(items_.size());
    for (std::size_t e = 0; e < items_.size(); ++e)
        add_scaled(total, accumulate(e, predictions[e], subsets[e], TermWeights{}, nullptr), inv);
    return total;
}

LossResult evaluate_loss(const GruParams& params, const LossProblem& problem, const TermWeights& weights,
                         const Subsets& subsets, bool with_gradient)
{
    if (subsets.size() != problem.episodes())
        throw Error(ErrorKind::ShapeMismatch, "one subset per episode required");
    params.validate();
    LossResult result;
    if (with_gradient)
        result.gradient = GruParams::zeros(params.n_hu(), params.n_u(), params.n_y());
    GruTape tape;
    const double inv = 1.0 / static_cast<double>(problem.episodes());
    // Episodes are reduced in index order, so the result does not depend on scheduling.
    for (std::size_t e = 0; e < problem.episodes(); ++e) {
        forward(params, problem.inputs(e), tape);
        if (with_gradient) {
            Eigen::MatrixXd dY = Eigen::MatrixXd::Zero(kStates, tape.Y.cols());
            add_scaled(result.components, problem.accumulate(e, tape.Y, subsets[e], weights, &dY), inv);
            result.gradient += backward(params, problem.inputs(e), tape, dY);
        } else {
            add_scaled(result.components, problem.accumulate(e, tape.Y, subsets[e], weights, nullptr), inv);
        }
    }
    result.total = weights.combine(result.components);
    if (with_gradient) {
        const Eigen::VectorXd flat = result.gradient.flatten();
        for (Eigen::Index i = 0; i < flat.size(); ++i)
            if (!std::isfinite(flat(i)))
                throw Error(ErrorKind::NonFiniteGradient, "gradient is not finite at " + params.name_of(i));
    }
    return result;
}

} // namespace birnn
