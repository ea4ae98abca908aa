#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "birnn/compartmental_model.hpp"
#include "birnn/gru.hpp"
#include "birnn/rng.hpp"
#include "birnn/scenario.hpp"
#include "birnn/training.hpp"
#include "birnn/virtual_patient.hpp"

namespace birnn::testing {

inline ModelParams nominal() { return ModelParams::from_basal(0.005, 40.0, 3.0, 60.0, 40.0, 120.0, 0.015); }

inline ScenarioConfig one_day(std::uint64_t seed, int days = 1)
{
    ScenarioConfig c = nominal_protocols().train;
    c.days = days;
    c.seed = seed;
    return c;
}

// Identity-noise surrogate that reproduces the linear model exactly.
inline VirtualPatientConfig linear_patient(const ModelParams& p, std::uint64_t seed = 1)
{
    VirtualPatientConfig c;
    c.base_params = p;
    c.seed = seed;
    return c;
}

inline std::vector<double> glucose_of(const std::vector<State>& states)
{
    std::vector<double> g;
    for (const auto& s : states)
        g.push_back(s(0));
    return g;
}

// Short episode with a meal, a bolus and glucose that departs from the linear
// model, so every loss term is active.
inline Episode short_episode(const ModelParams& p, int n, double phase = 0.0)
{
    std::vector<ModelInput> in(static_cast<std::size_t>(n), ModelInput{p.U_b, 0.0});
    for (int k = n / 8; k < n / 2; ++k)
        in[static_cast<std::size_t>(k)].r = 3.0;
    in[static_cast<std::size_t>(n / 4)].u += 4.0;
    std::vector<double> g;
    for (int k = 0; k < n; ++k)
        g.push_back(p.G_b + 25.0 * std::sin(0.2 * k + phase));
    return make_episode(std::move(in), std::move(g), p);
}

// Standardizer that leaves values unchanged, so perfect predictions are exact.
inline Standardizer identity_standardizer()
{
    Standardizer s;
    s.mean.fill(0.0);
    s.std.fill(1.0);
    return s;
}

// Physical linear-model trajectory of an episode as a 5 x N prediction matrix.
inline Eigen::MatrixXd linear_predictions(const ModelParams& p, const Episode& ep)
{
    const LinearModel m = build_linear_model(p);
    Eigen::MatrixXd Y(5, static_cast<Eigen::Index>(ep.size()));
    State y = equilibrium_state(p);
    for (std::size_t k = 0; k < ep.size(); ++k) {
        Y.col(static_cast<Eigen::Index>(k)) = y;
        y = m.step(y, ep.inputs[k]);
    }
    return Y;
}

// Scalar re-implementation of one GRU step, element by element.
inline std::pair<std::vector<double>, std::vector<double>> scalar_gru_cell(const GruParams& p,
                                                                           const std::vector<double>& u,
                                                                           const std::vector<double>& h)
{
    const int n = p.n_hu(), nu = p.n_u(), ny = p.n_y();
    auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
    std::vector<double> r(n), z(n), c(n), hn(n), y(ny);
    for (int i = 0; i < n; ++i) {
        double ar = p.b_r(i), az = p.b_z(i), ah = p.b_h(i), rh = 0.0;
        for (int j = 0; j < nu; ++j) {
            ar += p.W_r(i, j) * u[j];
            az += p.W_z(i, j) * u[j];
            ah += p.W_h(i, j) * u[j];
        }
        for (int j = 0; j < n; ++j) {
            ar += p.R_r(i, j) * h[j];
            az += p.R_z(i, j) * h[j];
            rh += p.R_h(i, j) * h[j];
        }
        r[i] = sig(ar);
        z[i] = sig(az);
        c[i] = std::tanh(ah + r[i] * rh);
        hn[i] = (1.0 - z[i]) * c[i] + z[i] * h[i];
    }
    for (int o = 0; o < ny; ++o) {
        y[o] = p.b_y(o);
        for (int j = 0; j < n; ++j)
            y[o] += p.W_y(o, j) * hn[j];
    }
    return {hn, y};
}

inline GruParams random_gru_params(int n_hu, Rng& rng, double scale = 1.0)
{
    GruParams p = GruParams::zeros(n_hu);
    p.for_each([&](std::string_view, Eigen::Ref<Eigen::MatrixXd> m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                m(i, j) = rng.uniform(-scale, scale);
    });
    return p;
}

struct GradientCheck {
    double worst_relative = 0.0;
    std::string worst_entry;
};

// Central differences on every parameter against the BPTT gradient, with the
// subset draw held fixed. Relative error is |a - b| / max(|a|, |b|, 1e-6).
inline GradientCheck check_gradient(const GruParams& params, const LossProblem& problem, const TermWeights& w,
                                    const Subsets& subsets, double h = 1e-5)
{
    const Eigen::VectorXd analytic = evaluate_loss(params, problem, w, subsets, true).gradient.flatten();
    Eigen::VectorXd x = params.flatten();
    GruParams probe = params;
    GradientCheck out;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double keep = x(i);
        x(i) = keep + h;
        probe.unflatten(x);
        const double up = evaluate_loss(probe, problem, w, subsets, false).total;
        x(i) = keep - h;
        probe.unflatten(x);
        const double down = evaluate_loss(probe, problem, w, subsets, false).total;
        x(i) = keep;
        const double numeric = (up - down) / (2 * h);
        const double rel = std::abs(numeric - analytic(i)) /
                           std::max({std::abs(numeric), std::abs(analytic(i)), 1e-6});
        if (rel > out.worst_relative) {
            out.worst_relative = rel;
            out.worst_entry = params.name_of(i);
        }
    }
    return out;
}

} // namespace birnn::testing
