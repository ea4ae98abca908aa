#include "birnn/compartmental_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "birnn/error.hpp"

namespace birnn {

ModelParams ModelParams::from_basal(double p1, double p2, double p3, double p4, double p5,
                                    double G_b, double U_b)
{
    ModelParams p;
    p.p1 = p1;
    p.p2 = p2;
    p.p3 = p3;
    p.p4 = p4;
    p.p5 = p5;
    p.G_b = G_b;
    p.U_b = U_b;
    p.p0 = p1 * G_b + p2 * U_b;
    return p;
}

void ModelParams::validate() const
{
    const std::array<double, 8> all{p0, p1, p2, p3, p4, p5, G_b, U_b};
    for (double v : all)
        if (!std::isfinite(v))
            throw Error(ErrorKind::InvalidParams, "non-finite model parameter");
    if (!(p1 > 0 && p2 > 0 && p3 > 0 && p4 > 0 && p5 > 0))
        throw Error(ErrorKind::InvalidParams, "p1..p5 must be strictly positive");
    if (p0 < 0)
        throw Error(ErrorKind::InvalidParams, "p0 must be non-negative");
    if (std::abs(basal_residual()) > kBasalTolerance) {
        std::ostringstream os;
        os << "basal pair is not an equilibrium: p0 - p1*G_b - p2*U_b = " << basal_residual();
        throw Error(ErrorKind::InvalidParams, os.str());
    }
}

LinearModel build_linear_model(const ModelParams& params, double T)
{
    params.validate();
    if (!(T > 0))
        throw Error(ErrorKind::InvalidParams, "sampling time must be positive");

    LinearModel m;
    m.T = T;
    m.A.setZero();
    m.A(0, 0) = -params.p1;
    m.A(0, 1) = -params.p2;
    m.A(0, 3) = params.p3;
    m.A(1, 1) = -1.0 / params.p4;
    m.A(1, 2) = 1.0 / params.p4;
    m.A(2, 2) = -1.0 / params.p4;
    m.A(3, 3) = -1.0 / params.p5;
    m.A(3, 4) = 1.0 / params.p5;
    m.A(4, 4) = -1.0 / params.p5;

    m.B.setZero();
    m.B(2, 0) = 1.0 / params.p4;
    m.B(4, 1) = 1.0 / params.p5;

    m.E.setZero();
    m.E(0) = params.p0;

    m.C.setZero();
    m.C(0) = 1.0;

    m.A_d = T * m.A + StateMatrix::Identity();
    m.B_d = T * m.B;
    m.E_d = T * m.E;
    return m;
}

State equilibrium_state(const ModelParams& params)
{
    params.validate();
    State y;
    y << params.G_b, params.U_b, params.U_b, 0.0, 0.0;
    return y;
}

std::vector<State> simulate(const LinearModel& model, const State& y0,
                            std::span<const ModelInput> inputs)
{
    std::vector<State> out;
    out.reserve(inputs.size());
    State y = y0;
    for (const auto& in : inputs) {
        y = model.step(y, in);
        out.push_back(y);
    }
    return out;
}

double iob(const State& y, const ModelParams& params)
{
    return params.p4 * (y(1) + y(2));
}

double ra(const State& y, const ModelParams& params)
{
    return params.p3 * y(3);
}

namespace {

struct BasalPair {
    double G_b;
    double U_b;
};

BasalPair read_basal(std::span<const MeasuredSequence> episodes, std::size_t window)
{
    double g_sum = 0.0, u_sum = 0.0;
    std::size_t count = 0;
    for (const auto& ep : episodes) {
        const std::size_t n = std::min(window, ep.inputs.size());
        for (std::size_t k = 0; k < n; ++k) {
            if (ep.inputs[k].r > 0.0)
                break;
            g_sum += ep.glucose[k];
            u_sum += ep.inputs[k].u;
            ++count;
        }
    }
    if (count == 0)
        throw Error(ErrorKind::DegenerateData, "no fasting samples before the first meal");
    return {g_sum / static_cast<double>(count), u_sum / static_cast<double>(count)};
}

// One-step regression y1[k+1] - y1[k] = T*(-p1*(y1 - G_b) - p2*(y2 - U_b) + p3*y4),
// with y2 and y4 reconstructed from the inputs for given time constants.
class OneStepProblem {
public:
    OneStepProblem(std::span<const MeasuredSequence> episodes, double T, double ridge, BasalPair basal)
        : episodes_(episodes), T_(T), ridge_(ridge), basal_(basal)
    {
        for (const auto& ep : episodes_)
            rows_ += ep.inputs.size() - 1;
    }

    std::size_t rows() const { return rows_; }

    // Residual vector (its squared norm is the ridge objective)
    // and the inner solution for (p1, p2, p3).
    Eigen::VectorXd residual(double p4, double p5, Eigen::Vector3d* theta_out = nullptr) const
    {
        Eigen::MatrixXd X(rows_, 3);
        Eigen::VectorXd d(rows_);
        std::size_t row = 0;
        for (const auto& ep : episodes_) {
            double y2 = basal_.U_b, y3 = basal_.U_b, y4 = 0.0, y5 = 0.0;
            const std::size_t n = ep.inputs.size();
            for (std::size_t k = 0; k + 1 < n; ++k) {
                X(row, 0) = -(ep.glucose[k] - basal_.G_b);
                X(row, 1) = -(y2 - basal_.U_b);
                X(row, 2) = y4;
                d(row) = (ep.glucose[k + 1] - ep.glucose[k]) / T_;
                ++row;
                const double y2n = (1.0 - T_ / p4) * y2 + (T_ / p4) * y3;
                const double y3n = (1.0 - T_ / p4) * y3 + (T_ / p4) * ep.inputs[k].u;
                const double y4n = (1.0 - T_ / p5) * y4 + (T_ / p5) * y5;
                const double y5n = (1.0 - T_ / p5) * y5 + (T_ / p5) * ep.inputs[k].r;
                y2 = y2n;
                y3 = y3n;
                y4 = y4n;
                y5 = y5n;
            }
        }
        const Eigen::Matrix3d gram = X.transpose() * X + ridge_ * Eigen::Matrix3d::Identity();
        const Eigen::Vector3d rhs = X.transpose() * d;
        const Eigen::Vector3d theta = solve_bounded(gram, rhs);
        if (theta_out)
            *theta_out = theta;

        Eigen::VectorXd r(rows_ + 3);
        r.head(rows_) = d - X * theta;
        r.tail(3) = std::sqrt(ridge_) * theta;
        return r;
    }

private:
    static constexpr double kLowerBound = 1e-9;

    // min 0.5 x'Gx - b'x subject to x >= kLowerBound, by enumerating the
    // active sets of the three bounds.
    static Eigen::Vector3d solve_bounded(const Eigen::Matrix3d& gram, const Eigen::Vector3d& rhs)
    {
        Eigen::Vector3d best = Eigen::Vector3d::Constant(kLowerBound);
        double best_obj = std::numeric_limits<double>::infinity();
        for (int mask = 0; mask < 8; ++mask) {
            std::array<int, 3> free_idx{};
            int nfree = 0;
            Eigen::Vector3d x = Eigen::Vector3d::Constant(kLowerBound);
            for (int i = 0; i < 3; ++i)
                if (!(mask & (1 << i)))
                    free_idx[nfree++] = i;
            if (nfree > 0) {
                Eigen::MatrixXd g(nfree, nfree);
                Eigen::VectorXd b(nfree);
                for (int i = 0; i < nfree; ++i) {
                    b(i) = rhs(free_idx[i]);
                    for (int j = 0; j < 3; ++j)
                        if (mask & (1 << j))
                            b(i) -= gram(free_idx[i], j) * kLowerBound;
                    for (int j = 0; j < nfree; ++j)
                        g(i, j) = gram(free_idx[i], free_idx[j]);
                }
                const Eigen::VectorXd sol = g.ldlt().solve(b);
                if (!sol.allFinite())
                    continue;
                for (int i = 0; i < nfree; ++i)
                    x(free_idx[i]) = sol(i);
            }
            if ((x.array() < kLowerBound).any())
                continue;
            const double obj = 0.5 * x.dot(gram * x) - rhs.dot(x);
            if (obj < best_obj) {
                best_obj = obj;
                best = x;
            }
        }
        return best;
    }

    std::span<const MeasuredSequence> episodes_;
    double T_;
    double ridge_;
    BasalPair basal_;
    std::size_t rows_ = 0;
};

void check_identifiable(std::span<const MeasuredSequence> episodes)
{
    bool u_varies = false, r_varies = false;
    const ModelInput first = episodes.front().inputs.front();
    for (const auto& ep : episodes) {
        for (const auto& in : ep.inputs) {
            u_varies |= in.u != first.u;
            r_varies |= in.r != first.r;
        }
    }
    if (!u_varies || !r_varies)
        throw Error(ErrorKind::DegenerateData,
                    "insulin or carbohydrate input is constant; p2/p3/p4/p5 are unidentifiable");
}

} // namespace

ModelParams fit_rls(std::span<const MeasuredSequence> episodes, double T, double ridge,
                    const RlsOptions& options, RlsDiagnostics* diagnostics)
{
    if (episodes.empty())
        throw Error(ErrorKind::DegenerateData, "no identification episodes");
    if (!(T > 0) || !(ridge >= 0))
        throw Error(ErrorKind::InvalidConfig, "fit_rls requires T > 0 and ridge >= 0");
    for (const auto& ep : episodes) {
        if (ep.inputs.size() != ep.glucose.size())
            throw Error(ErrorKind::DegenerateData, "inputs and glucose lengths differ");
        if (ep.inputs.size() < 2)
            throw Error(ErrorKind::DegenerateData, "episode shorter than two samples");
    }
    check_identifiable(episodes);

    const BasalPair basal = read_basal(episodes, options.fasting_window);
    const OneStepProblem problem(episodes, T, ridge, basal);

    const double lo = std::log(std::max(options.min_time_constant, 1.0001 * T));
    const double hi = std::log(options.max_time_constant);
    auto clamp = [&](Eigen::Vector2d x) {
        return Eigen::Vector2d(std::clamp(x(0), lo, hi), std::clamp(x(1), lo, hi));
    };
    auto residual_at = [&](const Eigen::Vector2d& x) {
        return problem.residual(std::exp(x(0)), std::exp(x(1)));
    };

    // Coarse log-spaced grid for the starting point.
    constexpr int kGrid = 16;
    Eigen::Vector2d x;
    double cost = std::numeric_limits<double>::infinity();
    for (int i = 0; i < kGrid; ++i) {
        for (int j = 0; j < kGrid; ++j) {
            const Eigen::Vector2d c(lo + (hi - lo) * i / (kGrid - 1), lo + (hi - lo) * j / (kGrid - 1));
            const double cc = residual_at(c).squaredNorm();
            if (cc < cost) {
                cost = cc;
                x = c;
            }
        }
    }

    // Projected Levenberg-Marquardt on the log time constants.
    double mu = 1e-3;
    bool converged = false;
    int it = 0;
    Eigen::VectorXd r = residual_at(x);
    for (; it < options.max_iterations && !converged; ++it) {
        constexpr double h = 1e-6;
        Eigen::MatrixXd J(r.size(), 2);
        for (int c = 0; c < 2; ++c) {
            Eigen::Vector2d xp = x;
            xp(c) += (xp(c) + h <= hi) ? h : -h;
            J.col(c) = (residual_at(xp) - r) / (xp(c) - x(c));
        }
        const Eigen::Matrix2d H = J.transpose() * J;
        const Eigen::Vector2d g = J.transpose() * r;
        // Coordinates pinned at a bound with the gradient pointing outward stay fixed.
        Eigen::Vector2d free = Eigen::Vector2d::Ones();
        for (int c = 0; c < 2; ++c)
            if ((x(c) <= lo && g(c) > 0) || (x(c) >= hi && g(c) < 0))
                free(c) = 0.0;
        const Eigen::Vector2d g_free = g.cwiseProduct(free);
        if (g_free.norm() <= 1e-10 * (1.0 + cost)) {
            converged = true;
            break;
        }
        while (true) {
            Eigen::Matrix2d damped = H;
            damped.diagonal() += mu * (H.diagonal().array() + 1e-12).matrix();
            for (int c = 0; c < 2; ++c) {
                if (free(c) == 0.0) {
                    damped.row(c).setZero();
                    damped.col(c).setZero();
                    damped(c, c) = 1.0;
                }
            }
            const Eigen::Vector2d x_new = clamp(x - damped.ldlt().solve(g_free));
            const Eigen::VectorXd r_new = residual_at(x_new);
            const double cost_new = r_new.squaredNorm();
            if (std::isfinite(cost_new) && cost_new < cost) {
                const double step = (x_new - x).norm();
                const double gain = cost - cost_new;
                x = x_new;
                r = r_new;
                cost = cost_new;
                mu = std::max(mu * 0.3, 1e-12);
                if (step < 1e-10 || gain <= 1e-13 * cost)
                    converged = true;
                break;
            }
            mu *= 10.0;
            if (mu > 1e12) {
                converged = true;
                break;
            }
        }
    }
    if (!converged)
        throw Error(ErrorKind::NonConvergence, "RLS identification hit the iteration cap");

    Eigen::Vector3d theta;
    const double p4 = std::exp(x(0));
    const double p5 = std::exp(x(1));
    problem.residual(p4, p5, &theta);
    if (diagnostics) {
        diagnostics->cost = cost;
        diagnostics->iterations = it;
    }
    auto fitted = ModelParams::from_basal(theta(0), theta(1), theta(2), p4, p5, basal.G_b, basal.U_b);
    fitted.validate();
    return fitted;
}

} // namespace birnn
