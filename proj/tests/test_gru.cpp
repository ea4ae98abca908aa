#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "birnn/error.hpp"
#include "birnn/gru.hpp"
#include "birnn/rng.hpp"
#include "test_support.hpp"

using namespace birnn;
using namespace birnn::testing;

namespace {

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

} // namespace

TEST(GruCell, MatchesScalarReferenceOnRandomCases)
{
    Rng rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 1 + static_cast<int>(rng.uniform_int(0, 11));
        const GruParams p = random_gru_params(n, rng, 1.5);
        Eigen::VectorXd u(2), h(n);
        for (int j = 0; j < 2; ++j)
            u(j) = rng.uniform(-3, 3);
        for (int j = 0; j < n; ++j)
            h(j) = rng.uniform(-1, 1);
        const auto [hn, y] = gru_cell(p, u, h);
        const auto [hs, ys] = scalar_gru_cell(p, to_std(u), to_std(h));
        for (int j = 0; j < n; ++j)
            worst = std::max(worst, std::abs(hn(j) - hs[j]));
        for (int o = 0; o < 5; ++o)
            worst = std::max(worst, std::abs(y(o) - ys[o]));
    }
    EXPECT_LE(worst, 1e-12);
}

TEST(GruCell, ZeroParamsGiveZeroState)
{
    const GruParams p = GruParams::zeros(6);
    const auto [h, y] = gru_cell(p, Eigen::Vector2d(0.3, -2.0), Eigen::VectorXd::Zero(6));
    EXPECT_EQ(h, Eigen::VectorXd::Zero(6));
    EXPECT_EQ(y, Eigen::VectorXd::Zero(5));
}

TEST(GruCell, OutputBiasPassesThrough)
{
    GruParams p = GruParams::zeros(3);
    p.b_y << 1, 2, 3, 4, 5;
    const auto [h, y] = gru_cell(p, Eigen::Vector2d(7.0, 1.0), Eigen::VectorXd::Zero(3));
    EXPECT_EQ(y, (Eigen::VectorXd(5) << 1, 2, 3, 4, 5).finished());
}

TEST(GruCell, ShapeMismatchIsReported)
{
    GruParams p = GruParams::zeros(4);
    EXPECT_THROW(gru_cell(p, Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(4)), Error);
    EXPECT_THROW(gru_cell(p, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(5)), Error);
    p.R_z.resize(3, 4);
    try {
        p.validate();
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
    }
}

TEST(Rollout, ComposesCells)
{
    Rng rng(7);
    const GruParams p = random_gru_params(5, rng);
    Eigen::MatrixXd in(2, 32);
    for (Eigen::Index k = 0; k < in.cols(); ++k)
        in.col(k) << rng.uniform(-2, 2), rng.uniform(-2, 2);
    const Eigen::MatrixXd Y = rollout(p, in);
    Eigen::VectorXd h = Eigen::VectorXd::Zero(5);
    for (Eigen::Index k = 0; k < in.cols(); ++k) {
        auto [hn, y] = gru_cell(p, in.col(k), h);
        EXPECT_LE((Y.col(k) - y).cwiseAbs().maxCoeff(), 1e-13);
        EXPECT_LT(hn.cwiseAbs().maxCoeff(), 1.0);
        h = hn;
    }
    EXPECT_EQ(rollout(p, in), Y);
}

TEST(Rollout, ZeroParamsAndInputsStayZero)
{
    const Eigen::MatrixXd Y = rollout(GruParams::zeros(4), Eigen::MatrixXd::Zero(2, 20));
    EXPECT_EQ(Y, Eigen::MatrixXd::Zero(5, 20));
}

TEST(Rollout, TapeMatchesRollout)
{
    Rng rng(8);
    const GruParams p = random_gru_params(6, rng);
    Eigen::MatrixXd in = Eigen::MatrixXd::Random(2, 40);
    GruTape tape;
    forward(p, in, tape);
    EXPECT_LE((tape.Y - rollout(p, in)).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_EQ(tape.H.cols(), 41);
    EXPECT_EQ(tape.H.col(0), Eigen::VectorXd::Zero(6));
}

TEST(InitParams, GlorotBoundsAndDeterminism)
{
    const GruParams p = init_params(96, 3);
    EXPECT_EQ(p.W_r.rows(), 96);
    EXPECT_EQ(p.W_r.cols(), 2);
    EXPECT_EQ(p.W_y.rows(), 5);
    EXPECT_EQ(p.W_y.cols(), 96);
    const double in_bound = std::sqrt(6.0 / (2 + 96));
    for (const auto* w : {&p.W_r, &p.W_z, &p.W_h})
        EXPECT_LE(w->cwiseAbs().maxCoeff(), in_bound);
    EXPECT_LE(p.W_y.cwiseAbs().maxCoeff(), std::sqrt(6.0 / (96 + 5)));
    EXPECT_LE(p.R_h.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(96.0));
    EXPECT_EQ(p.b_r.cwiseAbs().sum() + p.b_y.cwiseAbs().sum(), 0.0);
    EXPECT_GT(p.W_r.cwiseAbs().maxCoeff(), 0.5 * in_bound);
    EXPECT_EQ(init_params(96, 3).flatten(), p.flatten());
    EXPECT_NE(init_params(96, 4).flatten(), p.flatten());
}

TEST(GruParams, FlattenRoundTripAndNames)
{
    Rng rng(1);
    const GruParams p = random_gru_params(3, rng);
    EXPECT_EQ(p.size(), 3 * (3 * 2 + 3 * 3 + 3) + 5 * 3 + 5);
    GruParams q = GruParams::zeros(3);
    q.unflatten(p.flatten());
    EXPECT_EQ(q.flatten(), p.flatten());
    EXPECT_EQ(p.name_of(0), "W_r[0,0]");
    EXPECT_EQ(p.name_of(1), "W_r[0,1]");
    EXPECT_EQ(p.name_of(p.size() - 1), "b_y[4]");
    EXPECT_EQ(p.flatten()(1), p.W_r(0, 1));
}
