#include "birnn/gru.hpp"

#include <cmath>
#include <sstream>

#include "birnn/error.hpp"
#include "birnn/rng.hpp"

namespace birnn {

namespace {

Eigen::ArrayXd sigmoid(const Eigen::ArrayXd& x)
{
    return 1.0 / (1.0 + (-x).exp());
}

// [W_r; W_z; W_h] and [R_r; R_z; R_h] stacked for one product per step.
Eigen::MatrixXd stack3(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& c)
{
    Eigen::MatrixXd out(a.rows() + b.rows() + c.rows(), a.cols());
    out << a, b, c;
    return out;
}

} // namespace

GruParams GruParams::zeros(int n_hu, int n_u, int n_y)
{
    GruParams p;
    p.W_r = p.W_z = p.W_h = Eigen::MatrixXd::Zero(n_hu, n_u);
    p.R_r = p.R_z = p.R_h = Eigen::MatrixXd::Zero(n_hu, n_hu);
    p.b_r = p.b_z = p.b_h = Eigen::VectorXd::Zero(n_hu);
    p.W_y = Eigen::MatrixXd::Zero(n_y, n_hu);
    p.b_y = Eigen::VectorXd::Zero(n_y);
    return p;
}

void GruParams::validate() const
{
    const auto n = b_r.size();
    const auto nu = W_r.cols();
    const auto ny = b_y.size();
    auto bad = [](const char* what) { throw Error(ErrorKind::ShapeMismatch, what); };
    if (n < 1 || nu < 1 || ny < 1)
        bad("empty GRU dimension");
    for (const auto* w : {&W_r, &W_z, &W_h})
        if (w->rows() != n || w->cols() != nu)
            bad("input weights must be n_hu x n_u");
    for (const auto* r : {&R_r, &R_z, &R_h})
        if (r->rows() != n || r->cols() != n)
            bad("recurrent weights must be n_hu x n_hu");
    if (b_z.size() != n || b_h.size() != n)
        bad("gate biases must have n_hu entries");
    if (W_y.rows() != ny || W_y.cols() != n)
        bad("output weights must be n_y x n_hu");
    for_each([&](std::string_view name, const Eigen::Ref<const Eigen::MatrixXd>& m) {
        if (!m.allFinite())
            throw Error(ErrorKind::ShapeMismatch, "non-finite entries in " + std::string(name));
    });
}

void GruParams::for_each(const std::function<void(std::string_view, Eigen::Ref<Eigen::MatrixXd>)>& fn)
{
    fn("W_r", W_r);
    fn("W_z", W_z);
    fn("W_h", W_h);
    fn("R_r", R_r);
    fn("R_z", R_z);
    fn("R_h", R_h);
    fn("b_r", b_r);
    fn("b_z", b_z);
    fn("b_h", b_h);
    fn("W_y", W_y);
    fn("b_y", b_y);
}

void GruParams::for_each(
    const std::function<void(std::string_view, const Eigen::Ref<const Eigen::MatrixXd>&)>& fn) const
{
    fn("W_r", W_r);
    fn("W_z", W_z);
    fn("W_h", W_h);
    fn("R_r", R_r);
    fn("R_z", R_z);
    fn("R_h", R_h);
    fn("b_r", b_r);
    fn("b_z", b_z);
    fn("b_h", b_h);
    fn("W_y", W_y);
    fn("b_y", b_y);
}

Eigen::Index GruParams::size() const
{
    Eigen::Index n = 0;
    for_each([&](std::string_view, const Eigen::Ref<const Eigen::MatrixXd>& m) { n += m.size(); });
    return n;
}

Eigen::VectorXd GruParams::flatten() const
{
    Eigen::VectorXd flat(size());
    Eigen::Index at = 0;
    for_each([&](std::string_view, const Eigen::Ref<const Eigen::MatrixXd>& m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                flat(at++) = m(i, j);
    });
    return flat;
}

void GruParams::unflatten(const Eigen::VectorXd& flat)
{
    if (flat.size() != size())
        throw Error(ErrorKind::ShapeMismatch, "flat parameter vector has the wrong length");
    Eigen::Index at = 0;
    for_each([&](std::string_view, Eigen::Ref<Eigen::MatrixXd> m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                m(i, j) = flat(at++);
    });
}

std::string GruParams::name_of(Eigen::Index flat_index) const
{
    std::string out = "?";
    Eigen::Index at = 0;
    for_each([&](std::string_view name, const Eigen::Ref<const Eigen::MatrixXd>& m) {
        if (flat_index >= at && flat_index < at + m.size()) {
            const auto local = flat_index - at;
            std::ostringstream os;
            if (name.front() == 'b')
                os << name << '[' << local << ']';
            else
                os << name << '[' << local / m.cols() << ',' << local % m.cols() << ']';
            out = os.str();
        }
        at += m.size();
    });
    return out;
}

GruParams& GruParams::operator+=(const GruParams& o)
{
    W_r += o.W_r;
    W_z += o.W_z;
    W_h += o.W_h;
    R_r += o.R_r;
    R_z += o.R_z;
    R_h += o.R_h;
    b_r += o.b_r;
    b_z += o.b_z;
    b_h += o.b_h;
    W_y += o.W_y;
    b_y += o.b_y;
    return *this;
}

GruParams& GruParams::operator*=(double s)
{
    for_each([&](std::string_view, Eigen::Ref<Eigen::MatrixXd> m) { m *= s; });
    return *this;
}

GruParams init_params(int n_hu, std::uint64_t seed, int n_u, int n_y)
{
    if (n_hu < 1)
        throw Error(ErrorKind::InvalidConfig, "n_hu must be >= 1");
    GruParams p = GruParams::zeros(n_hu, n_u, n_y);
    Rng rng(derive_seed(seed, "gru-init"));
    auto fill = [&](Eigen::MatrixXd& m, double bound) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                m(i, j) = rng.uniform(-bound, bound);
    };
    const double in_bound = std::sqrt(6.0 / (n_u + n_hu));
    const double rec_bound = 1.0 / std::sqrt(static_cast<double>(n_hu));
    const double out_bound = std::sqrt(6.0 / (n_hu + n_y));
    fill(p.W_r, in_bound);
    fill(p.W_z, in_bound);
    fill(p.W_h, in_bound);
    fill(p.R_r, rec_bound);
    fill(p.R_z, rec_bound);
    fill(p.R_h, rec_bound);
    fill(p.W_y, out_bound);
    return p;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> gru_cell(const GruParams& params, const Eigen::VectorXd& u,
                                                     const Eigen::VectorXd& h)
{
    if (u.size() != params.n_u() || h.size() != params.n_hu())
        throw Error(ErrorKind::ShapeMismatch, "gru_cell input or hidden state has the wrong size");
    const Eigen::ArrayXd r = sigmoid((params.W_r * u + params.R_r * h + params.b_r).array());
    const Eigen::ArrayXd z = sigmoid((params.W_z * u + params.R_z * h + params.b_z).array());
    const Eigen::ArrayXd c =
        (params.W_h * u + (r * (params.R_h * h).array()).matrix() + params.b_h).array().tanh();
    Eigen::VectorXd h_next = ((1.0 - z) * c + z * h.array()).matrix();
    Eigen::VectorXd y = params.W_y * h_next + params.b_y;
    return {std::move(h_next), std::move(y)};
}

void forward(const GruParams& params, const Eigen::MatrixXd& inputs, GruTape& tape)
{
    if (inputs.rows() != params.n_u())
        throw Error(ErrorKind::ShapeMismatch, "input rows must equal n_u");
    const Eigen::Index n = params.n_hu();
    const Eigen::Index N = inputs.cols();

    const Eigen::MatrixXd Rcat = stack3(params.R_r, params.R_z, params.R_h);
    Eigen::MatrixXd proj = stack3(params.W_r, params.W_z, params.W_h) * inputs;
    proj.colwise() += stack3(params.b_r, params.b_z, params.b_h).col(0);

    tape.H.resize(n, N + 1);
    tape.R.resize(n, N);
    tape.Z.resize(n, N);
    tape.C.resize(n, N);
    tape.Q.resize(n, N);
    tape.H.col(0).setZero();

    Eigen::VectorXd rec(3 * n);
    for (Eigen::Index k = 0; k < N; ++k) {
        const auto h = tape.H.col(k);
        rec.noalias() = Rcat * h;
        const auto in = proj.col(k);
        tape.R.col(k) = sigmoid((in.segment(0, n) + rec.segment(0, n)).array()).matrix();
        tape.Z.col(k) = sigmoid((in.segment(n, n) + rec.segment(n, n)).array()).matrix();
        tape.Q.col(k) = rec.segment(2 * n, n);
        tape.C.col(k) =
            (in.segment(2 * n, n).array() + tape.R.col(k).array() * rec.segment(2 * n, n).array()).tanh().matrix();
        tape.H.col(k + 1) = ((1.0 - tape.Z.col(k).array()) * tape.C.col(k).array() +
                             tape.Z.col(k).array() * h.array())
                                .matrix();
    }
    tape.Y.noalias() = params.W_y * tape.H.rightCols(N);
    tape.Y.colwise() += params.b_y;
}

Eigen::MatrixXd rollout(const GruParams& params, const Eigen::MatrixXd& inputs, const Eigen::VectorXd& h0)
{
    if (inputs.cols() == 0)
        throw Error(ErrorKind::EmptyInput, "rollout requires a non-empty input sequence");
    if (h0.size() == 0) {
        GruTape tape;
        forward(params, inputs, tape);
        return tape.Y;
    }
    Eigen::MatrixXd Y(params.n_y(), inputs.cols());
    Eigen::VectorXd h = h0;
    for (Eigen::Index k = 0; k < inputs.cols(); ++k) {
        auto [h_next, y] = gru_cell(params, inputs.col(k), h);
        h = std::move(h_next);
        Y.col(k) = y;
    }
    return Y;
}

GruParams backward(const GruParams& params, const Eigen::MatrixXd& inputs, const GruTape& tape,
                   const Eigen::MatrixXd& dY)
{
    const Eigen::Index n = params.n_hu();
    const Eigen::Index N = inputs.cols();
    if (dY.rows() != params.n_y() || dY.cols() != N || tape.H.cols() != N + 1)
        throw Error(ErrorKind::ShapeMismatch, "backward: tape or output gradient does not match inputs");

    const Eigen::MatrixXd RcatT = stack3(params.R_r, params.R_z, params.R_h).transpose();
    const Eigen::MatrixXd dH_out = params.W_y.transpose() * dY;

    // Pre-activation gradients: rows [r; z; candidate] for the input-side
    // weights, rows [r; z; R_h h] for the recurrent weights.
    Eigen::MatrixXd d_in(3 * n, N);
    Eigen::MatrixXd d_rec(3 * n, N);
    Eigen::VectorXd carry = Eigen::VectorXd::Zero(n);

    for (Eigen::Index k = N - 1; k >= 0; --k) {
        const Eigen::ArrayXd dh = (dH_out.col(k) + carry).array();
        const auto z = tape.Z.col(k).array();
        const auto r = tape.R.col(k).array();
        const auto c = tape.C.col(k).array();
        const auto q = tape.Q.col(k).array();
        const auto h_prev = tape.H.col(k).array();

        const Eigen::ArrayXd dc = dh * (1.0 - z);
        const Eigen::ArrayXd dz = dh * (h_prev - c);
        const Eigen::ArrayXd da_c = dc * (1.0 - c * c);
        const Eigen::ArrayXd da_r = da_c * q * r * (1.0 - r);
        const Eigen::ArrayXd da_z = dz * z * (1.0 - z);

        d_in.col(k).segment(0, n) = da_r.matrix();
        d_in.col(k).segment(n, n) = da_z.matrix();
        d_in.col(k).segment(2 * n, n) = da_c.matrix();
        d_rec.col(k).segment(0, n) = da_r.matrix();
        d_rec.col(k).segment(n, n) = da_z.matrix();
        d_rec.col(k).segment(2 * n, n) = (da_c * r).matrix();

        carry = (dh * z).matrix() + RcatT * d_rec.col(k);
    }

    GruParams g = GruParams::zeros(static_cast<int>(n), params.n_u(), params.n_y());
    const Eigen::MatrixXd dW = d_in * inputs.transpose();
    const Eigen::VectorXd db = d_in.rowwise().sum();
    const Eigen::MatrixXd dR = d_rec * tape.H.leftCols(N).transpose();
    g.W_r = dW.middleRows(0, n);
    g.W_z = dW.middleRows(n, n);
    g.W_h = dW.middleRows(2 * n, n);
    g.b_r = db.segment(0, n);
    g.b_z = db.segment(n, n);
    g.b_h = db.segment(2 * n, n);
    g.R_r = dR.middleRows(0, n);
    g.R_z = dR.middleRows(n, n);
    g.R_h = dR.middleRows(2 * n, n);
    g.W_y = dY * tape.H.rightCols(N).transpose();
    g.b_y = dY.rowwise().sum();
    return g;
}

} // namespace birnn
