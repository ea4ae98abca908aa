#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <utility>

#include <Eigen/Dense>

namespace birnn {

// Single-layer GRU with a fully connected read-out:
//   r = sigma(W_r u + R_r h + b_r)
//   z = sigma(W_z u + R_z h + b_z)
//   c = tanh(W_h u + r o (R_h h) + b_h)
//   h' = (1 - z) o c + z o h
//   y = W_y h' + b_y
struct GruParams {
    Eigen::MatrixXd W_r, W_z, W_h;  // n_hu x n_u
    Eigen::MatrixXd R_r, R_z, R_h;  // n_hu x n_hu
    Eigen::VectorXd b_r, b_z, b_h;  // n_hu
    Eigen::MatrixXd W_y;            // n_y x n_hu
    Eigen::VectorXd b_y;            // n_y

    static constexpr std::string_view init_scheme = "glorot-uniform/recurrent-uniform-1/sqrt(n_hu)/zero-bias";

    static GruParams zeros(int n_hu, int n_u = 2, int n_y = 5);

    int n_hu() const { return static_cast<int>(b_r.size()); }
    int n_u() const { return static_cast<int>(W_r.cols()); }
    int n_y() const { return static_cast<int>(b_y.size()); }

    // Throws Error(ShapeMismatch) on inconsistent shapes or non-finite entries.
    void validate() const;

    // Visits every tensor in canonical order (W_r, W_z, W_h, R_r, R_z, R_h,
    // b_r, b_z, b_h, W_y, b_y). Vectors are passed as n x 1 matrices.
    void for_each(const std::function<void(std::string_view, Eigen::Ref<Eigen::MatrixXd>)>& fn);
    void for_each(const std::function<void(std::string_view, const Eigen::Ref<const Eigen::MatrixXd>&)>& fn) const;

    // Total number of scalar parameters.
    Eigen::Index size() const;

    // Row-major concatenation in canonical order.
    Eigen::VectorXd flatten() const;
    void unflatten(const Eigen::VectorXd& flat);

    // Name of the tensor (and entry) holding a flat index, e.g. "R_z[3,1]".
    std::string name_of(Eigen::Index flat_index) const;

    GruParams& operator+=(const GruParams& other);
    GruParams& operator*=(double s);
};

GruParams init_params(int n_hu, std::uint64_t seed, int n_u = 2, int n_y = 5);

// One step; returns (h_next, y).
std::pair<Eigen::VectorXd, Eigen::VectorXd> gru_cell(const GruParams& params, const Eigen::VectorXd& u,
                                                     const Eigen::VectorXd& h);

// Open-loop rollout over inputs (n_u x N, one column per step) from h0 (zero
// when empty). Returns outputs n_y x N.
Eigen::MatrixXd rollout(const GruParams& params, const Eigen::MatrixXd& inputs,
                        const Eigen::VectorXd& h0 = Eigen::VectorXd());

// Activations kept from a forward pass for backpropagation through time.
struct GruTape {
    Eigen::MatrixXd H;  // n_hu x (N+1); column k is h_k, h_0 = 0
    Eigen::MatrixXd R;  // reset gate
    Eigen::MatrixXd Z;  // update gate
    Eigen::MatrixXd C;  // candidate state
    Eigen::MatrixXd Q;  // R_h h_k
    Eigen::MatrixXd Y;  // n_y x N outputs
};

void forward(const GruParams& params, const Eigen::MatrixXd& inputs, GruTape& tape);

// Exact reverse-mode gradient of a scalar loss given dL/dY (n_y x N).
GruParams backward(const GruParams& params, const Eigen::MatrixXd& inputs, const GruTape& tape,
                   const Eigen::MatrixXd& dY);

} // namespace birnn
