#pragma once

#include <string>
#include <vector>

#include "airkrig/matrix.hpp"
#include "airkrig/tensor.hpp"

namespace airkrig {

/// Diffusion settings; K is the dimensionless per-step diffusion coefficient.
struct DiffusionConfig {
    double k = 0.1;
};

/// Diffusion operator K * (I - D^-1/2 W D^-1/2) from a nonnegative
/// zero-diagonal adjacency. Zero-degree rows get D^-1/2 = 0 and a unit
/// Laplacian diagonal, so isolated nodes contribute K * I.
Matrix diffusion_adjacency(const Matrix& w_d, double k);

/// Conservative advection operator from nonnegative edge flow rates:
/// rates(i,j) is the flow i -> j. The result has zero column sums, so
/// d/dt x = -W x moves mass between nodes without creating or destroying it.
Matrix advection_flux_operator(const Matrix& rates);

/// Explicit-Euler integration of d/dt x = -(w_diff + w_adv_flux) x.
/// Returns all states including x0 (steps + 1 entries). Throws when dt
/// violates the stability bound dt < 1 / (2 * max |row sum|), with the bound
/// in the message.
std::vector<std::vector<double>> integrate_advection_diffusion(
    const std::vector<double>& x0, const Matrix& w_diff, const Matrix& w_adv_flux, int steps,
    double dt);

/// Trajectory export: `step,node_id,value` rows.
void write_trajectory_csv(const std::string& path,
                          const std::vector<std::vector<double>>& trajectory,
                          const std::vector<std::string>& node_ids);

// ---- differentiable graph operators (tape side) ----

/// Copies a constant matrix onto a tape.
template <typename Real>
TensorT<Real> matrix_constant(TapeT<Real>& tape, const Matrix& m) {
    std::vector<Real> data(m.data().size());
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<Real>(m.data()[i]);
    return tape.constant({m.rows(), m.cols()}, std::move(data));
}

/// Learned per-node wind-field scalar: a 2 -> hidden -> 1 MLP with tanh
/// hidden activation applied row-wise to (u, v) wind features.
/// Throws on non-finite wind input.
template <typename Real>
TensorT<Real> wind_field_embed(TensorT<Real> wind_uv, TensorT<Real> w1, TensorT<Real> b1,
                               TensorT<Real> w2, TensorT<Real> b2);

template <typename Real>
struct AdvectionTensors {
    TensorT<Real> w_p;    ///< antisymmetric edge potential differences
    TensorT<Real> w_adv;  ///< I - D^-1/2 W_p D^-1/2, D = diag(rowsum |W_p|)
};

/// Advection adjacency from per-node scalars p: W_p(i,j) = (p_i - p_j) on
/// existing edges (edge_mask is a 0/1 constant with zero diagonal).
template <typename Real>
AdvectionTensors<Real> advection_adjacency(TensorT<Real> p, TensorT<Real> edge_mask);

template <typename Real>
struct PhysicsAdjacencyT {
    TensorT<Real> w_diff;
    TensorT<Real> w_adv;
    TensorT<Real> mu;          ///< sigmoid(mu_raw), in (0,1)
    TensorT<Real> w_phy;       ///< mu * w_adv + (1 - mu) * w_diff
    TensorT<Real> w_phy_minus; ///< w_phy with the diagonal zeroed
};

/// Convex fusion of advection and diffusion operators with a learnable
/// mixing parameter (mu_raw squashed through a sigmoid).
template <typename Real>
PhysicsAdjacencyT<Real> fuse_physics(TensorT<Real> w_adv, TensorT<Real> w_diff,
                                     TensorT<Real> mu_raw);

}  // namespace airkrig
