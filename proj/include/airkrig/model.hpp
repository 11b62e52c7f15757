#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "airkrig/graph.hpp"
#include "airkrig/physics.hpp"
#include "airkrig/tensor.hpp"

namespace airkrig {

/// Model hyperparameters. Defaults: 24-hour windows, 64-dim features,
/// 4 graph-convolution layers with a 1-frame temporal halo.
struct ModelConfig {
    int window = 24;
    int feature_dim = 64;
    int layers = 4;
    int wind_hidden = 16;
    int m_halo = 1;
    double diffusion_k = 0.1;
};

/// One time window of node series feeding the model. All matrices are
/// time-major flattened: entry (t, i) at index t * n_nodes + i. Masked x
/// entries are exactly 0; `mask` marks values visible to the model and
/// `loss_mask` the subset counted by the supervised loss (they differ only
/// when validation stations are excluded from the training targets).
struct WindowBatch {
    int n_nodes = 0;
    int window = 0;
    std::vector<double> x;
    std::vector<double> wind_u;
    std::vector<double> wind_v;
    std::vector<double> mask;
    std::vector<double> loss_mask;
    std::vector<std::int64_t> timestamps;

    std::size_t cells() const { return static_cast<std::size_t>(n_nodes) * window; }
};

/// Constant per-graph operators consumed by the model.
struct GraphOperators {
    Matrix w_diff;     ///< diffusion operator on the full node set
    Matrix edge_mask;  ///< 0/1 connectivity (zero diagonal)
};

GraphOperators build_graph_operators(const StationGraph& graph, const DiffusionConfig& diff);

/// Named parameter set of the kriging network.
template <typename Real>
class ModelParamsT {
public:
    ModelParamsT() = default;
    ModelParamsT(const ModelConfig& cfg, std::uint64_t seed);

    ParamT<Real>& at(const std::string& name);
    const ParamT<Real>& at(const std::string& name) const;
    bool has(const std::string& name) const;

    std::vector<ParamT<Real>>& all() { return params_; }
    const std::vector<ParamT<Real>>& all() const { return params_; }
    std::vector<ParamT<Real>*> pointers();

    void zero_grad();
    std::size_t total_size() const;

private:
    std::vector<ParamT<Real>> params_;
};

using ModelParams = ModelParamsT<float>;

/// One spatio-temporal graph-convolution layer: per frame, neighbor features
/// of the frame and its temporal halo are aggregated through the
/// row-normalized adjacency, then mixed by a fully connected map with relu.
/// Boundary frames replicate the edge frame. Throws std::logic_error when
/// w_phy_minus carries a nonzero diagonal.
template <typename Real>
std::vector<TensorT<Real>> stgc_layer(const std::vector<TensorT<Real>>& z_frames,
                                      TensorT<Real> w_phy_minus, TensorT<Real> w_prev,
                                      TensorT<Real> w_self, TensorT<Real> w_next,
                                      TensorT<Real> bias);

/// Builds the window's dynamic physics adjacency from its time-mean wind.
template <typename Real>
PhysicsAdjacencyT<Real> build_dynamic_adjacency(TapeT<Real>& tape, const WindowBatch& batch,
                                                const GraphOperators& ops,
                                                ModelParamsT<Real>& params);

/// Splits a time-major grid into per-frame (n x 1) constants on the tape.
template <typename Real>
std::vector<TensorT<Real>> window_frame_constants(TapeT<Real>& tape,
                                                  const std::vector<double>& grid, int window,
                                                  int n);

template <typename Real>
struct ForwardResultT {
    std::vector<TensorT<Real>> estimates;  ///< T frames of (n x 1) outputs
    PhysicsAdjacencyT<Real> adjacency;
};

/// Full forward pass on explicit per-frame inputs (x and mask may be tape
/// tensors, which is how the cycle-regulation second phase reuses phase-1
/// outputs as inputs).
template <typename Real>
std::vector<TensorT<Real>> model_forward_frames(TapeT<Real>& tape,
                                                const std::vector<TensorT<Real>>& x_frames,
                                                const std::vector<TensorT<Real>>& mask_frames,
                                                const PhysicsAdjacencyT<Real>& adjacency,
                                                ModelParamsT<Real>& params,
                                                const ModelConfig& cfg);

/// Forward pass on a window: dynamic adjacency, input embedding, STGC stack,
/// readout. Estimates cover every node and frame.
template <typename Real>
ForwardResultT<Real> model_forward(TapeT<Real>& tape, const WindowBatch& batch,
                                   const GraphOperators& ops, ModelParamsT<Real>& params,
                                   const ModelConfig& cfg);

/// Plain-value forward for inference; returns a T*(N+M) row-major buffer.
std::vector<double> predict_window(const WindowBatch& batch, const GraphOperators& ops,
                                   ModelParamsT<float>& params, const ModelConfig& cfg);

}  // namespace airkrig
