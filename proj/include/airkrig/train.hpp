#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "airkrig/data.hpp"
#include "airkrig/model.hpp"

namespace airkrig {

/// Training hyperparameters.
struct TrainConfig {
    double alpha = 0.5;       ///< missing rate: virtual nodes per training graph
    int batch_size = 32;
    double lr = 0.0002;
    double lambda = 1.0;      ///< pseudo-label loss weight
    double beta = 0.05;       ///< physics continuity loss weight
    int patience = 8;         ///< epochs since best before stopping
    int max_epochs = 100;
    std::uint64_t seed = 1;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double clip_norm = 5.0;
    std::string checkpoint_path;  ///< best params written here when non-empty
};

/// Thrown when the training loss stops being finite.
struct TrainingDivergedError : std::runtime_error {
    explicit TrainingDivergedError(const std::string& what) : std::runtime_error(what) {}
};

/// Two-phase cycle-regulation output: phase-1 estimates, the role-swapped
/// pseudo input (inverse mask applied to phase 1), and phase-2 estimates.
template <typename Real>
struct NcrOutputT {
    std::vector<TensorT<Real>> phase1;
    std::vector<TensorT<Real>> pseudo_input;
    std::vector<TensorT<Real>> phase2;
    PhysicsAdjacencyT<Real> adjacency;
};

/// Runs both kriging phases with shared parameters and one shared dynamic
/// adjacency. Phase 2 sees the inverse mask and the masked phase-1 output.
template <typename Real>
NcrOutputT<Real> ncr_pass(TapeT<Real>& tape, const WindowBatch& batch, const GraphOperators& ops,
                          ModelParamsT<Real>& params, const ModelConfig& cfg);

/// Observed-node reconstruction MAE plus lambda-weighted pseudo-label MAE
/// over all nodes (pseudo-label targets do not receive gradient).
/// Throws std::runtime_error when the supervised index set is empty.
template <typename Real>
TensorT<Real> supervised_loss(const NcrOutputT<Real>& ncr, const WindowBatch& batch, Real lambda);

/// Mean squared frame-to-frame difference of the phase-2 estimates.
/// Requires at least 2 frames.
template <typename Real>
TensorT<Real> physics_continuity_loss(const std::vector<TensorT<Real>>& phase2);

/// L = L_sup + beta * L_phy.
template <typename Real>
TensorT<Real> total_loss(TensorT<Real> sup, TensorT<Real> phy, Real beta);

/// Adds virtual-node rows to a window built over the real stations of
/// `augmented` (zero values and masks; wind copied from each anchor).
WindowBatch expand_window(const WindowBatch& window, const StationGraph& augmented);

/// Raw-unit MAE of the model over the scored entries of evaluation windows.
double evaluate_mae(const std::vector<EvalWindow>& windows, const GraphOperators& ops,
                    ModelParamsT<float>& params, const ModelConfig& cfg, const NormStats& stats);

struct TrainResult {
    ModelParams best_params;
    std::vector<std::string> log_lines;     ///< one per epoch, deterministic
    double best_val_mae = 0.0;
    int epochs_run = 0;
    int virtual_per_batch = 0;
    std::vector<int> batch_graph_nodes;     ///< node count of every training graph
};

/// Full optimization loop: per batch, a fresh virtual-node augmentation and
/// masks, cycle-regulated losses, gradient clipping and one Adam step; per
/// epoch, validation MAE with best-checkpoint tracking and early stopping.
TrainResult train(const Dataset& dataset, const ModelConfig& model_cfg, const TrainConfig& cfg);

}  // namespace airkrig
