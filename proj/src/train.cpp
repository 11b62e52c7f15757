#include "airkrig/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>

#include "airkrig/checkpoint.hpp"
#include "airkrig/rng.hpp"

namespace airkrig {

// ---- cycle regulation and losses ----

template <typename Real>
NcrOutputT<Real> ncr_pass(TapeT<Real>& tape, const WindowBatch& batch, const GraphOperators& ops,
                          ModelParamsT<Real>& params, const ModelConfig& cfg) {
    NcrOutputT<Real> out;
    out.adjacency = build_dynamic_adjacency(tape, batch, ops, params);

    const int n = batch.n_nodes;
    auto x_frames = window_frame_constants<Real>(tape, batch.x, batch.window, n);
    auto m_frames = window_frame_constants<Real>(tape, batch.mask, batch.window, n);
    out.phase1 = model_forward_frames(tape, x_frames, m_frames, out.adjacency, params, cfg);

    std::vector<double> inverse(batch.mask.size());
    for (std::size_t k = 0; k < inverse.size(); ++k) inverse[k] = 1.0 - batch.mask[k];
    auto inv_frames = window_frame_constants<Real>(tape, inverse, batch.window, n);

    out.pseudo_input.reserve(out.phase1.size());
    for (int t = 0; t < batch.window; ++t)
        out.pseudo_input.push_back(apply_mask(out.phase1[t], inv_frames[t]));

    out.phase2 = model_forward_frames(tape, out.pseudo_input, inv_frames, out.adjacency, params, cfg);
    return out;
}

template <typename Real>
TensorT<Real> supervised_loss(const NcrOutputT<Real>& ncr, const WindowBatch& batch, Real lambda) {
    TapeT<Real>& tape = *ncr.phase1.front().tape();
    const int n = batch.n_nodes;
    const int window = batch.window;

    double observed_count = 0.0;
    for (double v : batch.loss_mask) observed_count += v;
    if (observed_count <= 0.0)
        throw std::runtime_error("supervised_loss: empty observed index set");

    auto x_frames = window_frame_constants<Real>(tape, batch.x, window, n);
    auto lm_frames = window_frame_constants<Real>(tape, batch.loss_mask, window, n);

    TensorT<Real> obs_sum;
    TensorT<Real> pseudo_sum;
    for (int t = 0; t < window; ++t) {
        auto obs_term = sum_all(apply_mask(abs_op(sub(ncr.phase1[t], x_frames[t])), lm_frames[t]));
        obs_sum = t == 0 ? obs_term : add(obs_sum, obs_term);

        // Pseudo labels are targets, not signal sources: no gradient through them.
        auto pseudo_term = sum_all(abs_op(sub(ncr.phase2[t], detach(ncr.phase1[t]))));
        pseudo_sum = t == 0 ? pseudo_term : add(pseudo_sum, pseudo_term);
    }

    auto term1 = mul(obs_sum, tape.scalar_constant(static_cast<Real>(1.0 / observed_count)));
    auto term2 = mul(pseudo_sum,
                     tape.scalar_constant(static_cast<Real>(1.0 / (static_cast<double>(window) * n))));
    return add(term1, mul(term2, tape.scalar_constant(lambda)));
}

template <typename Real>
TensorT<Real> physics_continuity_loss(const std::vector<TensorT<Real>>& phase2) {
    if (phase2.size() < 2)
        throw std::invalid_argument("physics_continuity_loss: need at least 2 frames");
    TapeT<Real>& tape = *phase2.front().tape();
    const int window = static_cast<int>(phase2.size());
    const int n = phase2.front().rows();

    TensorT<Real> acc;
    for (int t = 1; t < window; ++t) {
        auto d = sub(phase2[t], phase2[t - 1]);
        auto sq = sum_all(mul(d, d));
        acc = t == 1 ? sq : add(acc, sq);
    }
    const double denom = static_cast<double>(window - 1) * n;
    return mul(acc, tape.scalar_constant(static_cast<Real>(1.0 / denom)));
}

template <typename Real>
TensorT<Real> total_loss(TensorT<Real> sup, TensorT<Real> phy, Real beta) {
    return add(sup, mul(phy, sup.tape()->scalar_constant(beta)));
}

#define AIRKRIG_INSTANTIATE_TRAIN(Real)                                                      \
    template NcrOutputT<Real> ncr_pass(TapeT<Real>&, const WindowBatch&,                     \
                                       const GraphOperators&, ModelParamsT<Real>&,           \
                                       const ModelConfig&);                                  \
    template TensorT<Real> supervised_loss(const NcrOutputT<Real>&, const WindowBatch&, Real); \
    template TensorT<Real> physics_continuity_loss(const std::vector<TensorT<Real>>&);       \
    template TensorT<Real> total_loss(TensorT<Real>, TensorT<Real>, Real);

AIRKRIG_INSTANTIATE_TRAIN(float)
AIRKRIG_INSTANTIATE_TRAIN(double)

#undef AIRKRIG_INSTANTIATE_TRAIN

// ---- window expansion over augmented graphs ----

WindowBatch expand_window(const WindowBatch& window, const StationGraph& augmented) {
    if (window.n_nodes != augmented.n_real)
        throw std::invalid_argument("expand_window: window does not match real node count");
    const int n_aug = augmented.size();
    const int n_real = augmented.n_real;

    WindowBatch out;
    out.n_nodes = n_aug;
    out.window = window.window;
    out.timestamps = window.timestamps;
    const std::size_t total = static_cast<std::size_t>(window.window) * n_aug;
    out.x.assign(total, 0.0);
    out.wind_u.assign(total, 0.0);
    out.wind_v.assign(total, 0.0);
    out.mask.assign(total, 0.0);
    out.loss_mask.assign(total, 0.0);

    for (int t = 0; t < window.window; ++t) {
        const std::size_t src_row = static_cast<std::size_t>(t) * n_real;
        const std::size_t dst_row = static_cast<std::size_t>(t) * n_aug;
        for (int i = 0; i < n_real; ++i) {
            out.x[dst_row + i] = window.x[src_row + i];
            out.wind_u[dst_row + i] = window.wind_u[src_row + i];
            out.wind_v[dst_row + i] = window.wind_v[src_row + i];
            out.mask[dst_row + i] = window.mask[src_row + i];
            out.loss_mask[dst_row + i] = window.loss_mask[src_row + i];
        }
        for (int v = 0; v < augmented.n_virtual; ++v) {
            const int anchor = augmented.virtual_anchor[v];
            out.wind_u[dst_row + n_real + v] = window.wind_u[src_row + anchor];
            out.wind_v[dst_row + n_real + v] = window.wind_v[src_row + anchor];
        }
    }
    return out;
}

// ---- evaluation ----

double evaluate_mae(const std::vector<EvalWindow>& windows, const GraphOperators& ops,
                    ModelParamsT<float>& params, const ModelConfig& cfg, const NormStats& stats) {
    double abs_sum = 0.0;
    std::int64_t count = 0;
    for (const auto& ew : windows) {
        const auto pred = predict_window(ew.batch, ops, params, cfg);
        for (std::size_t k = 0; k < pred.size(); ++k) {
            if (ew.target_mask[k] <= 0.0) continue;
            abs_sum += std::abs(stats.denormalize(pred[k]) - ew.truth[k]);
            ++count;
        }
    }
    if (count == 0) throw std::runtime_error("evaluate_mae: no evaluation targets");
    return abs_sum / static_cast<double>(count);
}

// ---- training loop ----

namespace {

void apply_node_mask(WindowBatch& w, const NodeMask& node_mask) {
    const int n = w.n_nodes;
    for (int t = 0; t < w.window; ++t) {
        for (int i = 0; i < n; ++i) {
            if (node_mask.values[i]) continue;
            const std::size_t k = static_cast<std::size_t>(t) * n + i;
            w.x[k] = 0.0;
            w.mask[k] = 0.0;
            w.loss_mask[k] = 0.0;
        }
    }
}

}  // namespace

TrainResult train(const Dataset& dataset, const ModelConfig& model_cfg, const TrainConfig& cfg) {
    if (dataset.train_windows.empty()) throw std::invalid_argument("train: no training windows");
    if (cfg.alpha < 0.0 || cfg.alpha >= 1.0) throw std::invalid_argument("train: alpha out of range");
    if (cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");

    const StationGraph& base_graph = dataset.observed_graph;
    const int n_observed = base_graph.n_real;
    const int virtual_count = virtual_count_for_alpha(n_observed, cfg.alpha);

    ModelParams params(model_cfg, cfg.seed);
    auto param_ptrs = params.pointers();

    const DiffusionConfig diff{model_cfg.diffusion_k};
    const GraphOperators val_ops = build_graph_operators(base_graph, diff);

    TrainResult result;
    result.virtual_per_batch = virtual_count;
    result.best_val_mae = std::numeric_limits<double>::infinity();

    Rng root(cfg.seed);
    const int n_windows = static_cast<int>(dataset.train_windows.size());
    std::vector<int> order(n_windows);
    for (int i = 0; i < n_windows; ++i) order[i] = i;

    std::int64_t step = 0;
    int epochs_since_best = 0;
    char line[256];

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        Rng shuffle_rng = root.split(0x50FF1Eull + static_cast<std::uint64_t>(epoch));
        for (int i = n_windows - 1; i > 0; --i) {
            const int j = static_cast<int>(shuffle_rng.next_below(static_cast<std::uint64_t>(i + 1)));
            std::swap(order[i], order[j]);
        }

        double epoch_total = 0.0, epoch_sup = 0.0, epoch_phy = 0.0;
        int batch_index = 0;
        for (int start = 0; start < n_windows; start += cfg.batch_size, ++batch_index) {
            const int batch_count = std::min(cfg.batch_size, n_windows - start);
            const std::uint64_t batch_seed =
                root.split(0xBA7C000ull + static_cast<std::uint64_t>(epoch))
                    .split(static_cast<std::uint64_t>(batch_index))
                    .next_u64();

            StationGraph aug = insert_virtual_nodes(base_graph, virtual_count, batch_seed);
            result.batch_graph_nodes.push_back(aug.size());
            const NodeMask node_mask = make_training_masks(aug, cfg.alpha, batch_seed).first;
            const GraphOperators ops = build_graph_operators(aug, diff);

            params.zero_grad();
            for (int k = 0; k < batch_count; ++k) {
                WindowBatch wb = expand_window(dataset.train_windows[order[start + k]], aug);
                apply_node_mask(wb, node_mask);

                Tape tape;
                auto ncr = ncr_pass(tape, wb, ops, params, model_cfg);
                auto sup = supervised_loss(ncr, wb, static_cast<float>(cfg.lambda));
                auto phy = physics_continuity_loss(ncr.phase2);
                auto tot = total_loss(sup, phy, static_cast<float>(cfg.beta));

                const double tot_v = tot.scalar();
                if (!std::isfinite(tot_v))
                    throw TrainingDivergedError("training loss is not finite at epoch " +
                                                std::to_string(epoch));
                epoch_total += tot_v;
                epoch_sup += sup.scalar();
                epoch_phy += phy.scalar();

                auto scaled = mul(tot, tape.scalar_constant(1.0f / static_cast<float>(batch_count)));
                tape.backward(scaled);
            }

            const double grad_norm = clip_gradients(param_ptrs, cfg.clip_norm);
            if (grad_norm > cfg.clip_norm)
                std::cerr << "[train] gradient norm " << grad_norm << " clipped to "
                          << cfg.clip_norm << "\n";
            adam_step(param_ptrs, static_cast<float>(cfg.lr), static_cast<float>(cfg.adam_beta1),
                      static_cast<float>(cfg.adam_beta2), static_cast<float>(cfg.adam_eps), ++step);
        }

        epoch_total /= n_windows;
        epoch_sup /= n_windows;
        epoch_phy /= n_windows;

        // Validation MAE drives early stopping; without validation targets the
        // epoch training loss stands in.
        double val_metric;
        if (!dataset.val_windows.empty()) {
            val_metric = evaluate_mae(dataset.val_windows, val_ops, params, model_cfg, dataset.stats);
        } else {
            val_metric = epoch_total;
        }

        const double mu = 1.0 / (1.0 + std::exp(-static_cast<double>(params.at("mu_raw").value[0])));
        std::snprintf(line, sizeof(line),
                      "epoch=%d train_loss=%.6f sup_loss=%.6f phy_loss=%.6f val_mae=%.6f mu=%.6f",
                      epoch, epoch_total, epoch_sup, epoch_phy, val_metric, mu);
        result.log_lines.emplace_back(line);
        result.epochs_run = epoch + 1;

        if (val_metric < result.best_val_mae) {
            result.best_val_mae = val_metric;
            result.best_params = params;
            epochs_since_best = 0;
            if (!cfg.checkpoint_path.empty()) save_checkpoint(cfg.checkpoint_path, params);
        } else {
            ++epochs_since_best;
        }
        if (epochs_since_best >= cfg.patience) break;
    }

    if (result.best_params.all().empty()) result.best_params = params;
    return result;
}

}  // namespace airkrig
