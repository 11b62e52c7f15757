#include "airkrig/model.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "airkrig/rng.hpp"

namespace airkrig {

GraphOperators build_graph_operators(const StationGraph& graph, const DiffusionConfig& diff) {
    GraphOperators ops;
    ops.w_diff = diffusion_adjacency(graph.adjacency_distance, diff.k);
    const int n = graph.size();
    ops.edge_mask = Matrix(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j && graph.adjacency_distance(i, j) > 0.0) ops.edge_mask(i, j) = 1.0;
    return ops;
}

// ---- parameters ----

namespace {

template <typename Real>
void init_uniform(ParamT<Real>& p, int fan_in, Rng rng) {
    if (fan_in <= 0) return;  // biases and scalars start at zero
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : p.value) v = static_cast<Real>(rng.next_uniform(-bound, bound));
}

}  // namespace

template <typename Real>
ModelParamsT<Real>::ModelParamsT(const ModelConfig& cfg, std::uint64_t seed) {
    const int d = cfg.feature_dim;
    const int h = cfg.wind_hidden;
    if (d < 1 || h < 1 || cfg.layers < 1) throw std::invalid_argument("ModelParams: bad config");

    params_.emplace_back("windfield.w1", std::vector<int>{2, h});
    params_.emplace_back("windfield.b1", std::vector<int>{1, h});
    params_.emplace_back("windfield.w2", std::vector<int>{h, 1});
    params_.emplace_back("windfield.b2", std::vector<int>{1, 1});
    params_.emplace_back("embed.wx", std::vector<int>{1, d});
    params_.emplace_back("embed.wm", std::vector<int>{1, d});
    params_.emplace_back("embed.b", std::vector<int>{1, d});
    for (int l = 0; l < cfg.layers; ++l) {
        const std::string base = "stgc" + std::to_string(l);
        params_.emplace_back(base + ".w_prev", std::vector<int>{d, d});
        params_.emplace_back(base + ".w_self", std::vector<int>{d, d});
        params_.emplace_back(base + ".w_next", std::vector<int>{d, d});
        params_.emplace_back(base + ".b", std::vector<int>{1, d});
    }
    params_.emplace_back("readout.w", std::vector<int>{d, 1});
    params_.emplace_back("readout.b", std::vector<int>{1, 1});
    params_.emplace_back("mu_raw", std::vector<int>{1});

    Rng root(seed);
    std::map<std::string, int> fan_in = {
        {"windfield.w1", 2}, {"windfield.w2", h}, {"embed.wx", 2}, {"embed.wm", 2},
        {"readout.w", d},
    };
    for (int l = 0; l < cfg.layers; ++l) {
        const std::string base = "stgc" + std::to_string(l);
        fan_in[base + ".w_prev"] = 3 * d;
        fan_in[base + ".w_self"] = 3 * d;
        fan_in[base + ".w_next"] = 3 * d;
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto it = fan_in.find(params_[i].name);
        if (it != fan_in.end()) init_uniform(params_[i], it->second, root.split(i));
    }
}

template <typename Real>
ParamT<Real>& ModelParamsT<Real>::at(const std::string& name) {
    for (auto& p : params_)
        if (p.name == name) return p;
    throw std::invalid_argument("ModelParams: unknown parameter " + name);
}

template <typename Real>
const ParamT<Real>& ModelParamsT<Real>::at(const std::string& name) const {
    for (const auto& p : params_)
        if (p.name == name) return p;
    throw std::invalid_argument("ModelParams: unknown parameter " + name);
}

template <typename Real>
bool ModelParamsT<Real>::has(const std::string& name) const {
    for (const auto& p : params_)
        if (p.name == name) return true;
    return false;
}

template <typename Real>
std::vector<ParamT<Real>*> ModelParamsT<Real>::pointers() {
    std::vector<ParamT<Real>*> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(&p);
    return out;
}

template <typename Real>
void ModelParamsT<Real>::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

template <typename Real>
std::size_t ModelParamsT<Real>::total_size() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
}

// ---- forward ----

template <typename Real>
std::vector<TensorT<Real>> window_frame_constants(TapeT<Real>& tape,
                                                  const std::vector<double>& grid, int window,
                                                  int n) {
    std::vector<TensorT<Real>> frames;
    frames.reserve(window);
    for (int t = 0; t < window; ++t) {
        std::vector<Real> col(n);
        for (int i = 0; i < n; ++i) col[i] = static_cast<Real>(grid[static_cast<std::size_t>(t) * n + i]);
        frames.push_back(tape.constant({n, 1}, std::move(col)));
    }
    return frames;
}

template <typename Real>
PhysicsAdjacencyT<Real> build_dynamic_adjacency(TapeT<Real>& tape, const WindowBatch& batch,
                                                const GraphOperators& ops,
                                                ModelParamsT<Real>& params) {
    const int n = batch.n_nodes;
    // Window-mean wind per node drives this window's advection operator.
    std::vector<Real> wind(static_cast<std::size_t>(n) * 2, Real(0));
    for (int i = 0; i < n; ++i) {
        double su = 0.0, sv = 0.0;
        for (int t = 0; t < batch.window; ++t) {
            su += batch.wind_u[static_cast<std::size_t>(t) * n + i];
            sv += batch.wind_v[static_cast<std::size_t>(t) * n + i];
        }
        wind[static_cast<std::size_t>(i) * 2] = static_cast<Real>(su / batch.window);
        wind[static_cast<std::size_t>(i) * 2 + 1] = static_cast<Real>(sv / batch.window);
    }
    auto wind_const = tape.constant({n, 2}, std::move(wind));

    auto p = wind_field_embed(wind_const, tape.leaf(params.at("windfield.w1")),
                              tape.leaf(params.at("windfield.b1")),
                              tape.leaf(params.at("windfield.w2")),
                              tape.leaf(params.at("windfield.b2")));
    auto adv = advection_adjacency(p, matrix_constant(tape, ops.edge_mask));
    return fuse_physics(adv.w_adv, matrix_constant(tape, ops.w_diff),
                        tape.leaf(params.at("mu_raw")));
}

template <typename Real>
std::vector<TensorT<Real>> stgc_layer(const std::vector<TensorT<Real>>& z_frames,
                                      TensorT<Real> w_phy_minus, TensorT<Real> w_prev,
                                      TensorT<Real> w_self, TensorT<Real> w_next,
                                      TensorT<Real> bias) {
    if (z_frames.empty()) throw std::invalid_argument("stgc_layer: no frames");
    TapeT<Real>& tape = *w_phy_minus.tape();
    const int n = w_phy_minus.rows();
    for (int i = 0; i < n; ++i)
        if (w_phy_minus.data()[static_cast<std::size_t>(i) * n + i] != Real(0))
            throw std::logic_error("stgc_layer: adjacency has self-loops");

    // Row-normalize by absolute row sums; advection entries can be negative.
    auto ones_col = tape.constant({n, 1}, std::vector<Real>(n, Real(1)));
    auto row_sums = matmul(abs_op(w_phy_minus), ones_col);
    auto a_norm = div(w_phy_minus, row_sums);

    const int window = static_cast<int>(z_frames.size());
    std::vector<TensorT<Real>> agg;
    agg.reserve(window);
    for (int t = 0; t < window; ++t) agg.push_back(matmul(a_norm, z_frames[t]));

    std::vector<TensorT<Real>> out;
    out.reserve(window);
    for (int t = 0; t < window; ++t) {
        const auto& prev = agg[t > 0 ? t - 1 : 0];
        const auto& next = agg[t < window - 1 ? t + 1 : window - 1];
        auto mixed = add(add(matmul(prev, w_prev), matmul(agg[t], w_self)),
                         matmul(next, w_next));
        out.push_back(relu(add(mixed, bias)));
    }
    return out;
}

template <typename Real>
std::vector<TensorT<Real>> model_forward_frames(TapeT<Real>& tape,
                                                const std::vector<TensorT<Real>>& x_frames,
                                                const std::vector<TensorT<Real>>& mask_frames,
                                                const PhysicsAdjacencyT<Real>& adjacency,
                                                ModelParamsT<Real>& params,
                                                const ModelConfig& cfg) {
    if (x_frames.size() != mask_frames.size())
        throw std::invalid_argument("model_forward_frames: frame count mismatch");
    const int window = static_cast<int>(x_frames.size());

    auto wx = tape.leaf(params.at("embed.wx"));
    auto wm = tape.leaf(params.at("embed.wm"));
    auto be = tape.leaf(params.at("embed.b"));

    std::vector<TensorT<Real>> z;
    z.reserve(window);
    for (int t = 0; t < window; ++t)
        z.push_back(add(add(matmul(x_frames[t], wx), matmul(mask_frames[t], wm)), be));

    for (int l = 0; l < cfg.layers; ++l) {
        const std::string base = "stgc" + std::to_string(l);
        z = stgc_layer(z, adjacency.w_phy_minus, tape.leaf(params.at(base + ".w_prev")),
                       tape.leaf(params.at(base + ".w_self")),
                       tape.leaf(params.at(base + ".w_next")), tape.leaf(params.at(base + ".b")));
    }

    auto wr = tape.leaf(params.at("readout.w"));
    auto br = tape.leaf(params.at("readout.b"));
    std::vector<TensorT<Real>> out;
    out.reserve(window);
    for (int t = 0; t < window; ++t) out.push_back(add(matmul(z[t], wr), br));
    return out;
}

template <typename Real>
ForwardResultT<Real> model_forward(TapeT<Real>& tape, const WindowBatch& batch,
                                   const GraphOperators& ops, ModelParamsT<Real>& params,
                                   const ModelConfig& cfg) {
    if (batch.n_nodes != ops.w_diff.rows())
        throw std::invalid_argument("model_forward: batch/graph size mismatch");
    if (static_cast<int>(batch.x.size()) != batch.n_nodes * batch.window ||
        batch.mask.size() != batch.x.size() || batch.wind_u.size() != batch.x.size() ||
        batch.wind_v.size() != batch.x.size())
        throw std::invalid_argument("model_forward: inconsistent window buffers");

    ForwardResultT<Real> result;
    result.adjacency = build_dynamic_adjacency(tape, batch, ops, params);
    auto x_frames = window_frame_constants<Real>(tape, batch.x, batch.window, batch.n_nodes);
    auto m_frames = window_frame_constants<Real>(tape, batch.mask, batch.window, batch.n_nodes);
    result.estimates =
        model_forward_frames(tape, x_frames, m_frames, result.adjacency, params, cfg);
    return result;
}

std::vector<double> predict_window(const WindowBatch& batch, const GraphOperators& ops,
                                   ModelParamsT<float>& params, const ModelConfig& cfg) {
    TapeT<float> tape;
    auto result = model_forward(tape, batch, ops, params, cfg);
    std::vector<double> out(batch.cells(), 0.0);
    const int n = batch.n_nodes;
    for (int t = 0; t < batch.window; ++t) {
        const auto& frame = result.estimates[t].data();
        for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(t) * n + i] = frame[i];
    }
    return out;
}

#define AIRKRIG_INSTANTIATE_MODEL(Real)                                                          \
    template class ModelParamsT<Real>;                                                           \
    template PhysicsAdjacencyT<Real> build_dynamic_adjacency(TapeT<Real>&, const WindowBatch&,   \
                                                             const GraphOperators&,              \
                                                             ModelParamsT<Real>&);               \
    template std::vector<TensorT<Real>> stgc_layer(const std::vector<TensorT<Real>>&,            \
                                                   TensorT<Real>, TensorT<Real>, TensorT<Real>,  \
                                                   TensorT<Real>, TensorT<Real>);                \
    template std::vector<TensorT<Real>> model_forward_frames(                                    \
        TapeT<Real>&, const std::vector<TensorT<Real>>&, const std::vector<TensorT<Real>>&,      \
        const PhysicsAdjacencyT<Real>&, ModelParamsT<Real>&, const ModelConfig&);                \
    template ForwardResultT<Real> model_forward(TapeT<Real>&, const WindowBatch&,                \
                                                const GraphOperators&, ModelParamsT<Real>&,      \
                                                const ModelConfig&);                             \
    template std::vector<TensorT<Real>> window_frame_constants(TapeT<Real>&,                     \
                                                               const std::vector<double>&, int,  \
                                                               int);

AIRKRIG_INSTANTIATE_MODEL(float)
AIRKRIG_INSTANTIATE_MODEL(double)

#undef AIRKRIG_INSTANTIATE_MODEL

}  // namespace airkrig
