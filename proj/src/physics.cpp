#include "airkrig/physics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace airkrig {

Matrix diffusion_adjacency(const Matrix& w_d, double k) {
    if (!w_d.square()) throw std::invalid_argument("diffusion_adjacency: non-square input");
    if (k <= 0.0) throw std::invalid_argument("diffusion_adjacency: k must be > 0");
    const int n = w_d.rows();

    std::vector<double> inv_sqrt_deg(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double d = 0.0;
        for (int j = 0; j < n; ++j) {
            if (w_d(i, j) < 0.0)
                throw std::invalid_argument("diffusion_adjacency: negative adjacency entry");
            d += w_d(i, j);
        }
        if (d > 0.0) inv_sqrt_deg[i] = 1.0 / std::sqrt(d);
    }

    Matrix out(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double s = inv_sqrt_deg[i] * w_d(i, j) * inv_sqrt_deg[j];
            out(i, j) = k * ((i == j ? 1.0 : 0.0) - s);
        }
    }
    return out;
}

Matrix advection_flux_operator(const Matrix& rates) {
    if (!rates.square()) throw std::invalid_argument("advection_flux_operator: non-square input");
    const int n = rates.rows();
    Matrix out(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            const double r = rates(i, j);
            if (r < 0.0) throw std::invalid_argument("advection_flux_operator: negative rate");
            out(i, i) += r;       // outflow i -> j drains node i
            out(j, i) -= r;       // and feeds node j
        }
    }
    return out;
}

std::vector<std::vector<double>> integrate_advection_diffusion(
    const std::vector<double>& x0, const Matrix& w_diff, const Matrix& w_adv_flux, int steps,
    double dt) {
    if (dt <= 0.0) throw std::invalid_argument("integrate_advection_diffusion: dt must be > 0");
    if (steps < 0) throw std::invalid_argument("integrate_advection_diffusion: steps must be >= 0");
    const int n = static_cast<int>(x0.size());
    if (w_diff.rows() != n || !w_diff.square() || w_adv_flux.rows() != n || !w_adv_flux.square())
        throw std::invalid_argument("integrate_advection_diffusion: operator/state size mismatch");

    const Matrix op = w_diff + w_adv_flux;
    const double row_norm = op.max_abs_row_sum();
    if (row_norm > 0.0 && dt >= 1.0 / (2.0 * row_norm)) {
        char msg[128];
        std::snprintf(msg, sizeof(msg),
                      "integrate_advection_diffusion: unstable dt=%g; require dt < %g", dt,
                      1.0 / (2.0 * row_norm));
        throw std::invalid_argument(msg);
    }

    std::vector<std::vector<double>> traj;
    traj.reserve(static_cast<std::size_t>(steps) + 1);
    traj.push_back(x0);
    std::vector<double> x = x0;
    for (int s = 0; s < steps; ++s) {
        const std::vector<double> flow = op.apply(x);
        for (int i = 0; i < n; ++i) x[i] -= dt * flow[i];
        traj.push_back(x);
    }
    return traj;
}

void write_trajectory_csv(const std::string& path,
                          const std::vector<std::vector<double>>& trajectory,
                          const std::vector<std::string>& node_ids) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write trajectory file: " + path);
    out << "step,node_id,value\n";
    char buf[48];
    for (std::size_t s = 0; s < trajectory.size(); ++s) {
        const auto& state = trajectory[s];
        for (std::size_t i = 0; i < state.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.8f", state[i]);
            out << s << ',' << node_ids[i] << ',' << buf << '\n';
        }
    }
}

// ---- tape side ----

template <typename Real>
TensorT<Real> wind_field_embed(TensorT<Real> wind_uv, TensorT<Real> w1, TensorT<Real> b1,
                               TensorT<Real> w2, TensorT<Real> b2) {
    for (Real v : wind_uv.data())
        if (!std::isfinite(static_cast<double>(v)))
            throw std::runtime_error("wind_field_embed: non-finite wind input");
    auto hidden = tanh_op(add(matmul(wind_uv, w1), b1));
    return add(matmul(hidden, w2), b2);
}

template <typename Real>
AdvectionTensors<Real> advection_adjacency(TensorT<Real> p, TensorT<Real> edge_mask) {
    TapeT<Real>& tape = *p.tape();
    const int n = p.rows();
    if (p.cols() != 1) throw std::invalid_argument("advection_adjacency: p must be a column");
    if (edge_mask.rows() != n || edge_mask.cols() != n)
        throw std::invalid_argument("advection_adjacency: edge mask size mismatch");

    auto ones_row = tape.constant({1, n}, std::vector<Real>(n, Real(1)));
    auto ones_col = tape.constant({n, 1}, std::vector<Real>(n, Real(1)));

    // p_i - p_j via two rank-1 products, masked to existing edges.
    auto p_broadcast = matmul(p, ones_row);
    auto p_broadcast_t = matmul(ones_col, reshape(p, {1, n}));
    auto w_p = apply_mask(sub(p_broadcast, p_broadcast_t), edge_mask);

    auto degree = matmul(abs_op(w_p), ones_col);
    auto inv_sqrt = div(ones_col, sqrt_op(degree));
    auto scaled = mul(mul(w_p, inv_sqrt), reshape(inv_sqrt, {1, n}));

    std::vector<Real> eye(static_cast<std::size_t>(n) * n, Real(0));
    for (int i = 0; i < n; ++i) eye[static_cast<std::size_t>(i) * n + i] = Real(1);
    auto identity = tape.constant({n, n}, std::move(eye));

    AdvectionTensors<Real> out;
    out.w_p = w_p;
    out.w_adv = sub(identity, scaled);
    return out;
}

template <typename Real>
PhysicsAdjacencyT<Real> fuse_physics(TensorT<Real> w_adv, TensorT<Real> w_diff,
                                     TensorT<Real> mu_raw) {
    if (w_adv.shape() != w_diff.shape())
        throw std::invalid_argument("fuse_physics: operator shape mismatch");
    if (mu_raw.size() != 1) throw std::invalid_argument("fuse_physics: mu_raw must be scalar");
    TapeT<Real>& tape = *w_adv.tape();
    const int n = w_adv.rows();

    auto mu = sigmoid(mu_raw);
    auto one_minus_mu = sub(tape.scalar_constant(Real(1)), mu);
    auto w_phy = add(mul(w_adv, mu), mul(w_diff, one_minus_mu));

    std::vector<Real> hollow(static_cast<std::size_t>(n) * n, Real(1));
    for (int i = 0; i < n; ++i) hollow[static_cast<std::size_t>(i) * n + i] = Real(0);
    auto hollow_mask = tape.constant({n, n}, std::move(hollow));

    PhysicsAdjacencyT<Real> out;
    out.w_diff = w_diff;
    out.w_adv = w_adv;
    out.mu = mu;
    out.w_phy = w_phy;
    out.w_phy_minus = apply_mask(w_phy, hollow_mask);
    return out;
}

#define AIRKRIG_INSTANTIATE_PHYSICS(Real)                                                        \
    template TensorT<Real> wind_field_embed(TensorT<Real>, TensorT<Real>, TensorT<Real>,         \
                                            TensorT<Real>, TensorT<Real>);                       \
    template AdvectionTensors<Real> advection_adjacency(TensorT<Real>, TensorT<Real>);           \
    template PhysicsAdjacencyT<Real> fuse_physics(TensorT<Real>, TensorT<Real>, TensorT<Real>);

AIRKRIG_INSTANTIATE_PHYSICS(float)
AIRKRIG_INSTANTIATE_PHYSICS(double)

#undef AIRKRIG_INSTANTIATE_PHYSICS

}  // namespace airkrig
