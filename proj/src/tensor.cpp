#include "airkrig/tensor.hpp"

#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace airkrig {

namespace {

std::size_t numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 0) throw std::invalid_argument("tensor: negative dimension");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

int shape_rows(const std::vector<int>& s) { return s.empty() ? 1 : s[0]; }
int shape_cols(const std::vector<int>& s) {
    if (s.size() < 2) return s.empty() ? 1 : (s.size() == 1 ? 1 : s[1]);
    return s[1];
}

template <typename Real>
Real guarded_denominator(Real b) {
    constexpr Real eps = TapeT<Real>::kDivEps;
    return b >= Real(0) ? b + eps : b - eps;
}

}  // namespace

// ---- ParamT ----

template <typename Real>
ParamT<Real>::ParamT(std::string n, std::vector<int> s) : name(std::move(n)), shape(std::move(s)) {
    const std::size_t sz = numel(shape);
    value.assign(sz, Real(0));
    // grad stays empty until backward() or zero_grad() populates it; adam_step
    // treats an empty buffer as "gradients never computed".
    m.assign(sz, Real(0));
    v.assign(sz, Real(0));
}

template <typename Real>
void ParamT<Real>::zero_grad() {
    grad.assign(value.size(), Real(0));
}

// ---- TensorT accessors ----

template <typename Real>
const std::vector<int>& TensorT<Real>::shape() const {
    return tape_->node(index_).shape;
}
template <typename Real>
std::size_t TensorT<Real>::size() const {
    return tape_->node(index_).data.size();
}
template <typename Real>
bool TensorT<Real>::requires_grad() const {
    return tape_->node(index_).requires_grad;
}
template <typename Real>
const std::vector<Real>& TensorT<Real>::data() const {
    return tape_->node(index_).data;
}
template <typename Real>
const std::vector<Real>& TensorT<Real>::grad() const {
    return tape_->node(index_).grad;
}
template <typename Real>
Real TensorT<Real>::scalar() const {
    const auto& d = data();
    if (d.size() != 1) throw std::logic_error("Tensor::scalar: not a scalar");
    return d[0];
}

// ---- TapeT construction ----

template <typename Real>
TensorT<Real> TapeT<Real>::leaf(ParamT<Real>& p) {
    Node n;
    n.op = Op::Leaf;
    n.shape = p.shape;
    n.data = p.value;
    n.requires_grad = true;
    n.param = &p;
    nodes_.push_back(std::move(n));
    return TensorT<Real>(this, node_count() - 1);
}

template <typename Real>
TensorT<Real> TapeT<Real>::constant(std::vector<int> shape, std::vector<Real> data) {
    if (numel(shape) != data.size()) throw std::invalid_argument("constant: shape/data mismatch");
    Node n;
    n.op = Op::Constant;
    n.shape = std::move(shape);
    n.data = std::move(data);
    n.requires_grad = false;
    nodes_.push_back(std::move(n));
    return TensorT<Real>(this, node_count() - 1);
}

template <typename Real>
TensorT<Real> TapeT<Real>::emit(Op op, std::vector<int> shape, int a, int b, Bcast bcast) {
    Node n;
    n.op = op;
    n.shape = std::move(shape);
    n.a = a;
    n.b = b;
    n.bcast = bcast;
    n.requires_grad = false;
    if (a >= 0 && op != Op::Detach) n.requires_grad = n.requires_grad || nodes_[a].requires_grad;
    if (b >= 0) n.requires_grad = n.requires_grad || nodes_[b].requires_grad;
    n.data.assign(numel(n.shape), Real(0));
    nodes_.push_back(std::move(n));

    Node& out = nodes_.back();
    const int idx = node_count() - 1;
    const std::vector<Real>& A = a >= 0 ? nodes_[a].data : out.data;
    const std::vector<Real>& B = b >= 0 ? nodes_[b].data : out.data;

    switch (op) {
        case Op::MatMul: {
            const int m = shape_rows(nodes_[a].shape);
            const int k = shape_cols(nodes_[a].shape);
            const int p = shape_cols(nodes_[b].shape);
            for (int i = 0; i < m; ++i) {
                Real* orow = &out.data[static_cast<std::size_t>(i) * p];
                const Real* arow = &A[static_cast<std::size_t>(i) * k];
                for (int kk = 0; kk < k; ++kk) {
                    const Real av = arow[kk];
                    if (av == Real(0)) continue;
                    const Real* brow = &B[static_cast<std::size_t>(kk) * p];
                    for (int j = 0; j < p; ++j) orow[j] += av * brow[j];
                }
            }
            break;
        }
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div: {
            const int rows = shape_rows(out.shape);
            const int cols = static_cast<int>(out.data.size()) / std::max(1, rows);
            for (int i = 0; i < rows; ++i) {
                for (int j = 0; j < cols; ++j) {
                    const std::size_t k = static_cast<std::size_t>(i) * cols + j;
                    Real bv;
                    switch (out.bcast) {
                        case Bcast::Same: bv = B[k]; break;
                        case Bcast::Scalar: bv = B[0]; break;
                        case Bcast::Row: bv = B[j]; break;
                        case Bcast::Col: bv = B[i]; break;
                        default: bv = B[k];
                    }
                    switch (op) {
                        case Op::Add: out.data[k] = A[k] + bv; break;
                        case Op::Sub: out.data[k] = A[k] - bv; break;
                        case Op::Mul: out.data[k] = A[k] * bv; break;
                        case Op::Div: out.data[k] = A[k] / guarded_denominator(bv); break;
                        default: break;
                    }
                }
            }
            break;
        }
        case Op::Tanh:
            for (std::size_t k = 0; k < A.size(); ++k) out.data[k] = std::tanh(A[k]);
            break;
        case Op::Relu:
            for (std::size_t k = 0; k < A.size(); ++k) out.data[k] = A[k] > Real(0) ? A[k] : Real(0);
            break;
        case Op::Sigmoid:
            for (std::size_t k = 0; k < A.size(); ++k) {
                const Real x = A[k];
                if (x >= Real(0)) {
                    out.data[k] = Real(1) / (Real(1) + std::exp(-x));
                } else {
                    const Real e = std::exp(x);
                    out.data[k] = e / (Real(1) + e);
                }
            }
            break;
        case Op::Abs:
            for (std::size_t k = 0; k < A.size(); ++k) out.data[k] = std::abs(A[k]);
            break;
        case Op::Sqrt:
            for (std::size_t k = 0; k < A.size(); ++k)
                out.data[k] = std::sqrt(A[k] > Real(0) ? A[k] : Real(0));
            break;
        case Op::SumAll:
        case Op::MeanAll: {
            double acc = 0.0;
            for (Real v : A) acc += static_cast<double>(v);
            if (op == Op::MeanAll) acc /= static_cast<double>(A.size());
            out.data[0] = static_cast<Real>(acc);
            break;
        }
        case Op::Reshape:
        case Op::Detach:
            out.data = A;
            break;
        case Op::Leaf:
        case Op::Constant:
            break;
    }
    return TensorT<Real>(this, idx);
}

// ---- backward ----

template <typename Real>
void TapeT<Real>::backward(const TensorT<Real>& loss) {
    if (loss.tape() != this) throw std::logic_error("backward: loss belongs to another tape");
    if (loss.size() != 1) throw std::logic_error("backward: loss must be scalar");
    if (nodes_.empty()) throw std::logic_error("backward: empty tape");

    for (auto& n : nodes_) n.grad.clear();

    auto ensure_grad = [&](int idx) -> std::vector<Real>& {
        Node& n = nodes_[idx];
        if (n.grad.empty()) n.grad.assign(n.data.size(), Real(0));
        return n.grad;
    };

    ensure_grad(loss.index())[0] = Real(1);

    for (int idx = loss.index(); idx >= 0; --idx) {
        Node& n = nodes_[idx];
        if (n.grad.empty() || !n.requires_grad) continue;
        const std::vector<Real>& g = n.grad;

        switch (n.op) {
            case Op::Leaf: {
                auto& pg = n.param->grad;
                if (pg.empty()) pg.assign(n.param->value.size(), Real(0));
                for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += g[k];
                break;
            }
            case Op::Constant:
            case Op::Detach:
                break;
            case Op::MatMul: {
                const Node& na = nodes_[n.a];
                const Node& nb = nodes_[n.b];
                const int m = shape_rows(na.shape);
                const int k = shape_cols(na.shape);
                const int p = shape_cols(nb.shape);
                if (na.requires_grad) {
                    auto& ga = ensure_grad(n.a);
                    // ga += g * b^T
                    for (int i = 0; i < m; ++i) {
                        const Real* grow = &g[static_cast<std::size_t>(i) * p];
                        Real* garow = &ga[static_cast<std::size_t>(i) * k];
                        for (int kk = 0; kk < k; ++kk) {
                            const Real* brow = &nb.data[static_cast<std::size_t>(kk) * p];
                            double acc = 0.0;
                            for (int j = 0; j < p; ++j) acc += static_cast<double>(grow[j]) * brow[j];
                            garow[kk] += static_cast<Real>(acc);
                        }
                    }
                }
                if (nb.requires_grad) {
                    auto& gb = ensure_grad(n.b);
                    // gb += a^T * g
                    for (int i = 0; i < m; ++i) {
                        const Real* arow = &na.data[static_cast<std::size_t>(i) * k];
                        const Real* grow = &g[static_cast<std::size_t>(i) * p];
                        for (int kk = 0; kk < k; ++kk) {
                            const Real av = arow[kk];
                            if (av == Real(0)) continue;
                            Real* gbrow = &gb[static_cast<std::size_t>(kk) * p];
                            for (int j = 0; j < p; ++j) gbrow[j] += av * grow[j];
                        }
                    }
                }
                break;
            }
            case Op::Add:
            case Op::Sub:
            case Op::Mul:
            case Op::Div: {
                const Node& na = nodes_[n.a];
                const Node& nb = nodes_[n.b];
                const int rows = shape_rows(n.shape);
                const int cols = static_cast<int>(n.data.size()) / std::max(1, rows);
                const bool wa = na.requires_grad;
                const bool wb = nb.requires_grad;
                std::vector<Real>* ga = wa ? &ensure_grad(n.a) : nullptr;
                std::vector<Real>* gb = wb ? &ensure_grad(n.b) : nullptr;
                for (int i = 0; i < rows; ++i) {
                    for (int j = 0; j < cols; ++j) {
                        const std::size_t k = static_cast<std::size_t>(i) * cols + j;
                        std::size_t kb;
                        switch (n.bcast) {
                            case Bcast::Same: kb = k; break;
                            case Bcast::Scalar: kb = 0; break;
                            case Bcast::Row: kb = static_cast<std::size_t>(j); break;
                            case Bcast::Col: kb = static_cast<std::size_t>(i); break;
                            default: kb = k;
                        }
                        const Real gv = g[k];
                        switch (n.op) {
                            case Op::Add:
                                if (wa) (*ga)[k] += gv;
                                if (wb) (*gb)[kb] += gv;
                                break;
                            case Op::Sub:
                                if (wa) (*ga)[k] += gv;
                                if (wb) (*gb)[kb] -= gv;
                                break;
                            case Op::Mul:
                                if (wa) (*ga)[k] += gv * nb.data[kb];
                                if (wb) (*gb)[kb] += gv * na.data[k];
                                break;
                            case Op::Div: {
                                const Real bh = guarded_denominator(nb.data[kb]);
                                if (wa) (*ga)[k] += gv / bh;
                                if (wb) (*gb)[kb] -= gv * na.data[k] / (bh * bh);
                                break;
                            }
                            default: break;
                        }
                    }
                }
                break;
            }
            case Op::Tanh: {
                auto& ga = ensure_grad(n.a);
                for (std::size_t k = 0; k < g.size(); ++k) {
                    const Real y = n.data[k];
                    ga[k] += g[k] * (Real(1) - y * y);
                }
                break;
            }
            case Op::Relu: {
                auto& ga = ensure_grad(n.a);
                const auto& x = nodes_[n.a].data;
                for (std::size_t k = 0; k < g.size(); ++k)
                    if (x[k] > Real(0)) ga[k] += g[k];
                break;
            }
            case Op::Sigmoid: {
                auto& ga = ensure_grad(n.a);
                for (std::size_t k = 0; k < g.size(); ++k) {
                    const Real y = n.data[k];
                    ga[k] += g[k] * y * (Real(1) - y);
                }
                break;
            }
            case Op::Abs: {
                auto& ga = ensure_grad(n.a);
                const auto& x = nodes_[n.a].data;
                for (std::size_t k = 0; k < g.size(); ++k) {
                    if (x[k] > Real(0)) ga[k] += g[k];
                    else if (x[k] < Real(0)) ga[k] -= g[k];
                }
                break;
            }
            case Op::Sqrt: {
                auto& ga = ensure_grad(n.a);
                constexpr Real eps = static_cast<Real>(1e-6);
                for (std::size_t k = 0; k < g.size(); ++k) {
                    const Real s = n.data[k] > eps ? n.data[k] : eps;
                    ga[k] += g[k] * Real(0.5) / s;
                }
                break;
            }
            case Op::SumAll: {
                auto& ga = ensure_grad(n.a);
                const Real gv = g[0];
                for (auto& v : ga) v += gv;
                break;
            }
            case Op::MeanAll: {
                auto& ga = ensure_grad(n.a);
                const Real gv = g[0] / static_cast<Real>(ga.size());
                for (auto& v : ga) v += gv;
                break;
            }
            case Op::Reshape: {
                auto& ga = ensure_grad(n.a);
                for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k];
                break;
            }
        }

        // Only inputs of later nodes matter; nodes after the loss never
        // received gradient and were skipped via the empty-grad check.
    }
}

// ---- free functions ----

namespace {

template <typename Real>
void require_same_tape(const TensorT<Real>& a, const TensorT<Real>& b, const char* op) {
    if (!a.valid() || !b.valid() || a.tape() != b.tape())
        throw std::logic_error(std::string(op) + ": operands on different tapes");
}

template <typename Real>
Bcast deduce_bcast(const TensorT<Real>& a, const TensorT<Real>& b, const char* op) {
    if (a.shape() == b.shape()) return Bcast::Same;
    if (b.size() == 1) return Bcast::Scalar;
    const int ar = a.rows(), ac = a.cols();
    const int br = b.rows(), bc = b.cols();
    if (br == 1 && bc == ac) return Bcast::Row;
    if (bc == 1 && br == ar) return Bcast::Col;
    throw std::invalid_argument(std::string(op) + ": incompatible shapes");
}

template <typename Real>
TensorT<Real> binary(Op op, TensorT<Real> a, TensorT<Real> b, const char* name) {
    require_same_tape(a, b, name);
    const Bcast bc = deduce_bcast(a, b, name);
    return a.tape()->emit(op, a.shape(), a.index(), b.index(), bc);
}

}  // namespace

template <typename Real>
TensorT<Real> matmul(TensorT<Real> a, TensorT<Real> b) {
    require_same_tape(a, b, "matmul");
    const auto& sa = a.shape();
    const auto& sb = b.shape();
    if (sa.size() != 2 || sb.size() != 2)
        throw std::invalid_argument("matmul: operands must be rank-2");
    if (sa[1] != sb[0]) throw std::invalid_argument("matmul: inner dimensions disagree");
    return a.tape()->emit(Op::MatMul, {sa[0], sb[1]}, a.index(), b.index(), Bcast::Same);
}

template <typename Real> TensorT<Real> add(TensorT<Real> a, TensorT<Real> b) { return binary(Op::Add, a, b, "add"); }
template <typename Real> TensorT<Real> sub(TensorT<Real> a, TensorT<Real> b) { return binary(Op::Sub, a, b, "sub"); }
template <typename Real> TensorT<Real> mul(TensorT<Real> a, TensorT<Real> b) { return binary(Op::Mul, a, b, "mul"); }
template <typename Real> TensorT<Real> div(TensorT<Real> a, TensorT<Real> b) { return binary(Op::Div, a, b, "div"); }

namespace {
template <typename Real>
TensorT<Real> unary(Op op, TensorT<Real> x) {
    return x.tape()->emit(op, x.shape(), x.index(), -1, Bcast::Same);
}
}  // namespace

template <typename Real> TensorT<Real> tanh_op(TensorT<Real> x) { return unary(Op::Tanh, x); }
template <typename Real> TensorT<Real> relu(TensorT<Real> x) { return unary(Op::Relu, x); }
template <typename Real> TensorT<Real> sigmoid(TensorT<Real> x) { return unary(Op::Sigmoid, x); }
template <typename Real> TensorT<Real> abs_op(TensorT<Real> x) { return unary(Op::Abs, x); }
template <typename Real> TensorT<Real> sqrt_op(TensorT<Real> x) { return unary(Op::Sqrt, x); }

template <typename Real>
TensorT<Real> sum_all(TensorT<Real> x) {
    return x.tape()->emit(Op::SumAll, {1}, x.index(), -1, Bcast::Same);
}
template <typename Real>
TensorT<Real> mean_all(TensorT<Real> x) {
    if (x.size() == 0) throw std::invalid_argument("mean_all: empty tensor");
    return x.tape()->emit(Op::MeanAll, {1}, x.index(), -1, Bcast::Same);
}

template <typename Real>
TensorT<Real> reshape(TensorT<Real> x, std::vector<int> shape) {
    if (numel(shape) != x.size()) throw std::invalid_argument("reshape: element count mismatch");
    return x.tape()->emit(Op::Reshape, std::move(shape), x.index(), -1, Bcast::Same);
}

template <typename Real>
TensorT<Real> detach(TensorT<Real> x) {
    return x.tape()->emit(Op::Detach, x.shape(), x.index(), -1, Bcast::Same);
}

template <typename Real>
TensorT<Real> apply_mask(TensorT<Real> x, TensorT<Real> mask) {
    return mul(x, mask);
}

template <typename Real>
TensorT<Real> masked_mae(TensorT<Real> pred, TensorT<Real> target, TensorT<Real> mask, Real count) {
    if (count <= Real(0)) throw std::invalid_argument("masked_mae: empty index set");
    auto err = apply_mask(abs_op(sub(pred, target)), mask);
    auto total = sum_all(err);
    return mul(total, pred.tape()->scalar_constant(Real(1) / count));
}

// ---- optimizer ----

template <typename Real>
void adam_step(std::vector<ParamT<Real>*>& params, Real lr, Real beta1, Real beta2, Real eps,
               std::int64_t t) {
    if (t < 1) throw std::logic_error("adam_step: step count must be >= 1");
    const double bc1 = 1.0 - std::pow(static_cast<double>(beta1), static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(static_cast<double>(beta2), static_cast<double>(t));
    for (ParamT<Real>* p : params) {
        if (p->grad.empty())
            throw std::logic_error("adam_step: gradients not populated for " + p->name);
        for (std::size_t k = 0; k < p->value.size(); ++k) {
            const Real g = p->grad[k];
            p->m[k] = beta1 * p->m[k] + (Real(1) - beta1) * g;
            p->v[k] = beta2 * p->v[k] + (Real(1) - beta2) * g * g;
            const Real mhat = static_cast<Real>(p->m[k] / bc1);
            const Real vhat = static_cast<Real>(p->v[k] / bc2);
            p->value[k] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

template <typename Real>
double clip_gradients(std::vector<ParamT<Real>*>& params, double max_norm) {
    double sq = 0.0;
    for (ParamT<Real>* p : params)
        for (Real g : p->grad) sq += static_cast<double>(g) * static_cast<double>(g);
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const Real scale = static_cast<Real>(max_norm / norm);
        for (ParamT<Real>* p : params)
            for (Real& g : p->grad) g *= scale;
    }
    return norm;
}

// ---- explicit instantiation ----

#define AIRKRIG_INSTANTIATE_ENGINE(Real)                                               \
    template struct ParamT<Real>;                                                      \
    template class TensorT<Real>;                                                      \
    template class TapeT<Real>;                                                        \
    template TensorT<Real> matmul(TensorT<Real>, TensorT<Real>);                       \
    template TensorT<Real> add(TensorT<Real>, TensorT<Real>);                          \
    template TensorT<Real> sub(TensorT<Real>, TensorT<Real>);                          \
    template TensorT<Real> mul(TensorT<Real>, TensorT<Real>);                          \
    template TensorT<Real> div(TensorT<Real>, TensorT<Real>);                          \
    template TensorT<Real> tanh_op(TensorT<Real>);                                     \
    template TensorT<Real> relu(TensorT<Real>);                                        \
    template TensorT<Real> sigmoid(TensorT<Real>);                                     \
    template TensorT<Real> abs_op(TensorT<Real>);                                      \
    template TensorT<Real> sqrt_op(TensorT<Real>);                                     \
    template TensorT<Real> sum_all(TensorT<Real>);                                     \
    template TensorT<Real> mean_all(TensorT<Real>);                                    \
    template TensorT<Real> reshape(TensorT<Real>, std::vector<int>);                   \
    template TensorT<Real> detach(TensorT<Real>);                                      \
    template TensorT<Real> apply_mask(TensorT<Real>, TensorT<Real>);                   \
    template TensorT<Real> masked_mae(TensorT<Real>, TensorT<Real>, TensorT<Real>, Real); \
    template void adam_step(std::vector<ParamT<Real>*>&, Real, Real, Real, Real, std::int64_t); \
    template double clip_gradients(std::vector<ParamT<Real>*>&, double);

AIRKRIG_INSTANTIATE_ENGINE(float)
AIRKRIG_INSTANTIATE_ENGINE(double)

#undef AIRKRIG_INSTANTIATE_ENGINE

}  // namespace airkrig
