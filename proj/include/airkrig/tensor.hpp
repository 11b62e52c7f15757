#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace airkrig {

/// Named parameter tensor with persistent gradient and Adam moment buffers.
/// Parameters outlive tapes; a tape binds them through leaf nodes and
/// accumulates into `grad` on backward.
template <typename Real>
struct ParamT {
    std::string name;
    std::vector<int> shape;
    std::vector<Real> value;
    std::vector<Real> grad;
    std::vector<Real> m;  ///< Adam first moment
    std::vector<Real> v;  ///< Adam second moment

    ParamT() = default;
    ParamT(std::string n, std::vector<int> s);

    std::size_t size() const { return value.size(); }
    void zero_grad();
};

enum class Op : std::uint8_t {
    Leaf,
    Constant,
    MatMul,
    Add,
    Sub,
    Mul,
    Div,
    Tanh,
    Relu,
    Sigmoid,
    Abs,
    Sqrt,
    SumAll,
    MeanAll,
    Reshape,
    Detach,
};

/// Broadcast form of the right-hand operand in binary elementwise ops.
enum class Bcast : std::uint8_t {
    Same,     ///< identical shapes
    Scalar,   ///< rhs is a single element
    Row,      ///< rhs is 1 x cols, broadcast over rows
    Col,      ///< rhs is rows x 1, broadcast over columns
};

template <typename Real>
class TapeT;

/// Lightweight handle to a node on a tape. Copyable; validity is tied to the
/// owning tape's lifetime.
template <typename Real>
class TensorT {
public:
    TensorT() = default;
    TensorT(TapeT<Real>* tape, int index) : tape_(tape), index_(index) {}

    bool valid() const { return tape_ != nullptr; }
    TapeT<Real>* tape() const { return tape_; }
    int index() const { return index_; }

    const std::vector<int>& shape() const;
    int rows() const { return shape().at(0); }
    int cols() const { return shape().size() > 1 ? shape()[1] : 1; }
    std::size_t size() const;
    bool requires_grad() const;

    const std::vector<Real>& data() const;
    /// Gradient buffer after backward(); empty if the node needs no grad.
    const std::vector<Real>& grad() const;

    Real scalar() const;

private:
    TapeT<Real>* tape_ = nullptr;
    int index_ = -1;
};

/// Records the forward computation as a topologically ordered list of
/// primitive nodes; backward() replays it in reverse exactly once per node.
template <typename Real>
class TapeT {
public:
    struct Node {
        Op op = Op::Constant;
        Bcast bcast = Bcast::Same;
        std::vector<int> shape;
        std::vector<Real> data;
        std::vector<Real> grad;
        bool requires_grad = false;
        int a = -1;
        int b = -1;
        ParamT<Real>* param = nullptr;
    };

    TapeT() = default;
    TapeT(const TapeT&) = delete;
    TapeT& operator=(const TapeT&) = delete;

    int node_count() const { return static_cast<int>(nodes_.size()); }
    const Node& node(int i) const { return nodes_[i]; }
    Node& node(int i) { return nodes_[i]; }

    /// Leaf bound to a persistent parameter (copies its current value in).
    TensorT<Real> leaf(ParamT<Real>& p);
    /// Constant input; never receives gradient.
    TensorT<Real> constant(std::vector<int> shape, std::vector<Real> data);
    TensorT<Real> scalar_constant(Real v) { return constant({1}, {v}); }

    /// Runs reverse-mode accumulation from a scalar loss. Parameter gradients
    /// accumulate into their ParamT::grad buffers (repeated calls add up).
    void backward(const TensorT<Real>& loss);

    // Internal: op construction used by the free functions below.
    TensorT<Real> emit(Op op, std::vector<int> shape, int a, int b, Bcast bcast);

    static constexpr Real kDivEps = static_cast<Real>(1e-6);

private:
    std::vector<Node> nodes_;
};

using Tensor = TensorT<float>;
using Tape = TapeT<float>;
using Param = ParamT<float>;

// ---- primitive ops (free functions; operands must share a tape) ----
template <typename Real> TensorT<Real> matmul(TensorT<Real> a, TensorT<Real> b);
template <typename Real> TensorT<Real> add(TensorT<Real> a, TensorT<Real> b);
template <typename Real> TensorT<Real> sub(TensorT<Real> a, TensorT<Real> b);
template <typename Real> TensorT<Real> mul(TensorT<Real> a, TensorT<Real> b);
/// Elementwise division with an epsilon-guarded denominator.
template <typename Real> TensorT<Real> div(TensorT<Real> a, TensorT<Real> b);
template <typename Real> TensorT<Real> tanh_op(TensorT<Real> x);
template <typename Real> TensorT<Real> relu(TensorT<Real> x);
template <typename Real> TensorT<Real> sigmoid(TensorT<Real> x);
template <typename Real> TensorT<Real> abs_op(TensorT<Real> x);
/// sqrt(max(x,0)) with a guarded derivative at 0.
template <typename Real> TensorT<Real> sqrt_op(TensorT<Real> x);
template <typename Real> TensorT<Real> sum_all(TensorT<Real> x);
template <typename Real> TensorT<Real> mean_all(TensorT<Real> x);
template <typename Real> TensorT<Real> reshape(TensorT<Real> x, std::vector<int> shape);
/// Identity forward; blocks gradient flow.
template <typename Real> TensorT<Real> detach(TensorT<Real> x);
/// Keeps entries where mask is nonzero, zeroes the rest (mask is constant data).
template <typename Real> TensorT<Real> apply_mask(TensorT<Real> x, TensorT<Real> mask);

/// Sum and mean of |a - b| over entries selected by a 0/1 constant mask.
template <typename Real>
TensorT<Real> masked_mae(TensorT<Real> pred, TensorT<Real> target, TensorT<Real> mask, Real count);

/// One Adam step with bias correction over a parameter set; `t` is the
/// 1-based step count. Throws if a parameter's gradient was never populated.
template <typename Real>
void adam_step(std::vector<ParamT<Real>*>& params, Real lr, Real beta1, Real beta2, Real eps,
               std::int64_t t);

/// Global-norm gradient clipping; returns the pre-clip norm.
template <typename Real>
double clip_gradients(std::vector<ParamT<Real>*>& params, double max_norm);

}  // namespace airkrig
