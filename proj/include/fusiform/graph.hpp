#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "fusiform/tensor.hpp"

namespace fusiform {

template <typename T>
class Graph;

/// Handle to a node recorded on a Graph.
template <typename T>
struct BasicVar {
    Graph<T>* graph = nullptr;
    std::size_t id = 0;

    const BasicTensor<T>& value() const;
    const Shape& shape() const { return value().shape(); }
};

/// When enabled, every op output is scanned for NaN/Inf. Defaults to on in
/// builds without NDEBUG.
void set_finite_checks(bool enabled);
bool finite_checks_enabled();

/// Tape of forward values and backward closures.
///
/// Nodes are appended in topological order, so backward is a single reverse
/// sweep. Parameter leaves accumulate into `BasicParameter::grad` when
/// trainable; frozen parameters are treated as constants.
template <typename T>
class Graph {
public:
    using value_type = T;
    using Var = BasicVar<T>;
    using TensorT = BasicTensor<T>;
    using Backward = std::function<void(Graph&, std::size_t self)>;

    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Var input(TensorT value, bool requires_grad = false);
    Var parameter(BasicParameter<T>& param);

    const TensorT& value(Var v) const { return nodes_.at(v.id).value; }
    /// Gradient of the last backward() target w.r.t. `v`. Empty if `v` did not
    /// require a gradient.
    const TensorT& grad(Var v) const { return nodes_.at(v.id).grad; }
    bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Reverse sweep from a scalar loss. Node gradients are recomputed from
    /// scratch on every call; parameter gradients accumulate.
    void backward(Var loss);

    // Used by op implementations.
    Var record(TensorT value, std::vector<std::size_t> parents, Backward backward, const char* op);
    TensorT& grad_mut(std::size_t id);
    const std::vector<std::size_t>& parents(std::size_t id) const { return nodes_[id].parents; }

private:
    struct Node {
        TensorT value;
        TensorT grad;
        std::vector<std::size_t> parents;
        Backward backward;
        BasicParameter<T>* param = nullptr;
        bool requires_grad = false;
    };

    std::deque<Node> nodes_;  // stable references across push_back
};

template <typename T>
const BasicTensor<T>& BasicVar<T>::value() const
{
    return graph->value(*this);
}

using Var = BasicVar<float>;

// ---------------------------------------------------------------------------
// Layer ops. All record a node and return its handle.

/// 2-D cross-correlation. input [N,C,H,W], kernel [Co,C,K,K].
template <typename T>
BasicVar<T> conv2d(BasicVar<T> input, BasicVar<T> kernel, int stride, int padding);

/// Transposed convolution. input [N,A,H,W], kernel [A,B,K,K] -> [N,B,H',W'] with
/// H' = (H-1)*stride - 2*padding + K. Equals the input-gradient of conv2d.
template <typename T>
BasicVar<T> conv_transpose2d(BasicVar<T> input, BasicVar<T> kernel, int stride, int padding);

/// Per-channel bias for NCHW tensors. bias [C].
template <typename T>
BasicVar<T> add_channel_bias(BasicVar<T> input, BasicVar<T> bias);

/// input [N,D] x weights [D,M] + bias [M].
template <typename T>
BasicVar<T> dense(BasicVar<T> input, BasicVar<T> weights, BasicVar<T> bias);

template <typename T>
BasicVar<T> relu(BasicVar<T> x);

template <typename T>
BasicVar<T> sigmoid(BasicVar<T> x);

/// [N,C,H,W] -> [N,C], mean over the spatial plane.
template <typename T>
BasicVar<T> global_avg_pool(BasicVar<T> input);

template <typename T>
BasicVar<T> reshape(BasicVar<T> x, Shape shape);

template <typename T>
BasicVar<T> sub(BasicVar<T> a, BasicVar<T> b);

template <typename T>
BasicVar<T> mul(BasicVar<T> a, BasicVar<T> b);

template <typename T>
BasicVar<T> abs(BasicVar<T> x);

/// Concatenate rank-2 tensors [N,Di] along the feature axis.
template <typename T>
BasicVar<T> concat(std::span<const BasicVar<T>> parts);

/// Sum of all elements -> shape [1].
template <typename T>
BasicVar<T> sum(BasicVar<T> x);

/// Pixel-wise reconstruction error: per sample, squared differences summed
/// over channels, averaged over the h*w pixel grid; then averaged over the
/// batch. Accepts [N,C,H,W] or [C,H,W].
template <typename T>
BasicVar<T> mse_pixel_loss(BasicVar<T> original, BasicVar<T> reconstruction);

inline constexpr double kBceClamp = 1e-7;

/// Mean binary cross-entropy. prediction: N probabilities (any shape with N
/// elements); labels: N values in {0,1}. Predictions are clamped to
/// [1e-7, 1-1e-7].
template <typename T>
BasicVar<T> bce_loss(BasicVar<T> prediction, BasicVar<T> labels);

/// Mean softmax cross-entropy. logits [N,K], labels N class indices.
template <typename T>
BasicVar<T> softmax_cross_entropy(BasicVar<T> logits, std::span<const int> labels);

/// Output spatial extent of a conv2d along one axis.
std::size_t conv_out_extent(std::size_t in, std::size_t kernel, int stride, int padding);
/// Output spatial extent of a conv_transpose2d along one axis.
std::size_t conv_transpose_out_extent(std::size_t in, std::size_t kernel, int stride, int padding);

}  // namespace fusiform
