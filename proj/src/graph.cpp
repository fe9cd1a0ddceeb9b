#include "fusiform/graph.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "kernels.hpp"

namespace fusiform {

std::string shape_str(const Shape& shape)
{
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_numel(const Shape& shape)
{
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

ShapeError::ShapeError(const std::string& what, const Shape& lhs, const Shape& rhs)
  : std::invalid_argument(what + ": " + shape_str(lhs) + " vs " + shape_str(rhs))
{ }

namespace {

#ifdef NDEBUG
std::atomic<bool> g_finite_checks{false};
#else
std::atomic<bool> g_finite_checks{true};
#endif

template <typename T>
void check_same_graph(const BasicVar<T>& a, const BasicVar<T>& b)
{
    if (a.graph == nullptr || a.graph != b.graph) {
        throw UsageError("operands belong to different graphs");
    }
}

}  // namespace

void set_finite_checks(bool enabled) { g_finite_checks.store(enabled); }
bool finite_checks_enabled() { return g_finite_checks.load(); }

std::size_t conv_out_extent(std::size_t in, std::size_t kernel, int stride, int padding)
{
    const long span = static_cast<long>(in) + 2L * padding - static_cast<long>(kernel);
    if (stride < 1 || padding < 0 || span < 0) return 0;
    return static_cast<std::size_t>(span / stride + 1);
}

std::size_t conv_transpose_out_extent(std::size_t in, std::size_t kernel, int stride, int padding)
{
    const long out = (static_cast<long>(in) - 1) * stride - 2L * padding + static_cast<long>(kernel);
    if (stride < 1 || padding < 0 || out <= 0) return 0;
    return static_cast<std::size_t>(out);
}

// ---------------------------------------------------------------------------
// Graph

template <typename T>
BasicVar<T> Graph<T>::input(TensorT value, bool requires_grad)
{
    Node node;
    node.value = std::move(value);
    node.requires_grad = requires_grad;
    nodes_.push_back(std::move(node));
    return Var{this, nodes_.size() - 1};
}

template <typename T>
BasicVar<T> Graph<T>::parameter(BasicParameter<T>& param)
{
    Node node;
    node.value = param.value;
    node.param = &param;
    node.requires_grad = param.trainable;
    nodes_.push_back(std::move(node));
    return Var{this, nodes_.size() - 1};
}

template <typename T>
BasicVar<T> Graph<T>::record(TensorT value, std::vector<std::size_t> parents, Backward backward,
                             const char* op)
{
    if (finite_checks_enabled() && !value.all_finite()) {
        throw std::domain_error(std::string("non-finite output from ") + op);
    }
    Node node;
    node.value = std::move(value);
    node.requires_grad = std::any_of(parents.begin(), parents.end(),
                                     [&](std::size_t p) { return nodes_[p].requires_grad; });
    node.parents = std::move(parents);
    if (node.requires_grad) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Var{this, nodes_.size() - 1};
}

template <typename T>
BasicTensor<T>& Graph<T>::grad_mut(std::size_t id)
{
    return nodes_[id].grad;
}

template <typename T>
void Graph<T>::backward(Var loss)
{
    if (loss.graph != this) throw UsageError("backward: loss belongs to another graph");
    const Node& target = nodes_.at(loss.id);
    if (target.value.size() != 1) {
        throw UsageError("backward requires a scalar loss, got shape " + shape_str(target.value.shape()));
    }
    for (std::size_t i = 0; i <= loss.id; ++i) {
        Node& n = nodes_[i];
        n.grad = n.requires_grad ? TensorT(n.value.shape()) : TensorT();
    }
    if (!target.requires_grad) return;
    nodes_[loss.id].grad[0] = T{1};
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.requires_grad && n.backward) n.backward(*this, i);
    }
    for (std::size_t i = 0; i <= loss.id; ++i) {
        Node& n = nodes_[i];
        if (n.param == nullptr || !n.param->trainable) continue;
        auto dst = n.param->grad.data();
        auto src = n.grad.data();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
}

// ---------------------------------------------------------------------------
// Convolutions

namespace {

template <typename T>
kernels::ConvGeom conv_geom(const Shape& x, const Shape& w, int stride, int padding, const char* op)
{
    if (x.size() != 4 || w.size() != 4) throw ShapeError(std::string(op) + " expects rank-4 input and kernel", x, w);
    if (stride < 1) throw UsageError(std::string(op) + ": stride must be >= 1");
    if (padding < 0) throw UsageError(std::string(op) + ": padding must be >= 0");
    if (w[1] != x[1]) throw ShapeError(std::string(op) + ": kernel in-channels mismatch input channels", x, w);
    kernels::ConvGeom g;
    g.c_in = x[1];
    g.h = x[2];
    g.w = x[3];
    g.c_out = w[0];
    g.kh = w[2];
    g.kw = w[3];
    g.stride = static_cast<std::size_t>(stride);
    g.pad = static_cast<std::size_t>(padding);
    g.ho = conv_out_extent(g.h, g.kh, stride, padding);
    g.wo = conv_out_extent(g.w, g.kw, stride, padding);
    if (g.ho == 0 || g.wo == 0) throw ShapeError(std::string(op) + ": kernel larger than padded input", x, w);
    return g;
}

}  // namespace

template <typename T>
BasicVar<T> conv2d(BasicVar<T> input, BasicVar<T> kernel, int stride, int padding)
{
    check_same_graph(input, kernel);
    const auto& x = input.value();
    const auto& w = kernel.value();
    const auto geom = conv_geom<T>(x.shape(), w.shape(), stride, padding, "conv2d");
    const std::size_t n = x.dim(0);
    BasicTensor<T> out(Shape{n, geom.c_out, geom.ho, geom.wo});
    kernels::conv_forward(geom, n, x.data().data(), w.data().data(), out.data().data());

    auto backward = [input, kernel, geom, n](Graph<T>& g, std::size_t self) {
        const auto& gy = g.grad(BasicVar<T>{&g, self});
        if (g.requires_grad(input)) {
            kernels::conv_backward_data(geom, n, kernel.value().data().data(), gy.data().data(),
                                        g.grad_mut(input.id).data().data());
        }
        if (g.requires_grad(kernel)) {
            kernels::conv_backward_weight(geom, n, input.value().data().data(), gy.data().data(),
                                          g.grad_mut(kernel.id).data().data());
        }
    };
    return input.graph->record(std::move(out), {input.id, kernel.id}, backward, "conv2d");
}

template <typename T>
BasicVar<T> conv_transpose2d(BasicVar<T> input, BasicVar<T> kernel, int stride, int padding)
{
    check_same_graph(input, kernel);
    const auto& x = input.value();
    const auto& w = kernel.value();
    if (x.rank() != 4 || w.rank() != 4) {
        throw ShapeError("conv_transpose2d expects rank-4 input and kernel", x.shape(), w.shape());
    }
    if (w.dim(0) != x.dim(1)) {
        throw ShapeError("conv_transpose2d: kernel in-channels mismatch input channels", x.shape(), w.shape());
    }
    if (stride < 1) throw UsageError("conv_transpose2d: stride must be >= 1");
    if (padding < 0) throw UsageError("conv_transpose2d: padding must be >= 0");
    const std::size_t oh = conv_transpose_out_extent(x.dim(2), w.dim(2), stride, padding);
    const std::size_t ow = conv_transpose_out_extent(x.dim(3), w.dim(3), stride, padding);
    if (oh == 0 || ow == 0) throw ShapeError("conv_transpose2d: empty output geometry", x.shape(), w.shape());

    // Geometry of the adjoint convolution: it maps the [B,oh,ow] output space
    // back onto the [A,h,w] input space.
    const Shape conv_in{x.dim(0), w.dim(1), oh, ow};
    const auto geom = conv_geom<T>(conv_in, w.shape(), stride, padding, "conv_transpose2d");
    if (geom.ho != x.dim(2) || geom.wo != x.dim(3)) {
        throw ShapeError("conv_transpose2d: inconsistent geometry", x.shape(), w.shape());
    }
    const std::size_t n = x.dim(0);
    BasicTensor<T> out(conv_in);
    kernels::conv_backward_data(geom, n, w.data().data(), x.data().data(), out.data().data());

    auto backward = [input, kernel, geom, n](Graph<T>& g, std::size_t self) {
        const auto& gy = g.grad(BasicVar<T>{&g, self});
        if (g.requires_grad(input)) {
            kernels::conv_forward_accumulate(geom, n, gy.data().data(), kernel.value().data().data(),
                                             g.grad_mut(input.id).data().data());
        }
        if (g.requires_grad(kernel)) {
            kernels::conv_backward_weight(geom, n, gy.data().data(), input.value().data().data(),
                                          g.grad_mut(kernel.id).data().data());
        }
    };
    return input.graph->record(std::move(out), {input.id, kernel.id}, backward, "conv_transpose2d");
}

template <typename T>
BasicVar<T> add_channel_bias(BasicVar<T> input, BasicVar<T> bias)
{
    check_same_graph(input, bias);
    const auto& x = input.value();
    const auto& b = bias.value();
    if (x.rank() != 4 || b.rank() != 1 || b.dim(0) != x.dim(1)) {
        throw ShapeError("add_channel_bias: bias must be [C] for NCHW input", x.shape(), b.shape());
    }
    const std::size_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
    BasicTensor<T> out = x;
    auto o = out.data();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            T* row = o.data() + (i * c + ch) * plane;
            const T bv = b[ch];
            for (std::size_t p = 0; p < plane; ++p) row[p] += bv;
        }
    }
    auto backward = [input, bias, n, c, plane](Graph<T>& g, std::size_t self) {
        const auto gy = g.grad(BasicVar<T>{&g, self}).data();
        if (g.requires_grad(input)) {
            auto gx = g.grad_mut(input.id).data();
            for (std::size_t k = 0; k < gx.size(); ++k) gx[k] += gy[k];
        }
        if (g.requires_grad(bias)) {
            auto gb = g.grad_mut(bias.id).data();
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const T* row = gy.data() + (i * c + ch) * plane;
                    T acc = T{0};
                    for (std::size_t p = 0; p < plane; ++p) acc += row[p];
                    gb[ch] += acc;
                }
            }
        }
    };
    return input.graph->record(std::move(out), {input.id, bias.id}, backward, "add_channel_bias");
}

template <typename T>
BasicVar<T> dense(BasicVar<T> input, BasicVar<T> weights, BasicVar<T> bias)
{
    check_same_graph(input, weights);
    check_same_graph(input, bias);
    const auto& x = input.value();
    const auto& w = weights.value();
    const auto& b = bias.value();
    if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(0)) {
        throw ShapeError("dense: input [N,D] incompatible with weights [D,M]", x.shape(), w.shape());
    }
    if (b.rank() != 1 || b.dim(0) != w.dim(1)) {
        throw ShapeError("dense: bias must be [M]", w.shape(), b.shape());
    }
    const std::size_t n = x.dim(0), d = x.dim(1), m = w.dim(1);
    BasicTensor<T> out(Shape{n, m});
    kernels::dense_forward(n, d, m, x.data().data(), w.data().data(), b.data().data(), out.data().data());

    auto backward = [input, weights, bias, n, d, m](Graph<T>& g, std::size_t self) {
        const T* gy = g.grad(BasicVar<T>{&g, self}).data().data();
        if (g.requires_grad(input)) {
            kernels::dense_backward_input(n, d, m, gy, weights.value().data().data(),
                                          g.grad_mut(input.id).data().data());
        }
        if (g.requires_grad(weights)) {
            kernels::dense_backward_weight(n, d, m, input.value().data().data(), gy,
                                           g.grad_mut(weights.id).data().data());
        }
        if (g.requires_grad(bias)) {
            T* gb = g.grad_mut(bias.id).data().data();
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < m; ++j) gb[j] += gy[i * m + j];
            }
        }
    };
    return input.graph->record(std::move(out), {input.id, weights.id, bias.id}, backward, "dense");
}

// ---------------------------------------------------------------------------
// Element-wise

template <typename T>
BasicVar<T> relu(BasicVar<T> x)
{
    BasicTensor<T> out = x.value();
    for (T& v : out.data()) v = v > T{0} ? v : T{0};
    auto backward = [x](Graph<T>& g, std::size_t self) {
        if (!g.requires_grad(x)) return;
        const auto gy = g.grad(BasicVar<T>{&g, self}).data();
        const auto xv = x.value().data();
        auto gx = g.grad_mut(x.id).data();
        for (std::size_t k = 0; k < gx.size(); ++k) {
            if (xv[k] > T{0}) gx[k] += gy[k];
        }
    };
    return x.graph->record(std::move(out), {x.id}, backward, "relu");
}

template <typename T>
BasicVar<T> sigmoid(BasicVar<T> x)
{
    // Clamped so the output stays strictly inside (0, 1) even where exp
    // saturates in finite precision.
    constexpr T lo = std::numeric_limits<T>::min();
    constexpr T hi = T{1} - std::numeric_limits<T>::epsilon() / T{2};
    BasicTensor<T> out = x.value();
    for (T& v : out.data()) {
        T s;
        if (v >= T{0}) {
            s = T{1} / (T{1} + std::exp(-v));
        } else {
            const T e = std::exp(v);
            s = e / (T{1} + e);
        }
        v = std::clamp(s, lo, hi);
    }
    auto backward = [x](Graph<T>& g, std::size_t self) {
        if (!g.requires_grad(x)) return;
        const auto gy = g.grad(BasicVar<T>{&g, self}).data();
        const auto y = g.value(BasicVar<T>{&g, self}).data();
        auto gx = g.grad_mut(x.id).data();
        for (std::size_t k = 0; k < gx.size(); ++k) gx[k] += gy[k] * y[k] * (T{1} - y[k]);
    };
    return x.graph->record(std::move(out), {x.id}, backward, "sigmoid");
}

template <typename T>
BasicVar<T> abs(BasicVar<T> x)
{
    BasicTensor<T> out = x.value();
    for (T& v : out.data()) v = std::abs(v);
    auto backward = [x](Graph<T>& g, std::size_t self) {
        if (!g.requires_grad(x)) return;
        const auto gy = g.grad(BasicVar<T>{&g, self}).data();
        const auto xv = x.value().data();
        auto gx = g.grad_mut(x.id).data();
        for (std::size_t k = 0; k < gx.size(); ++k) {
            if (xv[k] > T{0}) gx[k] += gy[k];
            else if (xv[k] < T{0}) gx[k] -= gy[k];
        }
    };
    return x.graph->record(std::move(out), {x.id}, backward, "abs");
}

template <typename T>
BasicVar<T> sub(BasicVar<T> a, BasicVar<T> b)
{
    check_same_graph(a, b);
    if (a.shape() != b.shape()) throw ShapeError("sub: shape mismatch", a.shape(), b.shape());
    BasicTensor<T> out = a.value();
    const auto bv = b.value().data();
    auto o = out.data();
    for (std::size_t k = 0; k < o.size(); ++k) o[k] -= bv[k];
    auto backward = [a, b](Graph<T>& g, std::size_t self) {
        const auto gy = g.grad(BasicVar<T>{&g, self}).data();
        if (g.requires_grad(a)) {
            auto ga = g.grad_mut(a.id).data();
            for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += gy[k];
        }
        if (g.requires_grad(b)) {
            auto gb = g.grad_mut(b.id).data();
            for (std::size_t k = 0; k < gb.size(); ++k) gb[k] -= gy[k];
        }
    };
    return a.graph->record(std::move(out), {a.id, b.id}, backward, "sub");
}

template <typename T>
BasicVar<T> mul(BasicVar<T> a, BasicVar<T> b)
{
    check_same_graph(a, b);
    if (a.shape() != b.shape()) throw ShapeError("mul: shape mismatch", a.shape(), b.shape());
    BasicTensor<T> out = a.value();
    const auto bv = b.value().data();
    auto o = out.data();
    for (std::size_t k = 0; k < o.size(); ++k) o[k] *= bv[k];
    auto backward = [a, b](Graph<T>& g, std::size_t self) {
        const auto gy = g.grad(BasicVar<T>{&g, self}).data();
        if (g.requires_grad(a)) {
            const auto bv = b.value().data();
            auto ga = g.grad_mut(a.id).data();
            for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += gy[k] * bv[k];
        }
        if (g.requires_grad(b)) {
            const auto av = a.value().data();
            auto gb = g.grad_mut(b.id).data();
            for (std::size_t k = 0; k < gb.size(); ++k) gb[k] += gy[k] * av[k];
        }
    };
    return a.graph->record(std::move(out), {a.id, b.id}, backward, "mul");
}

template <typename T>
BasicVar<T> concat(std::span<const BasicVar<T>> parts)
{
    if (parts.empty()) throw UsageError("concat: no inputs");
    const std::size_t n = parts[0].value().dim(0);
    std::size_t width = 0;
    std::vector<std::size_t> widths;
    std::vector<std::size_t> ids;
    for (const auto& p : parts) {
        check_same_graph(parts[0], p);
        if (p.value().rank() != 2 || p.value().dim(0) != n) {
            throw ShapeError("concat: parts must be [N,Di] with equal N", parts[0].shape(), p.shape());
        }
        widths.push_back(p.value().dim(1));
        ids.push_back(p.id);
        width += widths.back();
    }
    BasicTensor<T> out(Shape{n, width});
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto src = parts[k].value().data();
        for (std::size_t i = 0; i < n; ++i) {
            std::copy_n(src.data() + i * widths[k], widths[k], out.data().data() + i * width + offset);
        }
        offset += widths[k];
    }
    auto backward = [ids, widths, n, width](Graph<T>& g, std::size_t self) {
        const auto gy = g.grad(BasicVar<T>{&g, self}).data();
        std::size_t offset = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            if (g.requires_grad(BasicVar<T>{&g, ids[k]})) {
                auto gp = g.grad_mut(ids[k]).data();
                for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t j = 0; j < widths[k]; ++j) gp[i * widths[k] + j] += gy[i * width + offset + j];
                }
            }
            offset += widths[k];
        }
    };
    return parts[0].graph->record(std::move(out), ids, backward, "concat");
}

template <typename T>
BasicVar<T> reshape(BasicVar<T> x, Shape shape)
{
    BasicTensor<T> out = x.value().reshaped(std::move(shape));
    auto backward = [x](Graph<T>& g, std::size_t self) {
        if (!g.requires_grad(x)) return;
        const auto gy = g.grad(BasicVar<T>{&g, self}).data();
        auto gx = g.grad_mut(x.id).data();
        for (std::size_t k = 0; k < gx.size(); ++k) gx[k] += gy[k];
    };
    return x.graph->record(std::move(out), {x.id}, backward, "reshape");
}

template <typename T>
BasicVar<T> sum(BasicVar<T> x)
{
    T acc = T{0};
    for (T v : x.value().data()) acc += v;
    auto backward = [x](Graph<T>& g, std::size_t self) {
        if (!g.requires_grad(x)) return;
        const T gy = g.grad(BasicVar<T>{&g, self})[0];
        for (T& v : g.grad_mut(x.id).data()) v += gy;
    };
    return x.graph->record(BasicTensor<T>::scalar(acc), {x.id}, backward, "sum");
}

template <typename T>
BasicVar<T> global_avg_pool(BasicVar<T> input)
{
    const auto& x = input.value();
    if (x.rank() != 4) throw ShapeError("global_avg_pool expects [N,C,H,W], got " + shape_str(x.shape()));
    const std::size_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
    BasicTensor<T> out(Shape{n, c});
    const T inv = T{1} / static_cast<T>(plane);
    for (std::size_t i = 0; i < n * c; ++i) {
        const T* row = x.data().data() + i * plane;
        T acc = T{0};
        for (std::size_t p = 0; p < plane; ++p) acc += row[p];
        out[i] = acc / static_cast<T>(plane);
    }
    auto backward = [input, n, c, plane, inv](Graph<T>& g, std::size_t self) {
        if (!g.requires_grad(input)) return;
        const auto gy = g.grad(BasicVar<T>{&g, self}).data();
        auto gx = g.grad_mut(input.id).data();
        for (std::size_t i = 0; i < n * c; ++i) {
            const T share = gy[i] * inv;
            for (std::size_t p = 0; p < plane; ++p) gx[i * plane + p] += share;
        }
    };
    return input.graph->record(std::move(out), {input.id}, backward, "global_avg_pool");
}

// ---------------------------------------------------------------------------
// Losses

template <typename T>
BasicVar<T> mse_pixel_loss(BasicVar<T> original, BasicVar<T> reconstruction)
{
    check_same_graph(original, reconstruction);
    const auto& a = original.value();
    const auto& b = reconstruction.value();
    if (a.shape() != b.shape()) throw ShapeError("mse_pixel_loss: shape mismatch", a.shape(), b.shape());
    if (a.rank() != 3 && a.rank() != 4) throw ShapeError("mse_pixel_loss expects CHW or NCHW, got " + shape_str(a.shape()));
    const std::size_t off = a.rank() == 4 ? 1 : 0;
    const std::size_t n = a.rank() == 4 ? a.dim(0) : 1;
    const std::size_t c = a.dim(off), h = a.dim(off + 1), w = a.dim(off + 2);
    const std::size_t plane = h * w;

    double total = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        const T* ia = a.data().data() + s * c * plane;
        const T* ib = b.data().data() + s * c * plane;
        double acc = 0.0;
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const double d = static_cast<double>(ia[ch * plane + y * w + x]) -
                                     static_cast<double>(ib[ch * plane + y * w + x]);
                    acc += d * d;
                }
            }
        }
        total += acc / static_cast<double>(plane);
    }
    const T loss = static_cast<T>(total / static_cast<double>(n));

    auto backward = [original, reconstruction, n, plane](Graph<T>& g, std::size_t self) {
        const T gy = g.grad(BasicVar<T>{&g, self})[0];
        const T scale = T{2} * gy / static_cast<T>(plane * n);
        const auto av = original.value().data();
        const auto bv = reconstruction.value().data();
        if (g.requires_grad(original)) {
            auto ga = g.grad_mut(original.id).data();
            for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += scale * (av[k] - bv[k]);
        }
        if (g.requires_grad(reconstruction)) {
            auto gb = g.grad_mut(reconstruction.id).data();
            for (std::size_t k = 0; k < gb.size(); ++k) gb[k] -= scale * (av[k] - bv[k]);
        }
    };
    return original.graph->record(BasicTensor<T>::scalar(loss), {original.id, reconstruction.id}, backward,
                                  "mse_pixel_loss");
}

template <typename T>
BasicVar<T> bce_loss(BasicVar<T> prediction, BasicVar<T> labels)
{
    check_same_graph(prediction, labels);
    const auto p = prediction.value().data();
    const auto y = labels.value().data();
    if (p.size() != y.size()) {
        throw ShapeError("bce_loss: prediction/label count mismatch", prediction.shape(), labels.shape());
    }
    const T eps = static_cast<T>(kBceClamp);
    const std::size_t n = p.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double pc = std::clamp(p[i], eps, T{1} - eps);
        acc -= static_cast<double>(y[i]) * std::log(pc) + (1.0 - static_cast<double>(y[i])) * std::log(1.0 - pc);
    }
    const T loss = static_cast<T>(acc / static_cast<double>(n));
    auto backward = [prediction, labels, n, eps](Graph<T>& g, std::size_t self) {
        if (!g.requires_grad(prediction)) return;
        const T gy = g.grad(BasicVar<T>{&g, self})[0];
        const auto p = prediction.value().data();
        const auto y = labels.value().data();
        auto gp = g.grad_mut(prediction.id).data();
        for (std::size_t i = 0; i < n; ++i) {
            if (p[i] < eps || p[i] > T{1} - eps) continue;  // clamped: flat
            gp[i] += gy * (-y[i] / p[i] + (T{1} - y[i]) / (T{1} - p[i])) / static_cast<T>(n);
        }
    };
    return prediction.graph->record(BasicTensor<T>::scalar(loss), {prediction.id, labels.id}, backward, "bce_loss");
}

template <typename T>
BasicVar<T> softmax_cross_entropy(BasicVar<T> logits, std::span<const int> labels)
{
    const auto& z = logits.value();
    if (z.rank() != 2 || z.dim(0) != labels.size()) {
        throw ShapeError("softmax_cross_entropy: logits [N,K] vs N labels", z.shape(), Shape{labels.size()});
    }
    const std::size_t n = z.dim(0), k = z.dim(1);
    BasicTensor<T> probs(z.shape());
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
            throw UsageError("softmax_cross_entropy: label out of range");
        }
        const T* row = z.data().data() + i * k;
        const T mx = *std::max_element(row, row + k);
        double denom = 0.0;
        for (std::size_t j = 0; j < k; ++j) denom += std::exp(static_cast<double>(row[j] - mx));
        for (std::size_t j = 0; j < k; ++j) {
            probs[i * k + j] = static_cast<T>(std::exp(static_cast<double>(row[j] - mx)) / denom);
        }
        acc += std::log(denom) - static_cast<double>(row[labels[i]] - mx);
    }
    const T loss = static_cast<T>(acc / static_cast<double>(n));
    std::vector<int> lab(labels.begin(), labels.end());
    auto backward = [logits, probs = std::move(probs), lab = std::move(lab), n, k](Graph<T>& g, std::size_t self) {
        if (!g.requires_grad(logits)) return;
        const T gy = g.grad(BasicVar<T>{&g, self})[0] / static_cast<T>(n);
        auto gz = g.grad_mut(logits.id).data();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < k; ++j) {
                const T target = static_cast<std::size_t>(lab[i]) == j ? T{1} : T{0};
                gz[i * k + j] += gy * (probs[i * k + j] - target);
            }
        }
    };
    return logits.graph->record(BasicTensor<T>::scalar(loss), {logits.id}, backward, "softmax_cross_entropy");
}

// ---------------------------------------------------------------------------

#define FUSIFORM_INSTANTIATE(T)                                                              \
    template class Graph<T>;                                                                 \
    template BasicVar<T> conv2d<T>(BasicVar<T>, BasicVar<T>, int, int);                      \
    template BasicVar<T> conv_transpose2d<T>(BasicVar<T>, BasicVar<T>, int, int);            \
    template BasicVar<T> add_channel_bias<T>(BasicVar<T>, BasicVar<T>);                      \
    template BasicVar<T> dense<T>(BasicVar<T>, BasicVar<T>, BasicVar<T>);                    \
    template BasicVar<T> relu<T>(BasicVar<T>);                                               \
    template BasicVar<T> sigmoid<T>(BasicVar<T>);                                            \
    template BasicVar<T> abs<T>(BasicVar<T>);                                                \
    template BasicVar<T> sub<T>(BasicVar<T>, BasicVar<T>);                                   \
    template BasicVar<T> mul<T>(BasicVar<T>, BasicVar<T>);                                   \
    template BasicVar<T> concat<T>(std::span<const BasicVar<T>>);                            \
    template BasicVar<T> reshape<T>(BasicVar<T>, Shape);                                     \
    template BasicVar<T> sum<T>(BasicVar<T>);                                                \
    template BasicVar<T> global_avg_pool<T>(BasicVar<T>);                                    \
    template BasicVar<T> mse_pixel_loss<T>(BasicVar<T>, BasicVar<T>);                        \
    template BasicVar<T> bce_loss<T>(BasicVar<T>, BasicVar<T>);                              \
    template BasicVar<T> softmax_cross_entropy<T>(BasicVar<T>, std::span<const int>);

FUSIFORM_INSTANTIATE(float)
FUSIFORM_INSTANTIATE(double)

#undef FUSIFORM_INSTANTIATE

}  // namespace fusiform
