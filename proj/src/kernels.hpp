#pragma once

// Dense loops behind the graph ops. Every output element is accumulated in a
// fixed order that does not depend on the batch size, so batched and
// per-sample evaluation agree bit-for-bit.

#include <algorithm>
#include <cstddef>
#include <vector>

namespace fusiform::kernels {

struct ConvGeom {
    std::size_t c_in = 0, h = 0, w = 0;
    std::size_t c_out = 0, kh = 0, kw = 0;
    std::size_t stride = 1, pad = 0;
    std::size_t ho = 0, wo = 0;

    std::size_t rows() const { return c_in * kh * kw; }
    std::size_t cols() const { return ho * wo; }
};

/// Unfold one sample [c_in,h,w] into col [c_in*kh*kw, ho*wo].
template <typename T>
void im2col(const ConvGeom& g, const T* x, T* col)
{
    const std::size_t cols = g.cols();
    for (std::size_t c = 0; c < g.c_in; ++c) {
        for (std::size_t ki = 0; ki < g.kh; ++ki) {
            for (std::size_t kj = 0; kj < g.kw; ++kj) {
                T* dst = col + ((c * g.kh + ki) * g.kw + kj) * cols;
                for (std::size_t oy = 0; oy < g.ho; ++oy) {
                    const long iy = static_cast<long>(oy * g.stride + ki) - static_cast<long>(g.pad);
                    T* row = dst + oy * g.wo;
                    if (iy < 0 || iy >= static_cast<long>(g.h)) {
                        std::fill_n(row, g.wo, T{0});
                        continue;
                    }
                    const T* src = x + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
                    for (std::size_t ox = 0; ox < g.wo; ++ox) {
                        const long ix = static_cast<long>(ox * g.stride + kj) - static_cast<long>(g.pad);
                        row[ox] = (ix < 0 || ix >= static_cast<long>(g.w)) ? T{0} : src[ix];
                    }
                }
            }
        }
    }
}

/// Fold col back onto one sample, accumulating into dx.
template <typename T>
void col2im_add(const ConvGeom& g, const T* col, T* dx)
{
    const std::size_t cols = g.cols();
    for (std::size_t c = 0; c < g.c_in; ++c) {
        for (std::size_t ki = 0; ki < g.kh; ++ki) {
            for (std::size_t kj = 0; kj < g.kw; ++kj) {
                const T* src = col + ((c * g.kh + ki) * g.kw + kj) * cols;
                for (std::size_t oy = 0; oy < g.ho; ++oy) {
                    const long iy = static_cast<long>(oy * g.stride + ki) - static_cast<long>(g.pad);
                    if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
                    T* row = dx + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
                    for (std::size_t ox = 0; ox < g.wo; ++ox) {
                        const long ix = static_cast<long>(ox * g.stride + kj) - static_cast<long>(g.pad);
                        if (ix >= 0 && ix < static_cast<long>(g.w)) row[ix] += src[oy * g.wo + ox];
                    }
                }
            }
        }
    }
}

/// out[n] += W * im2col(x[n]). W is [c_out, rows].
template <typename T>
void conv_forward_accumulate(const ConvGeom& g, std::size_t batch, const T* x, const T* w, T* out)
{
    const std::size_t rows = g.rows(), cols = g.cols();
    std::vector<T> col(rows * cols);
    for (std::size_t n = 0; n < batch; ++n) {
        im2col(g, x + n * g.c_in * g.h * g.w, col.data());
        T* o = out + n * g.c_out * cols;
        for (std::size_t co = 0; co < g.c_out; ++co) {
            T* orow = o + co * cols;
            const T* wrow = w + co * rows;
            for (std::size_t r = 0; r < rows; ++r) {
                const T wv = wrow[r];
                const T* crow = col.data() + r * cols;
                for (std::size_t p = 0; p < cols; ++p) orow[p] += wv * crow[p];
            }
        }
    }
}

template <typename T>
void conv_forward(const ConvGeom& g, std::size_t batch, const T* x, const T* w, T* out)
{
    std::fill_n(out, batch * g.c_out * g.cols(), T{0});
    conv_forward_accumulate(g, batch, x, w, out);
}

/// dx[n] += col2im(W^T * dy[n]).
template <typename T>
void conv_backward_data(const ConvGeom& g, std::size_t batch, const T* w, const T* dy, T* dx)
{
    const std::size_t rows = g.rows(), cols = g.cols();
    std::vector<T> dcol(rows * cols);
    for (std::size_t n = 0; n < batch; ++n) {
        std::fill(dcol.begin(), dcol.end(), T{0});
        const T* gy = dy + n * g.c_out * cols;
        for (std::size_t co = 0; co < g.c_out; ++co) {
            const T* grow = gy + co * cols;
            const T* wrow = w + co * rows;
            for (std::size_t r = 0; r < rows; ++r) {
                const T wv = wrow[r];
                T* drow = dcol.data() + r * cols;
                for (std::size_t p = 0; p < cols; ++p) drow[p] += wv * grow[p];
            }
        }
        col2im_add(g, dcol.data(), dx + n * g.c_in * g.h * g.w);
    }
}

/// dW += sum_n dy[n] * im2col(x[n])^T.
template <typename T>
void conv_backward_weight(const ConvGeom& g, std::size_t batch, const T* x, const T* dy, T* dw)
{
    const std::size_t rows = g.rows(), cols = g.cols();
    std::vector<T> col(rows * cols);
    std::vector<T> colt(rows * cols);
    for (std::size_t n = 0; n < batch; ++n) {
        im2col(g, x + n * g.c_in * g.h * g.w, col.data());
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t p = 0; p < cols; ++p) colt[p * rows + r] = col[r * cols + p];
        }
        const T* gy = dy + n * g.c_out * cols;
        for (std::size_t co = 0; co < g.c_out; ++co) {
            T* dwrow = dw + co * rows;
            for (std::size_t p = 0; p < cols; ++p) {
                const T gv = gy[co * cols + p];
                const T* crow = colt.data() + p * rows;
                for (std::size_t r = 0; r < rows; ++r) dwrow[r] += gv * crow[r];
            }
        }
    }
}

/// out = x * W + b; x [n,d], W [d,m].
template <typename T>
void dense_forward(std::size_t n, std::size_t d, std::size_t m, const T* x, const T* w, const T* b, T* out)
{
    for (std::size_t i = 0; i < n; ++i) {
        T* orow = out + i * m;
        std::fill_n(orow, m, T{0});
        for (std::size_t k = 0; k < d; ++k) {
            const T xv = x[i * d + k];
            const T* wrow = w + k * m;
            for (std::size_t j = 0; j < m; ++j) orow[j] += xv * wrow[j];
        }
        for (std::size_t j = 0; j < m; ++j) orow[j] += b[j];
    }
}

/// dx += dy * W^T.
template <typename T>
void dense_backward_input(std::size_t n, std::size_t d, std::size_t m, const T* dy, const T* w, T* dx)
{
    std::vector<T> wt(d * m);
    for (std::size_t k = 0; k < d; ++k) {
        for (std::size_t j = 0; j < m; ++j) wt[j * d + k] = w[k * m + j];
    }
    for (std::size_t i = 0; i < n; ++i) {
        T* xrow = dx + i * d;
        for (std::size_t j = 0; j < m; ++j) {
            const T gv = dy[i * m + j];
            const T* trow = wt.data() + j * d;
            for (std::size_t k = 0; k < d; ++k) xrow[k] += gv * trow[k];
        }
    }
}

/// dW += x^T * dy.
template <typename T>
void dense_backward_weight(std::size_t n, std::size_t d, std::size_t m, const T* x, const T* dy, T* dw)
{
    for (std::size_t i = 0; i < n; ++i) {
        const T* grow = dy + i * m;
        for (std::size_t k = 0; k < d; ++k) {
            const T xv = x[i * d + k];
            T* wrow = dw + k * m;
            for (std::size_t j = 0; j < m; ++j) wrow[j] += xv * grow[j];
        }
    }
}

}  // namespace fusiform::kernels
