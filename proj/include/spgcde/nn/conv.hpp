#pragma once
// 2D convolution via im2col + GEMM. Input layout is (N, C, H, W) row-major.
// The im2col buffer is rebuilt in backward instead of cached: it is the
// largest transient in the network and recomputing trades FLOPs for memory.

#include <algorithm>
#include <cstdint>

#include "spgcde/common.hpp"
#include "spgcde/nn/module.hpp"
#include "spgcde/tensor.hpp"

namespace spgcde::nn {

// Scatters input patches into a (C*kh*kw, out_h*out_w) column matrix for one
// sample. Out-of-range taps read as zero.
template <typename T>
inline void im2col(const T* src, int c, int h, int w, int kh, int kw, int stride, int pad,
                   int out_h, int out_w, T* cols) {
    const int64_t plane = static_cast<int64_t>(out_h) * out_w;
    int64_t row = 0;
    for (int ci = 0; ci < c; ++ci) {
        const T* chan = src + static_cast<int64_t>(ci) * h * w;
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx, ++row) {
                T* dst = cols + row * plane;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) {
                        std::fill(dst, dst + out_w, T(0));
                        dst += out_w;
                        continue;
                    }
                    const T* src_row = chan + static_cast<int64_t>(iy) * w;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        *dst++ = (ix >= 0 && ix < w) ? src_row[ix] : T(0);
                    }
                }
            }
        }
    }
}

// Inverse scatter: accumulates column-matrix gradients back onto the input.
template <typename T>
inline void col2im(const T* cols, int c, int h, int w, int kh, int kw, int stride, int pad,
                   int out_h, int out_w, T* dst) {
    const int64_t plane = static_cast<int64_t>(out_h) * out_w;
    int64_t row = 0;
    for (int ci = 0; ci < c; ++ci) {
        T* chan = dst + static_cast<int64_t>(ci) * h * w;
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx, ++row) {
                const T* src_row_base = cols + row * plane;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) continue;
                    T* out_row = chan + static_cast<int64_t>(iy) * w;
                    const T* col_row = src_row_base + static_cast<int64_t>(oy) * out_w;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < w) out_row[ix] += col_row[ox];
                    }
                }
            }
        }
    }
}

template <typename T>
struct Conv2d {
    int in_ch = 0, out_ch = 0, kernel = 3, stride = 1, pad = 1;
    bool has_bias = false;

    Tensor<T> weight;   // (out_ch, in_ch, kh, kw)
    Tensor<T> bias;     // (out_ch) when has_bias
    Tensor<T> w_grad;
    Tensor<T> b_grad;

    Tensor<T> cached_in;  // kept for backward when caching is enabled
    Shape in_shape;

    Conv2d() = default;
    Conv2d(int in_c, int out_c, int k, int s, int p, bool use_bias, Rng& rng)
        : in_ch(in_c), out_ch(out_c), kernel(k), stride(s), pad(p), has_bias(use_bias) {
        weight = Tensor<T>::zeros({out_c, in_c, k, k});
        he_init(weight, static_cast<int64_t>(in_c) * k * k, rng);
        if (has_bias) bias = Tensor<T>::zeros({out_c});
    }

    void collect(Registry<T>& reg, const std::string& prefix) {
        reg.param(prefix + ".weight", weight, w_grad);
        if (has_bias) reg.param(prefix + ".bias", bias, b_grad);
    }

    static int out_extent(int in, int kernel, int stride, int pad) {
        return (in + 2 * pad - kernel) / stride + 1;
    }

    Tensor<T> forward(const Tensor<T>& x, bool cache) {
        if (x.dim(1) != in_ch)
            throw ShapeMismatch("conv input channels " + std::to_string(x.dim(1)) +
                                " != " + std::to_string(in_ch));
        const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
        if (h + 2 * pad < kernel || w + 2 * pad < kernel)
            throw BadGeometry("conv kernel " + std::to_string(kernel) + " does not fit " +
                              std::to_string(h) + "x" + std::to_string(w) + " input with pad " +
                              std::to_string(pad));
        const int oh = out_extent(h, kernel, stride, pad);
        const int ow = out_extent(w, kernel, stride, pad);
        if (oh <= 0 || ow <= 0) throw BadGeometry("conv output collapsed to zero extent");
        Tensor<T> y = Tensor<T>::zeros({n, out_ch, oh, ow});

        const int64_t k_rows = static_cast<int64_t>(in_ch) * kernel * kernel;
        const int64_t plane = static_cast<int64_t>(oh) * ow;
        std::vector<T> cols(k_rows * plane);
        for (int i = 0; i < n; ++i) {
            im2col(x.data() + x.offset4(i), in_ch, h, w, kernel, kernel, stride, pad, oh, ow,
                   cols.data());
            // (out_ch, k_rows) x (k_rows, plane)
            gemm<T>(weight.data(), cols.data(), y.data() + y.offset4(i),
                    out_ch, k_rows, plane, false, false);
            if (has_bias) {
                T* dst = y.data() + y.offset4(i);
                for (int oc = 0; oc < out_ch; ++oc) {
                    const T b = bias[oc];
                    T* row = dst + oc * plane;
                    for (int64_t p = 0; p < plane; ++p) row[p] += b;
                }
            }
        }
        if (cache) {
            cached_in = x;
            in_shape = x.shape();
        }
        return y;
    }

    // Returns grad wrt input; accumulates into w_grad / b_grad.
    Tensor<T> backward(const Tensor<T>& dy) {
        const Tensor<T>& x = cached_in;
        const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
        const int oh = dy.dim(2), ow = dy.dim(3);
        const int64_t k_rows = static_cast<int64_t>(in_ch) * kernel * kernel;
        const int64_t plane = static_cast<int64_t>(oh) * ow;

        if (w_grad.empty()) w_grad = Tensor<T>::zeros(weight.shape());
        if (has_bias && b_grad.empty()) b_grad = Tensor<T>::zeros(bias.shape());

        Tensor<T> dx = Tensor<T>::zeros(x.shape());
        std::vector<T> cols(k_rows * plane);
        std::vector<T> dcols(k_rows * plane);
        for (int i = 0; i < n; ++i) {
            const T* dy_i = dy.data() + dy.offset4(i);
            im2col(x.data() + x.offset4(i), in_ch, h, w, kernel, kernel, stride, pad, oh, ow,
                   cols.data());
            // dW += dY (out_ch, plane) x cols^T (plane, k_rows)
            gemm<T>(dy_i, cols.data(), w_grad.data(), out_ch, plane, k_rows, false, true,
                    T(1), T(1));
            // dcols = W^T (k_rows, out_ch) x dY (out_ch, plane)
            gemm<T>(weight.data(), dy_i, dcols.data(), k_rows, out_ch, plane, true, false);
            col2im(dcols.data(), in_ch, h, w, kernel, kernel, stride, pad, oh, ow,
                   dx.data() + dx.offset4(i));
            if (has_bias) {
                for (int oc = 0; oc < out_ch; ++oc) {
                    const T* row = dy_i + oc * plane;
                    T acc = T(0);
                    for (int64_t p = 0; p < plane; ++p) acc += row[p];
                    b_grad[oc] += acc;
                }
            }
        }
        return dx;
    }

    void release_cache() { cached_in = Tensor<T>(); }
};

}  // namespace spgcde::nn
