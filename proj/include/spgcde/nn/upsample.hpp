#pragma once
// Bilinear resize with half-pixel centers (align_corners=false). Source
// coordinates below zero clamp to the first sample.

#include <cmath>
#include <vector>

#include "spgcde/tensor.hpp"

namespace spgcde::nn {

struct AxisTap {
    int lo = 0, hi = 0;
    double w_hi = 0.0;  // weight of hi; lo gets 1 - w_hi
};

inline std::vector<AxisTap> bilinear_taps(int in, int out) {
    std::vector<AxisTap> taps(static_cast<size_t>(out));
    const double scale = static_cast<double>(in) / out;
    for (int d = 0; d < out; ++d) {
        double src = (d + 0.5) * scale - 0.5;
        if (src < 0.0) src = 0.0;
        const int lo = static_cast<int>(src);
        AxisTap& t = taps[static_cast<size_t>(d)];
        t.lo = lo < in - 1 ? lo : in - 1;
        t.hi = t.lo + 1 < in ? t.lo + 1 : in - 1;
        t.w_hi = src - t.lo;
        if (t.w_hi < 0.0) t.w_hi = 0.0;
    }
    return taps;
}

template <typename T>
inline Tensor<T> bilinear_resize(const Tensor<T>& x, int oh, int ow) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (oh == h && ow == w) return x;
    const auto ty = bilinear_taps(h, oh);
    const auto tx = bilinear_taps(w, ow);
    Tensor<T> y = Tensor<T>::zeros({n, c, oh, ow});
    const int64_t planes = static_cast<int64_t>(n) * c;
    for (int64_t p = 0; p < planes; ++p) {
        const T* src = x.data() + p * h * w;
        T* dst = y.data() + p * static_cast<int64_t>(oh) * ow;
        for (int oy = 0; oy < oh; ++oy) {
            const AxisTap& ay = ty[static_cast<size_t>(oy)];
            const T* r_lo = src + static_cast<int64_t>(ay.lo) * w;
            const T* r_hi = src + static_cast<int64_t>(ay.hi) * w;
            const T wy = static_cast<T>(ay.w_hi);
            for (int ox = 0; ox < ow; ++ox) {
                const AxisTap& ax = tx[static_cast<size_t>(ox)];
                const T wx = static_cast<T>(ax.w_hi);
                const T top = r_lo[ax.lo] * (T(1) - wx) + r_lo[ax.hi] * wx;
                const T bot = r_hi[ax.lo] * (T(1) - wx) + r_hi[ax.hi] * wx;
                *dst++ = top * (T(1) - wy) + bot * wy;
            }
        }
    }
    return y;
}

// Scatter-adjoint of bilinear_resize: routes output grads back to the four taps.
template <typename T>
inline Tensor<T> bilinear_resize_backward(const Tensor<T>& dy, int ih, int iw) {
    const int n = dy.dim(0), c = dy.dim(1), oh = dy.dim(2), ow = dy.dim(3);
    if (oh == ih && ow == iw) return dy;
    const auto ty = bilinear_taps(ih, oh);
    const auto tx = bilinear_taps(iw, ow);
    Tensor<T> dx = Tensor<T>::zeros({n, c, ih, iw});
    const int64_t planes = static_cast<int64_t>(n) * c;
    for (int64_t p = 0; p < planes; ++p) {
        const T* src = dy.data() + p * static_cast<int64_t>(oh) * ow;
        T* dst = dx.data() + p * static_cast<int64_t>(ih) * iw;
        for (int oy = 0; oy < oh; ++oy) {
            const AxisTap& ay = ty[static_cast<size_t>(oy)];
            T* r_lo = dst + static_cast<int64_t>(ay.lo) * iw;
            T* r_hi = dst + static_cast<int64_t>(ay.hi) * iw;
            const T wy = static_cast<T>(ay.w_hi);
            for (int ox = 0; ox < ow; ++ox) {
                const AxisTap& ax = tx[static_cast<size_t>(ox)];
                const T wx = static_cast<T>(ax.w_hi);
                const T g = *src++;
                r_lo[ax.lo] += g * (T(1) - wx) * (T(1) - wy);
                r_lo[ax.hi] += g * wx * (T(1) - wy);
                r_hi[ax.lo] += g * (T(1) - wx) * wy;
                r_hi[ax.hi] += g * wx * wy;
            }
        }
    }
    return dx;
}

template <typename T>
struct Upsample2d {
    int scale = 2;
    int in_h = 0, in_w = 0;

    Upsample2d() = default;
    explicit Upsample2d(int s) : scale(s) {}

    Tensor<T> forward(const Tensor<T>& x, bool cache) {
        if (cache) {
            in_h = x.dim(2);
            in_w = x.dim(3);
        }
        return bilinear_resize(x, x.dim(2) * scale, x.dim(3) * scale);
    }

    Tensor<T> backward(const Tensor<T>& dy) { return bilinear_resize_backward(dy, in_h, in_w); }
};

// Nearest-neighbour resize for label-like integer maps.
template <typename U>
inline std::vector<U> nearest_resize(const std::vector<U>& src, int h, int w, int oh, int ow) {
    std::vector<U> out(static_cast<size_t>(oh) * ow);
    for (int oy = 0; oy < oh; ++oy) {
        int iy = static_cast<int>((oy + 0.5) * h / oh);
        if (iy >= h) iy = h - 1;
        for (int ox = 0; ox < ow; ++ox) {
            int ix = static_cast<int>((ox + 0.5) * w / ow);
            if (ix >= w) ix = w - 1;
            out[static_cast<size_t>(oy) * ow + ox] = src[static_cast<size_t>(iy) * w + ix];
        }
    }
    return out;
}

}  // namespace spgcde::nn
