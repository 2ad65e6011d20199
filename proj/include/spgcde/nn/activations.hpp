#pragma once
// ReLU plus the channelwise softmax / sigmoid used by the output head.

#include <cmath>

#include "spgcde/tensor.hpp"

namespace spgcde::nn {

template <typename T>
struct Relu {
    Tensor<T> cached_out;

    Tensor<T> forward(const Tensor<T>& x, bool cache) {
        Tensor<T> y = x;
        for (int64_t i = 0; i < y.numel(); ++i)
            if (y[i] < T(0)) y[i] = T(0);
        if (cache) cached_out = y;
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx = dy;
        for (int64_t i = 0; i < dx.numel(); ++i)
            if (cached_out[i] <= T(0)) dx[i] = T(0);
        return dx;
    }

    void release_cache() { cached_out = Tensor<T>(); }
};

// Softmax across the channel axis of an (N, C, H, W) tensor.
template <typename T>
inline Tensor<T> softmax_channel(const Tensor<T>& x) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int64_t plane = static_cast<int64_t>(h) * w;
    Tensor<T> y = Tensor<T>::zeros(x.shape());
    for (int i = 0; i < n; ++i) {
        const T* px = x.data() + x.offset4(i);
        T* py = y.data() + y.offset4(i);
        for (int64_t k = 0; k < plane; ++k) {
            T m = px[k];
            for (int ci = 1; ci < c; ++ci) m = std::max(m, px[ci * plane + k]);
            T z = T(0);
            for (int ci = 0; ci < c; ++ci) {
                const T e = std::exp(px[ci * plane + k] - m);
                py[ci * plane + k] = e;
                z += e;
            }
            for (int ci = 0; ci < c; ++ci) py[ci * plane + k] /= z;
        }
    }
    return y;
}

template <typename T>
inline Tensor<T> sigmoid(const Tensor<T>& x) {
    Tensor<T> y = x;
    for (int64_t i = 0; i < y.numel(); ++i) y[i] = T(1) / (T(1) + std::exp(-y[i]));
    return y;
}

}  // namespace spgcde::nn
