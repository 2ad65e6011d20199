#pragma once
// Batch normalization over (N, H, W) per channel. Running stats use the
// unbiased variance; the normalization itself uses the biased one.

#include <cmath>
#include <vector>

#include "spgcde/nn/module.hpp"
#include "spgcde/tensor.hpp"

namespace spgcde::nn {

template <typename T>
struct BatchNorm2d {
    int channels = 0;
    T eps = T(1e-5);
    T momentum = T(0.1);

    Tensor<T> gamma, beta;
    Tensor<T> g_grad, b_grad;
    Tensor<T> running_mean, running_var;

    Tensor<T> cached_xhat;
    std::vector<T> cached_inv_std;

    BatchNorm2d() = default;
    explicit BatchNorm2d(int c) : channels(c) {
        gamma = Tensor<T>::full({c}, T(1));
        beta = Tensor<T>::zeros({c});
        running_mean = Tensor<T>::zeros({c});
        running_var = Tensor<T>::full({c}, T(1));
    }

    void collect(Registry<T>& reg, const std::string& prefix) {
        reg.param(prefix + ".gamma", gamma, g_grad);
        reg.param(prefix + ".beta", beta, b_grad);
        reg.buffer(prefix + ".running_mean", running_mean);
        reg.buffer(prefix + ".running_var", running_var);
    }

    Tensor<T> forward(const Tensor<T>& x, bool training, bool cache) {
        if (x.dim(1) != channels)
            throw ShapeMismatch("batchnorm channels " + std::to_string(x.dim(1)) + " != " +
                                std::to_string(channels));
        const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
        const int64_t plane = static_cast<int64_t>(h) * w;
        const int64_t per_ch = static_cast<int64_t>(n) * plane;
        Tensor<T> y = Tensor<T>::zeros(x.shape());

        if (cache) {
            cached_xhat = Tensor<T>::zeros(x.shape());
            cached_inv_std.assign(static_cast<size_t>(channels), T(0));
        }

        for (int c = 0; c < channels; ++c) {
            T mean, var;
            if (training) {
                T sum = T(0), sq = T(0);
                for (int i = 0; i < n; ++i) {
                    const T* p = x.data() + x.offset4(i) + c * plane;
                    for (int64_t k = 0; k < plane; ++k) {
                        sum += p[k];
                        sq += p[k] * p[k];
                    }
                }
                mean = sum / static_cast<T>(per_ch);
                var = sq / static_cast<T>(per_ch) - mean * mean;
                if (var < T(0)) var = T(0);
                const T unbiased =
                    per_ch > 1 ? var * static_cast<T>(per_ch) / static_cast<T>(per_ch - 1) : var;
                running_mean[c] = (T(1) - momentum) * running_mean[c] + momentum * mean;
                running_var[c] = (T(1) - momentum) * running_var[c] + momentum * unbiased;
            } else {
                mean = running_mean[c];
                var = running_var[c];
            }
            const T inv_std = T(1) / std::sqrt(var + eps);
            if (cache) cached_inv_std[static_cast<size_t>(c)] = inv_std;
            const T g = gamma[c], b = beta[c];
            for (int i = 0; i < n; ++i) {
                const T* px = x.data() + x.offset4(i) + c * plane;
                T* py = y.data() + y.offset4(i) + c * plane;
                T* ph = cache ? cached_xhat.data() + cached_xhat.offset4(i) + c * plane : nullptr;
                for (int64_t k = 0; k < plane; ++k) {
                    const T xh = (px[k] - mean) * inv_std;
                    if (ph) ph[k] = xh;
                    py[k] = g * xh + b;
                }
            }
        }
        return y;
    }

    // Train-mode backward using the cached normalized activations.
    Tensor<T> backward(const Tensor<T>& dy) {
        const Tensor<T>& xhat = cached_xhat;
        const int n = dy.dim(0), h = dy.dim(2), w = dy.dim(3);
        const int64_t plane = static_cast<int64_t>(h) * w;
        const int64_t per_ch = static_cast<int64_t>(n) * plane;

        if (g_grad.empty()) g_grad = Tensor<T>::zeros(gamma.shape());
        if (b_grad.empty()) b_grad = Tensor<T>::zeros(beta.shape());

        Tensor<T> dx = Tensor<T>::zeros(dy.shape());
        for (int c = 0; c < channels; ++c) {
            T sum_dy = T(0), sum_dy_xhat = T(0);
            for (int i = 0; i < n; ++i) {
                const T* pd = dy.data() + dy.offset4(i) + c * plane;
                const T* ph = xhat.data() + xhat.offset4(i) + c * plane;
                for (int64_t k = 0; k < plane; ++k) {
                    sum_dy += pd[k];
                    sum_dy_xhat += pd[k] * ph[k];
                }
            }
            g_grad[c] += sum_dy_xhat;
            b_grad[c] += sum_dy;

            const T inv_std = cached_inv_std[static_cast<size_t>(c)];
            const T g = gamma[c];
            const T mean_dy = sum_dy / static_cast<T>(per_ch);
            const T mean_dy_xhat = sum_dy_xhat / static_cast<T>(per_ch);
            for (int i = 0; i < n; ++i) {
                const T* pd = dy.data() + dy.offset4(i) + c * plane;
                const T* ph = xhat.data() + xhat.offset4(i) + c * plane;
                T* px = dx.data() + dx.offset4(i) + c * plane;
                for (int64_t k = 0; k < plane; ++k)
                    px[k] = g * inv_std * (pd[k] - mean_dy - ph[k] * mean_dy_xhat);
            }
        }
        return dx;
    }

    void release_cache() {
        cached_xhat = Tensor<T>();
        cached_inv_std.clear();
    }
};

}  // namespace spgcde::nn
