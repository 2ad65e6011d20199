#pragma once
// Dense projection over token rows: y = x * W^T (+ b), x is (rows, in_f).

#include "spgcde/nn/module.hpp"
#include "spgcde/tensor.hpp"

namespace spgcde::nn {

template <typename T>
struct Linear {
    int in_f = 0, out_f = 0;
    bool has_bias = false;

    Tensor<T> weight;  // (out_f, in_f)
    Tensor<T> bias;
    Tensor<T> w_grad, b_grad;
    Tensor<T> cached_in;

    Linear() = default;
    Linear(int in_features, int out_features, bool use_bias, Rng& rng)
        : in_f(in_features), out_f(out_features), has_bias(use_bias) {
        weight = Tensor<T>::zeros({out_features, in_features});
        proj_init(weight, in_features, rng);
        if (has_bias) bias = Tensor<T>::zeros({out_features});
    }

    void collect(Registry<T>& reg, const std::string& prefix) {
        reg.param(prefix + ".weight", weight, w_grad);
        if (has_bias) reg.param(prefix + ".bias", bias, b_grad);
    }

    Tensor<T> forward(const Tensor<T>& x, bool cache) {
        if (x.dim(1) != in_f)
            throw ShapeMismatch("linear input features " + std::to_string(x.dim(1)) + " != " +
                                std::to_string(in_f));
        const int rows = x.dim(0);
        Tensor<T> y = Tensor<T>::zeros({rows, out_f});
        gemm<T>(x.data(), weight.data(), y.data(), rows, in_f, out_f, false, true);
        if (has_bias) {
            for (int r = 0; r < rows; ++r) {
                T* row = y.data() + static_cast<int64_t>(r) * out_f;
                for (int j = 0; j < out_f; ++j) row[j] += bias[j];
            }
        }
        if (cache) cached_in = x;
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const int rows = dy.dim(0);
        if (w_grad.empty()) w_grad = Tensor<T>::zeros(weight.shape());
        if (has_bias && b_grad.empty()) b_grad = Tensor<T>::zeros(bias.shape());
        // dW += dY^T X
        gemm<T>(dy.data(), cached_in.data(), w_grad.data(), out_f, rows, in_f, true, false,
                T(1), T(1));
        if (has_bias) {
            for (int r = 0; r < rows; ++r) {
                const T* row = dy.data() + static_cast<int64_t>(r) * out_f;
                for (int j = 0; j < out_f; ++j) b_grad[j] += row[j];
            }
        }
        Tensor<T> dx = Tensor<T>::zeros({rows, in_f});
        gemm<T>(dy.data(), weight.data(), dx.data(), rows, out_f, in_f, false, false);
        return dx;
    }

    void release_cache() { cached_in = Tensor<T>(); }
};

}  // namespace spgcde::nn
