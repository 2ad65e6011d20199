#pragma once
// Parameter registry shared by all layers. Layers are plain structs with
// forward/backward/collect methods; no virtual hierarchy. Gradient tensors are
// allocated lazily on first use so inference-only instantiations stay lean.

#include <string>
#include <vector>

#include "spgcde/rng.hpp"
#include "spgcde/tensor.hpp"

namespace spgcde::nn {

template <typename T>
struct ParamRef {
    std::string name;
    Tensor<T>* value;
    Tensor<T>* grad;
};

template <typename T>
struct BufferRef {
    std::string name;
    Tensor<T>* value;
};

template <typename T>
struct Registry {
    std::vector<ParamRef<T>> params;
    std::vector<BufferRef<T>> buffers;

    void param(const std::string& name, Tensor<T>& value, Tensor<T>& grad) {
        params.push_back({name, &value, &grad});
    }
    void buffer(const std::string& name, Tensor<T>& value) { buffers.push_back({name, &value}); }

    int64_t param_count() const {
        int64_t n = 0;
        for (const auto& p : params) n += p.value->numel();
        return n;
    }

    void zero_grad() {
        for (auto& p : params)
            if (!p.grad->empty()) p.grad->fill(T(0));
    }
};

template <typename T>
inline void accumulate(Tensor<T>& grad, const Shape& shape, const T* delta) {
    if (grad.empty()) grad = Tensor<T>::zeros(shape);
    T* g = grad.data();
    const int64_t n = grad.numel();
    for (int64_t i = 0; i < n; ++i) g[i] += delta[i];
}

// He-style normal init for convolution / linear weights feeding ReLUs.
template <typename T>
inline void he_init(Tensor<T>& w, int64_t fan_in, Rng& rng) {
    const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (int64_t i = 0; i < w.numel(); ++i) w[i] = static_cast<T>(rng.normal(0.0, std));
}

// Scaled init for attention projections; keeps logits O(1) at start.
template <typename T>
inline void proj_init(Tensor<T>& w, int64_t fan_in, Rng& rng) {
    const double std = std::sqrt(1.0 / static_cast<double>(fan_in));
    for (int64_t i = 0; i < w.numel(); ++i) w[i] = static_cast<T>(rng.normal(0.0, std));
}

}  // namespace spgcde::nn
