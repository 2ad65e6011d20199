#pragma once
// Conv 3x3 (no bias) + batch norm + ReLU, the unit every stage is built from.

#include "spgcde/nn/batchnorm.hpp"
#include "spgcde/nn/conv.hpp"
#include "spgcde/nn/activations.hpp"

namespace spgcde::nn {

template <typename T>
struct ConvBlock {
    Conv2d<T> conv;
    BatchNorm2d<T> bn;
    Relu<T> relu;

    ConvBlock() = default;
    ConvBlock(int in_ch, int out_ch, int stride, Rng& rng)
        : conv(in_ch, out_ch, 3, stride, 1, false, rng), bn(out_ch) {}

    void collect(Registry<T>& reg, const std::string& prefix) {
        conv.collect(reg, prefix + ".conv");
        bn.collect(reg, prefix + ".bn");
    }

    Tensor<T> forward(const Tensor<T>& x, bool training, bool cache) {
        Tensor<T> y = conv.forward(x, cache);
        y = bn.forward(y, training, cache);
        return relu.forward(y, cache);
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> g = relu.backward(dy);
        g = bn.backward(g);
        return conv.backward(g);
    }

    void release_cache() {
        conv.release_cache();
        bn.release_cache();
        relu.release_cache();
    }
};

}  // namespace spgcde::nn
