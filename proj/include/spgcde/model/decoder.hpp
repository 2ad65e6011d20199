#pragma once
// Decoder blocks (concat + two conv blocks) and the output head (two conv
// blocks, 1x1 class projection, x2 bilinear restore, softmax or sigmoid).

#include "spgcde/model/config.hpp"
#include "spgcde/nn/activations.hpp"
#include "spgcde/nn/compose.hpp"
#include "spgcde/nn/conv_block.hpp"
#include "spgcde/nn/upsample.hpp"

namespace spgcde {

template <typename T>
struct DecoderBlock {
    int lateral_ch = 0;  // channels of the upstream (first) operand
    nn::ConvBlock<T> cb1, cb2;

    DecoderBlock() = default;
    DecoderBlock(int upstream_ch, int skip_ch, int out_ch, Rng& rng)
        : lateral_ch(upstream_ch),
          cb1(upstream_ch + skip_ch, out_ch, 1, rng),
          cb2(out_ch, out_ch, 1, rng) {}

    void collect(nn::Registry<T>& reg, const std::string& prefix) {
        cb1.collect(reg, prefix + ".cb1");
        cb2.collect(reg, prefix + ".cb2");
    }

    Tensor<T> forward(const Tensor<T>& upstream, const Tensor<T>& skip, bool training,
                      bool cache) {
        Tensor<T> cat = nn::concat_channels(upstream, skip);
        return cb2.forward(cb1.forward(cat, training, cache), training, cache);
    }

    // Returns (d_upstream, d_skip).
    std::pair<Tensor<T>, Tensor<T>> backward(const Tensor<T>& dy) {
        Tensor<T> d_cat = cb1.backward(cb2.backward(dy));
        return nn::split_channels(d_cat, lateral_ch);
    }

    void release_cache() {
        cb1.release_cache();
        cb2.release_cache();
    }
};

template <typename T>
struct OutputHead {
    int num_classes = 1;
    nn::ConvBlock<T> cb1, cb2;
    nn::Conv2d<T> proj;  // 1x1 with bias
    int pre_h = 0, pre_w = 0;

    OutputHead() = default;
    OutputHead(int in_ch, int classes, Rng& rng)
        : num_classes(classes),
          cb1(in_ch, in_ch, 1, rng),
          cb2(in_ch, in_ch, 1, rng),
          proj(in_ch, classes, 1, 1, 0, true, rng) {}

    void collect(nn::Registry<T>& reg, const std::string& prefix) {
        cb1.collect(reg, prefix + ".cb1");
        cb2.collect(reg, prefix + ".cb2");
        proj.collect(reg, prefix + ".proj");
    }

    // Logits at full input resolution (d5 arrives at stride 2).
    Tensor<T> forward(const Tensor<T>& d5, bool training, bool cache) {
        Tensor<T> y = cb2.forward(cb1.forward(d5, training, cache), training, cache);
        y = proj.forward(y, cache);
        if (cache) {
            pre_h = y.dim(2);
            pre_w = y.dim(3);
        }
        return nn::bilinear_resize(y, y.dim(2) * 2, y.dim(3) * 2);
    }

    Tensor<T> backward(const Tensor<T>& d_logits) {
        Tensor<T> g = nn::bilinear_resize_backward(d_logits, pre_h, pre_w);
        return cb1.backward(cb2.backward(proj.backward(g)));
    }

    Tensor<T> probabilities(const Tensor<T>& logits) const {
        return num_classes > 1 ? nn::softmax_channel(logits) : nn::sigmoid(logits);
    }

    void release_cache() {
        cb1.release_cache();
        cb2.release_cache();
        proj.release_cache();
    }
};

}  // namespace spgcde
