#pragma once
// Bottleneck fusion: concat the two level-5 features (or take the single
// stream) and compress through two conv blocks down to the decoder context.

#include "spgcde/model/config.hpp"
#include "spgcde/nn/compose.hpp"
#include "spgcde/nn/conv_block.hpp"

namespace spgcde {

template <typename T>
struct FeatureRefine {
    bool dual = true;
    int in_ch = 0;
    nn::ConvBlock<T> cb1, cb2;

    FeatureRefine() = default;
    FeatureRefine(int width, bool dual_stream, Rng& rng) : dual(dual_stream) {
        in_ch = (dual ? 4096 : 2048) / width;
        cb1 = nn::ConvBlock<T>(in_ch, 1024 / width, 1, rng);
        cb2 = nn::ConvBlock<T>(1024 / width, 512 / width, 1, rng);
    }

    void collect(nn::Registry<T>& reg, const std::string& prefix) {
        cb1.collect(reg, prefix + ".cb1");
        cb2.collect(reg, prefix + ".cb2");
    }

    Tensor<T> forward(const Tensor<T>& ge5, const Tensor<T>* le5, bool training, bool cache) {
        Tensor<T> in;
        if (dual) {
            if (le5 == nullptr) throw BadConfig("dual refine needs both level-5 features");
            if (!ge5.same_shape(*le5))
                throw ShapeMismatch("refine inputs " + shape_str(ge5.shape()) + " vs " +
                                    shape_str(le5->shape()));
            in = nn::concat_channels(ge5, *le5);
        } else {
            in = ge5;
        }
        return cb2.forward(cb1.forward(in, training, cache), training, cache);
    }

    // Returns (d_ge5, d_le5); the second is empty in single-stream mode.
    std::pair<Tensor<T>, Tensor<T>> backward(const Tensor<T>& dy) {
        Tensor<T> d_in = cb1.backward(cb2.backward(dy));
        if (!dual) return {std::move(d_in), Tensor<T>()};
        return nn::split_channels(d_in, in_ch / 2);
    }

    void release_cache() {
        cb1.release_cache();
        cb2.release_cache();
    }
};

}  // namespace spgcde
