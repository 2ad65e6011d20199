#pragma once
// Flow bank: each block upsamples the refined context by its factor and runs
// two conv blocks, producing the map added to the matching decoder skip.

#include "spgcde/model/config.hpp"
#include "spgcde/nn/conv_block.hpp"
#include "spgcde/nn/upsample.hpp"

namespace spgcde {

template <typename T>
struct FlowBlock {
    FlowPair pair;
    nn::Upsample2d<T> up;
    nn::ConvBlock<T> cb1, cb2;

    FlowBlock() = default;
    FlowBlock(int context_ch, FlowPair p, Rng& rng) : pair(p), up(p.scale) {
        if (p.scale != 2 && p.scale != 4 && p.scale != 8 && p.scale != 16)
            throw BadConfig("flow upsample factor must be one of {2,4,8,16}, got " +
                            std::to_string(p.scale));
        if (p.channels < 1) throw BadConfig("flow channel count must be positive");
        cb1 = nn::ConvBlock<T>(context_ch, p.channels, 1, rng);
        cb2 = nn::ConvBlock<T>(p.channels, p.channels, 1, rng);
    }

    void collect(nn::Registry<T>& reg, const std::string& prefix) {
        cb1.collect(reg, prefix + ".cb1");
        cb2.collect(reg, prefix + ".cb2");
    }

    Tensor<T> forward(const Tensor<T>& context, bool training, bool cache) {
        Tensor<T> y = up.forward(context, cache);
        return cb2.forward(cb1.forward(y, training, cache), training, cache);
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        return up.backward(cb1.backward(cb2.backward(dy)));
    }

    void release_cache() {
        cb1.release_cache();
        cb2.release_cache();
    }
};

}  // namespace spgcde
