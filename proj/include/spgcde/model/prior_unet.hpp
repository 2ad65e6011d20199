#pragma once
// Small encoder-decoder coarse segmenter used as the trainable built-in prior
// source. Two pooling levels, skip concats, 1x1 class projection.

#include "spgcde/nn/compose.hpp"
#include "spgcde/nn/conv.hpp"
#include "spgcde/nn/conv_block.hpp"
#include "spgcde/nn/pool.hpp"
#include "spgcde/nn/upsample.hpp"

namespace spgcde {

template <typename T>
class PriorUnet {
  public:
    int num_classes = 2;

    PriorUnet() = default;
    PriorUnet(int classes, uint64_t seed) : num_classes(classes) {
        Rng rng(hash_seed(seed, 0x9710fu));
        enc1_ = nn::ConvBlock<T>(1, 8, 1, rng);
        enc2_ = nn::ConvBlock<T>(8, 16, 1, rng);
        mid_ = nn::ConvBlock<T>(16, 32, 1, rng);
        dec1_ = nn::ConvBlock<T>(32 + 16, 16, 1, rng);
        dec2_ = nn::ConvBlock<T>(16 + 8, 8, 1, rng);
        proj_ = nn::Conv2d<T>(8, classes, 1, 1, 0, true, rng);
        up1_ = nn::Upsample2d<T>(2);
        up2_ = nn::Upsample2d<T>(2);
    }

    PriorUnet(const PriorUnet&) = delete;
    PriorUnet& operator=(const PriorUnet&) = delete;

    nn::Registry<T> registry() {
        nn::Registry<T> reg;
        enc1_.collect(reg, "p.enc1");
        enc2_.collect(reg, "p.enc2");
        mid_.collect(reg, "p.mid");
        dec1_.collect(reg, "p.dec1");
        dec2_.collect(reg, "p.dec2");
        proj_.collect(reg, "p.proj");
        return reg;
    }

    Tensor<T> forward(const Tensor<T>& x, bool training, bool cache) {
        if (x.dim(2) % 4 != 0 || x.dim(3) % 4 != 0)
            throw BadGeometry("coarse segmenter needs extents divisible by 4, got " +
                              shape_str(x.shape()));
        e1_ = enc1_.forward(x, training, cache);
        Tensor<T> y = pool1_.forward(e1_, cache);
        e2_ = enc2_.forward(y, training, cache);
        y = pool2_.forward(e2_, cache);
        y = mid_.forward(y, training, cache);
        y = up1_.forward(y, cache);
        y = dec1_.forward(nn::concat_channels(y, e2_), training, cache);
        y = up2_.forward(y, cache);
        y = dec2_.forward(nn::concat_channels(y, e1_), training, cache);
        return proj_.forward(y, cache);
    }

    void backward(const Tensor<T>& d_logits) {
        Tensor<T> g = proj_.backward(d_logits);
        auto [g_up2, g_e1] = nn::split_channels(dec2_.backward(g), 16);
        g = up2_.backward(g_up2);
        auto [g_up1, g_e2] = nn::split_channels(dec1_.backward(g), 32);
        g = up1_.backward(g_up1);
        g = mid_.backward(g);
        g = pool2_.backward(g);
        g_e2.add_(g);
        g = enc2_.backward(g_e2);
        g = pool1_.backward(g);
        g_e1.add_(g);
        enc1_.backward(g_e1);
    }

    void release_cache() {
        enc1_.release_cache();
        enc2_.release_cache();
        mid_.release_cache();
        dec1_.release_cache();
        dec2_.release_cache();
        proj_.release_cache();
        pool1_.release_cache();
        pool2_.release_cache();
        e1_ = e2_ = Tensor<T>();
    }

  private:
    nn::ConvBlock<T> enc1_, enc2_, mid_, dec1_, dec2_;
    nn::Conv2d<T> proj_;
    nn::MaxPool2d<T> pool1_, pool2_;
    nn::Upsample2d<T> up1_, up2_;
    Tensor<T> e1_, e2_;
};

}  // namespace spgcde
