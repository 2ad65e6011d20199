#pragma once
// Six-level encoder stream: stride-2 stem, pooled residual stage, three
// downsampling bottleneck stages, and a stride-1 bottleneck stage that keeps
// the 1/32 resolution. Exposes per-level stepping so fusion can interleave.

#include <memory>
#include <vector>

#include "spgcde/model/config.hpp"
#include "spgcde/nn/conv.hpp"
#include "spgcde/nn/conv_block.hpp"
#include "spgcde/nn/pool.hpp"

namespace spgcde {

template <typename T>
struct Bottleneck {
    nn::Conv2d<T> conv1, conv2, conv3;
    nn::BatchNorm2d<T> bn1, bn2, bn3;
    nn::Relu<T> relu1, relu2;
    bool has_proj = false;
    nn::Conv2d<T> proj;
    nn::BatchNorm2d<T> proj_bn;
    Tensor<T> cached_out;  // post-residual ReLU mask

    Bottleneck() = default;
    Bottleneck(int in_ch, int mid_ch, int out_ch, int stride, Rng& rng)
        : conv1(in_ch, mid_ch, 1, 1, 0, false, rng),
          conv2(mid_ch, mid_ch, 3, stride, 1, false, rng),
          conv3(mid_ch, out_ch, 1, 1, 0, false, rng),
          bn1(mid_ch),
          bn2(mid_ch),
          bn3(out_ch),
          has_proj(in_ch != out_ch || stride != 1) {
        if (has_proj) {
            proj = nn::Conv2d<T>(in_ch, out_ch, 1, stride, 0, false, rng);
            proj_bn = nn::BatchNorm2d<T>(out_ch);
        }
    }

    void collect(nn::Registry<T>& reg, const std::string& prefix) {
        conv1.collect(reg, prefix + ".conv1");
        bn1.collect(reg, prefix + ".bn1");
        conv2.collect(reg, prefix + ".conv2");
        bn2.collect(reg, prefix + ".bn2");
        conv3.collect(reg, prefix + ".conv3");
        bn3.collect(reg, prefix + ".bn3");
        if (has_proj) {
            proj.collect(reg, prefix + ".proj");
            proj_bn.collect(reg, prefix + ".proj_bn");
        }
    }

    Tensor<T> forward(const Tensor<T>& x, bool training, bool cache) {
        Tensor<T> y = relu1.forward(bn1.forward(conv1.forward(x, cache), training, cache), cache);
        y = relu2.forward(bn2.forward(conv2.forward(y, cache), training, cache), cache);
        y = bn3.forward(conv3.forward(y, cache), training, cache);
        Tensor<T> sc = has_proj ? proj_bn.forward(proj.forward(x, cache), training, cache) : x;
        y.add_(sc);
        for (int64_t i = 0; i < y.numel(); ++i)
            if (y[i] < T(0)) y[i] = T(0);
        if (cache) cached_out = y;
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> d_sum = dy;
        for (int64_t i = 0; i < d_sum.numel(); ++i)
            if (cached_out[i] <= T(0)) d_sum[i] = T(0);
        Tensor<T> dx = conv1.backward(bn1.backward(relu1.backward(
            conv2.backward(bn2.backward(relu2.backward(
                conv3.backward(bn3.backward(d_sum))))))));
        if (has_proj)
            dx.add_(proj.backward(proj_bn.backward(d_sum)));
        else
            dx.add_(d_sum);
        return dx;
    }

    void release_cache() {
        conv1.release_cache(); conv2.release_cache(); conv3.release_cache();
        bn1.release_cache(); bn2.release_cache(); bn3.release_cache();
        relu1.release_cache(); relu2.release_cache();
        if (has_proj) { proj.release_cache(); proj_bn.release_cache(); }
        cached_out = Tensor<T>();
    }
};

// One encoder level: the stem (two conv blocks) or a residual stage
// (optional 2x2 max pool, then a run of bottlenecks).
template <typename T>
struct EncoderStage {
    EncoderLevelSpec spec;
    nn::ConvBlock<T> stem1, stem2;
    bool has_pool = false;
    nn::MaxPool2d<T> pool;
    std::vector<Bottleneck<T>> blocks;

    EncoderStage() = default;
    EncoderStage(const EncoderLevelSpec& s, Rng& rng) : spec(s), has_pool(s.pool_first) {
        if (s.kind == BlockKind::Stem) {
            stem1 = nn::ConvBlock<T>(s.in_ch, s.out_ch, s.stage_stride, rng);
            stem2 = nn::ConvBlock<T>(s.out_ch, s.out_ch, 1, rng);
        } else {
            blocks.reserve(static_cast<size_t>(s.blocks));
            for (int b = 0; b < s.blocks; ++b) {
                const int in = b == 0 ? s.in_ch : s.out_ch;
                const int stride = b == 0 ? s.stage_stride : 1;
                blocks.emplace_back(in, s.mid_ch, s.out_ch, stride, rng);
            }
        }
    }

    void collect(nn::Registry<T>& reg, const std::string& prefix) {
        if (spec.kind == BlockKind::Stem) {
            stem1.collect(reg, prefix + ".stem1");
            stem2.collect(reg, prefix + ".stem2");
            return;
        }
        for (size_t b = 0; b < blocks.size(); ++b)
            blocks[b].collect(reg, prefix + ".block" + std::to_string(b));
    }

    Tensor<T> forward(const Tensor<T>& x, bool training, bool cache) {
        if (spec.kind == BlockKind::Stem)
            return stem2.forward(stem1.forward(x, training, cache), training, cache);
        Tensor<T> y = has_pool ? pool.forward(x, cache) : x;
        for (auto& b : blocks) y = b.forward(y, training, cache);
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        if (spec.kind == BlockKind::Stem) return stem1.backward(stem2.backward(dy));
        Tensor<T> g = dy;
        for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) g = it->backward(g);
        return has_pool ? pool.backward(g) : g;
    }

    void release_cache() {
        stem1.release_cache();
        stem2.release_cache();
        pool.release_cache();
        for (auto& b : blocks) b.release_cache();
    }
};

template <typename T>
struct Encoder {
    std::vector<EncoderStage<T>> stages;

    Encoder() = default;
    Encoder(int width, Rng& rng) {
        const auto plan = encoder_plan(width);
        stages.reserve(plan.size());
        for (const auto& s : plan) stages.emplace_back(s, rng);
    }

    static int num_levels() { return 6; }

    void collect(nn::Registry<T>& reg, const std::string& prefix) {
        for (size_t i = 0; i < stages.size(); ++i)
            stages[i].collect(reg, prefix + ".level" + std::to_string(i));
    }

    Tensor<T> step(int level, const Tensor<T>& input, bool training, bool cache) {
        return stages[static_cast<size_t>(level)].forward(input, training, cache);
    }
    Tensor<T> backward_step(int level, const Tensor<T>& dy) {
        return stages[static_cast<size_t>(level)].backward(dy);
    }

    void release_cache() {
        for (auto& s : stages) s.release_cache();
    }
};

}  // namespace spgcde
