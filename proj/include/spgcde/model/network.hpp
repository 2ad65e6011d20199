#pragma once
// Full stage-2 network: dual (or single) encoder, per-level fusion, feature
// refinement, flow bank, decoder chain, output head. Backward mirrors the
// forward wiring exactly, including the multi-consumer refined context (one
// decoder block plus every flow block) and the skip/flow additions.

#include <map>
#include <memory>
#include <vector>

#include "spgcde/model/config.hpp"
#include "spgcde/model/decoder.hpp"
#include "spgcde/model/encoder.hpp"
#include "spgcde/model/flow.hpp"
#include "spgcde/model/fusion.hpp"
#include "spgcde/model/refine.hpp"
#include "spgcde/nn/sgd.hpp"

namespace spgcde {

template <typename T>
class SegNet {
  public:
    ModelConfig cfg;
    AblationConfig ablation;

    SegNet(const ModelConfig& model_cfg, const AblationConfig& ab, uint64_t seed)
        : cfg(model_cfg), ablation(ab) {
        cfg.validate();
        ablation.validate();
        Rng rng(hash_seed(seed, 0x5e67e7u));
        enc_g_ = Encoder<T>(cfg.width, rng);
        if (dual()) enc_l_ = std::make_unique<Encoder<T>>(cfg.width, rng);
        if (dual() && ablation.fusion != FusionKind::None) {
            const auto plan = encoder_plan(cfg.width);
            for (int lv : cfg.sca_levels) {
                fusions_.emplace(lv, LevelFusion<T>(ablation.fusion,
                                                    plan[static_cast<size_t>(lv)].out_ch,
                                                    cfg.heads, rng));
            }
        }
        refine_ = FeatureRefine<T>(cfg.width, dual(), rng);
        const auto fp = flow_plan(cfg.width);
        for (const auto& p : fp) flows_.emplace_back(cfg.cg(), p, rng);
        const auto dch = decoder_channels(cfg.width);
        const auto plan = encoder_plan(cfg.width);
        dec_.emplace_back(cfg.cg(), plan[4].out_ch, dch[0], rng);
        for (int j = 1; j <= 4; ++j) {
            dec_.emplace_back(dch[static_cast<size_t>(j - 1)],
                              plan[static_cast<size_t>(4 - j)].out_ch,
                              dch[static_cast<size_t>(j)], rng);
            dec_up_.emplace_back(2);
        }
        head_ = OutputHead<T>(dch[4], cfg.num_classes, rng);
    }

    SegNet(const SegNet&) = delete;
    SegNet& operator=(const SegNet&) = delete;

    bool dual() const { return ablation.use_local_encoder; }

    nn::Registry<T> registry() {
        nn::Registry<T> reg;
        enc_g_.collect(reg, "enc_g");
        if (enc_l_) enc_l_->collect(reg, "enc_l");
        for (auto& [lv, f] : fusions_) f.collect(reg, "fuse" + std::to_string(lv));
        refine_.collect(reg, "refine");
        for (size_t k = 0; k < flows_.size(); ++k)
            flows_[k].collect(reg, "flow" + std::to_string(k));
        for (size_t j = 0; j < dec_.size(); ++j)
            dec_[j].collect(reg, "dec" + std::to_string(j));
        head_.collect(reg, "head");
        return reg;
    }

    int64_t param_count() { return registry().param_count(); }

    // Encoders + fusion + refinement; returns the refined context.
    Tensor<T> forward_encoders(const Tensor<T>& x_global, const Tensor<T>* x_local,
                               bool training, bool cache) {
        if (x_global.dim(2) % 32 != 0 || x_global.dim(3) % 32 != 0)
            throw BadGeometry("input extents must be divisible by 32, got " +
                              shape_str(x_global.shape()));
        if (dual()) {
            if (x_local == nullptr) throw BadConfig("dual network needs the masked local image");
            if (!x_global.same_shape(*x_local))
                throw ShapeMismatch("global/local inputs " + shape_str(x_global.shape()) +
                                    " vs " + shape_str(x_local->shape()));
        }
        skips_.assign(5, Tensor<T>());
        Tensor<T> f_g = x_global;
        Tensor<T> f_l = dual() ? *x_local : Tensor<T>();
        for (int lv = 0; lv < 6; ++lv) {
            f_g = enc_g_.step(lv, f_g, training, cache);
            if (dual()) f_l = enc_l_->step(lv, f_l, training, cache);
            auto it = fusions_.find(lv);
            if (it != fusions_.end()) {
                auto [g2, l2] = it->second.forward(f_g, f_l, training, cache);
                f_g = std::move(g2);
                f_l = std::move(l2);
            }
            if (lv <= 4) skips_[static_cast<size_t>(lv)] = f_g;
        }
        return refine_.forward(f_g, dual() ? &f_l : nullptr, training, cache);
    }

    // Flow bank + decoder chain + head; consumes the stored skips.
    Tensor<T> forward_decoder(const Tensor<T>& context, bool training, bool cache) {
        std::vector<Tensor<T>> flow_maps;
        flow_maps.reserve(flows_.size());
        for (auto& f : flows_) flow_maps.push_back(f.forward(context, training, cache));
        Tensor<T> d = dec_[0].forward(context, skips_[4], training, cache);
        for (int j = 1; j <= 4; ++j) {
            Tensor<T> up = dec_up_[static_cast<size_t>(j - 1)].forward(d, cache);
            Tensor<T> sk = skips_[static_cast<size_t>(4 - j)];
            if (!sk.same_shape(flow_maps[static_cast<size_t>(j - 1)]))
                throw ShapeMismatch("skip/flow addition " + shape_str(sk.shape()) + " vs " +
                                    shape_str(flow_maps[static_cast<size_t>(j - 1)].shape()));
            sk.add_(flow_maps[static_cast<size_t>(j - 1)]);
            d = dec_[static_cast<size_t>(j)].forward(up, sk, training, cache);
        }
        return head_.forward(d, training, cache);
    }

    Tensor<T> forward(const Tensor<T>& x_global, const Tensor<T>* x_local, bool training,
                      bool cache) {
        Tensor<T> ctx = forward_encoders(x_global, x_local, training, cache);
        return forward_decoder(ctx, training, cache);
    }

    Tensor<T> probabilities(const Tensor<T>& logits) const { return head_.probabilities(logits); }

    // Decoder-side backward; returns grad wrt the refined context and stores
    // per-level skip grads for the encoder-side pass.
    Tensor<T> backward_decoder(const Tensor<T>& d_logits) {
        skip_grads_.assign(5, Tensor<T>());
        Tensor<T> g = head_.backward(d_logits);
        Tensor<T> d_context;
        for (int j = 4; j >= 1; --j) {
            auto [d_up, d_sk] = dec_[static_cast<size_t>(j)].backward(g);
            // d_sk feeds both the skip and the flow map added to it.
            skip_grads_[static_cast<size_t>(4 - j)] = d_sk;
            Tensor<T> d_ctx_part = flows_[static_cast<size_t>(j - 1)].backward(d_sk);
            if (d_context.empty())
                d_context = std::move(d_ctx_part);
            else
                d_context.add_(d_ctx_part);
            g = dec_up_[static_cast<size_t>(j - 1)].backward(d_up);
        }
        auto [d_ctx0, d_skip4] = dec_[0].backward(g);
        skip_grads_[4] = d_skip4;
        d_context.add_(d_ctx0);
        return d_context;
    }

    // Encoder-side backward from the refined-context gradient.
    void backward_encoders(const Tensor<T>& d_context) {
        auto [g_g, g_l] = refine_.backward(d_context);
        g_g = enc_g_.backward_step(5, g_g);
        if (dual()) g_l = enc_l_->backward_step(5, g_l);
        for (int lv = 4; lv >= 0; --lv) {
            g_g.add_(skip_grads_[static_cast<size_t>(lv)]);
            auto it = fusions_.find(lv);
            if (it != fusions_.end()) {
                auto [dg, dl] = it->second.backward(g_g, g_l);
                g_g = std::move(dg);
                g_l = std::move(dl);
            }
            g_g = enc_g_.backward_step(lv, g_g);
            if (dual()) g_l = enc_l_->backward_step(lv, g_l);
        }
    }

    void backward(const Tensor<T>& d_logits) { backward_encoders(backward_decoder(d_logits)); }

    void release_cache() {
        enc_g_.release_cache();
        if (enc_l_) enc_l_->release_cache();
        for (auto& [lv, f] : fusions_) f.release_cache();
        refine_.release_cache();
        for (auto& f : flows_) f.release_cache();
        for (auto& d : dec_) d.release_cache();
        head_.release_cache();
        skips_.clear();
        skip_grads_.clear();
    }

    const std::vector<Tensor<T>>& skips() const { return skips_; }

  private:
    Encoder<T> enc_g_;
    std::unique_ptr<Encoder<T>> enc_l_;
    std::map<int, LevelFusion<T>> fusions_;
    FeatureRefine<T> refine_;
    std::vector<FlowBlock<T>> flows_;
    std::vector<DecoderBlock<T>> dec_;
    std::vector<nn::Upsample2d<T>> dec_up_;
    OutputHead<T> head_;

    std::vector<Tensor<T>> skips_;
    std::vector<Tensor<T>> skip_grads_;
};

}  // namespace spgcde
