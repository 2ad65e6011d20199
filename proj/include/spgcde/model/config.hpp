#pragma once
// Architecture plan: six encoder levels, fusion levels, flow pairs, ablation
// toggles. The width divisor scales every channel count uniformly so the full
// geometry can be instantiated at desk scale.

#include <string>
#include <vector>

#include "spgcde/common.hpp"

namespace spgcde {

enum class BlockKind { Stem, ResidualStage, BottleneckStage };

struct EncoderLevelSpec {
    int index = 0;
    BlockKind kind = BlockKind::ResidualStage;
    int in_ch = 0;
    int mid_ch = 0;       // bottleneck width; 0 for the stem
    int out_ch = 0;
    int blocks = 0;       // residual blocks in the stage; 0 for the stem
    int stage_stride = 1; // stride applied within this stage
    bool pool_first = false;
    int stride_vs_input = 1;
};

// Channel plan at width divisor 1: (128, 256, 512, 1024, 2048, 2048) with
// cumulative strides (2, 4, 8, 16, 32, 32).
inline std::vector<EncoderLevelSpec> encoder_plan(int width) {
    if (width < 1 || 64 % width != 0)
        throw BadConfig("width divisor must divide 64, got " + std::to_string(width));
    const int base_out[6] = {128, 256, 512, 1024, 2048, 2048};
    const int base_mid[6] = {0, 64, 128, 256, 512, 512};
    const int blocks[6] = {0, 3, 4, 6, 3, 1};
    const int stage_stride[6] = {2, 1, 2, 2, 2, 1};
    const bool pool_first[6] = {false, true, false, false, false, false};

    std::vector<EncoderLevelSpec> plan(6);
    int cum = 1;
    for (int i = 0; i < 6; ++i) {
        EncoderLevelSpec& s = plan[static_cast<size_t>(i)];
        s.index = i;
        s.kind = i == 0 ? BlockKind::Stem
                        : (i == 5 ? BlockKind::BottleneckStage : BlockKind::ResidualStage);
        s.in_ch = i == 0 ? 1 : base_out[i - 1] / width;
        s.mid_ch = base_mid[i] / width;
        s.out_ch = base_out[i] / width;
        s.blocks = blocks[i];
        s.stage_stride = stage_stride[i];
        s.pool_first = pool_first[i];
        cum *= stage_stride[i] * (pool_first[i] ? 2 : 1);
        s.stride_vs_input = cum;
    }
    return plan;
}

struct FlowPair {
    int channels = 0;
    int scale = 0;
};

inline std::vector<FlowPair> flow_plan(int width) {
    return {{1024 / width, 2}, {512 / width, 4}, {256 / width, 8}, {128 / width, 16}};
}

inline std::vector<int> decoder_channels(int width) {
    return {1024 / width, 512 / width, 256 / width, 128 / width, 64 / width};
}

enum class FusionKind { None, Concat, CrossAttention, Sca };

inline std::string fusion_name(FusionKind k) {
    switch (k) {
        case FusionKind::None: return "none";
        case FusionKind::Concat: return "concat";
        case FusionKind::CrossAttention: return "cross_attention";
        case FusionKind::Sca: return "sca";
    }
    return "none";
}

inline FusionKind parse_fusion(const std::string& s) {
    if (s == "none") return FusionKind::None;
    if (s == "concat") return FusionKind::Concat;
    if (s == "cross_attention") return FusionKind::CrossAttention;
    if (s == "sca") return FusionKind::Sca;
    throw BadConfig("unknown fusion kind: " + s);
}

enum class PriorSource { Files, BuiltinUnet, GroundTruthOracle };

inline std::string prior_source_name(PriorSource p) {
    switch (p) {
        case PriorSource::Files: return "files";
        case PriorSource::BuiltinUnet: return "builtin-unet-like";
        case PriorSource::GroundTruthOracle: return "ground-truth-oracle";
    }
    return "files";
}

inline PriorSource parse_prior_source(const std::string& s) {
    if (s == "files") return PriorSource::Files;
    if (s == "builtin-unet-like") return PriorSource::BuiltinUnet;
    if (s == "ground-truth-oracle") return PriorSource::GroundTruthOracle;
    throw BadConfig("unknown prior source: " + s);
}

struct AblationConfig {
    bool use_prior = true;
    bool use_local_encoder = true;
    FusionKind fusion = FusionKind::Sca;
    PriorSource prior_source = PriorSource::Files;

    void validate() const {
        if (use_local_encoder && !use_prior)
            throw BadConfig("local encoder requires the spatial prior");
        if (fusion != FusionKind::None && !use_local_encoder)
            throw BadConfig("fusion requires the local encoder");
    }

    static AblationConfig preset(const std::string& name) {
        AblationConfig c;
        if (name == "model1") {
            c.use_prior = false;
            c.use_local_encoder = false;
            c.fusion = FusionKind::None;
        } else if (name == "model2") {
            c.use_prior = true;
            c.use_local_encoder = true;
            c.fusion = FusionKind::None;
        } else if (name == "full") {
            c.use_prior = true;
            c.use_local_encoder = true;
            c.fusion = FusionKind::Sca;
        } else if (name == "none" || name == "concat" || name == "cross_attention" ||
                   name == "sca") {
            // fusion sweep rows: dual-encoder setup with the named fusion
            c.use_prior = true;
            c.use_local_encoder = true;
            c.fusion = parse_fusion(name);
        } else {
            throw BadConfig("unknown preset: " + name);
        }
        return c;
    }
};

struct ModelConfig {
    int width = 16;         // channel divisor; 1 is the full-scale geometry
    int num_classes = 4;
    std::vector<int> sca_levels = {2, 3, 4};
    int heads = 4;

    int cg() const { return 512 / width; }

    void validate() const {
        if (width < 1 || 64 % width != 0)
            throw BadConfig("width divisor must divide 64, got " + std::to_string(width));
        if (num_classes < 1) throw BadConfig("num_classes must be >= 1");
        if (heads < 1) throw BadConfig("heads must be >= 1");
        const auto plan = encoder_plan(width);
        for (int lv : sca_levels) {
            if (lv < 0 || lv > 4)
                throw BadConfig("fusion level " + std::to_string(lv) +
                                " out of range (must feed a later stage)");
            const int ch = plan[static_cast<size_t>(lv)].out_ch;
            if (ch % heads != 0)
                throw BadConfig("channels " + std::to_string(ch) + " at level " +
                                std::to_string(lv) + " not divisible by " +
                                std::to_string(heads) + " heads");
            if (ch < heads) throw BadConfig("channel count below head count");
        }
    }
};

}  // namespace spgcde
