// Architecture-level checks: channel/stride plans, attention fusion algebra,
// end-to-end shape contracts, and a named-parameter gradient sweep across every
// module family (double precision).

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "spgcde/model/config.hpp"
#include "spgcde/model/encoder.hpp"
#include "spgcde/model/fusion.hpp"
#include "spgcde/model/network.hpp"
#include "spgcde/model/prior_unet.hpp"
#include "spgcde/nn/sgd.hpp"

using namespace spgcde;

namespace {

Tensor<double> random_tensor(const Shape& shape, Rng& rng, double scale = 1.0) {
    Tensor<double> t(shape);
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal(0.0, scale);
    return t;
}

double dot(const Tensor<double>& a, const Tensor<double>& b) {
    REQUIRE(a.numel() == b.numel());
    double s = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) s += a[i] * b[i];
    return s;
}

double rel_err(double got, double want) {
    const double denom = std::max({std::abs(got), std::abs(want), 1e-10});
    return std::abs(got - want) / denom;
}

nn::ParamRef<double>* find_param(nn::Registry<double>& reg, const std::string& name) {
    for (auto& p : reg.params)
        if (p.name == name) return &p;
    return nullptr;
}

// Reference attention: plain double loops, one sample, heads sliced by column.
Tensor<double> naive_attention(const CrossAttention<double>& at, const Tensor<double>& q_tok,
                               const Tensor<double>& kv_tok) {
    const int r = q_tok.dim(0), s = kv_tok.dim(0), c = at.channels, hd = c / at.heads;
    auto lin = [&](const nn::Linear<double>& w, const Tensor<double>& x) {
        Tensor<double> y = Tensor<double>::zeros({x.dim(0), c});
        for (int i = 0; i < x.dim(0); ++i)
            for (int o = 0; o < c; ++o) {
                double acc = 0.0;
                for (int j = 0; j < c; ++j) acc += x.at2(i, j) * w.weight.at2(o, j);
                y.at2(i, o) = acc;
            }
        return y;
    };
    Tensor<double> q = lin(at.wq, q_tok), k = lin(at.wk, kv_tok), v = lin(at.wv, kv_tok);
    Tensor<double> o = Tensor<double>::zeros({r, c});
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    for (int h = 0; h < at.heads; ++h) {
        for (int i = 0; i < r; ++i) {
            std::vector<double> logits(static_cast<size_t>(s));
            double m = -1e300;
            for (int j = 0; j < s; ++j) {
                double acc = 0.0;
                for (int d = 0; d < hd; ++d) acc += q.at2(i, h * hd + d) * k.at2(j, h * hd + d);
                logits[static_cast<size_t>(j)] = acc * scale;
                m = std::max(m, logits[static_cast<size_t>(j)]);
            }
            double z = 0.0;
            for (int j = 0; j < s; ++j) {
                logits[static_cast<size_t>(j)] = std::exp(logits[static_cast<size_t>(j)] - m);
                z += logits[static_cast<size_t>(j)];
            }
            for (int d = 0; d < hd; ++d) {
                double acc = 0.0;
                for (int j = 0; j < s; ++j)
                    acc += logits[static_cast<size_t>(j)] / z * v.at2(j, h * hd + d);
                o.at2(i, h * hd + d) = acc;
            }
        }
    }
    Tensor<double> y = lin(at.wo, o);
    y.add_(q_tok);
    return y;
}

}  // namespace

TEST_CASE("encoder channel and stride plan") {
    const auto p1 = encoder_plan(1);
    REQUIRE(p1.size() == 6);
    const int want_out[6] = {128, 256, 512, 1024, 2048, 2048};
    const int want_stride[6] = {2, 4, 8, 16, 32, 32};
    const int want_blocks[6] = {0, 3, 4, 6, 3, 1};
    for (int i = 0; i < 6; ++i) {
        REQUIRE(p1[static_cast<size_t>(i)].out_ch == want_out[i]);
        REQUIRE(p1[static_cast<size_t>(i)].stride_vs_input == want_stride[i]);
        REQUIRE(p1[static_cast<size_t>(i)].blocks == want_blocks[i]);
    }
    REQUIRE(p1[0].kind == BlockKind::Stem);
    REQUIRE(p1[1].pool_first);
    REQUIRE(p1[5].stage_stride == 1);
    REQUIRE(p1[5].kind == BlockKind::BottleneckStage);
    REQUIRE(p1[2].in_ch == 256);
    REQUIRE(p1[2].mid_ch == 128);

    const auto p16 = encoder_plan(16);
    for (int i = 0; i < 6; ++i) {
        REQUIRE(p16[static_cast<size_t>(i)].out_ch == want_out[i] / 16);
        REQUIRE(p16[static_cast<size_t>(i)].stride_vs_input == want_stride[i]);
    }
    REQUIRE(p16[0].in_ch == 1);

    REQUIRE_THROWS_AS(encoder_plan(3), BadConfig);
    REQUIRE_THROWS_AS(encoder_plan(0), BadConfig);
}

TEST_CASE("flow and decoder plans") {
    const auto fp = flow_plan(4);
    REQUIRE(fp.size() == 4);
    REQUIRE(fp[0].channels == 256);
    REQUIRE(fp[0].scale == 2);
    REQUIRE(fp[3].channels == 32);
    REQUIRE(fp[3].scale == 16);
    const auto dc = decoder_channels(2);
    REQUIRE(dc == std::vector<int>{512, 256, 128, 64, 32});
    ModelConfig mc;
    mc.width = 8;
    REQUIRE(mc.cg() == 64);
}

TEST_CASE("model config validation") {
    ModelConfig ok;
    ok.width = 16;
    REQUIRE_NOTHROW(ok.validate());

    ModelConfig bad_level = ok;
    bad_level.sca_levels = {5};
    REQUIRE_THROWS_AS(bad_level.validate(), BadConfig);

    ModelConfig bad_heads = ok;
    bad_heads.heads = 3;  // level-2 width 32 not divisible by 3
    REQUIRE_THROWS_AS(bad_heads.validate(), BadConfig);

    ModelConfig bad_classes = ok;
    bad_classes.num_classes = 0;
    REQUIRE_THROWS_AS(bad_classes.validate(), BadConfig);

    AblationConfig a;
    a.use_prior = false;
    a.use_local_encoder = true;
    REQUIRE_THROWS_AS(a.validate(), BadConfig);
    AblationConfig b;
    b.use_prior = true;
    b.use_local_encoder = false;
    b.fusion = FusionKind::Sca;
    REQUIRE_THROWS_AS(b.validate(), BadConfig);
    REQUIRE_THROWS_AS(AblationConfig::preset("model3"), BadConfig);
    REQUIRE(AblationConfig::preset("model1").use_prior == false);
    REQUIRE(AblationConfig::preset("full").fusion == FusionKind::Sca);
    REQUIRE(AblationConfig::preset("cross_attention").fusion == FusionKind::CrossAttention);
}

TEST_CASE("bottleneck projection and gradients") {
    Rng rng(201);
    Bottleneck<double> same(8, 4, 8, 1, rng);
    REQUIRE_FALSE(same.has_proj);
    Bottleneck<double> wide(8, 4, 16, 1, rng);
    REQUIRE(wide.has_proj);
    Bottleneck<double> strided(8, 4, 8, 2, rng);
    REQUIRE(strided.has_proj);
    REQUIRE(wide.proj.weight.dim(0) == 16);
    REQUIRE(wide.proj.weight.dim(1) == 8);

    Tensor<double> x = random_tensor({2, 8, 6, 6}, rng);
    Tensor<double> y = strided.forward(x, true, true);
    REQUIRE(y.dim(1) == 8);
    REQUIRE(y.dim(2) == 3);
    Rng prng(202);
    Tensor<double> proj = random_tensor(y.shape(), prng);
    Tensor<double> dx = strided.backward(proj);
    auto loss = [&]() { return dot(strided.forward(x, true, false), proj); };
    for (int trial = 0; trial < 6; ++trial) {
        const int64_t xi = static_cast<int64_t>(rng.below(static_cast<uint64_t>(x.numel())));
        const double saved = x[xi];
        x[xi] = saved + 1e-6;
        const double up = loss();
        x[xi] = saved - 1e-6;
        const double dn = loss();
        x[xi] = saved;
        REQUIRE(rel_err(dx[xi], (up - dn) / 2e-6) < 1e-4);
    }
}

TEST_CASE("tokenize layout and round trip") {
    Tensor<double> f({1, 2, 2, 3});
    for (int64_t i = 0; i < f.numel(); ++i) f[i] = static_cast<double>(i);
    Tensor<double> t = tokenize(f);
    REQUIRE(t.dim(0) == 6);
    REQUIRE(t.dim(1) == 2);
    // Token p = y*w + x carries (channel0, channel1) of that pixel.
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 3; ++x) {
            const int p = y * 3 + x;
            REQUIRE(t.at2(p, 0) == f.at4(0, 0, y, x));
            REQUIRE(t.at2(p, 1) == f.at4(0, 1, y, x));
        }
    Tensor<double> back = detokenize(t, f.shape());
    for (int64_t i = 0; i < f.numel(); ++i) REQUIRE(back[i] == f[i]);

    // Batched: sample blocks are contiguous runs of h*w tokens.
    Rng rng(211);
    Tensor<double> fb = random_tensor({2, 3, 2, 2}, rng);
    Tensor<double> tb = tokenize(fb);
    REQUIRE(tb.dim(0) == 8);
    REQUIRE(tb.at2(4, 1) == fb.at4(1, 1, 0, 0));
    Tensor<double> backb = detokenize(tb, fb.shape());
    for (int64_t i = 0; i < fb.numel(); ++i) REQUIRE(backb[i] == fb[i]);

    Tensor<double> wrong({7, 3});
    REQUIRE_THROWS_AS(detokenize(wrong, fb.shape()), ShapeMismatch);
}

TEST_CASE("cross attention matches naive reference") {
    Rng rng(221);
    CrossAttention<double> at(8, 2, rng);
    Tensor<double> q = random_tensor({5, 8}, rng);
    Tensor<double> kv = random_tensor({7, 8}, rng);
    Tensor<double> got = at.forward(q, kv, 1, false);
    Tensor<double> want = naive_attention(at, q, kv);
    for (int64_t i = 0; i < got.numel(); ++i)
        REQUIRE(got[i] == Catch::Approx(want[i]).epsilon(1e-12).margin(1e-12));
}

TEST_CASE("attention never crosses samples") {
    Rng rng(231);
    CrossAttention<double> at(8, 2, rng);
    Tensor<double> q0 = random_tensor({3, 8}, rng), q1 = random_tensor({3, 8}, rng);
    Tensor<double> k0 = random_tensor({4, 8}, rng), k1 = random_tensor({4, 8}, rng);
    Tensor<double> q({6, 8}), kv({8, 8});
    for (int64_t i = 0; i < q0.numel(); ++i) {
        q[i] = q0[i];
        q[i + q0.numel()] = q1[i];
    }
    for (int64_t i = 0; i < k0.numel(); ++i) {
        kv[i] = k0[i];
        kv[i + k0.numel()] = k1[i];
    }
    Tensor<double> both = at.forward(q, kv, 2, false);
    Tensor<double> a0 = at.forward(q0, k0, 1, false);
    Tensor<double> a1 = at.forward(q1, k1, 1, false);
    for (int64_t i = 0; i < a0.numel(); ++i) {
        REQUIRE(both[i] == Catch::Approx(a0[i]).epsilon(1e-12).margin(1e-12));
        REQUIRE(both[i + a0.numel()] == Catch::Approx(a1[i]).epsilon(1e-12).margin(1e-12));
    }
}

TEST_CASE("attention residual identity") {
    Rng rng(241);
    CrossAttention<double> at(8, 4, rng);
    at.wo.weight.fill(0.0);  // output projection silenced: only the residual remains
    Tensor<double> q = random_tensor({6, 8}, rng);
    Tensor<double> kv = random_tensor({3, 8}, rng);
    Tensor<double> y = at.forward(q, kv, 1, false);
    for (int64_t i = 0; i < q.numel(); ++i) REQUIRE(y[i] == q[i]);
}

TEST_CASE("attention is invariant to key value permutation") {
    Rng rng(251);
    CrossAttention<double> at(8, 2, rng);
    Tensor<double> q = random_tensor({5, 8}, rng);
    Tensor<double> kv = random_tensor({6, 8}, rng);
    std::vector<int> perm{3, 0, 5, 1, 4, 2};
    Tensor<double> kv_p({6, 8});
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 8; ++j)
            kv_p.at2(i, j) = kv.at2(perm[static_cast<size_t>(i)], j);
    Tensor<double> a = at.forward(q, kv, 1, false);
    Tensor<double> b = at.forward(q, kv_p, 1, false);
    for (int64_t i = 0; i < a.numel(); ++i)
        REQUIRE(a[i] == Catch::Approx(b[i]).epsilon(1e-12).margin(1e-12));
}

TEST_CASE("attention is equivariant to query permutation") {
    Rng rng(261);
    CrossAttention<double> at(8, 2, rng);
    Tensor<double> q = random_tensor({4, 8}, rng);
    Tensor<double> kv = random_tensor({5, 8}, rng);
    std::vector<int> perm{2, 0, 3, 1};
    Tensor<double> q_p({4, 8});
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 8; ++j) q_p.at2(i, j) = q.at2(perm[static_cast<size_t>(i)], j);
    Tensor<double> a = at.forward(q, kv, 1, false);
    Tensor<double> b = at.forward(q_p, kv, 1, false);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 8; ++j)
            REQUIRE(b.at2(i, j) ==
                    Catch::Approx(a.at2(perm[static_cast<size_t>(i)], j)).epsilon(1e-12).margin(1e-12));
}

TEST_CASE("symmetric fusion mirrors swapped streams") {
    Rng rng(271);
    ScaBlock<double> blk(8, 2, rng);
    // Make both branches identical so swapping the inputs swaps the outputs.
    for (int64_t i = 0; i < blk.branch_g.wq.weight.numel(); ++i) {
        blk.branch_l.wq.weight[i] = blk.branch_g.wq.weight[i];
        blk.branch_l.wk.weight[i] = blk.branch_g.wk.weight[i];
        blk.branch_l.wv.weight[i] = blk.branch_g.wv.weight[i];
        blk.branch_l.wo.weight[i] = blk.branch_g.wo.weight[i];
    }
    Tensor<double> g = random_tensor({1, 8, 3, 3}, rng);
    Tensor<double> l = random_tensor({1, 8, 3, 3}, rng);
    auto [g1, l1] = blk.forward(g, l, false);
    auto [g2, l2] = blk.forward(l, g, false);
    for (int64_t i = 0; i < g1.numel(); ++i) {
        REQUIRE(g1[i] == Catch::Approx(l2[i]).epsilon(1e-12).margin(1e-12));
        REQUIRE(l1[i] == Catch::Approx(g2[i]).epsilon(1e-12).margin(1e-12));
    }
}

TEST_CASE("fusion couples gradients across streams") {
    Rng rng(281);
    ScaBlock<double> blk(8, 2, rng);
    Tensor<double> g = random_tensor({1, 8, 3, 3}, rng);
    Tensor<double> l = random_tensor({1, 8, 3, 3}, rng);
    auto [go, lo] = blk.forward(g, l, true);
    Tensor<double> d_g = random_tensor(go.shape(), rng);
    Tensor<double> d_l = Tensor<double>::zeros(lo.shape());
    auto [dg, dl] = blk.backward(d_g, d_l);
    // The local stream feeds keys/values of the global branch, so a purely
    // global objective still reaches it.
    REQUIRE(dl.abs_max() > 1e-12);
    REQUIRE(dg.abs_max() > 1e-12);
}

TEST_CASE("one directional fusion passes the local stream through") {
    Rng rng(291);
    CrossOnlyBlock<double> blk(8, 2, rng);
    Tensor<double> g = random_tensor({1, 8, 3, 3}, rng);
    Tensor<double> l = random_tensor({1, 8, 3, 3}, rng);
    auto [go, lo] = blk.forward(g, l, false);
    for (int64_t i = 0; i < l.numel(); ++i) REQUIRE(lo[i] == l[i]);
    bool changed = false;
    for (int64_t i = 0; i < g.numel(); ++i)
        if (go[i] != g[i]) changed = true;
    REQUIRE(changed);
}

TEST_CASE("network shape contract and skips") {
    ModelConfig mc;
    mc.width = 16;
    mc.num_classes = 4;
    SegNet<float> net(mc, AblationConfig::preset("full"), 7);

    Rng rng(301);
    Tensor<float> xg({1, 1, 64, 64}), xl({1, 1, 64, 64});
    for (int64_t i = 0; i < xg.numel(); ++i) {
        xg[i] = static_cast<float>(rng.uniform());
        xl[i] = static_cast<float>(rng.uniform());
    }
    Tensor<float> ctx = net.forward_encoders(xg, &xl, false, false);
    REQUIRE(ctx.dim(0) == 1);
    REQUIRE(ctx.dim(1) == 32);  // 512/16
    REQUIRE(ctx.dim(2) == 2);
    REQUIRE(ctx.dim(3) == 2);

    const auto& sk = net.skips();
    const int want_ch[5] = {8, 16, 32, 64, 128};
    const int want_ext[5] = {32, 16, 8, 4, 2};
    for (int i = 0; i < 5; ++i) {
        REQUIRE(sk[static_cast<size_t>(i)].dim(1) == want_ch[i]);
        REQUIRE(sk[static_cast<size_t>(i)].dim(2) == want_ext[i]);
        REQUIRE(sk[static_cast<size_t>(i)].dim(3) == want_ext[i]);
    }

    Tensor<float> logits = net.forward_decoder(ctx, false, false);
    REQUIRE(logits.dim(0) == 1);
    REQUIRE(logits.dim(1) == 4);
    REQUIRE(logits.dim(2) == 64);
    REQUIRE(logits.dim(3) == 64);
    REQUIRE(logits.all_finite());

    Tensor<float> probs = net.probabilities(logits);
    for (int y = 0; y < 64; y += 17)
        for (int x = 0; x < 64; x += 13) {
            float s = 0.0f;
            for (int c = 0; c < 4; ++c) s += probs.at4(0, c, y, x);
            REQUIRE(s == Catch::Approx(1.0f).epsilon(1e-4));
        }

    Tensor<float> bad({1, 1, 48, 64});
    REQUIRE_THROWS_AS(net.forward_encoders(bad, &bad, false, false), BadGeometry);
    REQUIRE_THROWS_AS(net.forward_encoders(xg, nullptr, false, false), BadConfig);
}

TEST_CASE("network initialization is seed deterministic") {
    ModelConfig mc;
    mc.width = 16;
    SegNet<float> a(mc, AblationConfig::preset("full"), 5);
    SegNet<float> b(mc, AblationConfig::preset("full"), 5);
    SegNet<float> c(mc, AblationConfig::preset("full"), 6);
    auto ra = a.registry(), rb = b.registry(), rc = c.registry();
    REQUIRE(ra.params.size() == rb.params.size());
    bool all_equal = true, any_diff_c = false;
    for (size_t i = 0; i < ra.params.size(); ++i) {
        REQUIRE(ra.params[i].name == rb.params[i].name);
        const auto& va = *ra.params[i].value;
        const auto& vb = *rb.params[i].value;
        const auto& vc = *rc.params[i].value;
        for (int64_t k = 0; k < va.numel(); ++k) {
            if (va[k] != vb[k]) all_equal = false;
            if (va[k] != vc[k]) any_diff_c = true;
        }
    }
    REQUIRE(all_equal);
    REQUIRE(any_diff_c);
}

TEST_CASE("parameter count rises with each capability") {
    ModelConfig mc;
    mc.width = 16;
    SegNet<float> m1(mc, AblationConfig::preset("model1"), 1);
    SegNet<float> m2(mc, AblationConfig::preset("model2"), 1);
    SegNet<float> full(mc, AblationConfig::preset("full"), 1);
    REQUIRE(m1.param_count() < m2.param_count());
    REQUIRE(m2.param_count() < full.param_count());
}

TEST_CASE("network gradient sweep over named parameters") {
    ModelConfig mc;
    mc.width = 16;
    mc.num_classes = 3;
    SegNet<double> net(mc, AblationConfig::preset("full"), 11);
    auto reg = net.registry();

    Rng rng(311);
    Tensor<double> xg = random_tensor({1, 1, 64, 64}, rng, 0.5);
    Tensor<double> xl = random_tensor({1, 1, 64, 64}, rng, 0.5);
    Tensor<double> proj;

    auto loss = [&]() {
        Tensor<double> y = net.forward(xg, &xl, true, false);
        return dot(y, proj);
    };

    Tensor<double> logits = net.forward(xg, &xl, true, true);
    Rng prng(312);
    proj = random_tensor(logits.shape(), prng, 1.0 / std::sqrt(static_cast<double>(logits.numel())));
    net.backward(proj);

    const std::vector<std::string> names = {
        "enc_g.level0.stem1.conv.weight",
        "enc_g.level2.block0.conv2.weight",
        "enc_g.level3.block0.bn2.gamma",
        "enc_l.level1.block1.conv1.weight",
        "fuse2.branch_g.wq.weight",
        "fuse3.branch_l.wv.weight",
        "fuse4.branch_g.wo.weight",
        "refine.cb1.conv.weight",
        "flow1.cb2.conv.weight",
        "dec0.cb1.conv.weight",
        "dec3.cb2.conv.weight",
        "head.cb1.conv.weight",
        "head.proj.bias",
    };
    // The map from one weight to the logits is only piecewise smooth, so a
    // fixed step can straddle activation kinks. Shrink the step until the
    // interval is clean; a wrong gradient fails at every step size.
    Rng pick(313);
    for (const auto& name : names) {
        auto* p = find_param(reg, name);
        INFO("parameter " << name);
        REQUIRE(p != nullptr);
        const int64_t i = static_cast<int64_t>(pick.below(static_cast<uint64_t>(p->value->numel())));
        const double analytic = (*p->grad)[i];
        const double saved = (*p->value)[i];
        double best = std::numeric_limits<double>::infinity();
        double fd = 0.0;
        for (const double h : {1e-6, 1e-7, 1e-8, 1e-9, 1e-10}) {
            (*p->value)[i] = saved + h;
            const double up = loss();
            (*p->value)[i] = saved - h;
            const double dn = loss();
            (*p->value)[i] = saved;
            const double slope = (up - dn) / (2.0 * h);
            if (rel_err(analytic, slope) < best) {
                best = rel_err(analytic, slope);
                fd = slope;
            }
            if (best < 1e-4) break;
        }
        INFO("analytic " << analytic << " fd " << fd);
        REQUIRE(best < 1e-4);
    }
}

TEST_CASE("no module is dead after one backward pass") {
    ModelConfig mc;
    mc.width = 16;
    mc.num_classes = 3;
    SegNet<double> net(mc, AblationConfig::preset("full"), 13);
    auto reg = net.registry();

    Rng rng(321);
    Tensor<double> xg = random_tensor({1, 1, 64, 64}, rng, 0.5);
    Tensor<double> xl = random_tensor({1, 1, 64, 64}, rng, 0.5);
    Tensor<double> logits = net.forward(xg, &xl, true, true);
    Rng prng(322);
    Tensor<double> d = random_tensor(logits.shape(), prng);
    net.backward(d);
    for (auto& p : reg.params) {
        INFO("parameter " << p.name);
        REQUIRE_FALSE(p.grad->empty());
        REQUIRE(p.grad->abs_max() > 0.0);
    }

    // One optimizer step must move every parameter tensor.
    nn::SgdOptimizer<double> opt(0.9, 1e-4);
    std::vector<Tensor<double>> before;
    before.reserve(reg.params.size());
    for (auto& p : reg.params) before.push_back(*p.value);
    opt.step(reg, 0.01);
    for (size_t i = 0; i < reg.params.size(); ++i) {
        INFO("parameter " << reg.params[i].name);
        bool moved = false;
        for (int64_t k = 0; k < before[i].numel(); ++k)
            if ((*reg.params[i].value)[k] != before[i][k]) moved = true;
        REQUIRE(moved);
    }
}

TEST_CASE("coarse segmenter shapes and gradients") {
    PriorUnet<double> net(3, 17);
    Rng rng(331);
    Tensor<double> x = random_tensor({2, 1, 16, 16}, rng);
    Tensor<double> y = net.forward(x, true, true);
    REQUIRE(y.dim(0) == 2);
    REQUIRE(y.dim(1) == 3);
    REQUIRE(y.dim(2) == 16);
    REQUIRE(y.dim(3) == 16);

    Tensor<double> rect = random_tensor({1, 1, 20, 16}, rng);
    REQUIRE_NOTHROW(net.forward(rect, false, false));
    Tensor<double> bad = random_tensor({1, 1, 14, 16}, rng);
    REQUIRE_THROWS_AS(net.forward(bad, false, false), BadGeometry);

    auto reg = net.registry();
    Tensor<double> proj;
    auto loss = [&]() { return dot(net.forward(x, true, false), proj); };
    Rng prng(332);
    proj = random_tensor(y.shape(), prng);
    net.forward(x, true, true);
    net.backward(proj);
    Rng pick(333);
    for (int trial = 0; trial < 5; ++trial) {
        auto& p = reg.params[pick.below(reg.params.size())];
        const int64_t i = static_cast<int64_t>(pick.below(static_cast<uint64_t>(p.value->numel())));
        const double analytic = (*p.grad)[i];
        const double saved = (*p.value)[i];
        (*p.value)[i] = saved + 1e-6;
        const double up = loss();
        (*p.value)[i] = saved - 1e-6;
        const double dn = loss();
        (*p.value)[i] = saved;
        INFO("parameter " << p.name << " index " << i);
        REQUIRE(rel_err(analytic, (up - dn) / 2e-6) < 1e-4);
    }
}
