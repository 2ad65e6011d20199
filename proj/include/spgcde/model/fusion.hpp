#pragma once
// Cross-stream fusion at interior encoder levels. The symmetric form runs two
// multi-head cross attentions, each taking queries from one stream and
// keys/values from the other, both reading the ORIGINAL (pre-fusion) inputs,
// each closed by a residual add.

#include <cmath>
#include <memory>
#include <utility>

#include "spgcde/model/config.hpp"
#include "spgcde/nn/compose.hpp"
#include "spgcde/nn/conv_block.hpp"
#include "spgcde/nn/linear.hpp"

namespace spgcde {

// (C,h,w) or (N,C,h,w) -> (N·h·w, C); token row order is row-major spatial.
template <typename T>
inline Tensor<T> tokenize(const Tensor<T>& f) {
    const bool batched = f.ndim() == 4;
    const int n = batched ? f.dim(0) : 1;
    const int c = batched ? f.dim(1) : f.dim(0);
    const int h = batched ? f.dim(2) : f.dim(1);
    const int w = batched ? f.dim(3) : f.dim(2);
    const int64_t plane = static_cast<int64_t>(h) * w;
    Tensor<T> t = Tensor<T>::zeros({static_cast<int>(n * plane), c});
    for (int i = 0; i < n; ++i) {
        const T* src = f.data() + static_cast<int64_t>(i) * c * plane;
        T* dst = t.data() + static_cast<int64_t>(i) * plane * c;
        for (int ci = 0; ci < c; ++ci)
            for (int64_t p = 0; p < plane; ++p) dst[p * c + ci] = src[ci * plane + p];
    }
    return t;
}

template <typename T>
inline Tensor<T> detokenize(const Tensor<T>& t, const Shape& map_shape) {
    const bool batched = map_shape.size() == 4;
    const int n = batched ? map_shape[0] : 1;
    const int c = batched ? map_shape[1] : map_shape[0];
    const int h = batched ? map_shape[2] : map_shape[1];
    const int w = batched ? map_shape[3] : map_shape[2];
    const int64_t plane = static_cast<int64_t>(h) * w;
    if (t.dim(0) != n * plane || t.dim(1) != c)
        throw ShapeMismatch("detokenize target " + shape_str(map_shape) + " vs tokens " +
                            shape_str(t.shape()));
    Tensor<T> f = Tensor<T>::zeros(map_shape);
    for (int i = 0; i < n; ++i) {
        const T* src = t.data() + static_cast<int64_t>(i) * plane * c;
        T* dst = f.data() + static_cast<int64_t>(i) * c * plane;
        for (int ci = 0; ci < c; ++ci)
            for (int64_t p = 0; p < plane; ++p) dst[ci * plane + p] = src[p * c + ci];
    }
    return f;
}

// One attention direction: queries from one token set, keys/values from the
// other, scaled dot product per head, output projection, residual add.
template <typename T>
struct CrossAttention {
    int channels = 0, heads = 1;
    nn::Linear<T> wq, wk, wv, wo;

    Tensor<T> q_p, k_p, v_p, concat_heads;  // projected caches
    Tensor<T> attn;                         // (n*heads, r, s) softmax rows
    int cached_n = 0;

    CrossAttention() = default;
    CrossAttention(int c, int num_heads, Rng& rng)
        : channels(c),
          heads(num_heads),
          wq(c, c, false, rng),
          wk(c, c, false, rng),
          wv(c, c, false, rng),
          wo(c, c, false, rng) {
        if (c % num_heads != 0)
            throw BadConfig("channels " + std::to_string(c) + " not divisible by " +
                            std::to_string(num_heads) + " heads");
    }

    void collect(nn::Registry<T>& reg, const std::string& prefix) {
        wq.collect(reg, prefix + ".wq");
        wk.collect(reg, prefix + ".wk");
        wv.collect(reg, prefix + ".wv");
        wo.collect(reg, prefix + ".wo");
    }

    static void copy_block(const Tensor<T>& src, int row0, int rows, int col0, int cols, T* dst) {
        for (int r = 0; r < rows; ++r) {
            const T* s = src.data() + static_cast<int64_t>(row0 + r) * src.dim(1) + col0;
            std::copy(s, s + cols, dst + static_cast<int64_t>(r) * cols);
        }
    }
    static void add_block(Tensor<T>& dst, int row0, int rows, int col0, int cols, const T* src) {
        for (int r = 0; r < rows; ++r) {
            T* d = dst.data() + static_cast<int64_t>(row0 + r) * dst.dim(1) + col0;
            const T* s = src + static_cast<int64_t>(r) * cols;
            for (int j = 0; j < cols; ++j) d[j] += s[j];
        }
    }

    // q_tok: (n·r, C), kv_tok: (n·s, C); attention never crosses samples.
    Tensor<T> forward(const Tensor<T>& q_tok, const Tensor<T>& kv_tok, int n, bool cache) {
        if (q_tok.dim(1) != channels || kv_tok.dim(1) != channels)
            throw ShapeMismatch("attention expects channel width " + std::to_string(channels));
        const int r = q_tok.dim(0) / n, s = kv_tok.dim(0) / n;
        const int d = channels / heads;
        const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d)));

        Tensor<T> q = wq.forward(q_tok, cache);
        Tensor<T> k = wk.forward(kv_tok, cache);
        Tensor<T> v = wv.forward(kv_tok, cache);
        Tensor<T> o = Tensor<T>::zeros({n * r, channels});
        Tensor<T> a = Tensor<T>::zeros({n * heads, r, s});

        std::vector<T> qh(static_cast<size_t>(r) * d), kh(static_cast<size_t>(s) * d),
            vh(static_cast<size_t>(s) * d), oh(static_cast<size_t>(r) * d);
        for (int i = 0; i < n; ++i) {
            for (int h = 0; h < heads; ++h) {
                copy_block(q, i * r, r, h * d, d, qh.data());
                copy_block(k, i * s, s, h * d, d, kh.data());
                copy_block(v, i * s, s, h * d, d, vh.data());
                T* logits = a.data() + a.offset3(i * heads + h);
                gemm<T>(qh.data(), kh.data(), logits, r, d, s, false, true, scale);
                for (int row = 0; row < r; ++row) {
                    T* lr = logits + static_cast<int64_t>(row) * s;
                    T m = lr[0];
                    for (int j = 1; j < s; ++j) m = std::max(m, lr[j]);
                    T z = T(0);
                    for (int j = 0; j < s; ++j) {
                        lr[j] = std::exp(lr[j] - m);
                        z += lr[j];
                    }
                    for (int j = 0; j < s; ++j) lr[j] /= z;
                }
                gemm<T>(logits, vh.data(), oh.data(), r, s, d);
                add_block(o, i * r, r, h * d, d, oh.data());
            }
        }
        Tensor<T> y = wo.forward(o, cache);
        y.add_(q_tok);
        if (cache) {
            q_p = std::move(q);
            k_p = std::move(k);
            v_p = std::move(v);
            attn = std::move(a);
            cached_n = n;
        }
        return y;
    }

    // Returns (d_q_tok, d_kv_tok).
    std::pair<Tensor<T>, Tensor<T>> backward(const Tensor<T>& dy) {
        const int n = cached_n;
        const int r = q_p.dim(0) / n, s = k_p.dim(0) / n;
        const int d = channels / heads;
        const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d)));

        Tensor<T> d_o = wo.backward(dy);
        Tensor<T> d_q = Tensor<T>::zeros(q_p.shape());
        Tensor<T> d_k = Tensor<T>::zeros(k_p.shape());
        Tensor<T> d_v = Tensor<T>::zeros(v_p.shape());

        std::vector<T> qh(static_cast<size_t>(r) * d), kh(static_cast<size_t>(s) * d),
            vh(static_cast<size_t>(s) * d), doh(static_cast<size_t>(r) * d),
            da(static_cast<size_t>(r) * s), dqh(static_cast<size_t>(r) * d),
            dkh(static_cast<size_t>(s) * d), dvh(static_cast<size_t>(s) * d);
        for (int i = 0; i < n; ++i) {
            for (int h = 0; h < heads; ++h) {
                copy_block(q_p, i * r, r, h * d, d, qh.data());
                copy_block(k_p, i * s, s, h * d, d, kh.data());
                copy_block(v_p, i * s, s, h * d, d, vh.data());
                copy_block(d_o, i * r, r, h * d, d, doh.data());
                const T* a = attn.data() + attn.offset3(i * heads + h);
                // dV_h = A^T dO_h ; dA = dO_h V_h^T
                gemm<T>(a, doh.data(), dvh.data(), s, r, d, true, false);
                gemm<T>(doh.data(), vh.data(), da.data(), r, d, s, false, true);
                // softmax rows: dL = A ⊙ (dA − rowsum(dA ⊙ A))
                for (int row = 0; row < r; ++row) {
                    const T* ar = a + static_cast<int64_t>(row) * s;
                    T* dar = da.data() + static_cast<int64_t>(row) * s;
                    T dot = T(0);
                    for (int j = 0; j < s; ++j) dot += dar[j] * ar[j];
                    for (int j = 0; j < s; ++j) dar[j] = ar[j] * (dar[j] - dot);
                }
                gemm<T>(da.data(), kh.data(), dqh.data(), r, s, d, false, false, scale);
                gemm<T>(da.data(), qh.data(), dkh.data(), s, r, d, true, false, scale);
                add_block(d_q, i * r, r, h * d, d, dqh.data());
                add_block(d_k, i * s, s, h * d, d, dkh.data());
                add_block(d_v, i * s, s, h * d, d, dvh.data());
            }
        }
        Tensor<T> d_q_tok = wq.backward(d_q);
        Tensor<T> d_kv = wk.backward(d_k);
        d_kv.add_(wv.backward(d_v));
        d_q_tok.add_(dy);  // residual
        return {std::move(d_q_tok), std::move(d_kv)};
    }

    void release_cache() {
        wq.release_cache();
        wk.release_cache();
        wv.release_cache();
        wo.release_cache();
        q_p = k_p = v_p = attn = Tensor<T>();
    }
};

// Symmetric pair: each stream queries the other; both read original inputs.
template <typename T>
struct ScaBlock {
    CrossAttention<T> branch_g, branch_l;
    Shape g_shape, l_shape;

    ScaBlock() = default;
    ScaBlock(int channels, int heads, Rng& rng)
        : branch_g(channels, heads, rng), branch_l(channels, heads, rng) {}

    void collect(nn::Registry<T>& reg, const std::string& prefix) {
        branch_g.collect(reg, prefix + ".branch_g");
        branch_l.collect(reg, prefix + ".branch_l");
    }

    std::pair<Tensor<T>, Tensor<T>> forward(const Tensor<T>& ge, const Tensor<T>& le,
                                            bool cache) {
        if (!ge.same_shape(le))
            throw ShapeMismatch("fusion inputs " + shape_str(ge.shape()) + " vs " +
                                shape_str(le.shape()));
        g_shape = ge.shape();
        l_shape = le.shape();
        const int n = ge.ndim() == 4 ? ge.dim(0) : 1;
        Tensor<T> gt = tokenize(ge);
        Tensor<T> lt = tokenize(le);
        Tensor<T> g_out = branch_g.forward(gt, lt, n, cache);
        Tensor<T> l_out = branch_l.forward(lt, gt, n, cache);
        return {detokenize(g_out, g_shape), detokenize(l_out, l_shape)};
    }

    std::pair<Tensor<T>, Tensor<T>> backward(const Tensor<T>& d_ge, const Tensor<T>& d_le) {
        auto [dg_q, dl_kv] = branch_g.backward(tokenize(d_ge));
        auto [dl_q, dg_kv] = branch_l.backward(tokenize(d_le));
        dg_q.add_(dg_kv);
        dl_q.add_(dl_kv);
        return {detokenize(dg_q, g_shape), detokenize(dl_q, l_shape)};
    }

    void release_cache() {
        branch_g.release_cache();
        branch_l.release_cache();
    }
};

// One-directional variant: the global stream attends to the local one; the
// local stream passes through untouched.
template <typename T>
struct CrossOnlyBlock {
    CrossAttention<T> branch_g;
    Shape g_shape;

    CrossOnlyBlock() = default;
    CrossOnlyBlock(int channels, int heads, Rng& rng) : branch_g(channels, heads, rng) {}

    void collect(nn::Registry<T>& reg, const std::string& prefix) {
        branch_g.collect(reg, prefix + ".branch_g");
    }

    std::pair<Tensor<T>, Tensor<T>> forward(const Tensor<T>& ge, const Tensor<T>& le,
                                            bool cache) {
        if (!ge.same_shape(le))
            throw ShapeMismatch("fusion inputs " + shape_str(ge.shape()) + " vs " +
                                shape_str(le.shape()));
        g_shape = ge.shape();
        const int n = ge.ndim() == 4 ? ge.dim(0) : 1;
        Tensor<T> g_out = branch_g.forward(tokenize(ge), tokenize(le), n, cache);
        return {detokenize(g_out, g_shape), le};
    }

    std::pair<Tensor<T>, Tensor<T>> backward(const Tensor<T>& d_ge, const Tensor<T>& d_le) {
        auto [dg_q, dl_kv] = branch_g.backward(tokenize(d_ge));
        Tensor<T> dl = d_le;
        dl.add_(detokenize(dl_kv, g_shape));
        return {detokenize(dg_q, g_shape), std::move(dl)};
    }

    void release_cache() { branch_g.release_cache(); }
};

// Convolutional variant: each stream is replaced by a conv block over the
// channel concat of both streams.
template <typename T>
struct ConcatBlock {
    int channels = 0;
    nn::ConvBlock<T> cb_g, cb_l;

    ConcatBlock() = default;
    ConcatBlock(int c, Rng& rng) : channels(c), cb_g(2 * c, c, 1, rng), cb_l(2 * c, c, 1, rng) {}

    void collect(nn::Registry<T>& reg, const std::string& prefix) {
        cb_g.collect(reg, prefix + ".cb_g");
        cb_l.collect(reg, prefix + ".cb_l");
    }

    std::pair<Tensor<T>, Tensor<T>> forward(const Tensor<T>& ge, const Tensor<T>& le,
                                            bool training, bool cache) {
        Tensor<T> cat = nn::concat_channels(ge, le);
        return {cb_g.forward(cat, training, cache), cb_l.forward(cat, training, cache)};
    }

    std::pair<Tensor<T>, Tensor<T>> backward(const Tensor<T>& d_ge, const Tensor<T>& d_le) {
        Tensor<T> d_cat = cb_g.backward(d_ge);
        d_cat.add_(cb_l.backward(d_le));
        return nn::split_channels(d_cat, channels);
    }

    void release_cache() {
        cb_g.release_cache();
        cb_l.release_cache();
    }
};

// Per-level fusion dispatch.
template <typename T>
struct LevelFusion {
    FusionKind kind = FusionKind::None;
    std::unique_ptr<ScaBlock<T>> sca;
    std::unique_ptr<CrossOnlyBlock<T>> cross;
    std::unique_ptr<ConcatBlock<T>> concat;

    LevelFusion() = default;
    LevelFusion(FusionKind k, int channels, int heads, Rng& rng) : kind(k) {
        switch (k) {
            case FusionKind::Sca: sca = std::make_unique<ScaBlock<T>>(channels, heads, rng); break;
            case FusionKind::CrossAttention:
                cross = std::make_unique<CrossOnlyBlock<T>>(channels, heads, rng);
                break;
            case FusionKind::Concat:
                concat = std::make_unique<ConcatBlock<T>>(channels, rng);
                break;
            case FusionKind::None: break;
        }
    }

    void collect(nn::Registry<T>& reg, const std::string& prefix) {
        if (sca) sca->collect(reg, prefix);
        if (cross) cross->collect(reg, prefix);
        if (concat) concat->collect(reg, prefix);
    }

    std::pair<Tensor<T>, Tensor<T>> forward(const Tensor<T>& ge, const Tensor<T>& le,
                                            bool training, bool cache) {
        if (sca) return sca->forward(ge, le, cache);
        if (cross) return cross->forward(ge, le, cache);
        if (concat) return concat->forward(ge, le, training, cache);
        return {ge, le};
    }

    std::pair<Tensor<T>, Tensor<T>> backward(const Tensor<T>& d_ge, const Tensor<T>& d_le) {
        if (sca) return sca->backward(d_ge, d_le);
        if (cross) return cross->backward(d_ge, d_le);
        if (concat) return concat->backward(d_ge, d_le);
        return {d_ge, d_le};
    }

    void release_cache() {
        if (sca) sca->release_cache();
        if (cross) cross->release_cache();
        if (concat) concat->release_cache();
    }
};

}  // namespace spgcde
