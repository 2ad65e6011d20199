#pragma once
// Training objective: weighted soft Dice + cross entropy. Dice averages the
// per-class terms with the background class included; sums run over the whole
// batch. The gradient path goes through the softmax analytically.

#include <cmath>
#include <cstdint>
#include <vector>

#include "spgcde/common.hpp"
#include "spgcde/nn/activations.hpp"
#include "spgcde/tensor.hpp"

namespace spgcde {

struct LossWeights {
    double lambda1 = 0.4;    // Dice weight
    double lambda2 = 0.6;    // cross-entropy weight
    double dice_smooth = 1e-5;
};

namespace detail {
template <typename T>
inline void loss_dims(const Tensor<T>& t, int& n, int& c, int64_t& plane) {
    if (t.ndim() == 4) {
        n = t.dim(0);
        c = t.dim(1);
        plane = static_cast<int64_t>(t.dim(2)) * t.dim(3);
    } else {
        n = 1;
        c = t.dim(0);
        plane = static_cast<int64_t>(t.dim(1)) * t.dim(2);
    }
}

inline void check_labels(const uint8_t* target, int64_t count, int num_classes) {
    for (int64_t i = 0; i < count; ++i)
        if (target[i] >= num_classes)
            throw BadLabels("label value " + std::to_string(int(target[i])) +
                            " out of range for " + std::to_string(num_classes) + " classes");
}
}  // namespace detail

// probs: (C,H,W) or (N,C,H,W) normalized over classes; target: flat class map.
template <typename T>
T soft_dice_loss(const Tensor<T>& probs, const uint8_t* target, T eps) {
    int n, c;
    int64_t plane;
    detail::loss_dims(probs, n, c, plane);
    detail::check_labels(target, static_cast<int64_t>(n) * plane, c);
    T total = T(0);
    for (int ci = 0; ci < c; ++ci) {
        T inter = T(0), psum = T(0), gsum = T(0);
        for (int i = 0; i < n; ++i) {
            const T* p = probs.data() + (static_cast<int64_t>(i) * c + ci) * plane;
            const uint8_t* t = target + static_cast<int64_t>(i) * plane;
            for (int64_t k = 0; k < plane; ++k) {
                psum += p[k];
                if (t[k] == ci) {
                    inter += p[k];
                    gsum += T(1);
                }
            }
        }
        total += T(1) - (T(2) * inter + eps) / (psum + gsum + eps);
    }
    return total / static_cast<T>(c);
}

template <typename T>
T cross_entropy_loss(const Tensor<T>& logits, const uint8_t* target) {
    int n, c;
    int64_t plane;
    detail::loss_dims(logits, n, c, plane);
    detail::check_labels(target, static_cast<int64_t>(n) * plane, c);
    T total = T(0);
    std::vector<T> col(static_cast<size_t>(c));
    for (int i = 0; i < n; ++i) {
        const T* base = logits.data() + static_cast<int64_t>(i) * c * plane;
        const uint8_t* t = target + static_cast<int64_t>(i) * plane;
        for (int64_t k = 0; k < plane; ++k) {
            T m = base[k];
            for (int ci = 1; ci < c; ++ci) m = std::max(m, base[ci * plane + k]);
            T z = T(0);
            for (int ci = 0; ci < c; ++ci) z += std::exp(base[ci * plane + k] - m);
            total += -(base[t[k] * plane + k] - m - std::log(z));
        }
    }
    return total / static_cast<T>(static_cast<int64_t>(n) * plane);
}

template <typename T>
T combined_loss(const Tensor<T>& logits, const uint8_t* target, const LossWeights& w) {
    Tensor<T> probs = logits.ndim() == 4
                          ? nn::softmax_channel(logits)
                          : [&] {
                                Tensor<T> l4 = logits;
                                l4.set_shape({1, logits.dim(0), logits.dim(1), logits.dim(2)});
                                Tensor<T> p = nn::softmax_channel(l4);
                                p.set_shape(logits.shape());
                                return p;
                            }();
    return static_cast<T>(w.lambda1) *
               soft_dice_loss(probs, target, static_cast<T>(w.dice_smooth)) +
           static_cast<T>(w.lambda2) * cross_entropy_loss(logits, target);
}

// Loss value plus gradient wrt logits, softmax handled analytically.
template <typename T>
T combined_loss_grad(const Tensor<T>& logits, const uint8_t* target, const LossWeights& w,
                     Tensor<T>& grad) {
    int n, c;
    int64_t plane;
    detail::loss_dims(logits, n, c, plane);
    const int64_t pixels = static_cast<int64_t>(n) * plane;
    detail::check_labels(target, pixels, c);

    Tensor<T> l4 = logits;
    if (logits.ndim() == 3) l4.set_shape({1, logits.dim(0), logits.dim(1), logits.dim(2)});
    Tensor<T> probs = nn::softmax_channel(l4);

    const T eps = static_cast<T>(w.dice_smooth);
    std::vector<T> inter(static_cast<size_t>(c), T(0)), psum(static_cast<size_t>(c), T(0)),
        gsum(static_cast<size_t>(c), T(0));
    T ce = T(0);
    for (int64_t k = 0; k < pixels; ++k) {
        const int i = static_cast<int>(k / plane);
        const int64_t p = k % plane;
        const T* pp = probs.data() + static_cast<int64_t>(i) * c * plane;
        const uint8_t t = target[k];
        for (int ci = 0; ci < c; ++ci) {
            const T v = pp[ci * plane + p];
            psum[static_cast<size_t>(ci)] += v;
            if (t == ci) inter[static_cast<size_t>(ci)] += v;
        }
        gsum[static_cast<size_t>(t)] += T(1);
        ce += -std::log(std::max(pp[t * plane + p], T(1e-30)));
    }
    ce /= static_cast<T>(pixels);

    T dice = T(0);
    std::vector<T> d_num(static_cast<size_t>(c)), d_den(static_cast<size_t>(c));
    for (int ci = 0; ci < c; ++ci) {
        const T num = T(2) * inter[static_cast<size_t>(ci)] + eps;
        const T den = psum[static_cast<size_t>(ci)] + gsum[static_cast<size_t>(ci)] + eps;
        dice += T(1) - num / den;
        // dL_dice/d inter_c and /d psum_c, already divided by the class count
        d_num[static_cast<size_t>(ci)] = -T(2) / den / static_cast<T>(c);
        d_den[static_cast<size_t>(ci)] = num / (den * den) / static_cast<T>(c);
    }
    dice /= static_cast<T>(c);

    grad = Tensor<T>::zeros(logits.shape());
    Tensor<T>& g = grad;
    const T l1 = static_cast<T>(w.lambda1), l2 = static_cast<T>(w.lambda2);
    std::vector<T> dprob(static_cast<size_t>(c));
    for (int64_t k = 0; k < pixels; ++k) {
        const int i = static_cast<int>(k / plane);
        const int64_t p = k % plane;
        const T* pp = probs.data() + static_cast<int64_t>(i) * c * plane;
        T* gg = g.data() + static_cast<int64_t>(i) * c * plane;
        const uint8_t t = target[k];
        // Dice gradient wrt probabilities at this pixel.
        T dot = T(0);
        for (int ci = 0; ci < c; ++ci) {
            T d = d_den[static_cast<size_t>(ci)];
            if (t == ci) d += d_num[static_cast<size_t>(ci)];
            dprob[static_cast<size_t>(ci)] = d;
            dot += d * pp[ci * plane + p];
        }
        for (int ci = 0; ci < c; ++ci) {
            const T prob = pp[ci * plane + p];
            const T dice_part = prob * (dprob[static_cast<size_t>(ci)] - dot);
            const T ce_part = (prob - (t == ci ? T(1) : T(0))) / static_cast<T>(pixels);
            gg[ci * plane + p] = l1 * dice_part + l2 * ce_part;
        }
    }
    return l1 * dice + l2 * ce;
}

// Single-channel sigmoid mode: Dice on the foreground probability plus binary
// cross entropy; targets must be 0/1.
template <typename T>
T binary_combined_loss_grad(const Tensor<T>& logits, const uint8_t* target,
                            const LossWeights& w, Tensor<T>& grad) {
    int n, c;
    int64_t plane;
    detail::loss_dims(logits, n, c, plane);
    if (c != 1) throw BadConfig("binary loss expects a single logit channel");
    const int64_t pixels = static_cast<int64_t>(n) * plane;
    detail::check_labels(target, pixels, 2);

    const T eps = static_cast<T>(w.dice_smooth);
    std::vector<T> prob(static_cast<size_t>(pixels));
    T inter = T(0), psum = T(0), gsum = T(0), bce = T(0);
    for (int64_t k = 0; k < pixels; ++k) {
        const T p = T(1) / (T(1) + std::exp(-logits[k]));
        prob[static_cast<size_t>(k)] = p;
        psum += p;
        if (target[k]) {
            inter += p;
            gsum += T(1);
            bce += -std::log(std::max(p, T(1e-30)));
        } else {
            bce += -std::log(std::max(T(1) - p, T(1e-30)));
        }
    }
    bce /= static_cast<T>(pixels);
    const T num = T(2) * inter + eps;
    const T den = psum + gsum + eps;
    const T dice = T(1) - num / den;

    grad = Tensor<T>::zeros(logits.shape());
    const T l1 = static_cast<T>(w.lambda1), l2 = static_cast<T>(w.lambda2);
    for (int64_t k = 0; k < pixels; ++k) {
        const T p = prob[static_cast<size_t>(k)];
        const T y = target[k] ? T(1) : T(0);
        const T d_dice_dp = -T(2) * y / den + num / (den * den);
        const T dice_part = d_dice_dp * p * (T(1) - p);
        const T ce_part = (p - y) / static_cast<T>(pixels);
        grad[k] = l1 * dice_part + l2 * ce_part;
    }
    return l1 * dice + l2 * bce;
}

}  // namespace spgcde
