#pragma once
// 2x2 stride-2 max pooling with argmax routing for the backward pass.

#include <cstdint>
#include <vector>

#include "spgcde/common.hpp"
#include "spgcde/tensor.hpp"

namespace spgcde::nn {

template <typename T>
struct MaxPool2d {
    Shape in_shape;
    std::vector<int64_t> argmax;  // flat input index per output element

    Tensor<T> forward(const Tensor<T>& x, bool cache) {
        const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
        if (h % 2 != 0 || w % 2 != 0)
            throw BadGeometry("maxpool needs even extents, got " + shape_str(x.shape()));
        const int oh = h / 2, ow = w / 2;
        Tensor<T> y = Tensor<T>::zeros({n, c, oh, ow});
        if (cache) {
            in_shape = x.shape();
            argmax.assign(static_cast<size_t>(y.numel()), 0);
        }
        int64_t oi = 0;
        for (int i = 0; i < n; ++i) {
            for (int ci = 0; ci < c; ++ci) {
                const T* plane = x.data() + ((static_cast<int64_t>(i) * c + ci) * h) * w;
                for (int oy = 0; oy < oh; ++oy) {
                    for (int ox = 0; ox < ow; ++ox, ++oi) {
                        const int iy = oy * 2, ix = ox * 2;
                        int64_t best = static_cast<int64_t>(iy) * w + ix;
                        T best_v = plane[best];
                        const int64_t cand[3] = {best + 1, best + w, best + w + 1};
                        for (int64_t idx : cand) {
                            if (plane[idx] > best_v) {
                                best_v = plane[idx];
                                best = idx;
                            }
                        }
                        y[oi] = best_v;
                        if (cache)
                            argmax[static_cast<size_t>(oi)] =
                                (static_cast<int64_t>(i) * c + ci) * h * w + best;
                    }
                }
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx = Tensor<T>::zeros(in_shape);
        for (int64_t i = 0; i < dy.numel(); ++i) dx[argmax[static_cast<size_t>(i)]] += dy[i];
        return dx;
    }

    void release_cache() { argmax.clear(); }
};

}  // namespace spgcde::nn
