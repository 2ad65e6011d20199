#pragma once
// Channel-axis concat/split for (N, C, H, W) maps.

#include "spgcde/common.hpp"
#include "spgcde/tensor.hpp"

namespace spgcde::nn {

template <typename T>
inline Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
        throw ShapeMismatch("channel concat: " + shape_str(a.shape()) + " vs " +
                            shape_str(b.shape()));
    const int n = a.dim(0), ca = a.dim(1), cb = b.dim(1), h = a.dim(2), w = a.dim(3);
    const int64_t plane = static_cast<int64_t>(h) * w;
    Tensor<T> y = Tensor<T>::zeros({n, ca + cb, h, w});
    for (int i = 0; i < n; ++i) {
        T* dst = y.data() + y.offset4(i);
        std::copy(a.data() + a.offset4(i), a.data() + a.offset4(i) + ca * plane, dst);
        std::copy(b.data() + b.offset4(i), b.data() + b.offset4(i) + cb * plane,
                  dst + ca * plane);
    }
    return y;
}

// Split the gradient of a channel concat back into its two operands.
template <typename T>
inline std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& d, int ca) {
    const int n = d.dim(0), c = d.dim(1), h = d.dim(2), w = d.dim(3);
    const int cb = c - ca;
    const int64_t plane = static_cast<int64_t>(h) * w;
    Tensor<T> da = Tensor<T>::zeros({n, ca, h, w});
    Tensor<T> db = Tensor<T>::zeros({n, cb, h, w});
    for (int i = 0; i < n; ++i) {
        const T* src = d.data() + d.offset4(i);
        std::copy(src, src + ca * plane, da.data() + da.offset4(i));
        std::copy(src + ca * plane, src + static_cast<int64_t>(c) * plane,
                  db.data() + db.offset4(i));
    }
    return {std::move(da), std::move(db)};
}

}  // namespace spgcde::nn
