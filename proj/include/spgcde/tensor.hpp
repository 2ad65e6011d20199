#pragma once
// Dense row-major tensor of rank 1..4 plus the GEMM helper the layers build on.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "spgcde/common.hpp"

namespace spgcde {

using Shape = std::vector<int>;

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
}

template <typename T>
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(Shape shape) : shape_(std::move(shape)) {
        data_.assign(static_cast<size_t>(count(shape_)), T(0));
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor full(Shape shape, T value) {
        Tensor t(std::move(shape));
        t.fill(value);
        return t;
    }

    bool empty() const { return data_.empty(); }
    int ndim() const { return static_cast<int>(shape_.size()); }
    const Shape& shape() const { return shape_; }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // Rank-specific indexing (row-major).
    T& at2(int i, int j) { return data_[static_cast<size_t>(i) * shape_[1] + j]; }
    const T& at2(int i, int j) const { return data_[static_cast<size_t>(i) * shape_[1] + j]; }
    T& at3(int i, int j, int k) {
        return data_[(static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k];
    }
    const T& at3(int i, int j, int k) const {
        return data_[(static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k];
    }
    T& at4(int n, int c, int y, int x) {
        return data_[((static_cast<size_t>(n) * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
    }
    const T& at4(int n, int c, int y, int x) const {
        return data_[((static_cast<size_t>(n) * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    // Flat offset of block i along the leading axis.
    int64_t offset4(int n) const {
        return static_cast<int64_t>(n) * shape_[1] * shape_[2] * shape_[3];
    }
    int64_t offset3(int i) const { return static_cast<int64_t>(i) * shape_[1] * shape_[2]; }

    // Reinterpret the buffer under a new shape with the same element count.
    void set_shape(Shape shape) {
        if (count(shape) != numel())
            throw ShapeMismatch("set_shape: element count mismatch " + shape_str(shape_) +
                                " -> " + shape_str(shape));
        shape_ = std::move(shape);
    }

    void add_(const Tensor& other) {
        check_same_shape(other, "add_");
        for (int64_t i = 0; i < numel(); ++i) data_[static_cast<size_t>(i)] += other[i];
    }
    void sub_(const Tensor& other) {
        check_same_shape(other, "sub_");
        for (int64_t i = 0; i < numel(); ++i) data_[static_cast<size_t>(i)] -= other[i];
    }
    void scale_(T s) {
        for (auto& v : data_) v *= s;
    }
    void axpy_(T alpha, const Tensor& other) {
        check_same_shape(other, "axpy_");
        for (int64_t i = 0; i < numel(); ++i) data_[static_cast<size_t>(i)] += alpha * other[i];
    }

    T sum() const {
        T acc = T(0);
        for (const auto& v : data_) acc += v;
        return acc;
    }
    T abs_max() const {
        T m = T(0);
        for (const auto& v : data_) m = std::max(m, std::abs(v));
        return m;
    }
    bool all_finite() const {
        for (const auto& v : data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    static int64_t count(const Shape& s) {
        int64_t n = 1;
        for (int d : s) {
            if (d < 0) throw ShapeMismatch("negative dimension in " + shape_str(s));
            n *= d;
        }
        return n;
    }

  private:
    void check_same_shape(const Tensor& other, const char* op) const {
        if (!same_shape(other))
            throw ShapeMismatch(std::string(op) + ": " + shape_str(shape_) + " vs " +
                                shape_str(other.shape_));
    }

    Shape shape_;
    std::vector<T> data_;
};

template <typename T>
using EigenRowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<EigenRowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const EigenRowMat<T>>;

// C(m,n) = alpha * op(A) * op(B) + beta * C, raw row-major buffers.
// (m,k) are the dimensions of op(A); (k,n) of op(B).
template <typename T>
void gemm(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n, bool trans_a = false,
          bool trans_b = false, T alpha = T(1), T beta = T(0)) {
    MapMat<T> C(c, m, n);
    ConstMapMat<T> A(a, trans_a ? k : m, trans_a ? m : k);
    ConstMapMat<T> B(b, trans_b ? n : k, trans_b ? k : n);
    auto run = [&](auto&& lhs, auto&& rhs) {
        if (beta == T(0)) {
            if (alpha == T(1))
                C.noalias() = lhs * rhs;
            else
                C.noalias() = alpha * (lhs * rhs);
        } else {
            C *= beta;
            if (alpha == T(1))
                C.noalias() += lhs * rhs;
            else
                C.noalias() += alpha * (lhs * rhs);
        }
    };
    if (!trans_a && !trans_b)
        run(A, B);
    else if (trans_a && !trans_b)
        run(A.transpose(), B);
    else if (!trans_a && trans_b)
        run(A, B.transpose());
    else
        run(A.transpose(), B.transpose());
}

}  // namespace spgcde
