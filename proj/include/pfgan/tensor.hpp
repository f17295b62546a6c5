// Copyright 2026 pfgan contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

namespace pfgan {

// Dense row-major 2-D tensor. The payload is shared, so reshapes are free;
// tensors are treated as immutable once they enter an autodiff graph.
template <class T>
struct TensorT {
    using Scalar = T;
    using Map = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
    using CMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

    int64_t rows_ = 0;
    int64_t cols_ = 0;
    std::shared_ptr<std::vector<T>> buf;

    TensorT() = default;
    TensorT(int64_t r, int64_t c)
        : rows_(r), cols_(c), buf(std::make_shared<std::vector<T>>(static_cast<size_t>(r * c), T(0))) {
        if (r < 0 || c < 0) throw std::invalid_argument("pfgan: tensor: negative shape");
    }

    static TensorT zeros(int64_t r, int64_t c) { return TensorT(r, c); }

    static TensorT full(int64_t r, int64_t c, T v) {
        TensorT t(r, c);
        std::fill(t.buf->begin(), t.buf->end(), v);
        return t;
    }

    static TensorT from_vector(int64_t r, int64_t c, std::vector<T> v) {
        if (static_cast<int64_t>(v.size()) != r * c)
            throw std::invalid_argument("pfgan: tensor: from_vector size mismatch");
        TensorT t;
        t.rows_ = r;
        t.cols_ = c;
        t.buf = std::make_shared<std::vector<T>>(std::move(v));
        return t;
    }

    static TensorT scalar(T v) { return full(1, 1, v); }

    int64_t rows() const { return rows_; }
    int64_t cols() const { return cols_; }
    int64_t numel() const { return rows_ * cols_; }
    bool empty() const { return !buf || buf->empty(); }

    T* data() { return buf->data(); }
    const T* data() const { return buf->data(); }

    T& operator()(int64_t i, int64_t j) { return (*buf)[static_cast<size_t>(i * cols_ + j)]; }
    T operator()(int64_t i, int64_t j) const { return (*buf)[static_cast<size_t>(i * cols_ + j)]; }
    T& at(int64_t k) { return (*buf)[static_cast<size_t>(k)]; }
    T at(int64_t k) const { return (*buf)[static_cast<size_t>(k)]; }

    Map map() { return Map(data(), rows_, cols_); }
    CMap cmap() const { return CMap(data(), rows_, cols_); }

    // Shares the payload; caller must not mutate either alias afterwards.
    TensorT reshaped(int64_t r, int64_t c) const {
        if (r * c != numel()) throw std::invalid_argument("pfgan: tensor: reshape numel mismatch");
        TensorT t = *this;
        t.rows_ = r;
        t.cols_ = c;
        return t;
    }

    TensorT clone() const {
        TensorT t;
        t.rows_ = rows_;
        t.cols_ = cols_;
        t.buf = std::make_shared<std::vector<T>>(*buf);
        return t;
    }

    bool same_shape(const TensorT& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    bool all_finite() const {
        for (T v : *buf)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    template <class U>
    TensorT<U> cast() const {
        TensorT<U> t(rows_, cols_);
        for (int64_t k = 0; k < numel(); ++k) t.at(k) = static_cast<U>(at(k));
        return t;
    }
};

using Tensorf = TensorT<float>;
using Tensord = TensorT<double>;

}  // namespace pfgan
