#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace hamprune {

/// Dense row-major tensor. Double precision is the default throughout the
/// library; float is available for throughput-oriented builds of the kernels.
template <typename T>
struct TensorT {
    std::vector<size_t> shape;
    std::vector<T> v;

    TensorT() = default;

    explicit TensorT(std::vector<size_t> s) : shape(std::move(s)) {
        v.assign(count(shape), T(0));
    }

    TensorT(std::vector<size_t> s, std::vector<T> data) : shape(std::move(s)), v(std::move(data)) {
        if (v.size() != count(shape))
            throw std::invalid_argument("tensor: value count does not match shape");
    }

    static size_t count(const std::vector<size_t>& s) {
        size_t n = 1;
        for (size_t e : s) n *= e;
        return n;
    }

    static TensorT zeros(std::vector<size_t> s) { return TensorT(std::move(s)); }

    static TensorT full(std::vector<size_t> s, T value) {
        TensorT t(std::move(s));
        std::fill(t.v.begin(), t.v.end(), value);
        return t;
    }

    static TensorT scalar(T value) { return TensorT({1}, {value}); }

    static TensorT identity(size_t n) {
        TensorT t({n, n});
        for (size_t i = 0; i < n; ++i) t.v[i * n + i] = T(1);
        return t;
    }

    size_t numel() const { return v.size(); }
    size_t ndim() const { return shape.size(); }

    size_t rows() const {
        if (shape.size() != 2) throw std::invalid_argument("tensor: rows() needs a matrix");
        return shape[0];
    }
    size_t cols() const {
        if (shape.size() != 2) throw std::invalid_argument("tensor: cols() needs a matrix");
        return shape[1];
    }

    T& at(size_t i) { return v[i]; }
    T at(size_t i) const { return v[i]; }
    T& at(size_t i, size_t j) { return v[i * shape[1] + j]; }
    T at(size_t i, size_t j) const { return v[i * shape[1] + j]; }

    T* data() { return v.data(); }
    const T* data() const { return v.data(); }

    bool same_shape(const TensorT& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (T x : v)
            if (!std::isfinite(static_cast<double>(x))) return false;
        return true;
    }

    void fill(T value) { std::fill(v.begin(), v.end(), value); }

    std::string shape_str() const {
        std::string s = "[";
        for (size_t i = 0; i < shape.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }
};

using Tensor = TensorT<double>;
using Tensor32 = TensorT<float>;

}  // namespace hamprune
