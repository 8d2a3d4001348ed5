#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mamr::nn {

/// Dense NCHW tensor. H stays tiny in this project (the stem collapses it
/// to 1), so the layout favors contiguous W rows.
template <typename T>
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> data;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, T(0)) {}

    std::size_t size() const { return data.size(); }

    T* plane(int ni, int ci) {
        return data.data() + ((static_cast<std::size_t>(ni) * c + ci) * h) * w;
    }
    const T* plane(int ni, int ci) const {
        return data.data() + ((static_cast<std::size_t>(ni) * c + ci) * h) * w;
    }
    T* row(int ni, int ci, int hi) { return plane(ni, ci) + static_cast<std::size_t>(hi) * w; }
    const T* row(int ni, int ci, int hi) const {
        return plane(ni, ci) + static_cast<std::size_t>(hi) * w;
    }
    T& at(int ni, int ci, int hi, int wi) { return row(ni, ci, hi)[wi]; }
    T at(int ni, int ci, int hi, int wi) const { return row(ni, ci, hi)[wi]; }

    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
    void require_shape(int n_, int c_, int h_, int w_, const char* who) const {
        if (n != n_ || c != c_ || h != h_ || w != w_)
            throw std::invalid_argument(std::string(who) + ": tensor shape mismatch");
    }
};

}  // namespace mamr::nn
