#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "rgbp/errors.hpp"
#include "rgbp/rng.hpp"

namespace rgbp {

// Dense rank-4 array in NCHW layout, row-major. All feature maps, image
// planes (N=1) and weight blocks use this one container.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    Tensor(int n, int c, int h, int w)
        : n_(n), c_(c), h_(h), w_(w),
          data_(static_cast<std::size_t>(n) * c * h * w, T(0)) {
        if (n <= 0 || c <= 0 || h <= 0 || w <= 0)
            throw ShapeError("tensor dims must be positive, got " + shape_str());
    }

    static Tensor full(int n, int c, int h, int w, T value) {
        Tensor t(n, c, h, w);
        for (auto& v : t.data_) v = value;
        return t;
    }

    static Tensor random_uniform(int n, int c, int h, int w, Rng& rng,
                                 double lo = 0.0, double hi = 1.0) {
        Tensor t(n, c, h, w);
        for (auto& v : t.data_) v = static_cast<T>(rng.uniform(lo, hi));
        return t;
    }

    int n() const { return n_; }
    int c() const { return c_; }
    int h() const { return h_; }
    int w() const { return w_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T& operator()(int n, int c, int h, int w) {
        return data_[offset(n, c, h, w)];
    }
    const T& operator()(int n, int c, int h, int w) const {
        return data_[offset(n, c, h, w)];
    }

    std::size_t offset(int n, int c, int h, int w) const {
        return ((static_cast<std::size_t>(n) * c_ + c) * h_ + h) * w_ + w;
    }

    bool same_shape(const Tensor& o) const {
        return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
    }

    std::string shape_str() const {
        std::ostringstream os;
        os << "(" << n_ << "," << c_ << "," << h_ << "," << w_ << ")";
        return os.str();
    }

    Tensor zeros_like() const { return Tensor(n_, c_, h_, w_); }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(n_, c_, h_, w_);
        for (std::size_t i = 0; i < data_.size(); ++i)
            out[i] = static_cast<U>(data_[i]);
        return out;
    }

    bool all_finite() const {
        for (const auto& v : data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    T max_abs() const {
        T m = 0;
        for (const auto& v : data_) m = std::max(m, static_cast<T>(std::abs(v)));
        return m;
    }

private:
    int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
    std::vector<T> data_;
};

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b,
                        const char* what) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(what) + ": shape mismatch " +
                         a.shape_str() + " vs " + b.shape_str());
}

template <typename T>
void require_finite(const Tensor<T>& t, const char* what) {
    if (!t.all_finite())
        throw ValidationError(std::string(what) + ": non-finite values");
}

// Thread cap from RGBP_THREADS (default: hardware concurrency).
inline int thread_count() {
    static const int n = [] {
        int hw = static_cast<int>(std::thread::hardware_concurrency());
        if (hw < 1) hw = 1;
        if (const char* env = std::getenv("RGBP_THREADS")) {
            const int req = std::atoi(env);
            if (req >= 1) return std::min(req, 256);
        }
        return hw;
    }();
    return n;
}

// Splits [0, count) into contiguous chunks, one per worker. Each worker
// writes a disjoint output range, so results do not depend on the number
// of threads.
template <typename Fn>
void parallel_for(std::int64_t count, Fn&& fn) {
    const int workers = std::min<std::int64_t>(thread_count(), count);
    if (workers <= 1 || count < 1024) {
        for (std::int64_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::int64_t chunk = (count + workers - 1) / workers;
    for (int t = 0; t < workers; ++t) {
        const std::int64_t lo = t * chunk;
        const std::int64_t hi = std::min(count, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::int64_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace rgbp
