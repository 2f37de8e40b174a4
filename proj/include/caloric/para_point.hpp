#pragma once

// Space-time points and the parabolic metric.
//
// A point is (x, t) with x in R^n and t in R. Distances use the parabolic
// norm ||(x,t)|| = max(|x|, |t|^{1/2}), which is homogeneous of degree one
// under the dilations (x,t) -> (r x, r^2 t).

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <ostream>
#include <span>

#include "caloric/error.hpp"

namespace caloric {

inline constexpr std::size_t kMaxSpatialDim = 4;

/// Fixed-capacity spatial vector; the dimension is a runtime value <= kMaxSpatialDim.
class SpatialVec {
public:
    SpatialVec() = default;
    explicit SpatialVec(std::size_t n) : n_(n) {
        require(n >= 1 && n <= kMaxSpatialDim, "spatial dimension must be in [1, 4]");
    }
    SpatialVec(std::initializer_list<double> xs) : SpatialVec(xs.size()) {
        std::copy(xs.begin(), xs.end(), v_.begin());
    }
    explicit SpatialVec(std::span<const double> xs) : SpatialVec(xs.size()) {
        std::copy(xs.begin(), xs.end(), v_.begin());
    }

    [[nodiscard]] std::size_t size() const noexcept { return n_; }
    double& operator[](std::size_t i) noexcept { assert(i < n_); return v_[i]; }
    double operator[](std::size_t i) const noexcept { assert(i < n_); return v_[i]; }
    [[nodiscard]] const double* begin() const noexcept { return v_.data(); }
    [[nodiscard]] const double* end() const noexcept { return v_.data() + n_; }
    [[nodiscard]] double* begin() noexcept { return v_.data(); }
    [[nodiscard]] double* end() noexcept { return v_.data() + n_; }
    [[nodiscard]] std::span<const double> span() const noexcept { return {v_.data(), n_}; }

    [[nodiscard]] double dot(const SpatialVec& o) const noexcept {
        double s = 0.0;
        for (std::size_t i = 0; i < n_; ++i) s += v_[i] * o.v_[i];
        return s;
    }
    [[nodiscard]] double norm() const noexcept { return std::sqrt(dot(*this)); }

    SpatialVec& operator+=(const SpatialVec& o) noexcept {
        for (std::size_t i = 0; i < n_; ++i) v_[i] += o.v_[i];
        return *this;
    }
    SpatialVec& operator-=(const SpatialVec& o) noexcept {
        for (std::size_t i = 0; i < n_; ++i) v_[i] -= o.v_[i];
        return *this;
    }
    SpatialVec& operator*=(double s) noexcept {
        for (std::size_t i = 0; i < n_; ++i) v_[i] *= s;
        return *this;
    }
    friend SpatialVec operator+(SpatialVec a, const SpatialVec& b) noexcept { return a += b; }
    friend SpatialVec operator-(SpatialVec a, const SpatialVec& b) noexcept { return a -= b; }
    friend SpatialVec operator*(SpatialVec a, double s) noexcept { return a *= s; }
    friend SpatialVec operator*(double s, SpatialVec a) noexcept { return a *= s; }
    friend bool operator==(const SpatialVec& a, const SpatialVec& b) noexcept {
        if (a.n_ != b.n_) return false;
        for (std::size_t i = 0; i < a.n_; ++i)
            if (a.v_[i] != b.v_[i]) return false;
        return true;
    }

private:
    std::array<double, kMaxSpatialDim> v_{};
    std::size_t n_ = 0;
};

/// Space-time point (x, t).
struct ParaPoint {
    SpatialVec x;
    double t = 0.0;

    ParaPoint() = default;
    ParaPoint(SpatialVec x_, double t_) : x(x_), t(t_) {}

    [[nodiscard]] std::size_t dim() const noexcept { return x.size(); }
    [[nodiscard]] bool finite() const noexcept {
        if (!std::isfinite(t)) return false;
        return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
    }

    static ParaPoint origin(std::size_t n) { return {SpatialVec(n), 0.0}; }

    friend ParaPoint operator+(const ParaPoint& a, const ParaPoint& b) { return {a.x + b.x, a.t + b.t}; }
    friend ParaPoint operator-(const ParaPoint& a, const ParaPoint& b) { return {a.x - b.x, a.t - b.t}; }
    friend bool operator==(const ParaPoint& a, const ParaPoint& b) { return a.x == b.x && a.t == b.t; }
};

inline std::ostream& operator<<(std::ostream& os, const ParaPoint& p) {
    os << "(x=(";
    for (std::size_t i = 0; i < p.dim(); ++i) os << (i ? "," : "") << p.x[i];
    return os << "), t=" << p.t << ")";
}

/// max(|x|, |t|^{1/2})
[[nodiscard]] inline double para_norm(const ParaPoint& p) noexcept {
    return std::max(p.x.norm(), std::sqrt(std::abs(p.t)));
}

[[nodiscard]] inline double para_dist(const ParaPoint& a, const ParaPoint& b) noexcept {
    return para_norm(a - b);
}

/// delta_r(x, t) = (r x, r^2 t)
[[nodiscard]] inline ParaPoint dilate(const ParaPoint& p, double r) {
    require(r > 0.0 && std::isfinite(r), "dilation factor must be positive");
    return {p.x * r, p.t * r * r};
}

/// T_{center,r}(p) = delta_{1/r}(p - center)
[[nodiscard]] inline ParaPoint blow_up_map(const ParaPoint& p, const ParaPoint& center, double r) {
    require(r > 0.0 && std::isfinite(r), "blow-up radius must be positive");
    return dilate(p - center, 1.0 / r);
}

/// Inverse of blow_up_map: center + delta_r(q).
[[nodiscard]] inline ParaPoint blow_down_map(const ParaPoint& q, const ParaPoint& center, double r) {
    return dilate(q, r) + center;
}

}  // namespace caloric
