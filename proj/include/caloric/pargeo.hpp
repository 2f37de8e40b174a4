#pragma once

// Parabolic cylinders, heat balls, truncated cylinders, admissible planes and
// point-cloud stand-ins for sets, plus the greedy parabolic Hausdorff content.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <nlohmann/json.hpp>

#include "caloric/error.hpp"
#include "caloric/para_point.hpp"
#include "caloric/point_index.hpp"

namespace caloric {

enum class TimeDirection { Both, Backward, Forward };

/// C_r(center) = {|y - x| < r, |s - t| < r^2}; C^-_r keeps s in (t - r^2, t), C^+_r keeps (t, t + r^2).
struct Cylinder {
    ParaPoint center;
    double r = 1.0;
    TimeDirection direction = TimeDirection::Both;

    Cylinder() = default;
    Cylinder(ParaPoint c, double radius, TimeDirection dir = TimeDirection::Both)
        : center(std::move(c)), r(radius), direction(dir) {
        require(r > 0.0 && std::isfinite(r), "cylinder radius must be positive");
    }

    [[nodiscard]] double t_lo() const noexcept {
        return direction == TimeDirection::Forward ? center.t : center.t - r * r;
    }
    [[nodiscard]] double t_hi() const noexcept {
        return direction == TimeDirection::Backward ? center.t : center.t + r * r;
    }
    [[nodiscard]] bool contains(const ParaPoint& q) const noexcept {
        return (q.x - center.x).norm() < r && q.t > t_lo() && q.t < t_hi();
    }
    /// Parabolic distance from q to the complement (0 outside).
    [[nodiscard]] double depth(const ParaPoint& q) const noexcept {
        if (!contains(q)) return 0.0;
        const double ds = r - (q.x - center.x).norm();
        const double dt = std::min(q.t - t_lo(), t_hi() - q.t);
        return std::min(ds, std::sqrt(dt));
    }
};

/// E(x;rho) = {Gamma(x - y) > (4 pi rho)^{-n/2}}; the adjoint ball E* is its time reflection.
struct HeatBall {
    ParaPoint center;
    double rho = 1.0;
    bool adjoint = false;

    HeatBall() = default;
    HeatBall(ParaPoint c, double radius, bool adj = false) : center(std::move(c)), rho(radius), adjoint(adj) {
        require(rho > 0.0 && std::isfinite(rho), "heat ball radius must be positive");
    }

    /// Spatial radius of the slice at depth u in (0, rho): sqrt(2 n u log(rho/u)).
    [[nodiscard]] double slice_radius(double depth) const noexcept {
        if (depth <= 0.0 || depth >= rho) return 0.0;
        return std::sqrt(2.0 * static_cast<double>(center.dim()) * depth * std::log(rho / depth));
    }
};

[[nodiscard]] inline bool heat_ball_contains(const HeatBall& hb, const ParaPoint& q) {
    require(q.dim() == hb.center.dim(), "dimension mismatch");
    const double depth = hb.adjoint ? q.t - hb.center.t : hb.center.t - q.t;
    if (!(depth > 0.0 && depth < hb.rho)) return false;
    const double d2 = (q.x - hb.center.x).dot(q.x - hb.center.x);
    return d2 < 2.0 * static_cast<double>(q.dim()) * depth * std::log(hb.rho / depth);
}

enum class TruncatedVariant {
    BackwardR,    ///< R^-_a(x;r) = B(x,r) x (t - r^2, t - (a r)^2)
    ForwardHat,   ///< R^+_a(x;r) = B(x,r) x (t - (a r)^2 / 2, t + r^2)
    RectangleAB,  ///< R^-_{a,b}(x;r) = B(x,r) x (t - (a r)^2, t - (b r)^2), 0 < b < a <= 1
};

struct TruncatedCylinder {
    ParaPoint center;
    double r = 1.0;
    double a = 0.5;
    TruncatedVariant variant = TruncatedVariant::BackwardR;
    double b = 0.0;

    TruncatedCylinder() = default;
    TruncatedCylinder(ParaPoint c, double radius, double a_, TruncatedVariant v = TruncatedVariant::BackwardR,
                      double b_ = 0.0)
        : center(std::move(c)), r(radius), a(a_), variant(v), b(b_) {
        require(r > 0.0, "truncated cylinder radius must be positive");
        if (v == TruncatedVariant::RectangleAB)
            require(b > 0.0 && b < a && a <= 1.0, "R_{a,b} needs 0 < b < a <= 1");
        else
            require(a > 0.0 && a < 1.0, "truncation parameter a must lie in (0,1)");
    }

    [[nodiscard]] double t_lo() const noexcept {
        switch (variant) {
            case TruncatedVariant::BackwardR: return center.t - r * r;
            case TruncatedVariant::ForwardHat: return center.t - (a * r) * (a * r) / 2.0;
            case TruncatedVariant::RectangleAB: return center.t - (a * r) * (a * r);
        }
        return 0.0;
    }
    [[nodiscard]] double t_hi() const noexcept {
        switch (variant) {
            case TruncatedVariant::BackwardR: return center.t - (a * r) * (a * r);
            case TruncatedVariant::ForwardHat: return center.t + r * r;
            case TruncatedVariant::RectangleAB: return center.t - (b * r) * (b * r);
        }
        return 0.0;
    }
    [[nodiscard]] bool contains(const ParaPoint& q) const noexcept {
        return (q.x - center.x).norm() < r && q.t > t_lo() && q.t < t_hi();
    }
    [[nodiscard]] bool contains_closed(const ParaPoint& q, double slack = 1e-12) const noexcept {
        return (q.x - center.x).norm() <= r * (1 + slack) && q.t >= t_lo() - slack * r * r &&
               q.t <= t_hi() + slack * r * r;
    }
};

/// Plane {(y - anchor.x) . normal = 0} containing every time line through its points.
struct AdmissiblePlane {
    SpatialVec normal;
    ParaPoint anchor;

    AdmissiblePlane() = default;
    AdmissiblePlane(SpatialVec e, ParaPoint a) : normal(e), anchor(std::move(a)) {
        const double len = normal.norm();
        require(len > 0.0, "plane normal must be nonzero");
        normal *= 1.0 / len;
        require(normal.size() == anchor.dim(), "dimension mismatch");
    }
    /// Parabolic distance to the plane; the plane contains time lines, so only the spatial gap counts.
    [[nodiscard]] double distance(const ParaPoint& q) const noexcept {
        return std::abs((q.x - anchor.x).dot(normal));
    }
};

/// Orthonormal basis of the complement of a unit vector e (Gram-Schmidt on coordinate axes).
[[nodiscard]] inline std::vector<SpatialVec> orthonormal_complement(const SpatialVec& e) {
    const std::size_t n = e.size();
    std::vector<SpatialVec> basis;
    for (std::size_t k = 0; k < n && basis.size() + 1 < n; ++k) {
        SpatialVec v(n);
        v[k] = 1.0;
        v -= e * v.dot(e);
        for (const auto& b : basis) v -= b * v.dot(b);
        const double len = v.norm();
        if (len > 1e-8) basis.push_back(v * (1.0 / len));
    }
    return basis;
}

struct PointCloudSet {
    std::vector<ParaPoint> samples;
    [[nodiscard]] bool empty() const noexcept { return samples.empty(); }
    [[nodiscard]] std::size_t dim() const { return samples.empty() ? 0 : samples.front().dim(); }
};

inline nlohmann::json point_to_json(const ParaPoint& p) {
    return {{"x", std::vector<double>(p.x.begin(), p.x.end())}, {"t", p.t}};
}
inline ParaPoint point_from_json(const nlohmann::json& j) {
    require(j.is_object() && j.contains("x") && j.contains("t"), "point JSON needs 'x' and 't'");
    const auto x = j.at("x").get<std::vector<double>>();
    ParaPoint p(SpatialVec(std::span<const double>(x)), j.at("t").get<double>());
    require(p.finite(), "point coordinates must be finite");
    return p;
}

/// JSON array of {"x":[...],"t":...}
inline nlohmann::json to_json(const PointCloudSet& s) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : s.samples) arr.push_back(point_to_json(p));
    return arr;
}
inline PointCloudSet point_cloud_from_json(const nlohmann::json& j) {
    require(j.is_array(), "point cloud JSON must be an array");
    PointCloudSet s;
    for (const auto& e : j) s.samples.push_back(point_from_json(e));
    for (const auto& p : s.samples) require(p.dim() == s.samples.front().dim(), "mixed spatial dimensions");
    return s;
}

[[nodiscard]] inline double parabolic_diameter(std::span<const ParaPoint> pts) {
    double d = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) d = std::max(d, para_dist(pts[i], pts[j]));
    return d;
}

/// Greedy-cover upper estimate of the parabolic s-content with balls of radius <= delta.
///
/// Points are visited in input order; each uncovered point opens a closed ball
/// of radius delta, and that cluster contributes (2 * its max distance from
/// the opener)^s, which bounds the cluster's parabolic diameter.
[[nodiscard]] inline double hausdorff_content(const PointCloudSet& a, double s, double delta) {
    require(!a.empty(), "hausdorff_content needs a nonempty point cloud");
    const double n = static_cast<double>(a.dim());
    require(s > 0.0 && s <= n + 2.0, "content exponent must lie in (0, n+2]");
    require(delta > 0.0, "cover radius must be positive");
    ParabolicKdTree tree(a.samples);
    std::vector<char> covered(a.samples.size(), 0);
    double total = 0.0;
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        if (covered[i]) continue;
        double reach = 0.0;
        tree.for_each_within(a.samples[i], delta, [&](std::size_t j) {
            if (covered[j]) return;
            covered[j] = 1;
            reach = std::max(reach, para_dist(a.samples[i], a.samples[j]));
        });
        covered[i] = 1;
        total += std::pow(2.0 * reach, s);
    }
    return total;
}

// ---- regular samples of cylinders (cell-centred grids) used across modules

/// Cell-centred points of [lo, hi] with `count` cells.
[[nodiscard]] inline std::vector<double> cell_centres(double lo, double hi, std::size_t count) {
    std::vector<double> v(count);
    const double h = (hi - lo) / static_cast<double>(count);
    for (std::size_t i = 0; i < count; ++i) v[i] = lo + (static_cast<double>(i) + 0.5) * h;
    return v;
}

/// Points of a spatial lattice with spacing h inside the ball B(c, radius), optionally offset.
[[nodiscard]] inline std::vector<SpatialVec> ball_lattice(const SpatialVec& c, double radius, double h,
                                                          double offset = 0.0, double pad = 0.0) {
    const std::size_t n = c.size();
    const int k = static_cast<int>(std::ceil((radius + pad) / h)) + 1;
    std::vector<SpatialVec> out;
    std::vector<int> idx(n, -k);
    for (;;) {
        SpatialVec v(n);
        for (std::size_t d = 0; d < n; ++d) v[d] = (idx[d] + offset) * h;
        if (v.norm() <= radius + pad + 1e-12 * radius) out.push_back(c + v);
        std::size_t d = 0;
        while (d < n && ++idx[d] > k) idx[d++] = -k;
        if (d == n) break;
    }
    return out;
}

}  // namespace caloric
