#pragma once

// Static k-d tree over space-time points queried in the parabolic metric.
// Box lower bounds use max(euclidean spatial gap, sqrt(time gap)), which is
// a valid lower bound for max(|dx|, |dt|^{1/2}).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "caloric/para_point.hpp"

namespace caloric {

class ParabolicKdTree {
public:
    ParabolicKdTree() = default;
    explicit ParabolicKdTree(std::span<const ParaPoint> pts) : pts_(pts.begin(), pts.end()) {
        if (pts_.empty()) return;
        dim_ = pts_.front().dim();
        idx_.resize(pts_.size());
        std::iota(idx_.begin(), idx_.end(), 0u);
        nodes_.reserve(4 * pts_.size() / kLeaf + 4);
        build(0, idx_.size());
    }

    [[nodiscard]] bool empty() const noexcept { return pts_.empty(); }
    [[nodiscard]] std::size_t size() const noexcept { return pts_.size(); }
    [[nodiscard]] const ParaPoint& point(std::size_t i) const noexcept { return pts_[i]; }

    /// Parabolic distance to the nearest stored point (infinity when empty).
    [[nodiscard]] double nearest_distance(const ParaPoint& q) const {
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        if (!nodes_.empty()) nearest(0, q, best, arg);
        return best;
    }
    [[nodiscard]] std::size_t nearest_index(const ParaPoint& q) const {
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = std::numeric_limits<std::size_t>::max();
        if (!nodes_.empty()) nearest(0, q, best, arg);
        return arg;
    }

    /// Whether some stored point lies within parabolic distance `radius`; stops at the first hit.
    [[nodiscard]] bool any_within(const ParaPoint& q, double radius) const {
        return !nodes_.empty() && any(0, q, radius);
    }

    /// Indices of stored points within parabolic distance `radius` (closed ball).
    template <class Fn>
    void for_each_within(const ParaPoint& q, double radius, Fn&& fn) const {
        if (!nodes_.empty()) within(0, q, radius, fn);
    }

private:
    static constexpr std::size_t kLeaf = 12;

    struct Box {
        std::array<double, kMaxSpatialDim> lo{}, hi{};
        double tlo = 0, thi = 0;
    };
    struct Node {
        Box box;
        std::uint32_t begin, end;
        std::int32_t left = -1, right = -1;
    };

    Box bound(std::size_t b, std::size_t e) const {
        Box box;
        for (std::size_t d = 0; d < dim_; ++d) {
            box.lo[d] = std::numeric_limits<double>::infinity();
            box.hi[d] = -std::numeric_limits<double>::infinity();
        }
        box.tlo = std::numeric_limits<double>::infinity();
        box.thi = -std::numeric_limits<double>::infinity();
        for (std::size_t k = b; k < e; ++k) {
            const auto& p = pts_[idx_[k]];
            for (std::size_t d = 0; d < dim_; ++d) {
                box.lo[d] = std::min(box.lo[d], p.x[d]);
                box.hi[d] = std::max(box.hi[d], p.x[d]);
            }
            box.tlo = std::min(box.tlo, p.t);
            box.thi = std::max(box.thi, p.t);
        }
        return box;
    }

    std::int32_t build(std::size_t b, std::size_t e) {
        const auto id = static_cast<std::int32_t>(nodes_.size());
        nodes_.push_back({bound(b, e), static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(e)});
        if (e - b <= kLeaf) return id;
        const Box& box = nodes_[id].box;
        // split along the axis of largest parabolic extent; axis dim_ is time
        std::size_t axis = dim_;
        double widest = std::sqrt(box.thi - box.tlo);
        for (std::size_t d = 0; d < dim_; ++d)
            if (box.hi[d] - box.lo[d] > widest) { widest = box.hi[d] - box.lo[d]; axis = d; }
        const std::size_t mid = (b + e) / 2;
        auto key = [&](std::uint32_t i) { return axis == dim_ ? pts_[i].t : pts_[i].x[axis]; };
        std::nth_element(idx_.begin() + b, idx_.begin() + mid, idx_.begin() + e,
                         [&](std::uint32_t i, std::uint32_t j) { return key(i) < key(j); });
        const auto l = build(b, mid);
        const auto r = build(mid, e);
        nodes_[id].left = l;
        nodes_[id].right = r;
        return id;
    }

    double box_distance(const Box& box, const ParaPoint& q) const {
        double s2 = 0.0;
        for (std::size_t d = 0; d < dim_; ++d) {
            const double g = std::max({box.lo[d] - q.x[d], 0.0, q.x[d] - box.hi[d]});
            s2 += g * g;
        }
        const double gt = std::max({box.tlo - q.t, 0.0, q.t - box.thi});
        return std::max(std::sqrt(s2), std::sqrt(gt));
    }

    void nearest(std::int32_t id, const ParaPoint& q, double& best, std::size_t& arg) const {
        const Node& nd = nodes_[id];
        if (box_distance(nd.box, q) >= best) return;
        if (nd.left < 0) {
            for (std::size_t k = nd.begin; k < nd.end; ++k) {
                const double d = para_dist(pts_[idx_[k]], q);
                if (d < best) { best = d; arg = idx_[k]; }
            }
            return;
        }
        const double dl = box_distance(nodes_[nd.left].box, q);
        const double dr = box_distance(nodes_[nd.right].box, q);
        if (dl <= dr) {
            nearest(nd.left, q, best, arg);
            nearest(nd.right, q, best, arg);
        } else {
            nearest(nd.right, q, best, arg);
            nearest(nd.left, q, best, arg);
        }
    }

    bool any(std::int32_t id, const ParaPoint& q, double radius) const {
        const Node& nd = nodes_[id];
        if (box_distance(nd.box, q) > radius) return false;
        if (nd.left < 0) {
            for (std::size_t k = nd.begin; k < nd.end; ++k)
                if (para_dist(pts_[idx_[k]], q) <= radius) return true;
            return false;
        }
        const bool left_first = box_distance(nodes_[nd.left].box, q) <= box_distance(nodes_[nd.right].box, q);
        return left_first ? any(nd.left, q, radius) || any(nd.right, q, radius)
                          : any(nd.right, q, radius) || any(nd.left, q, radius);
    }

    template <class Fn>
    void within(std::int32_t id, const ParaPoint& q, double radius, Fn& fn) const {
        const Node& nd = nodes_[id];
        if (box_distance(nd.box, q) > radius) return;
        if (nd.left < 0) {
            for (std::size_t k = nd.begin; k < nd.end; ++k)
                if (para_dist(pts_[idx_[k]], q) <= radius) fn(static_cast<std::size_t>(idx_[k]));
            return;
        }
        within(nd.left, q, radius, fn);
        within(nd.right, q, radius, fn);
    }

    std::vector<ParaPoint> pts_;
    std::vector<std::uint32_t> idx_;
    std::vector<Node> nodes_;
    std::size_t dim_ = 0;
};

}  // namespace caloric
