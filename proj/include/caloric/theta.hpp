#pragma once

// Bilateral flatness Theta^S_A(x, r): the normalized two-sided Hausdorff
// discrepancy between a sampled set A and the best member of a family S,
// inside C_r(x). Families: admissible planes through x, and zero sets of
// homogeneous caloric polynomials F_Sigma(k) or of polynomials P_Sigma(d).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

#include <boost/geometry/algorithms/convex_hull.hpp>
#include <boost/geometry/strategies/agnostic/hull_graham_andrew.hpp>
#include <boost/geometry/strategies/cartesian/side_by_triangle.hpp>
#include <boost/geometry/geometries/multi_point.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/geometry/geometries/polygon.hpp>

#include "caloric/error.hpp"
#include "caloric/nodal.hpp"
#include "caloric/parallel.hpp"
#include "caloric/pargeo.hpp"
#include "caloric/point_index.hpp"
#include "caloric/polynomial.hpp"
#include "caloric/quadrature.hpp"
#include "caloric/tangent.hpp"

namespace caloric {

inline constexpr double kThetaCap = 2.0;

struct ThetaOptions {
    std::size_t normals = 256;          ///< sweep of spatial normals for the plane family
    std::size_t plane_space_cells = 21;  ///< sweep grid on (x + V) cap C_1
    std::size_t plane_time_cells = 51;
    std::size_t fine_space_cells = 41;   ///< refinement grid
    std::size_t fine_time_cells = 201;
    std::size_t directions = 128;       ///< coefficient directions for zero-set families
    std::size_t refine_seeds = 2;
    // a time gap dt between slices costs sqrt(dt / 2), so slices are denser than the spatial grid
    NodalResolution coarse_nodal{80, 64, 1};    ///< direction sweep
    NodalResolution search_nodal{200, 96, 1};   ///< simplex refinement
    NodalResolution fine_nodal{400, 160, 1};    ///< reported value
    double trace_radius = 1.25;  ///< zero sets are traced in C_{trace_radius}
    std::size_t search_samples = 50000;  ///< points of A cap C_1 used while scoring zero-set candidates
    unsigned workers = 1;
};

struct ThetaResult {
    double value = kThetaCap;
    std::vector<double> best;  ///< unit normal (planes) or unit coefficient vector (zero sets)
    std::size_t evaluations = 0;
};

namespace detail {

/// Cell-centred samples of the plane {x . e = 0} inside the open C_1.
inline std::vector<ParaPoint> plane_samples(const SpatialVec& e, std::size_t space_cells, std::size_t time_cells) {
    const std::size_t n = e.size();
    const auto ts = cell_centres(-1.0, 1.0, time_cells);
    std::vector<SpatialVec> offsets;
    if (n == 1) {
        offsets.push_back(SpatialVec(1));
    } else {
        const auto basis = orthonormal_complement(e);
        const auto s = cell_centres(-1.0, 1.0, space_cells);
        std::vector<std::size_t> idx(n - 1, 0);
        for (;;) {
            SpatialVec v(n);
            for (std::size_t k = 0; k + 1 < n; ++k) v += basis[k] * s[idx[k]];
            if (v.norm() < 1.0) offsets.push_back(v);
            std::size_t k = 0;
            while (k + 1 < n && ++idx[k] == space_cells) idx[k++] = 0;
            if (k + 1 == n) break;
        }
    }
    std::vector<ParaPoint> out;
    out.reserve(offsets.size() * ts.size());
    for (double t : ts)
        for (const auto& v : offsets) out.emplace_back(v, t);
    return out;
}

inline double capped_max(double a, double b) { return std::min(kThetaCap, std::max(a, b)); }

/// max over zs of the distance to the tree; points already within the running max are skipped
/// with an early-exit query, which is much cheaper than a full nearest search far from the cloud.
inline double max_nearest(const ParabolicKdTree& tree, const std::vector<ParaPoint>& zs) {
    double m = 0.0;
    for (const auto& z : zs)
        if (!tree.any_within(z, m)) m = std::max(m, tree.nearest_distance(z));
    return m;
}

/// Spatial points whose |x . e| maxima agree with those of the whole cloud: hull vertices for n = 2.
inline std::vector<SpatialVec> support_points(const std::vector<ParaPoint>& pts) {
    std::vector<SpatialVec> out;
    if (!pts.empty() && pts.front().dim() == 2) {
        namespace bg = boost::geometry;
        using P = bg::model::d2::point_xy<double>;
        bg::model::multi_point<P> mp;
        for (const auto& p : pts) mp.emplace_back(p.x[0], p.x[1]);
        bg::model::polygon<P> hull;
        bg::convex_hull(mp, hull);
        for (const auto& v : hull.outer()) out.push_back(SpatialVec{v.x(), v.y()});
        if (!out.empty()) return out;
    }
    for (const auto& p : pts) out.push_back(p.x);
    return out;
}

}  // namespace detail

/// Theta^S_A(center, r). A is blown up by T_{center, r}, so the family member is compared on C_1.
/// Both sups are sampled: the first over the points of A, the second over a grid of S (planes) or a
/// traced nodal cloud (zero sets); distances to a zero set are taken against its cloud in C_{trace_radius}.
/// The result is capped at 2.
[[nodiscard]] inline ThetaResult theta_flatness(const PointCloudSet& a, const ParaPoint& center, double r,
                                                const ConeSpec& family, const ThetaOptions& opt = {}) {
    require(!a.empty(), "theta_flatness needs a nonempty point cloud");
    require(r > 0.0, "theta_flatness needs r > 0");
    const std::size_t n = a.dim();
    require(center.dim() == n, "center dimension mismatch");
    // only points within C_3 can be nearest to C_1 under the cap
    std::vector<ParaPoint> near, inside;
    for (const auto& p : a.samples) {
        const ParaPoint q = blow_up_map(p, center, r);
        const double d = para_norm(q);
        if (d < 1.0 + kThetaCap) near.push_back(q);
        if (d < 1.0) inside.push_back(q);
    }
    if (inside.empty()) throw ValidationError("A does not meet C_r(center)");
    const ParabolicKdTree a_tree(near);
    ThetaResult res;

    auto sweep_order = [](const std::vector<double>& vals, const std::vector<std::vector<double>>& keys) {
        std::vector<std::size_t> order(vals.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) {
            return vals[x] < vals[y] || (vals[x] == vals[y] && keys[x] < keys[y]);
        });
        return order;
    };

    if (family.kind == ConeKind::Flat || (family.kind == ConeKind::Homogeneous && family.degree == 1)) {
        const auto support = detail::support_points(inside);
        auto plane_eval = [&](const SpatialVec& e, bool fine) {
            double s1 = 0.0;
            for (const auto& x : support) s1 = std::max(s1, std::abs(x.dot(e)));
            const auto grid = fine ? detail::plane_samples(e, opt.fine_space_cells, opt.fine_time_cells)
                                   : detail::plane_samples(e, opt.plane_space_cells, opt.plane_time_cells);
            return detail::capped_max(s1, detail::max_nearest(a_tree, grid));
        };
        auto canonical = [](SpatialVec e) {
            for (double v : e)
                if (v != 0.0) {
                    if (v < 0.0) e *= -1.0;
                    break;
                }
            return e;
        };
        std::vector<SpatialVec> normals;
        if (n == 1) {
            normals.push_back(SpatialVec{1.0});
        } else if (n == 2) {
            for (std::size_t k = 0; k < opt.normals; ++k) {
                const double th = std::numbers::pi * static_cast<double>(k) / static_cast<double>(opt.normals);
                normals.push_back(canonical(SpatialVec{std::cos(th), std::sin(th)}));
            }
        } else {
            for (const auto& d : sphere_directions(n, opt.normals)) normals.push_back(SpatialVec(std::span<const double>(d)));
        }
        std::vector<double> vals(normals.size());
        std::vector<std::vector<double>> keys(normals.size());
        parallel_for(normals.size(), opt.workers, [&](std::size_t i) { vals[i] = plane_eval(normals[i], false); });
        for (std::size_t i = 0; i < normals.size(); ++i) keys[i].assign(normals[i].begin(), normals[i].end());
        res.evaluations += normals.size();
        const auto order = sweep_order(vals, keys);
        double best = std::numeric_limits<double>::infinity();
        SpatialVec best_e;
        auto consider = [&](SpatialVec e) {
            e = canonical(e * (1.0 / e.norm()));
            const double v = plane_eval(e, true);
            ++res.evaluations;
            const std::vector<double> key(e.begin(), e.end());
            if (v < best || (v == best && key < std::vector<double>(best_e.begin(), best_e.end()))) {
                best = v;
                best_e = e;
            }
        };
        for (std::size_t s = 0; s < std::min(opt.refine_seeds, order.size()); ++s) {
            const SpatialVec& e0 = normals[order[s]];
            consider(e0);
            if (n == 2) {
                const double th0 = std::atan2(e0[1], e0[0]);
                const double step = std::numbers::pi / static_cast<double>(opt.normals);
                auto f = [&](double th) { return plane_eval(SpatialVec{std::cos(th), std::sin(th)}, true); };
                const double th = golden_section_max([&](double x) { return -f(x); }, th0 - step, th0 + step, 20, 30);
                res.evaluations += 30;
                consider(SpatialVec{std::cos(th), std::sin(th)});
            } else if (n >= 3) {
                auto f = [&](const std::vector<double>& p) {
                    const SpatialVec e{std::span<const double>(p)};
                    return plane_eval(e * (1.0 / std::max(1e-12, e.norm())), true);
                };
                auto nm = nelder_mead(f, std::vector<double>(e0.begin(), e0.end()), std::vector<double>(n, 0.05), 60, 1e-3);
                res.evaluations += nm.iterations;
                consider(SpatialVec(std::span<const double>(nm.x)));
            }
        }
        res.value = best;
        res.best.assign(best_e.begin(), best_e.end());
        return res;
    }

    require(n <= 2, "zero-set families need nodal tracing (n <= 2)");
    const auto basis = family.basis(n);
    const ParaPoint origin = ParaPoint::origin(n);
    // the search scores candidates on a strided subsample of A cap C_1; reported values use all of it
    std::vector<ParaPoint> probe;
    const std::size_t stride = std::max<std::size_t>(1, inside.size() / std::max<std::size_t>(1, opt.search_samples));
    for (std::size_t i = 0; i < inside.size(); i += stride) probe.push_back(inside[i]);
    enum class Pass { Coarse, Fine, Final };
    auto zero_eval = [&](const std::vector<double>& coeffs, Pass pass) {
        double norm = 0.0;
        for (double c : coeffs) norm += c * c;
        if (norm < 1e-24) return kThetaCap;
        const CaloricPolynomial h = combine(basis, coeffs);
        const auto set = nodal_trace(h, Cylinder(origin, opt.trace_radius), pass == Pass::Coarse ? opt.coarse_nodal
                                                 : pass == Pass::Fine ? opt.search_nodal
                                                                      : opt.fine_nodal);
        std::vector<ParaPoint> cloud, cloud_inside;
        for (const auto& p : set.points) {
            cloud.push_back(p.p);
            if (para_norm(p.p) < 1.0) cloud_inside.push_back(p.p);
        }
        if (cloud_inside.empty()) return kThetaCap;
        const ParabolicKdTree s_tree(cloud);
        const auto& from = pass == Pass::Final ? inside : probe;
        return detail::capped_max(detail::max_nearest(s_tree, from), detail::max_nearest(a_tree, cloud_inside));
    };
    const auto seeds = basis.size() == 1 ? std::vector<std::vector<double>>{{1.0}}
                                         : sphere_directions(basis.size(), opt.directions);
    std::vector<double> vals(seeds.size());
    parallel_for(seeds.size(), opt.workers, [&](std::size_t i) { vals[i] = zero_eval(seeds[i], Pass::Coarse); });
    res.evaluations += seeds.size();
    const auto order = sweep_order(vals, seeds);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < std::min(opt.refine_seeds, order.size()); ++s) {
        std::vector<double> x = seeds[order[s]];
        if (basis.size() > 1) {
            auto nm = nelder_mead([&](const std::vector<double>& p) { return zero_eval(p, Pass::Fine); }, x,
                                  std::vector<double>(x.size(), 0.1), 40, 1e-3);
            res.evaluations += nm.iterations;
            if (nm.value < zero_eval(x, Pass::Fine)) x = nm.x;
        }
        const double v = zero_eval(x, Pass::Final);
        res.evaluations += 2;
        double norm = 0.0;
        for (double c : x) norm += c * c;
        for (double& c : x) c /= std::sqrt(norm);
        if (v < best || (v == best && x < res.best)) {
            best = v;
            res.best = x;
        }
    }
    res.value = best;
    return res;
}

/// Convenience: the point cloud of a traced nodal set (all classes).
[[nodiscard]] inline PointCloudSet nodal_cloud(const NodalSet& set) {
    PointCloudSet out;
    out.samples.reserve(set.points.size());
    for (const auto& p : set.points) out.samples.push_back(p.p);
    return out;
}

}  // namespace caloric
