#pragma once

// Nodal sets of caloric polynomials (n = 1, 2), their R_x / R_t / S
// classification, the caloric measure omega_h = |grad h| dH^{n-1}|_{slice} dt,
// and the distributional identity  int phi d omega_h = 1/2 int |h| H* phi.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <vector>

#include "caloric/error.hpp"
#include "caloric/measure.hpp"
#include "caloric/parallel.hpp"
#include "caloric/pargeo.hpp"
#include "caloric/polynomial.hpp"
#include "caloric/quadrature.hpp"

namespace caloric {

enum class NodalClass { Rx, Rt, S };

inline const char* to_string(NodalClass c) {
    switch (c) {
        case NodalClass::Rx: return "R_x";
        case NodalClass::Rt: return "R_t";
        case NodalClass::S: return "S";
    }
    return "?";
}

struct NodalPoint {
    ParaPoint p;
    NodalClass cls = NodalClass::Rx;
    double weight = 0.0;     ///< slice length (n=2) or 1 (n=1), times the slice step
    double grad_norm = 0.0;  ///< |grad_x h| at p
    SpatialVec normal;       ///< -grad h / |grad h|; zero vector off R_x
};

struct NodalSet {
    std::size_t n = 0;
    std::vector<NodalPoint> points;
    std::size_t ambiguous_cells = 0;  ///< saddle cells resolved by the centre value
    std::size_t singular_points = 0;  ///< points classified S (zero weight in omega_h)

    [[nodiscard]] double total_weight() const noexcept {
        double s = 0.0;
        for (const auto& p : points) s += p.weight;
        return s;
    }
    [[nodiscard]] PointCloudSet cloud() const {
        PointCloudSet c;
        c.samples.reserve(points.size());
        for (const auto& p : points) c.samples.push_back(p.p);
        return c;
    }
};

struct NodalResolution {
    std::size_t slices = 200;  ///< time slices over the cylinder's time span
    std::size_t grid = 200;    ///< spatial cells per axis across the diameter (even)
    unsigned workers = 1;
    double tol_grad_rel = 1e-8;   ///< classification threshold relative to the coefficient scale
    double tol_root_rel = 1e-12;  ///< root refinement tolerance relative to the cylinder radius
};

/// h restricted to a time slice: spatial coefficients with t folded in.
class SlicePoly {
public:
    SlicePoly(const Polynomial& h, double t) : n_(h.dim()) {
        std::map<std::array<std::uint8_t, kMaxSpatialDim>, double> acc;
        for (const auto& [m, c] : h.terms()) acc[m.alpha] += c * std::pow(t, m.ell);
        for (const auto& [a, c] : acc)
            if (c != 0.0) terms_.push_back({a, c});
        for (const auto& t_ : terms_)
            for (std::size_t i = 0; i < n_; ++i) max_pow_ = std::max<int>(max_pow_, t_.alpha[i]);
    }
    [[nodiscard]] double operator()(const double* x) const noexcept {
        double s = 0.0;
        for (const auto& t : terms_) {
            double v = t.c;
            for (std::size_t i = 0; i < n_; ++i)
                for (int k = 0; k < t.alpha[i]; ++k) v *= x[i];
            s += v;
        }
        return s;
    }
    [[nodiscard]] std::size_t dim() const noexcept { return n_; }
    [[nodiscard]] int max_power() const noexcept { return max_pow_; }
    struct Term {
        std::array<std::uint8_t, kMaxSpatialDim> alpha;
        double c;
    };
    [[nodiscard]] const std::vector<Term>& terms() const noexcept { return terms_; }

private:
    std::size_t n_;
    int max_pow_ = 0;
    std::vector<Term> terms_;
};

/// Spatial gradient and time derivative of a polynomial at a point.
struct PolyJet {
    Polynomial h;
    std::vector<Polynomial> grad;
    Polynomial ht;
    explicit PolyJet(const Polynomial& p) : h(p), ht(p.dt()) {
        for (std::size_t i = 0; i < p.dim(); ++i) grad.push_back(p.dx(i));
    }
    [[nodiscard]] SpatialVec gradient(const ParaPoint& q) const {
        SpatialVec g(h.dim());
        for (std::size_t i = 0; i < h.dim(); ++i) g[i] = grad[i](q);
        return g;
    }
};

[[nodiscard]] inline double tol_grad_for(const CaloricPolynomial& h, double rel = 1e-8) {
    return rel * std::max(h.poly().coefficient_scale(), 1e-300);
}

/// R_x if |grad h| > tol, else R_t if |dh/dt| > tol, else S. Does not check h(p) = 0.
[[nodiscard]] inline NodalClass classify_point(const CaloricPolynomial& h, const ParaPoint& p, double tol_grad) {
    const PolyJet jet(h.poly());
    if (jet.gradient(p).norm() > tol_grad) return NodalClass::Rx;
    if (std::abs(jet.ht(p)) > tol_grad) return NodalClass::Rt;
    return NodalClass::S;
}

namespace detail {

// bisection on a segment a -> b with opposite signs (v <= 0 counts as negative)
template <class F>
double bisect(F&& f, double lo, double hi, double flo, double tol) {
    const bool neg_lo = flo <= 0.0;
    for (int it = 0; it < 200 && std::abs(hi - lo) > tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        if ((f(mid) <= 0.0) == neg_lo) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

struct SliceOutput {
    std::vector<NodalPoint> pts;
    std::size_t ambiguous = 0;
};

// clip segment p0-p1 to the disk |x - c| < r; returns false when nothing remains
inline bool clip_to_disk(std::array<double, 2>& p0, std::array<double, 2>& p1, const SpatialVec& c, double r) {
    const double dx = p1[0] - p0[0], dy = p1[1] - p0[1];
    const double fx = p0[0] - c[0], fy = p0[1] - c[1];
    const double a = dx * dx + dy * dy;
    if (a == 0.0) return false;
    const double b = 2.0 * (fx * dx + fy * dy);
    const double cc = fx * fx + fy * fy - r * r;
    const double disc = b * b - 4.0 * a * cc;
    if (disc <= 0.0) return false;
    const double sq = std::sqrt(disc);
    const double s0 = std::max(0.0, (-b - sq) / (2.0 * a));
    const double s1 = std::min(1.0, (-b + sq) / (2.0 * a));
    if (s1 <= s0) return false;
    const std::array<double, 2> q0{p0[0] + s0 * dx, p0[1] + s0 * dy};
    const std::array<double, 2> q1{p0[0] + s1 * dx, p0[1] + s1 * dy};
    p0 = q0;
    p1 = q1;
    return true;
}

}  // namespace detail

/// Traces Sigma^h inside `region` slice by slice.
///
/// Time slices sit at midpoints of `slices` equal steps. Spatial nodes sit at
/// cell centres of a grid whose cells tile [c - r - h/2, c + r + h/2], so with an
/// even `grid` the centre coordinate is never a node. n = 1 uses sign changes;
/// n = 2 uses marching squares with saddle cells resolved by the centre value.
[[nodiscard]] inline NodalSet nodal_trace(const CaloricPolynomial& h, const Cylinder& region,
                                          const NodalResolution& res = {}) {
    const std::size_t n = h.dim();
    require(n == 1 || n == 2, "nodal tracing supports n in {1, 2}");
    require(region.center.dim() == n, "region dimension mismatch");
    require(res.slices >= 1 && res.grid >= 2, "nodal resolution too small");
    require(!h.poly().is_zero(), "nodal tracing needs a nonzero polynomial");
    const double r = region.r;
    const double t0 = region.t_lo(), t1 = region.t_hi();
    const double dt = (t1 - t0) / static_cast<double>(res.slices);
    const std::size_t g = res.grid + (res.grid % 2);
    const double hx = 2.0 * r / static_cast<double>(g);
    const std::size_t nodes = g + 2;  // covers [c - r - h/2, c + r + h/2]
    const double tol_root = res.tol_root_rel * r;
    const double tol_grad = tol_grad_for(h, res.tol_grad_rel);
    const PolyJet jet(h.poly());
    const SpatialVec& c = region.center.x;

    auto coord = [&](std::size_t axis, std::size_t i) {
        return c[axis] - r + (static_cast<double>(i) - 0.5) * hx;
    };

    auto finish_point = [&](ParaPoint p, double weight, bool project) {
        NodalPoint np;
        SpatialVec gx = jet.gradient(p);
        double gn = gx.norm();
        if (project && gn > tol_grad) {
            // one Newton step back onto the zero set along the gradient
            const double val = h(p);
            p.x -= gx * (val / (gn * gn));
            gx = jet.gradient(p);
            gn = gx.norm();
        }
        np.p = p;
        np.weight = weight;
        np.grad_norm = gn;
        np.normal = SpatialVec(n);
        if (gn > tol_grad) {
            np.cls = NodalClass::Rx;
            np.normal = gx * (-1.0 / gn);
        } else {
            np.cls = std::abs(jet.ht(p)) > tol_grad ? NodalClass::Rt : NodalClass::S;
        }
        return np;
    };

    std::vector<detail::SliceOutput> out(res.slices);
    parallel_for(res.slices, res.workers, [&](std::size_t js) {
        const double t = t0 + (static_cast<double>(js) + 0.5) * dt;
        const SlicePoly sp(h.poly(), t);
        auto& so = out[js];
        if (n == 1) {
            auto f = [&](double x) { return sp(&x); };
            double xa = coord(0, 0), fa = f(xa);
            for (std::size_t i = 1; i < nodes; ++i) {
                const double xb = coord(0, i), fb = f(xb);
                if ((fa <= 0.0) != (fb <= 0.0)) {
                    const double root = detail::bisect(f, xa, xb, fa, tol_root);
                    if (std::abs(root - c[0]) < r) {
                        ParaPoint p(SpatialVec{root}, t);
                        so.pts.push_back(finish_point(p, dt, false));
                    }
                }
                xa = xb;
                fa = fb;
            }
            return;
        }
        // n == 2: node values
        std::vector<double> xs(nodes), ys(nodes), val(nodes * nodes);
        for (std::size_t i = 0; i < nodes; ++i) {
            xs[i] = coord(0, i);
            ys[i] = coord(1, i);
        }
        // tabulate powers for speed
        const int mp = sp.max_power();
        std::vector<double> px(nodes * (mp + 1)), py(nodes * (mp + 1));
        for (std::size_t i = 0; i < nodes; ++i) {
            px[i * (mp + 1)] = py[i * (mp + 1)] = 1.0;
            for (int k = 1; k <= mp; ++k) {
                px[i * (mp + 1) + k] = px[i * (mp + 1) + k - 1] * xs[i];
                py[i * (mp + 1) + k] = py[i * (mp + 1) + k - 1] * ys[i];
            }
        }
        for (std::size_t j = 0; j < nodes; ++j)
            for (std::size_t i = 0; i < nodes; ++i) {
                double s = 0.0;
                for (const auto& term : sp.terms())
                    s += term.c * px[i * (mp + 1) + term.alpha[0]] * py[j * (mp + 1) + term.alpha[1]];
                val[j * nodes + i] = s;
            }
        auto at = [&](std::size_t i, std::size_t j) { return val[j * nodes + i]; };
        auto edge_root = [&](std::size_t i0, std::size_t j0, std::size_t i1, std::size_t j1) {
            const double ax = xs[i0], ay = ys[j0], bx = xs[i1], by = ys[j1];
            const double fa = at(i0, j0);
            auto f = [&](double s) {
                const double q[2] = {ax + s * (bx - ax), ay + s * (by - ay)};
                return sp(q);
            };
            const double s = detail::bisect(f, 0.0, 1.0, fa, tol_root / hx);
            return std::array<double, 2>{ax + s * (bx - ax), ay + s * (by - ay)};
        };
        const double reach = r + hx * 1.5;
        for (std::size_t j = 0; j + 1 < nodes; ++j) {
            for (std::size_t i = 0; i + 1 < nodes; ++i) {
                // skip cells that cannot meet the disk
                const double cx = 0.5 * (xs[i] + xs[i + 1]) - c[0], cy = 0.5 * (ys[j] + ys[j + 1]) - c[1];
                if (cx * cx + cy * cy > reach * reach) continue;
                const double v00 = at(i, j), v10 = at(i + 1, j), v11 = at(i + 1, j + 1), v01 = at(i, j + 1);
                const int code = (v00 > 0) | ((v10 > 0) << 1) | ((v11 > 0) << 2) | ((v01 > 0) << 3);
                if (code == 0 || code == 15) continue;
                // edges: 0 bottom (00-10), 1 right (10-11), 2 top (01-11), 3 left (00-01)
                auto edge_point = [&](int e) {
                    switch (e) {
                        case 0: return edge_root(i, j, i + 1, j);
                        case 1: return edge_root(i + 1, j, i + 1, j + 1);
                        case 2: return edge_root(i, j + 1, i + 1, j + 1);
                        default: return edge_root(i, j, i, j + 1);
                    }
                };
                std::array<std::pair<int, int>, 2> segs{};
                int nseg = 0;
                switch (code) {
                    case 1: case 14: segs[nseg++] = {3, 0}; break;
                    case 2: case 13: segs[nseg++] = {0, 1}; break;
                    case 3: case 12: segs[nseg++] = {3, 1}; break;
                    case 4: case 11: segs[nseg++] = {1, 2}; break;
                    case 6: case 9: segs[nseg++] = {0, 2}; break;
                    case 7: case 8: segs[nseg++] = {3, 2}; break;
                    case 5: case 10: {
                        ++so.ambiguous;
                        const double q[2] = {0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])};
                        const bool centre_pos = sp(q) > 0;
                        // corners 00 and 11 share a sign in case 5 (positive) and 10 (negative)
                        const bool diag_pos = code == 5;
                        if (centre_pos == diag_pos) {
                            segs[nseg++] = {3, 2};
                            segs[nseg++] = {0, 1};
                        } else {
                            segs[nseg++] = {3, 0};
                            segs[nseg++] = {1, 2};
                        }
                        break;
                    }
                    default: break;
                }
                for (int s = 0; s < nseg; ++s) {
                    auto p0 = edge_point(segs[s].first);
                    auto p1 = edge_point(segs[s].second);
                    if (!detail::clip_to_disk(p0, p1, c, r)) continue;
                    const double len = std::hypot(p1[0] - p0[0], p1[1] - p0[1]);
                    if (len <= 0.0) continue;
                    ParaPoint p(SpatialVec{0.5 * (p0[0] + p1[0]), 0.5 * (p0[1] + p1[1])}, t);
                    so.pts.push_back(finish_point(p, len * dt, true));
                }
            }
        }
    });
    NodalSet set;
    set.n = n;
    for (auto& so : out) {
        set.ambiguous_cells += so.ambiguous;
        for (auto& p : so.pts) {
            if (p.cls == NodalClass::S) ++set.singular_points;
            set.points.push_back(std::move(p));
        }
    }
    return set;
}

/// Caloric measure atoms from a traced nodal set: weight |grad h| * surface weight on R_x, R_t and S dropped.
[[nodiscard]] inline DiscreteMeasure caloric_measure_from_nodal(const NodalSet& set) {
    DiscreteMeasure m;
    m.reserve(set.points.size());
    for (const auto& p : set.points)
        if (p.cls == NodalClass::Rx && p.grad_norm * p.weight > 0.0) m.add(p.p, p.grad_norm * p.weight);
    return m;
}

[[nodiscard]] inline DiscreteMeasure caloric_measure_poly(const CaloricPolynomial& h, const Cylinder& region,
                                                          const NodalResolution& res = {}) {
    return caloric_measure_from_nodal(nodal_trace(h, region, res));
}

/// Traces C_{r_max} and the nested cylinders C_{r_max/2^k}, keeping from level k only
/// the annulus r_max/2^{k+1} <= ||p - center|| (the innermost level keeps everything),
/// so every scale is resolved at the same relative resolution.
[[nodiscard]] inline NodalSet nodal_trace_multiscale(const CaloricPolynomial& h, const ParaPoint& center,
                                                     double r_max, std::size_t levels,
                                                     const NodalResolution& res = {}) {
    require(levels >= 1, "multiscale tracing needs at least one level");
    NodalSet all;
    all.n = h.dim();
    for (std::size_t k = 0; k < levels; ++k) {
        const double big_r = r_max / std::pow(2.0, static_cast<double>(k));
        NodalSet s = nodal_trace(h, Cylinder(center, big_r), res);
        all.ambiguous_cells += s.ambiguous_cells;
        for (auto& p : s.points) {
            if (k + 1 < levels && para_dist(p.p, center) < big_r / 2.0) continue;
            if (p.cls == NodalClass::S) ++all.singular_points;
            all.points.push_back(std::move(p));
        }
    }
    return all;
}

/// phi = exp(-1/(1-s)) for s = |x-c|^2/R^2 + (t-tc)^2/T^2 < 1, else 0.
struct BumpFunction {
    ParaPoint center;
    double radius = 0.5;      ///< spatial radius R
    double half_width = 0.1;  ///< time half-width T
    double amplitude = 1.0;

    [[nodiscard]] double s_of(const ParaPoint& q) const noexcept {
        const SpatialVec y = q.x - center.x;
        const double tau = q.t - center.t;
        return y.dot(y) / (radius * radius) + tau * tau / (half_width * half_width);
    }
    [[nodiscard]] double operator()(const ParaPoint& q) const noexcept {
        const double s = s_of(q);
        return s < 1.0 ? amplitude * std::exp(-1.0 / (1.0 - s)) : 0.0;
    }
    /// (Laplacian phi, d phi / dt)
    [[nodiscard]] std::pair<double, double> derivatives(const ParaPoint& q) const noexcept {
        const double s = s_of(q);
        if (s >= 1.0) return {0.0, 0.0};
        const double u = 1.0 - s;
        const double g = amplitude * std::exp(-1.0 / u);
        const double g1 = -g / (u * u);
        const double g2 = g * (1.0 / (u * u * u * u) - 2.0 / (u * u * u));
        const SpatialVec y = q.x - center.x;
        const double nd = static_cast<double>(q.dim());
        const double lap = g2 * 4.0 * y.dot(y) / std::pow(radius, 4) + g1 * 2.0 * nd / (radius * radius);
        const double dtp = g1 * 2.0 * (q.t - center.t) / (half_width * half_width);
        return {lap, dtp};
    }
};

struct ResidualReport {
    double measure_side = 0.0;  ///< int phi d omega
    double volume_side = 0.0;   ///< 1/2 int |h| H* phi
    [[nodiscard]] double residual() const noexcept { return std::abs(measure_side - volume_side); }
};

struct ResidualQuadrature {
    int time_nodes = 96;
    int cross_nodes = 96;  ///< x2 nodes (n = 2)
    int piece_nodes = 64;  ///< Gauss nodes per root-free piece along x1
    int root_scan = 64;    ///< sign-change scan cells along x1
};

/// Both sides of  int phi d omega = 1/2 int |h| H* phi  (H* = Lap + d/dt for caloric h, Lap - d/dt for adjoint).
[[nodiscard]] inline ResidualReport distributional_residual(const CaloricPolynomial& h, const DiscreteMeasure& omega,
                                                            const BumpFunction& phi, const Cylinder& region,
                                                            const ResidualQuadrature& q = {}) {
    const std::size_t n = h.dim();
    require(n == 1 || n == 2, "distributional residual supports n in {1, 2}");
    require((phi.center.x - region.center.x).norm() + phi.radius <= region.r * (1 + 1e-12) &&
                phi.center.t - phi.half_width >= region.t_lo() && phi.center.t + phi.half_width <= region.t_hi(),
            "test function support escapes the traced region");
    ResidualReport rep;
    for (const auto& a : omega.atoms()) rep.measure_side += a.w * phi(a.p);

    const double time_sign = h.orientation() == Orientation::Caloric ? 1.0 : -1.0;
    const auto tq = gauss_legendre(q.time_nodes, -1.0, 1.0);
    const auto cq = gauss_legendre(q.cross_nodes, -1.0, 1.0);
    const auto pq = gauss_legendre(q.piece_nodes, 0.0, 1.0);

    auto integrand = [&](const ParaPoint& p) {
        const auto [lap, dtp] = phi.derivatives(p);
        return 0.5 * std::abs(h(p)) * (lap + time_sign * dtp);
    };
    // integral along x1 over [lo, hi] at fixed (x2, t), split at sign changes of h
    auto line = [&](double lo, double hi, double x2, double t) {
        auto point = [&](double x1) {
            return n == 1 ? ParaPoint(SpatialVec{x1}, t) : ParaPoint(SpatialVec{x1, x2}, t);
        };
        std::vector<double> cuts{lo};
        double xa = lo, fa = h(point(lo));
        for (int k = 1; k <= q.root_scan; ++k) {
            const double xb = lo + (hi - lo) * k / q.root_scan;
            const double fb = h(point(xb));
            if ((fa <= 0.0) != (fb <= 0.0))
                cuts.push_back(detail::bisect([&](double x) { return h(point(x)); }, xa, xb, fa, 1e-14 * (hi - lo)));
            xa = xb;
            fa = fb;
        }
        cuts.push_back(hi);
        double s = 0.0;
        for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
            const double a = cuts[k], b = cuts[k + 1];
            for (std::size_t i = 0; i < pq.nodes.size(); ++i)
                s += pq.weights[i] * (b - a) * integrand(point(a + (b - a) * pq.nodes[i]));
        }
        return s;
    };
    double vol = 0.0;
    const double big_r = phi.radius, big_t = phi.half_width;
    for (std::size_t it = 0; it < tq.nodes.size(); ++it) {
        const double tau = big_t * tq.nodes[it];
        const double rem = 1.0 - tau * tau / (big_t * big_t);
        if (rem <= 0.0) continue;
        const double t = phi.center.t + tau;
        const double wt = big_t * tq.weights[it];
        if (n == 1) {
            const double w = big_r * std::sqrt(rem);
            vol += wt * line(phi.center.x[0] - w, phi.center.x[0] + w, 0.0, t);
            continue;
        }
        const double w2 = big_r * std::sqrt(rem);
        for (std::size_t ic = 0; ic < cq.nodes.size(); ++ic) {
            const double y2 = w2 * cq.nodes[ic];
            const double rem1 = rem - y2 * y2 / (big_r * big_r);
            if (rem1 <= 0.0) continue;
            const double w1 = big_r * std::sqrt(rem1);
            vol += wt * w2 * cq.weights[ic] *
                   line(phi.center.x[0] - w1, phi.center.x[0] + w1, phi.center.x[1] + y2, t);
        }
    }
    rep.volume_side = vol;
    return rep;
}

}  // namespace caloric
