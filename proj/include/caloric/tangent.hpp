#pragma once

// Tangent-measure toolkit on discrete measures: F_r, the localized
// Lipschitz distance d_{C_r}, distances to cones of caloric polynomial
// measures, blow-ups, pointwise dimension and the geometric-mean ratio.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <boost/math/special_functions/erf.hpp>
#include <gsl/gsl_fit.h>

#include "caloric/boundary_flow.hpp"
#include "caloric/error.hpp"
#include "caloric/measure.hpp"
#include "caloric/nodal.hpp"
#include "caloric/parallel.hpp"
#include "caloric/pargeo.hpp"
#include "caloric/polynomial.hpp"
#include "caloric/quadrature.hpp"

namespace caloric {

/// F_r(mu) = sum w (r - ||x - center||)_+
[[nodiscard]] inline double F_r(const DiscreteMeasure& mu, double r, const ParaPoint* center = nullptr) {
    require(!mu.is_signed(), "F_r is defined for unsigned measures");
    require(r > 0.0, "F_r needs r > 0");
    double s = 0.0;
    for (const auto& a : mu.atoms()) {
        const double d = center ? para_dist(a.p, *center) : para_norm(a.p);
        if (d < r) s += a.w * (r - d);
    }
    return s;
}

/// (r - ||p - center||)_+, the cap on test values. It never exceeds boundary_distance, so capped
/// 1-Lipschitz values always extend by 0 outside C_r, and d_{C_r}(mu, 0) = F_r(mu) exactly.
[[nodiscard]] inline double norm_cap(const ParaPoint& p, const ParaPoint& center, double r) noexcept {
    return std::max(0.0, r - para_dist(p, center));
}

/// Parabolic distance from p to the complement of C_r(center): min(r - |x|, sqrt(r^2 - |t|)), 0 outside.
[[nodiscard]] inline double boundary_distance(const ParaPoint& p, const ParaPoint& center, double r) noexcept {
    const double ds = r - (p.x - center.x).norm();
    const double tt = r * r - std::abs(p.t - center.t);
    if (ds <= 0.0 || tt <= 0.0) return 0.0;
    return std::min(ds, std::sqrt(tt));
}

namespace detail {

/// Visits the 2^{n+1} vertices of the parabolic grid cell (side h in space, h^2 in time) around p
/// with their multilinear weights.
template <class F>
void for_each_grid_vertex(const ParaPoint& p, double h, F&& f) {
    using Key = std::array<long long, kMaxSpatialDim + 1>;
    const std::size_t n = p.dim();
    std::array<double, kMaxSpatialDim + 1> frac{};
    Key base{};
    for (std::size_t i = 0; i <= n; ++i) {
        const double s = i < n ? p.x[i] / h : p.t / (h * h);
        const double fl = std::floor(s);
        base[i < n ? i : kMaxSpatialDim] = static_cast<long long>(fl);
        frac[i] = s - fl;
    }
    for (std::size_t corner = 0; corner < (std::size_t{1} << (n + 1)); ++corner) {
        double w = 1.0;
        Key k = base;
        for (std::size_t i = 0; i <= n; ++i) {
            const bool up = (corner >> i) & 1U;
            w *= up ? frac[i] : 1.0 - frac[i];
            if (up) ++k[i < n ? i : kMaxSpatialDim];
        }
        if (w > 0.0) f(k, w);
    }
}

}  // namespace detail

namespace detail {

using GridKey = std::array<long long, kMaxSpatialDim + 1>;

struct GridKeyHash {
    std::size_t operator()(const GridKey& k) const noexcept {
        std::size_t h = 0xcbf29ce484222325ULL;
        for (long long v : k) h = (h ^ static_cast<std::size_t>(v)) * 0x100000001b3ULL;
        return h;
    }
};

}  // namespace detail

/// Aggregates atoms onto the vertices of a parabolic grid (side h in space, h^2 in time), splitting
/// each atom multilinearly (cloud-in-cell). Hard cell cuts alias: differently discretized copies of one
/// measure get cell masses off by the slice fraction, and time offsets cost sqrt(dt). No atom moves
/// farther than h sqrt(n) in the parabolic metric. Output is sorted by vertex.
[[nodiscard]] inline std::vector<Atom> bin_atoms(const std::vector<Atom>& atoms, double h) {
    using detail::GridKey;
    std::unordered_map<GridKey, double, detail::GridKeyHash> cells;
    for (const auto& a : atoms)
        if (a.w > 0.0)
            detail::for_each_grid_vertex(a.p, h, [&](const GridKey& k, double w) { cells[k] += a.w * w; });
    std::vector<std::pair<GridKey, double>> sorted(cells.begin(), cells.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<Atom> out;
    out.reserve(sorted.size());
    const std::size_t n = atoms.empty() ? 0 : atoms.front().p.dim();
    for (const auto& [k, w] : sorted) {
        SpatialVec x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(k[i]) * h;
        out.push_back({ParaPoint(x, static_cast<double>(k[kMaxSpatialDim]) * h * h), w});
    }
    return out;
}

/// Number of atoms bin_atoms(atoms, h) produces; counting stops once it exceeds `limit`.
[[nodiscard]] inline std::size_t count_cells(const std::vector<Atom>& atoms, double h,
                                             std::size_t limit = std::numeric_limits<std::size_t>::max()) {
    using detail::GridKey;
    std::unordered_set<GridKey, detail::GridKeyHash> keys;
    for (const auto& a : atoms) {
        if (a.w > 0.0) detail::for_each_grid_vertex(a.p, h, [&](const GridKey& k, double) { keys.insert(k); });
        if (keys.size() > limit) break;
    }
    return keys.size();
}

namespace detail {

/// Smallest h = 1e-3 r 1.1^k accepted by `fits`, by bisection on k (cell counts fall as h grows).
template <class Fits>
double ladder_search(double r, Fits&& fits) {
    auto h_at = [r](int k) { return 1e-3 * r * std::pow(1.1, k); };
    if (fits(h_at(0))) return h_at(0);
    int lo = 0, hi = 1;
    while (!fits(h_at(hi))) {
        lo = hi;
        hi *= 2;
        if (hi > 4096) throw NumericalError("no parabolic grid size meets the support budget");
    }
    while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        (fits(h_at(mid)) ? hi : lo) = mid;
    }
    return h_at(hi);
}

}  // namespace detail

/// Smallest cell size on a geometric ladder (ratio 1.1 from 1e-3 r) with at most `target` occupied vertices.
[[nodiscard]] inline double choose_bin_size(const std::vector<Atom>& atoms, std::size_t target, double r) {
    return detail::ladder_search(r, [&](double h) { return count_cells(atoms, h, target) <= target; });
}

struct DistOptions {
    std::size_t cap = 400;  ///< max support points; larger supports are aggregated on parabolic cells
    ParaPoint center;       ///< defaults to the origin of the measures' dimension
    bool has_center = false;
    std::optional<double> bin_size;  ///< force a cell size (shared across calls)
};

struct DistResult {
    double value = 0.0;
    bool binned = false;
    double bin_size = 0.0;
    std::size_t support = 0;
};

namespace detail {
inline std::vector<Atom> restrict_to(const DiscreteMeasure& m, const ParaPoint& c, double r) {
    std::vector<Atom> out;
    for (const auto& a : m.atoms())
        if (a.w > 0.0 && para_dist(a.p, c) < r) out.push_back(a);
    return out;
}
}  // namespace detail

/// Exact d_{C_r}(mu, nu) on the supports, via the dual boundary transport problem.
[[nodiscard]] inline DistResult dist_points(const std::vector<Atom>& mu, const std::vector<Atom>& nu,
                                            const ParaPoint& c, double r) {
    BoundaryTransportProblem prob;
    for (const auto& a : mu) {
        prob.supply.push_back(a.w);
        prob.source_exit.push_back(norm_cap(a.p, c, r));
    }
    for (const auto& b : nu) {
        prob.demand.push_back(b.w);
        prob.sink_entry.push_back(norm_cap(b.p, c, r));
    }
    prob.cost.resize(mu.size() * nu.size());
    for (std::size_t i = 0; i < mu.size(); ++i)
        for (std::size_t j = 0; j < nu.size(); ++j) prob.cost[i * nu.size() + j] = para_dist(mu[i].p, nu[j].p);
    DistResult res;
    res.value = solve_boundary_transport(prob).value;
    res.support = mu.size() + nu.size();
    return res;
}

/// d_{C_r}(mu, nu) = sup { int f d(mu - nu) : f parabolic 1-Lipschitz, |f| <= (r - ||x - c||)_+ }.
///
/// Only atoms inside C_r matter. Supports above `cap` points are aggregated
/// per measure on a shared parabolic cell grid before solving.
[[nodiscard]] inline DistResult dist_measures(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double r,
                                              const DistOptions& opt = {}) {
    require(!mu.is_signed() && !nu.is_signed(), "dist_measures expects unsigned measures");
    require(r > 0.0, "dist_measures needs r > 0");
    const std::size_t n = std::max(mu.dim(), nu.dim());
    if (n == 0) return {};
    const ParaPoint c = opt.has_center ? opt.center : ParaPoint::origin(n);
    auto a = detail::restrict_to(mu, c, r);
    auto b = detail::restrict_to(nu, c, r);
    DistResult res;
    if (a.size() + b.size() > opt.cap) {
        const double h = opt.bin_size ? *opt.bin_size : detail::ladder_search(r, [&](double hh) {
            const std::size_t ca = count_cells(a, hh, opt.cap);
            return ca <= opt.cap && ca + count_cells(b, hh, opt.cap - ca) <= opt.cap;
        });
        a = bin_atoms(a, h);
        b = bin_atoms(b, h);
        res.binned = true;
        res.bin_size = h;
    }
    const auto d = dist_points(a, b, c, r);
    res.value = d.value;
    res.support = d.support;
    return res;
}

/// T_{center,r}[mu] scaled by c: atoms mapped by delta_{1/r}(. - center), weights times c.
[[nodiscard]] inline DiscreteMeasure blow_up(const DiscreteMeasure& mu, const ParaPoint& center, double r, double c) {
    require(r > 0.0 && c > 0.0, "blow_up needs r, c > 0");
    DiscreteMeasure out(mu.is_signed());
    out.reserve(mu.size());
    for (const auto& a : mu.atoms()) out.add(blow_up_map(a.p, center, r), a.w * c);
    return out;
}

/// Normalized blow-ups c_j T_{center, r_j}[mu] with c_j = 1 / mu(C_{r_j}(center)).
[[nodiscard]] inline std::vector<DiscreteMeasure> tangent_sequence(const DiscreteMeasure& mu, const ParaPoint& center,
                                                                   const std::vector<double>& radii) {
    std::vector<DiscreteMeasure> out;
    for (double r : radii) {
        const double m = mu.mass_in_ball(center, r);
        if (!(m > 0.0)) throw NumericalError("vanishing mass in C_r at r = " + std::to_string(r));
        out.push_back(blow_up(mu, center, r, 1.0 / m));
    }
    return out;
}

struct DimensionFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual = 0.0;  ///< RMS residual of log mu(C_r) about the fitted line
};

/// Least-squares slope of log mu(C_r(center)) against log r.
[[nodiscard]] inline DimensionFit pointwise_dimension(const DiscreteMeasure& mu, const ParaPoint& center,
                                                      const std::vector<double>& radii) {
    require(radii.size() >= 4, "pointwise_dimension needs at least 4 radii");
    const auto [lo, hi] = std::minmax_element(radii.begin(), radii.end());
    require(*lo > 0.0 && *hi / *lo >= 100.0 * (1 - 1e-12), "radii must span at least two decades");
    std::vector<double> lx, ly;
    for (double r : radii) {
        const double m = mu.mass_in_ball(center, r);
        if (!(m > 0.0)) throw NumericalError("nonpositive mass at r = " + std::to_string(r));
        lx.push_back(std::log(r));
        ly.push_back(std::log(m));
    }
    DimensionFit fit;
    double c00, c01, c11, sumsq;
    gsl_fit_linear(lx.data(), 1, ly.data(), 1, lx.size(), &fit.intercept, &fit.slope, &c00, &c01, &c11, &sumsq);
    fit.residual = std::sqrt(sumsq / static_cast<double>(lx.size()));
    return fit;
}

/// (average of f) * exp(-average of log f) over C_r(center), mu-weighted; >= 1 with equality iff f is constant.
[[nodiscard]] inline double vmo_ratio(const std::vector<double>& f, const DiscreteMeasure& mu, const ParaPoint& center,
                                      double r) {
    require(f.size() == mu.size(), "one f value per atom is required");
    double m = 0.0, sf = 0.0, slog = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const auto& a = mu.atoms()[i];
        if (para_dist(a.p, center) >= r) continue;
        require(f[i] > 0.0 && std::isfinite(f[i]), "vmo_ratio needs positive finite f");
        m += a.w;
        sf += a.w * f[i];
        slog += a.w * std::log(f[i]);
    }
    if (!(m > 0.0)) throw NumericalError("vmo_ratio: no mass in the cylinder");
    return std::max(1.0, (sf / m) * std::exp(-slog / m));
}

// ---------------------------------------------------------------- flat measures

/// c times the surface measure dH^{n-1} dt on an admissible plane, i.e. c * omega_{e.x} for a plane through 0.
struct FlatMeasure {
    AdmissiblePlane plane;
    double density = 1.0;

    /// Midpoint-rule atoms on the plane inside C_extent(anchor).
    [[nodiscard]] DiscreteMeasure discretize(double extent, std::size_t space_cells, std::size_t time_cells) const {
        require(density > 0.0, "flat measure density must be positive");
        const std::size_t n = plane.anchor.dim();
        const auto basis = orthonormal_complement(plane.normal);
        const double hs = 2.0 * extent / static_cast<double>(space_cells);
        const double ht = 2.0 * extent * extent / static_cast<double>(time_cells);
        DiscreteMeasure m;
        std::vector<SpatialVec> offsets;
        if (n == 1) {
            offsets.push_back(SpatialVec(1));
        } else {
            const auto s = cell_centres(-extent, extent, space_cells);
            std::vector<std::size_t> idx(n - 1, 0);
            for (;;) {
                SpatialVec v(n);
                for (std::size_t k = 0; k + 1 < n; ++k) v += basis[k] * s[idx[k]];
                if (v.norm() < extent) offsets.push_back(v);
                std::size_t k = 0;
                while (k + 1 < n && ++idx[k] == space_cells) idx[k++] = 0;
                if (k + 1 == n) break;
            }
        }
        const double cell = std::pow(hs, static_cast<double>(n - 1)) * ht * density;
        const auto ts = cell_centres(-extent * extent, extent * extent, time_cells);
        m.reserve(offsets.size() * ts.size());
        for (double tau : ts)
            for (const auto& v : offsets) m.add(ParaPoint(plane.anchor.x + v, plane.anchor.t + tau), cell);
        return m;
    }
};

// ---------------------------------------------------------------- cones

enum class ConeKind { Flat, Homogeneous, Polynomial };

/// F(k): omega_h with h homogeneous of degree k; P(d): omega_h with h of degree <= d vanishing at 0;
/// Flat is F(1).
struct ConeSpec {
    ConeKind kind = ConeKind::Flat;
    int degree = 1;
    Orientation orientation = Orientation::Adjoint;

    static ConeSpec flat() { return {}; }
    static ConeSpec homogeneous(int k, Orientation o = Orientation::Adjoint) { return {ConeKind::Homogeneous, k, o}; }
    static ConeSpec polynomial(int d, Orientation o = Orientation::Adjoint) { return {ConeKind::Polynomial, d, o}; }

    [[nodiscard]] std::vector<CaloricPolynomial> basis(std::size_t n) const {
        require(degree >= 1, "cone degree must be >= 1");
        if (kind == ConeKind::Flat) return homogeneous_basis(n, 1, orientation);
        if (kind == ConeKind::Homogeneous) return homogeneous_basis(n, degree, orientation);
        std::vector<CaloricPolynomial> out;
        for (int k = 1; k <= degree; ++k)
            for (auto& b : homogeneous_basis(n, k, orientation)) out.push_back(std::move(b));
        return out;
    }
};

[[nodiscard]] inline CaloricPolynomial combine(const std::vector<CaloricPolynomial>& basis,
                                               const std::vector<double>& coeffs) {
    require(!basis.empty() && coeffs.size() == basis.size(), "coefficient vector does not match the basis");
    Polynomial p(basis.front().dim());
    for (std::size_t i = 0; i < basis.size(); ++i) p += coeffs[i] * basis[i].poly();
    return {p, basis.front().orientation()};
}

/// Deterministic low-discrepancy directions on S^{dim-1} (Halton points pushed through the normal
/// quantile), sign-normalized so the first nonzero coordinate is positive (h and -h share omega_h).
[[nodiscard]] inline std::vector<std::vector<double>> sphere_directions(std::size_t dim, std::size_t count) {
    static constexpr int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71};
    require(dim >= 1 && dim <= std::size(primes), "sphere sample dimension out of range");
    std::vector<std::vector<double>> out;
    for (std::size_t k = 1; out.size() < count; ++k) {
        std::vector<double> v(dim);
        double norm = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            double f = 1.0, u = 0.0;
            for (std::size_t i = k; i > 0; i /= primes[d]) {
                f /= primes[d];
                u += f * static_cast<double>(i % primes[d]);
            }
            v[d] = std::sqrt(2.0) * boost::math::erf_inv(2.0 * u - 1.0);
            norm += v[d] * v[d];
        }
        norm = std::sqrt(norm);
        if (norm < 1e-12) continue;
        double sign = 0.0;
        for (double x : v)
            if (x != 0.0) { sign = x > 0 ? 1.0 : -1.0; break; }
        for (double& x : v) x *= sign / norm;
        out.push_back(std::move(v));
    }
    return out;
}

struct ConeSearchOptions {
    std::size_t directions = 512;  ///< coefficient-direction samples for F(k), k >= 2, and P(d)
    std::size_t flat_angles = 128; ///< normal samples for F(1) in n = 2
    std::size_t refine_seeds = 3;
    std::size_t coarse_cap = 160;
    std::size_t fine_cap = 400;
    std::size_t flat_space_cells = 240;  ///< plane discretization for refinement
    std::size_t flat_time_cells = 480;
    std::size_t coarse_flat_space_cells = 80;  ///< plane discretization for the sweep
    std::size_t coarse_flat_time_cells = 160;
    NodalResolution coarse_nodal{48, 96, 1};
    NodalResolution fine_nodal{96, 192, 1};
    unsigned workers = 1;
};

struct ConeDistanceResult {
    double value = 1.0;
    double F_r_mu = 0.0;
    std::vector<double> best;  ///< best normal (flat) or coefficient vector
    std::size_t evaluations = 0;
    double bin_size = 0.0;
};

namespace detail {

inline DiscreteMeasure normalized_F1(DiscreteMeasure m) {
    const double f = F_r(m, 1.0);
    if (!(f > 0.0)) return DiscreteMeasure{};
    return m.scaled(1.0 / f);
}

inline SpatialVec normal_from_angles(std::size_t n, const std::vector<double>& p) {
    if (n == 1) return SpatialVec{1.0};
    if (n == 2) return SpatialVec{std::cos(p[0]), std::sin(p[0])};
    return SpatialVec{std::sin(p[0]) * std::cos(p[1]), std::sin(p[0]) * std::sin(p[1]), std::cos(p[0])};
}

}  // namespace detail

/// d_r(mu, cone) = d_1(T_{0,r}[mu] / F_1, nu) minimized over cone elements nu with F_1(nu) = 1.
///
/// The search is a coarse sweep of the cone's parameters with aggregated
/// supports, then local refinement of the best seeds at the fine cap. The
/// result is an upper bound of the true infimum.
[[nodiscard]] inline ConeDistanceResult cone_distance(const DiscreteMeasure& mu, double r, const ConeSpec& cone,
                                                      const ConeSearchOptions& opt = {}) {
    require(!mu.empty(), "cone_distance needs a nonempty measure");
    const std::size_t n = mu.dim();
    const double fr = F_r(mu, r);
    if (!(fr > 0.0)) throw ValidationError("cone_distance needs F_r(mu) > 0");
    ConeDistanceResult res;
    res.F_r_mu = fr;
    // blow up to the unit scale and keep only C_1
    DiscreteMeasure unit;
    for (const auto& a : mu.atoms()) {
        const ParaPoint q = blow_up_map(a.p, ParaPoint::origin(n), r);
        if (para_norm(q) < 1.0) unit.add(q, a.w);
    }
    unit = detail::normalized_F1(std::move(unit));
    const auto mu_atoms = detail::restrict_to(unit, ParaPoint::origin(n), 1.0);
    const double h_coarse = choose_bin_size(mu_atoms, opt.coarse_cap / 2, 1.0);
    const double h_fine = choose_bin_size(mu_atoms, opt.fine_cap / 2, 1.0);
    res.bin_size = h_fine;
    const auto mu_coarse = mu_atoms.size() > opt.coarse_cap / 2 ? bin_atoms(mu_atoms, h_coarse) : mu_atoms;
    const auto mu_fine = mu_atoms.size() > opt.fine_cap / 2 ? bin_atoms(mu_atoms, h_fine) : mu_atoms;
    const ParaPoint origin = ParaPoint::origin(n);

    auto eval_measure = [&](const DiscreteMeasure& nu_raw, bool fine) {
        const DiscreteMeasure nu = detail::normalized_F1(nu_raw);
        if (nu.empty()) return 10.0;
        auto b = detail::restrict_to(nu, origin, 1.0);
        const double h = fine ? h_fine : h_coarse;
        const std::size_t cap = fine ? opt.fine_cap : opt.coarse_cap;
        if (b.size() > cap / 2) b = bin_atoms(b, h);
        return dist_points(fine ? mu_fine : mu_coarse, b, origin, 1.0).value;
    };

    if (cone.kind == ConeKind::Flat || (cone.kind == ConeKind::Homogeneous && cone.degree == 1)) {
        auto flat_eval = [&](const std::vector<double>& ang, bool fine) {
            const FlatMeasure fm{AdmissiblePlane(detail::normal_from_angles(n, ang), origin), 1.0};
            return eval_measure(fine ? fm.discretize(1.0, opt.flat_space_cells, opt.flat_time_cells)
                                     : fm.discretize(1.0, opt.coarse_flat_space_cells, opt.coarse_flat_time_cells),
                                fine);
        };
        std::vector<std::vector<double>> seeds;
        if (n == 1) {
            seeds.push_back({});
        } else if (n == 2) {
            for (std::size_t k = 0; k < opt.flat_angles; ++k)
                seeds.push_back({std::numbers::pi * static_cast<double>(k) / static_cast<double>(opt.flat_angles)});
        } else {
            const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
            const std::size_t m = opt.flat_angles * 4;
            for (std::size_t k = 0; k < m; ++k) {
                const double z = 1.0 - (static_cast<double>(k) + 0.5) / static_cast<double>(m);
                seeds.push_back({std::acos(z), golden * static_cast<double>(k)});
            }
        }
        std::vector<double> vals(seeds.size());
        parallel_for(seeds.size(), opt.workers, [&](std::size_t i) { vals[i] = flat_eval(seeds[i], false); });
        res.evaluations += seeds.size();
        std::vector<std::size_t> order(seeds.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return vals[a] < vals[b]; });
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < std::min(opt.refine_seeds, order.size()); ++s) {
            auto x = seeds[order[s]];
            double v;
            if (n == 2) {
                const double step = std::numbers::pi / static_cast<double>(opt.flat_angles);
                const double th = golden_section_max([&](double a) { return -flat_eval({a}, true); },
                                                     x[0] - step, x[0] + step, 16, 30);
                x = {th};
                v = flat_eval(x, true);
                res.evaluations += 31;
                const double v0 = flat_eval(seeds[order[s]], true);
                if (v0 < v) { v = v0; x = seeds[order[s]]; }
            } else if (n == 1) {
                v = flat_eval(x, true);
            } else {
                auto nm = nelder_mead([&](const std::vector<double>& p) { return flat_eval(p, true); }, x,
                                      {0.05, 0.05}, 40, 1e-3);
                res.evaluations += nm.iterations;
                x = nm.x;
                v = nm.value;
            }
            if (v < best) {
                best = v;
                const SpatialVec e = detail::normal_from_angles(n, x);
                res.best.assign(e.begin(), e.end());
            }
        }
        res.value = best;
        return res;
    }

    const auto basis = cone.basis(n);
    require(n <= 2, "polynomial cones need nodal tracing (n <= 2)");
    auto poly_eval = [&](const std::vector<double>& coeffs, bool fine) {
        double norm = 0.0;
        for (double c : coeffs) norm += c * c;
        if (norm < 1e-24) return 10.0;  // finite penalty keeps the simplex search well defined
        const CaloricPolynomial h = combine(basis, coeffs);
        const auto& nres = fine ? opt.fine_nodal : opt.coarse_nodal;
        return eval_measure(caloric_measure_poly(h, Cylinder(origin, 1.0), nres), fine);
    };
    const auto seeds = basis.size() == 1 ? std::vector<std::vector<double>>{{1.0}}
                                         : sphere_directions(basis.size(), opt.directions);
    std::vector<double> vals(seeds.size());
    parallel_for(seeds.size(), opt.workers, [&](std::size_t i) { vals[i] = poly_eval(seeds[i], false); });
    res.evaluations += seeds.size();
    std::vector<std::size_t> order(seeds.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
        return vals[a] < vals[b] || (vals[a] == vals[b] && seeds[a] < seeds[b]);
    });
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < std::min(opt.refine_seeds, order.size()); ++s) {
        std::vector<double> x = seeds[order[s]];
        double v = poly_eval(x, true);
        if (basis.size() > 1) {
            auto nm = nelder_mead([&](const std::vector<double>& p) { return poly_eval(p, true); }, x,
                                  std::vector<double>(x.size(), 0.1), 40, 1e-3);
            res.evaluations += nm.iterations;
            if (nm.value < v) { v = nm.value; x = nm.x; }
        }
        if (v < best) {
            best = v;
            double norm = 0.0;
            for (double c : x) norm += c * c;
            for (double& c : x) c /= std::sqrt(norm);
            res.best = x;
        }
    }
    res.value = best;
    return res;
}

}  // namespace caloric
