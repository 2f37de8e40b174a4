#pragma once

// Time-varying domains Omega in R^{n+1} given by preset constructors. All
// variants are immutable; membership is total and pure, so a domain can be
// shared across worker threads.

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <variant>

#include "caloric/error.hpp"
#include "caloric/para_point.hpp"
#include "caloric/polynomial.hpp"

namespace caloric {

class DomainSpec;
using DomainPtr = std::shared_ptr<const DomainSpec>;

/// psi(x', t) for graph domains {side * (x_n - psi(x', t)) > 0}.
using GraphFunction = std::function<double(const SpatialVec& xprime, double t)>;

class DomainSpec {
public:
    struct HalfSpace {
        SpatialVec e;  ///< unit normal
        double offset = 0.0;
    };
    struct Slab {  ///< lo < x . e < hi
        SpatialVec e;
        double lo = 0.0, hi = 1.0;
    };
    struct TimeSlab {  ///< lo < t < hi
        double lo = -std::numeric_limits<double>::infinity();
        double hi = std::numeric_limits<double>::infinity();
    };
    struct Graph {
        GraphFunction psi;
        double lip = 1.0;   ///< declared L in |psi(x',t) - psi(y',s)| <= L max(|x'-y'|, |t-s|^ell)
        double ell = 0.5;
        int side = 1;
        std::string label;
    };
    struct SignSet {
        CaloricPolynomial h;
        int sign = 1;
    };
    struct Complement {
        DomainPtr of;
    };
    struct Point {  ///< closed parabolic ball of radius tol around p (a point when tol = 0)
        ParaPoint p;
        double tol = 0.0;
    };
    struct Box {  ///< open B(c, r) x (t_lo, t_hi)
        SpatialVec c;
        double r = 1.0;
        double t_lo = -1.0, t_hi = 0.0;
    };
    using Variant = std::variant<HalfSpace, Slab, TimeSlab, Graph, SignSet, Complement, Point, Box>;

    DomainSpec(std::size_t n, Variant v, double t_min = -std::numeric_limits<double>::infinity())
        : n_(n), v_(std::move(v)), t_min_(t_min) {
        require(n >= 1 && n <= kMaxSpatialDim, "spatial dimension must be in [1, 4]");
    }

    static DomainPtr half_space(SpatialVec e, double offset = 0.0) {
        const double len = e.norm();
        require(len > 0.0, "half-space normal must be nonzero");
        e *= 1.0 / len;
        const std::size_t n = e.size();
        return std::make_shared<DomainSpec>(n, HalfSpace{std::move(e), offset});
    }
    static DomainPtr slab(SpatialVec e, double lo, double hi) {
        const double len = e.norm();
        require(len > 0.0 && lo < hi, "slab needs a nonzero normal and lo < hi");
        e *= 1.0 / len;
        const std::size_t n = e.size();
        return std::make_shared<DomainSpec>(n, Slab{std::move(e), lo, hi});
    }
    static DomainPtr time_slab(std::size_t n, double lo, double hi) {
        require(lo < hi, "time slab needs lo < hi");
        return std::make_shared<DomainSpec>(n, TimeSlab{lo, hi});
    }
    /// Graph domain; the declared Lip(1, ell) seminorm is spot-checked on `checks` random pairs in [-1, 1]^{n}.
    static DomainPtr graph(std::size_t n, GraphFunction psi, double lip, double ell, int side, std::string label = "psi",
                           std::size_t checks = 512, std::uint64_t seed = 7) {
        require(n >= 2, "graph domains need n >= 2");
        require(psi && lip >= 0.0 && ell > 0.0 && (side == 1 || side == -1), "invalid graph domain parameters");
        const double seen = lipschitz_spot_check(n, psi, ell, checks, seed);
        if (seen > lip * (1.0 + 1e-9) + 1e-12)
            throw ValidationError("graph function exceeds its declared Lipschitz seminorm (observed " +
                                  std::to_string(seen) + ")");
        return std::make_shared<DomainSpec>(n, Graph{std::move(psi), lip, ell, side, std::move(label)});
    }
    static DomainPtr sign_set(CaloricPolynomial h, int sign = 1) {
        require(sign == 1 || sign == -1, "sign must be +1 or -1");
        const std::size_t n = h.dim();
        return std::make_shared<DomainSpec>(n, SignSet{std::move(h), sign});
    }
    static DomainPtr complement(DomainPtr of) {
        require(of != nullptr, "complement of a null domain");
        const std::size_t n = of->dim();
        return std::make_shared<DomainSpec>(n, Complement{std::move(of)});
    }
    static DomainPtr point(ParaPoint p, double tol = 0.0) {
        const std::size_t n = p.dim();
        return std::make_shared<DomainSpec>(n, Point{std::move(p), tol});
    }
    static DomainPtr box(SpatialVec c, double r, double t_lo, double t_hi) {
        require(r > 0.0 && t_lo < t_hi, "box needs r > 0 and t_lo < t_hi");
        const std::size_t n = c.size();
        return std::make_shared<DomainSpec>(n, Box{std::move(c), r, t_lo, t_hi});
    }
    /// Same shape, truncated below at t_min (walks reaching t_min exit through the initial-time boundary).
    [[nodiscard]] DomainPtr with_t_min(double t_min) const { return std::make_shared<DomainSpec>(n_, v_, t_min); }

    [[nodiscard]] std::size_t dim() const noexcept { return n_; }
    [[nodiscard]] double t_min() const noexcept { return t_min_; }
    [[nodiscard]] const Variant& variant() const noexcept { return v_; }

    [[nodiscard]] bool contains(const ParaPoint& q) const {
        if (!(q.t > t_min_)) return false;
        return std::visit([&](const auto& d) { return inside(d, q); }, v_);
    }

    /// A lower bound on the parabolic distance from q in Omega to the complement; 0 when unknown.
    [[nodiscard]] double depth_lower_bound(const ParaPoint& q) const {
        if (!contains(q)) return 0.0;
        const double dt = std::isfinite(t_min_) ? std::sqrt(q.t - t_min_) : std::numeric_limits<double>::infinity();
        const double d = std::visit(
            [&](const auto& v) -> double {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, HalfSpace>) return q.x.dot(v.e) - v.offset;
                else if constexpr (std::is_same_v<T, Slab>) return std::min(q.x.dot(v.e) - v.lo, v.hi - q.x.dot(v.e));
                else if constexpr (std::is_same_v<T, TimeSlab>) return std::sqrt(std::min(q.t - v.lo, v.hi - q.t));
                else if constexpr (std::is_same_v<T, Box>)
                    return std::min(v.r - (q.x - v.c).norm(), std::sqrt(std::min(q.t - v.t_lo, v.t_hi - q.t)));
                else if constexpr (std::is_same_v<T, Graph>) {
                    // |psi| moves by at most L rho within parabolic distance rho <= 1 when ell >= 1/2
                    if (v.ell < 0.5) return 0.0;
                    const std::size_t n = q.dim();
                    SpatialVec xp(n - 1);
                    for (std::size_t i = 0; i + 1 < n; ++i) xp[i] = q.x[i];
                    return std::min(1.0, std::abs(q.x[n - 1] - v.psi(xp, q.t)) / (1.0 + v.lip));
                } else if constexpr (std::is_same_v<T, Complement>) {
                    if (std::isfinite(v.of->t_min_)) return 0.0;
                    const auto& of = v.of->v_;
                    if (const auto* p = std::get_if<Point>(&of)) return std::max(0.0, para_dist(q, p->p) - p->tol);
                    if (const auto* h = std::get_if<HalfSpace>(&of)) return h->offset - q.x.dot(h->e);
                    if (const auto* s = std::get_if<Slab>(&of)) return std::max(s->lo - q.x.dot(s->e), q.x.dot(s->e) - s->hi);
                    return 0.0;
                } else return 0.0;
            },
            v_);
        return std::max(0.0, std::min(d, dt));
    }

    struct Wall {
        double distance;
        SpatialVec foot;  ///< nearest point of the spatial boundary in the time slice of q
    };
    /// Exact spatial distance from q (inside) to the lateral boundary, for flat and spherical walls only.
    [[nodiscard]] std::optional<Wall> nearest_wall(const ParaPoint& q) const {
        auto plane = [&](const SpatialVec& e, double level) -> Wall {
            const double s = q.x.dot(e) - level;
            return {std::abs(s), q.x - e * s};
        };
        return std::visit(
            [&](const auto& v) -> std::optional<Wall> {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, HalfSpace>) return plane(v.e, v.offset);
                else if constexpr (std::is_same_v<T, Slab>) {
                    const double s = q.x.dot(v.e);
                    return plane(v.e, s - v.lo < v.hi - s ? v.lo : v.hi);
                } else if constexpr (std::is_same_v<T, Box>) {
                    const SpatialVec d = q.x - v.c;
                    const double len = d.norm();
                    if (len == 0.0) return std::nullopt;
                    return Wall{v.r - len, v.c + d * (v.r / len)};
                } else if constexpr (std::is_same_v<T, Complement>) {
                    if (std::isfinite(v.of->t_min_)) return std::nullopt;
                    if (const auto* h = std::get_if<HalfSpace>(&v.of->v_)) return plane(h->e, h->offset);
                    if (const auto* sl = std::get_if<Slab>(&v.of->v_)) {
                        const double s = q.x.dot(sl->e);
                        return plane(sl->e, s < sl->lo ? sl->lo : sl->hi);
                    }
                    return std::nullopt;
                } else return std::nullopt;
            },
            v_);
    }

    /// Whether p is on the boundary: p is in the closure of both Omega and its complement, probed at radius eps.
    [[nodiscard]] bool on_boundary(const ParaPoint& p, double eps = 1e-7) const {
        bool in = contains(p), out = !in;
        for (std::size_t k = 0; k <= n_ && !(in && out); ++k)
            for (double s : {-1.0, 1.0}) {
                ParaPoint q = p;
                if (k < n_) q.x[k] += s * eps;
                else q.t += s * eps * eps;
                (contains(q) ? in : out) = true;
            }
        return in && out;
    }

    [[nodiscard]] std::string describe() const {
        std::ostringstream os;
        std::visit(
            [&](const auto& v) {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, HalfSpace>) os << "half-space(e=" << vec(v.e) << ",offset=" << v.offset << ")";
                else if constexpr (std::is_same_v<T, Slab>) os << "slab(e=" << vec(v.e) << "," << v.lo << "," << v.hi << ")";
                else if constexpr (std::is_same_v<T, TimeSlab>) os << "time-slab(" << v.lo << "," << v.hi << ")";
                else if constexpr (std::is_same_v<T, Graph>)
                    os << "graph(" << v.label << ",L=" << v.lip << ",ell=" << v.ell << ",side=" << v.side << ")";
                else if constexpr (std::is_same_v<T, SignSet>) os << "sign-set(sign=" << v.sign << ")";
                else if constexpr (std::is_same_v<T, Complement>) os << "complement(" << v.of->describe() << ")";
                else if constexpr (std::is_same_v<T, Point>) os << "point(" << v.p << ",tol=" << v.tol << ")";
                else os << "box(c=" << vec(v.c) << ",r=" << v.r << ",t=(" << v.t_lo << "," << v.t_hi << "))";
            },
            v_);
        if (std::isfinite(t_min_)) os << "&t>" << t_min_;
        return os.str();
    }

    /// Largest |psi(x',t) - psi(y',s)| / max(|x'-y'|, |t-s|^ell) over random pairs in [-1, 1]^n.
    static double lipschitz_spot_check(std::size_t n, const GraphFunction& psi, double ell, std::size_t checks,
                                       std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        double worst = 0.0;
        for (std::size_t k = 0; k < checks; ++k) {
            SpatialVec x(n - 1), y(n - 1);
            for (std::size_t i = 0; i + 1 < n; ++i) {
                x[i] = u(rng);
                y[i] = u(rng);
            }
            const double t = u(rng), s = u(rng);
            const double den = std::max((x - y).norm(), std::pow(std::abs(t - s), ell));
            if (den > 0.0) worst = std::max(worst, std::abs(psi(x, t) - psi(y, s)) / den);
        }
        return worst;
    }

private:
    static std::string vec(const SpatialVec& v) {
        std::ostringstream os;
        os << "(";
        for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
        os << ")";
        return os.str();
    }
    static bool inside(const HalfSpace& d, const ParaPoint& q) { return q.x.dot(d.e) > d.offset; }
    static bool inside(const Slab& d, const ParaPoint& q) {
        const double s = q.x.dot(d.e);
        return s > d.lo && s < d.hi;
    }
    static bool inside(const TimeSlab& d, const ParaPoint& q) { return q.t > d.lo && q.t < d.hi; }
    static bool inside(const Graph& d, const ParaPoint& q) {
        const std::size_t n = q.dim();
        SpatialVec xp(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) xp[i] = q.x[i];
        return d.side * (q.x[n - 1] - d.psi(xp, q.t)) > 0.0;
    }
    static bool inside(const SignSet& d, const ParaPoint& q) { return d.sign * d.h(q) > 0.0; }
    static bool inside(const Complement& d, const ParaPoint& q) { return !d.of->contains(q); }
    static bool inside(const Point& d, const ParaPoint& q) { return para_dist(q, d.p) <= d.tol; }
    static bool inside(const Box& d, const ParaPoint& q) {
        return (q.x - d.c).norm() < d.r && q.t > d.t_lo && q.t < d.t_hi;
    }

    std::size_t n_;
    Variant v_;
    double t_min_;
};

}  // namespace caloric
