#pragma once

// Monte Carlo caloric measure as the exit law of the backward space-time
// process s -> (X_s, t_pole - s), with X a Brownian motion of generator Delta
// (per-coordinate variance 2 ds). Green functions, Bourgain and boundary
// Hoelder diagnostics, and the two-phase blow-up experiment are built on it.
//
// Convention: spatial increments have variance 2 dt per coordinate, matching
// H = Delta - d/dt. Halving this to dt would silently simulate Delta / 2.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <gsl/gsl_fit.h>

#include "caloric/capacity.hpp"
#include "caloric/domain.hpp"
#include "caloric/error.hpp"
#include "caloric/heatcore.hpp"
#include "caloric/linprog.hpp"
#include "caloric/measure.hpp"
#include "caloric/parallel.hpp"
#include "caloric/tangent.hpp"
#include "caloric/theta.hpp"

namespace caloric {

struct WalkConfig {
    std::size_t N_walks = 10000;
    double dt = 1e-4;  ///< smallest time step; the spatial step has variance 2 dt per coordinate
    std::uint64_t seed = 1;
    double max_time_depth = 1e3;  ///< walks still inside after this much backward time are truncated
    double boundary_tol = 1e-6;   ///< parabolic length of the bracket left by exit bisection
    bool adaptive = true;         ///< lengthen steps where the domain certifies depth
    double kappa = 0.2;           ///< adaptive steps keep the spatial std below kappa * depth
    bool bridge = true;           ///< test the Brownian bridge between steps against flat or spherical walls
    unsigned workers = 1;

    void validate() const {
        require(N_walks > 0, "N_walks must be positive");
        require(dt > 0.0 && std::isfinite(dt), "dt must be positive");
        require(max_time_depth > 0.0, "max_time_depth must be positive");
        require(boundary_tol >= 0.0, "boundary_tol must be >= 0");
        require(kappa > 0.0 && kappa < 1.0, "kappa must lie in (0, 1)");
    }
};

/// Importance splitting around a boundary point. A walk entering C_{levels[k]}(center) for the first time
/// is replaced by `split` independent copies of weight w / split, which keeps the estimate unbiased and
/// populates small cylinders. The time-step floor shrinks parabolically near the center, so every
/// scale sees the same relative discretization.
struct SplitFocus {
    ParaPoint center;
    std::vector<double> levels;  ///< strictly decreasing radii
    unsigned split = 0;          ///< 0 means 2^{n+1}

    void validate() const {
        require(!levels.empty() && levels.back() > 0.0, "split levels must be positive");
        for (std::size_t k = 1; k < levels.size(); ++k) require(levels[k] < levels[k - 1], "split levels must decrease");
    }
};

struct CaloricSample {
    DiscreteMeasure measure;  ///< exit atoms on the boundary
    double exit_mass = 0.0;
    double truncated_mass = 0.0;
    std::size_t exits = 0;  ///< exit atoms (counts copies when splitting)
    std::size_t truncated = 0;
    std::size_t steps = 0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Substream for (seed, stream, index): independent of how walks are scheduled.
inline std::mt19937_64 walk_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    const std::uint64_t a = splitmix64(seed ^ splitmix64(stream));
    const std::uint64_t b = splitmix64(a ^ index);
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    return std::mt19937_64(seq);
}

/// Shrinks the bracket [in, out] of a straight space-time segment to length tol; returns the outside end.
inline ParaPoint bisect_exit(const DomainSpec& d, ParaPoint in, ParaPoint out, double tol) {
    for (int it = 0; it < 200 && para_dist(in, out) > tol; ++it) {
        ParaPoint mid((in.x + out.x) * 0.5, 0.5 * (in.t + out.t));
        (d.contains(mid) ? in : out) = std::move(mid);
    }
    return out;
}

struct WalkTotals {
    std::vector<Atom> atoms;
    double exit_mass = 0.0, truncated_mass = 0.0;
    std::size_t truncated = 0, steps = 0;
};

/// One root walk and all of its split copies, on a single substream.
inline void run_root(const DomainSpec& d, const ParaPoint& start, const WalkConfig& cfg, double depth_cap,
                     const SplitFocus* focus, std::uint64_t stream, std::uint64_t index, WalkTotals& out) {
    auto rng = walk_rng(cfg.seed, stream, index);
    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> unif;
    const std::size_t n = start.dim();
    const unsigned split = focus ? (focus->split ? focus->split : 1u << (n + 1)) : 1u;
    struct State {
        ParaPoint p;
        double s;
        double w;
        std::size_t level;
    };
    std::vector<State> stack{{start, 0.0, 1.0 / static_cast<double>(cfg.N_walks), 0}};
    const double top = focus ? focus->levels.front() : 1.0;
    const double bottom = focus ? focus->levels.back() : 1.0;
    while (!stack.empty()) {
        State st = std::move(stack.back());
        stack.pop_back();
        for (;;) {
            if (focus) {
                const double r = para_dist(st.p, focus->center);
                if (st.level < focus->levels.size() && r < focus->levels[st.level]) {
                    ++st.level;
                    while (st.level < focus->levels.size() && r < focus->levels[st.level]) ++st.level;
                    st.w /= split;
                    for (unsigned c = 1; c < split; ++c) stack.push_back(st);
                }
            }
            if (st.s >= depth_cap) {
                out.truncated_mass += st.w;
                ++out.truncated;
                break;
            }
            double floor = cfg.dt;
            if (focus) {
                const double rel = std::clamp(para_dist(st.p, focus->center) / top, bottom / top, 1.0);
                floor *= rel * rel;
            }
            double h = floor;
            if (cfg.adaptive) {
                const double depth = d.depth_lower_bound(st.p);
                h = std::max(h, 0.5 * (cfg.kappa * depth) * (cfg.kappa * depth));
            }
            h = std::min(h, depth_cap - st.s);
            const double sd = std::sqrt(2.0 * h);
            ParaPoint q(st.p.x, st.p.t - h);
            for (std::size_t i = 0; i < n; ++i) q.x[i] += sd * gauss(rng);
            ++out.steps;
            if (!d.contains(q)) {
                out.atoms.push_back({bisect_exit(d, st.p, q, cfg.boundary_tol), st.w});
                out.exit_mass += st.w;
                break;
            }
            if (cfg.bridge) {
                // a bridge with endpoints at wall distances d0, d1 crosses a flat wall with
                // probability exp(-d0 d1 / h) when the variance is 2 h per coordinate
                const auto w0 = d.nearest_wall(st.p), w1 = d.nearest_wall(q);
                if (w0 && w1) {
                    const double prob = std::exp(-w0->distance * w1->distance / h);
                    if (prob > 1e-14 && unif(rng) < prob) {
                        const double f = w0->distance / (w0->distance + w1->distance);
                        const ParaPoint mid(st.p.x + (q.x - st.p.x) * f, st.p.t - f * h);
                        const auto wm = d.nearest_wall(mid);
                        out.atoms.push_back({ParaPoint(wm ? wm->foot : mid.x, mid.t), st.w});
                        out.exit_mass += st.w;
                        break;
                    }
                }
            }
            st.p = std::move(q);
            st.s += h;
        }
    }
}

inline CaloricSample run_walks(const DomainSpec& d, const ParaPoint& start, const WalkConfig& cfg, double depth_cap,
                               const SplitFocus* focus, std::uint64_t stream) {
    cfg.validate();
    if (focus) focus->validate();
    require(start.dim() == d.dim(), "pole dimension does not match the domain");
    require(d.contains(start), "pole must lie strictly inside the domain");
    constexpr std::size_t block = 256;
    const std::size_t blocks = (cfg.N_walks + block - 1) / block;
    std::vector<WalkTotals> parts(blocks);
    parallel_for(blocks, cfg.workers, [&](std::size_t b) {
        const std::size_t hi = std::min(cfg.N_walks, (b + 1) * block);
        for (std::size_t i = b * block; i < hi; ++i) run_root(d, start, cfg, depth_cap, focus, stream, i, parts[b]);
    });
    CaloricSample res;
    std::size_t total = 0;
    for (const auto& p : parts) total += p.atoms.size();
    res.measure.reserve(total);
    for (const auto& p : parts) {
        for (const auto& a : p.atoms) res.measure.add(a.p, a.w);
        res.exit_mass += p.exit_mass;
        res.truncated_mass += p.truncated_mass;
        res.truncated += p.truncated;
        res.steps += p.steps;
    }
    res.exits = total;
    return res;
}

}  // namespace detail

/// Exit law of walks started at the pole; total mass is the exit fraction.
[[nodiscard]] inline CaloricSample simulate_caloric_measure(const DomainSpec& domain, const ParaPoint& pole,
                                                            const WalkConfig& cfg,
                                                            const std::optional<SplitFocus>& focus = std::nullopt,
                                                            std::uint64_t stream = 0) {
    auto res = detail::run_walks(domain, pole, cfg, cfg.max_time_depth, focus ? &*focus : nullptr, stream);
    if (res.exits == 0) throw NumericalError("no walk left the domain within max_time_depth");
    return res;
}

struct GreenEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

/// G(x, p) for every query x and pole p, one simulation per query:
/// G(x, p) = Gamma(x - p) - sum over exits y of w_y Gamma(y - p).
/// Walks stop at the earliest pole time, below which every Gamma term vanishes.
[[nodiscard]] inline std::vector<std::vector<GreenEstimate>> green_matrix(const DomainSpec& domain,
                                                                          const std::vector<ParaPoint>& queries,
                                                                          const std::vector<ParaPoint>& poles,
                                                                          const WalkConfig& cfg) {
    cfg.validate();
    require(!poles.empty(), "green_matrix needs at least one pole");
    double t_low = std::numeric_limits<double>::infinity();
    for (const auto& p : poles) t_low = std::min(t_low, p.t);
    std::vector<std::vector<GreenEstimate>> out(queries.size(), std::vector<GreenEstimate>(poles.size()));
    WalkConfig inner = cfg;
    inner.workers = 1;
    parallel_for(queries.size(), cfg.workers, [&](std::size_t qi) {
        const ParaPoint& x = queries[qi];
        require(domain.contains(x), "Green query points must lie inside the domain");
        if (!(x.t > t_low)) return;  // every Gamma term vanishes
        const double cap = std::min(cfg.max_time_depth, x.t - t_low);
        const auto s = detail::run_walks(domain, x, inner, cap, nullptr, 1 + qi);
        const double nw = static_cast<double>(cfg.N_walks);
        for (std::size_t pi = 0; pi < poles.size(); ++pi) {
            const ParaPoint& p = poles[pi];
            if (!(x.t > p.t)) continue;
            double m1 = 0.0, m2 = 0.0;
            for (const auto& a : s.measure.atoms()) {
                const double g = gamma(a.p - p);
                m1 += a.w * g;
                m2 += a.w * g * g;
            }
            const double var = std::max(0.0, m2 - m1 * m1) * nw / std::max(1.0, nw - 1.0);
            out[qi][pi] = {gamma(x - p) - m1, std::sqrt(var / nw)};
        }
    });
    return out;
}

[[nodiscard]] inline std::vector<GreenEstimate> estimate_green(const DomainSpec& domain, const ParaPoint& pole,
                                                               const std::vector<ParaPoint>& queries,
                                                               const WalkConfig& cfg) {
    require(domain.contains(pole), "Green pole must lie inside the domain");
    const auto m = green_matrix(domain, queries, {pole}, cfg);
    std::vector<GreenEstimate> out;
    out.reserve(m.size());
    for (const auto& row : m) out.push_back(row.front());
    return out;
}

// ---------------------------------------------------------------- relative capacity

struct RelativeCapacity {
    double value = 0.0;
    double lower = 0.0;  ///< LP value with every kernel entry raised by `spread` standard errors
    double upper = 0.0;  ///< and lowered by the same amount (clipped at 0)
    double max_std_error = 0.0;
};

/// Cap(K, Omega) with Monte Carlo Green kernels G_Omega(c, atom). The LP value is nonincreasing in every
/// kernel entry, so shifting the kernel by +-spread standard errors brackets the value.
[[nodiscard]] inline RelativeCapacity relative_capacity(const DomainSpec& domain, const std::vector<ParaPoint>& atoms,
                                                        const std::vector<ParaPoint>& all_constraints,
                                                        const WalkConfig& cfg, double spread = 2.0) {
    RelativeCapacity res;
    if (atoms.empty()) return res;
    for (const auto& a : atoms) require(domain.contains(a), "capacity atoms must lie inside the domain");
    // G vanishes outside the domain, so those constraints never bind
    std::vector<ParaPoint> constraints;
    for (const auto& c : all_constraints)
        if (domain.contains(c)) constraints.push_back(c);
    const auto g = green_matrix(domain, constraints, atoms, cfg);
    auto key = [](const ParaPoint& p) {
        std::vector<double> k(p.x.begin(), p.x.end());
        k.push_back(p.t);
        return k;
    };
    std::map<std::vector<double>, std::size_t> cidx, aidx;
    for (std::size_t i = 0; i < constraints.size(); ++i) cidx.emplace(key(constraints[i]), i);
    for (std::size_t j = 0; j < atoms.size(); ++j) aidx.emplace(key(atoms[j]), j);
    auto solve_shift = [&](double k) {
        CapacityInstance inst;
        inst.atoms = atoms;
        inst.constraints = constraints;
        inst.kernel_tag = "green-mc";
        inst.kernel = [&, k](const ParaPoint& c, const ParaPoint& y) {
            const auto& e = g[cidx.at(key(c))][aidx.at(key(y))];
            return std::max(0.0, e.value + k * e.std_error);
        };
        return thermal_capacity(inst).value;
    };
    for (const auto& row : g)
        for (const auto& e : row) res.max_std_error = std::max(res.max_std_error, e.std_error);
    res.value = solve_shift(0.0);
    res.lower = solve_shift(spread);
    res.upper = solve_shift(-spread);
    return res;
}

// ---------------------------------------------------------------- Bourgain

struct BourgainRecord {
    double min_hit_prob = 0.0;
    double cap_ratio = 0.0;  ///< Cap(R^-_a(xi; r) cap Omega^c) / r^n
    double quotient = 0.0;   ///< min_hit_prob / cap_ratio (0 when vacuous)
    bool vacuous = false;    ///< the complement sample is empty
    std::size_t points = 0;
};

/// min over poles x in R^+_a(xi; r) cap Omega of omega^x(C_{Mr}(xi) cap {|t - t0| < r^2}), against the
/// capacity density of the complement in the backward rectangle.
[[nodiscard]] inline BourgainRecord bourgain_check(const DomainSpec& domain, const ParaPoint& xi, double r, double a,
                                                   double M, const WalkConfig& cfg, std::size_t grid_points = 3,
                                                   const CapacityGrid& cap_grid = {}) {
    require(r > 0.0 && M > 0.0 && a > 0.0 && a < 1.0 && grid_points >= 1, "invalid Bourgain parameters");
    require(domain.on_boundary(xi), "xi must lie on the boundary");
    const std::size_t n = xi.dim();
    const TruncatedCylinder hat(xi, r, a, TruncatedVariant::ForwardHat);
    std::vector<ParaPoint> poles;
    const auto xs = cell_centres(-r, r, grid_points);
    const auto ts = cell_centres(hat.t_lo(), hat.t_hi(), grid_points);
    std::vector<std::size_t> idx(n, 0);
    for (;;) {
        SpatialVec x = xi.x;
        for (std::size_t i = 0; i < n; ++i) x[i] += xs[idx[i]];
        for (double t : ts) {
            const ParaPoint p(x, t);
            if (hat.contains(p) && domain.contains(p)) poles.push_back(p);
        }
        std::size_t k = 0;
        while (k < n && ++idx[k] == grid_points) idx[k++] = 0;
        if (k == n) break;
    }
    if (poles.empty()) throw ValidationError("no interior pole in R^+_a(xi; r)");
    BourgainRecord rec;
    rec.points = poles.size();
    std::vector<double> hit(poles.size());
    WalkConfig inner = cfg;
    inner.workers = 1;
    parallel_for(poles.size(), cfg.workers, [&](std::size_t i) {
        const double cap = std::min(cfg.max_time_depth, poles[i].t - (xi.t - r * r));
        const auto s = detail::run_walks(domain, poles[i], inner, cap, nullptr, 1 + i);
        double m = 0.0;
        for (const auto& at : s.measure.atoms())
            if ((at.p.x - xi.x).norm() < M * r && std::abs(at.p.t - xi.t) < r * r) m += at.w;
        hit[i] = m;
    });
    rec.min_hit_prob = *std::min_element(hit.begin(), hit.end());
    const auto rows = cdc_ratios(domain, xi, {r}, a, CdcDirection::Backward, cap_grid, cfg.workers);
    rec.vacuous = rows.front().empty_complement || !(rows.front().numerator > 0.0);
    rec.cap_ratio = rec.vacuous ? 0.0 : rows.front().numerator / std::pow(r, static_cast<double>(n));
    rec.quotient = rec.vacuous ? 0.0 : rec.min_hit_prob / rec.cap_ratio;
    return rec;
}

// ---------------------------------------------------------------- boundary Hoelder

struct HolderFit {
    double alpha = 0.0;
    double residual = 0.0;
    SpatialVec direction;
    std::vector<double> distances;
    std::vector<GreenEstimate> values;
};

/// Fits log G(xi + d v, pole) against log d along an inward coordinate ray v.
[[nodiscard]] inline HolderFit boundary_holder_fit(const DomainSpec& domain, const ParaPoint& xi,
                                                   const ParaPoint& pole, const WalkConfig& cfg,
                                                   const std::vector<double>& radii) {
    require(radii.size() >= 3, "boundary_holder_fit needs at least 3 radii");
    for (double d : radii) require(d > cfg.boundary_tol, "radii must exceed boundary_tol");
    require(pole.t < xi.t, "the pole must precede xi in time");
    const std::size_t n = xi.dim();
    HolderFit fit;
    bool found = false;
    for (std::size_t k = 0; k < n && !found; ++k)
        for (double sgn : {1.0, -1.0}) {
            SpatialVec v(n);
            v[k] = sgn;
            bool ok = true;
            for (double d : radii) ok = ok && domain.contains(ParaPoint(xi.x + v * d, xi.t));
            if (ok) {
                fit.direction = v;
                found = true;
                break;
            }
        }
    if (!found) throw ValidationError("no coordinate ray from xi stays inside the domain");
    std::vector<ParaPoint> queries;
    for (double d : radii) queries.emplace_back(xi.x + fit.direction * d, xi.t);
    const auto g = green_matrix(domain, queries, {pole}, cfg);
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < radii.size(); ++i) {
        fit.distances.push_back(radii[i]);
        fit.values.push_back(g[i][0]);
        if (g[i][0].value > 0.0) {
            lx.push_back(std::log(radii[i]));
            ly.push_back(std::log(g[i][0].value));
        }
    }
    if (lx.size() < 3) throw NumericalError("fewer than 3 positive Green samples along the ray");
    double c0, c00, c01, c11, sumsq;
    gsl_fit_linear(lx.data(), 1, ly.data(), 1, lx.size(), &c0, &fit.alpha, &c00, &c01, &c11, &sumsq);
    fit.residual = std::sqrt(sumsq / static_cast<double>(lx.size()));
    return fit;
}

// ---------------------------------------------------------------- two-phase blow-ups

struct ExperimentRecord {
    double r = 0.0;
    double mass_plus = 0.0;   ///< omega+(C_r(xi))
    double mass_minus = 0.0;  ///< omega-(C_r(xi))
    double mass_ratio = 0.0;  ///< omega-(C_r) / omega+(C_r)
    double F1 = 0.0;          ///< F_1 of the normalized blow-up of omega+
    double cone_distance = 0.0;
    double theta = 0.0;            ///< flatness of the joint support after blow-up
    double dimension_slope = 0.0;  ///< slope of log omega+(C_s) over s in [r/100, r]
    std::size_t atoms_plus = 0, atoms_minus = 0;
};

struct TwoPhaseOptions {
    unsigned split = 0;          ///< copies per level, 0 means 2^{n+1}
    double level_ratio = 0.5;    ///< consecutive split radii
    std::size_t slope_radii = 9;
    ConeSearchOptions cone;
    ThetaOptions theta;
};

struct TwoPhaseResult {
    std::vector<ExperimentRecord> records;
    CaloricSample plus, minus;
};

[[nodiscard]] inline TwoPhaseResult two_phase_blowup_experiment(const DomainSpec& plus, const DomainSpec& minus,
                                                                const ParaPoint& pole_plus,
                                                                const ParaPoint& pole_minus, const ParaPoint& xi,
                                                                const std::vector<double>& radii,
                                                                const WalkConfig& cfg,
                                                                const TwoPhaseOptions& opt = {}) {
    require(!radii.empty(), "two_phase_blowup_experiment needs radii");
    require(plus.on_boundary(xi) && minus.on_boundary(xi), "xi must lie on the common boundary");
    require(plus.contains(pole_plus) && minus.contains(pole_minus), "each pole must lie in its own domain");
    require(!minus.contains(pole_plus) && !plus.contains(pole_minus), "the two domains must be disjoint");
    const auto [rmin, rmax] = std::minmax_element(radii.begin(), radii.end());
    const double slope_lo = *rmin / 100.0, top = 2.0 * *rmax;
    // splitting from 2 r_max keeps about N omega(C_{2 r_max}) atoms in every smaller cylinder
    SplitFocus focus{xi, {}, opt.split};
    for (double rho = top; rho > 0.5 * slope_lo; rho *= opt.level_ratio) focus.levels.push_back(rho);

    TwoPhaseResult res;
    WalkConfig c = cfg;
    // exits earlier than xi.t - top^2 never enter the cylinders used below
    const double reach = top * top;
    c.max_time_depth = std::min(cfg.max_time_depth, pole_plus.t - xi.t + reach);
    res.plus = simulate_caloric_measure(plus, pole_plus, c, focus, 1);
    c.max_time_depth = std::min(cfg.max_time_depth, pole_minus.t - xi.t + reach);
    res.minus = simulate_caloric_measure(minus, pole_minus, c, focus, 2);

    const std::size_t n = xi.dim();
    for (double r : radii) {
        ExperimentRecord rec;
        rec.r = r;
        rec.mass_plus = res.plus.measure.mass_in_ball(xi, r);
        rec.mass_minus = res.minus.measure.mass_in_ball(xi, r);
        if (!(rec.mass_plus > 0.0) || !(rec.mass_minus > 0.0))
            throw NumericalError("empty cylinder mass at r = " + std::to_string(r));
        rec.mass_ratio = rec.mass_minus / rec.mass_plus;
        DiscreteMeasure blown;
        PointCloudSet support;
        for (const auto& a : res.plus.measure.atoms())
            if (para_dist(a.p, xi) < r) {
                blown.add(blow_up_map(a.p, xi, r), a.w / rec.mass_plus);
                support.samples.push_back(blow_up_map(a.p, xi, r));
            }
        rec.atoms_plus = blown.size();
        for (const auto& a : res.minus.measure.atoms())
            if (para_dist(a.p, xi) < r) {
                support.samples.push_back(blow_up_map(a.p, xi, r));
                ++rec.atoms_minus;
            }
        rec.F1 = F_r(blown, 1.0);
        rec.cone_distance = cone_distance(blown, 1.0, ConeSpec::flat(), opt.cone).value;
        rec.theta = theta_flatness(support, ParaPoint::origin(n), 1.0, ConeSpec::flat(), opt.theta).value;
        std::vector<double> rs;
        for (std::size_t k = 0; k < opt.slope_radii; ++k)
            rs.push_back(r / 100.0 * std::pow(100.0, static_cast<double>(k) / static_cast<double>(opt.slope_radii - 1)));
        rec.dimension_slope = pointwise_dimension(res.plus.measure, xi, rs).slope;
        res.records.push_back(rec);
    }
    return res;
}

}  // namespace caloric
