#pragma once

// Thermal capacity Cap(K, Omega) = sup { mu(K) : G mu <= 1, mu >= 0, supp mu in K }
// discretized as a linear program: atoms sample K, the potential bound is
// imposed at a staggered constraint grid, and the kernel is Gamma (free space)
// or a Green function supplied by the caller.

#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "caloric/domain.hpp"
#include "caloric/error.hpp"
#include "caloric/heatcore.hpp"
#include "caloric/linprog.hpp"
#include "caloric/parallel.hpp"
#include "caloric/pargeo.hpp"

namespace caloric {

/// kernel(c, y) = potential at c of a unit mass at y.
using CapacityKernel = std::function<double(const ParaPoint& c, const ParaPoint& y)>;

[[nodiscard]] inline CapacityKernel free_space_kernel() {
    return [](const ParaPoint& c, const ParaPoint& y) { return gamma(c - y); };
}

struct CapacityInstance {
    std::vector<ParaPoint> atoms;
    std::vector<ParaPoint> constraints;
    CapacityKernel kernel = free_space_kernel();
    std::string kernel_tag = "gamma";
};

struct CapacityResult {
    double value = 0.0;
    std::vector<double> weights;  ///< one optimizer; the LP optimum need not be unique
    double max_potential = 0.0;   ///< max over constraints of the discrete potential (<= 1 up to roundoff)
    double dual_bound = 0.0;      ///< sum y / min_j (A^T y)_j, an upper bound on the LP optimum
    std::size_t pivots = 0;
};

/// Solves max sum w  s.t.  sum_i w_i kernel(c, atom_i) <= 1 at every constraint point, w >= 0.
/// Finitely many constraints enlarge the feasible set, so the value estimates Cap from above for the atom set.
[[nodiscard]] inline CapacityResult thermal_capacity(const CapacityInstance& inst, unsigned workers = 1) {
    CapacityResult res;
    if (inst.atoms.empty()) return res;
    require(!inst.constraints.empty(), "capacity needs a nonempty constraint grid");
    require(static_cast<bool>(inst.kernel), "capacity needs a kernel");
    const std::size_t m = inst.constraints.size(), na = inst.atoms.size();
    LinearProgram lp(m, na);
    for (std::size_t j = 0; j < na; ++j) lp.c(j) = 1.0;
    std::vector<char> bad(m, 0);
    parallel_for(m, workers, [&](std::size_t i) {
        lp.b(i) = 1.0;
        for (std::size_t j = 0; j < na; ++j) {
            if (inst.constraints[i] == inst.atoms[j]) bad[i] = 1;
            const double k = inst.kernel(inst.constraints[i], inst.atoms[j]);
            if (!std::isfinite(k)) bad[i] = 1;
            lp.a(i, j) = std::max(0.0, k);
        }
    });
    for (char b : bad)
        if (b) throw ValidationError("constraint grid meets an atom or the kernel is not finite there");
    const auto sol = solve(lp);
    if (sol.status == LpStatus::Unbounded)
        throw NumericalError("capacity LP unbounded: some atom has no constraint point in its forward influence region");
    if (sol.status != LpStatus::Optimal) throw NumericalError("capacity LP hit its pivot limit");
    res.value = sol.objective;
    res.weights = sol.x;
    res.pivots = sol.pivots;
    // certificate: primal feasibility and a dual bound from the reported duals
    double ysum = 0.0, colmin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
        double pot = 0.0;
        for (std::size_t j = 0; j < na; ++j) pot += lp.a(i, j) * res.weights[j];
        res.max_potential = std::max(res.max_potential, pot);
        ysum += std::max(0.0, sol.duals[i]);
    }
    for (std::size_t j = 0; j < na; ++j) {
        double col = 0.0;
        for (std::size_t i = 0; i < m; ++i) col += lp.a(i, j) * std::max(0.0, sol.duals[i]);
        colmin = std::min(colmin, col);
    }
    res.dual_bound = colmin > 0.0 ? ysum / colmin : std::numeric_limits<double>::infinity();
    if (res.max_potential > 1.0 + 1e-9) throw NumericalError("capacity LP returned an infeasible point");
    if (res.dual_bound > res.value * (1.0 + 1e-6) + 1e-12)
        throw NumericalError("capacity LP duality gap too large (value " + std::to_string(res.value) +
                             ", dual bound " + std::to_string(res.dual_bound) + ")");
    return res;
}

/// Lattice for a closed region B(c, R) x [t_lo, t_hi]: atoms at c + hx k (k in Z^n) and t_lo + j ht,
/// constraints offset by half a cell in every coordinate, with a spatial halo and a forward-time halo.
struct CapacityGrid {
    std::size_t space_cells = 6;   ///< cells per spatial radius R
    std::size_t time_cells = 12;   ///< cells across [t_lo, t_hi]
    std::size_t space_halo = 1;    ///< constraint cells beyond the ball
    std::size_t time_halo = 2;     ///< constraint layers after t_hi
};

struct RegionLattice {
    std::vector<ParaPoint> nodes;        ///< atom candidates (closed region)
    std::vector<ParaPoint> constraints;  ///< staggered points
    double hx = 0.0, ht = 0.0;
};

namespace detail {

template <class Fn>
void for_each_lattice_offset(std::size_t n, int k, Fn&& fn) {
    std::vector<int> idx(n, -k);
    for (;;) {
        fn(idx);
        std::size_t d = 0;
        while (d < n && ++idx[d] > k) idx[d++] = -k;
        if (d == n) break;
    }
}

}  // namespace detail

[[nodiscard]] inline RegionLattice region_lattice(const SpatialVec& c, double radius, double t_lo, double t_hi,
                                                  const CapacityGrid& g) {
    require(radius > 0.0 && t_lo < t_hi, "region needs radius > 0 and t_lo < t_hi");
    require(g.space_cells >= 1 && g.time_cells >= 1, "capacity grid needs at least one cell per axis");
    const std::size_t n = c.size();
    RegionLattice out;
    out.hx = radius / static_cast<double>(g.space_cells);
    out.ht = (t_hi - t_lo) / static_cast<double>(g.time_cells);
    const int k = static_cast<int>(g.space_cells + g.space_halo) + 1;
    std::vector<SpatialVec> xs_atom, xs_con;
    detail::for_each_lattice_offset(n, k, [&](const std::vector<int>& idx) {
        SpatialVec a(n), b(n);
        for (std::size_t d = 0; d < n; ++d) {
            a[d] = c[d] + out.hx * idx[d];
            b[d] = c[d] + out.hx * (idx[d] + 0.5);
        }
        if ((a - c).norm() <= radius * (1.0 + 1e-12)) xs_atom.push_back(a);
        if ((b - c).norm() <= radius + out.hx * (static_cast<double>(g.space_halo) + 0.5 * std::sqrt(double(n))))
            xs_con.push_back(b);
    });
    for (std::size_t j = 0; j <= g.time_cells; ++j) {
        const double t = j == g.time_cells ? t_hi : t_lo + out.ht * static_cast<double>(j);
        for (const auto& x : xs_atom) out.nodes.emplace_back(x, t);
    }
    for (std::size_t j = 0; j < g.time_cells + g.time_halo; ++j) {
        const double t = t_lo + out.ht * (static_cast<double>(j) + 0.5);
        for (const auto& x : xs_con) out.constraints.emplace_back(x, t);
    }
    return out;
}

[[nodiscard]] inline RegionLattice region_lattice(const TruncatedCylinder& tc, const CapacityGrid& g) {
    return region_lattice(tc.center.x, tc.r, tc.t_lo(), tc.t_hi(), g);
}
[[nodiscard]] inline RegionLattice region_lattice(const Cylinder& cyl, const CapacityGrid& g) {
    return region_lattice(cyl.center.x, cyl.r, cyl.t_lo(), cyl.t_hi(), g);
}

/// Free-space instance for the whole closed region, optionally keeping only atoms that satisfy `keep`.
[[nodiscard]] inline CapacityInstance region_instance(const RegionLattice& lat,
                                                      const std::function<bool(const ParaPoint&)>& keep = {}) {
    CapacityInstance inst;
    for (const auto& p : lat.nodes)
        if (!keep || keep(p)) inst.atoms.push_back(p);
    inst.constraints = lat.constraints;
    return inst;
}

enum class CdcDirection { Backward, Forward };

struct CdcRow {
    double r = 0.0;
    double numerator = 0.0;    ///< capacity of the region cap Omega^c
    double denominator = 0.0;  ///< capacity of the region
    double ratio = 0.0;
    std::size_t atoms_numerator = 0, atoms_denominator = 0, constraints = 0;
    std::string kernel_tag = "gamma";
    bool empty_complement = false;
};

/// Capacity-density ratios Cap(R cap Omega^c) / Cap(R) with R = closure of R^-_a(xi; r) (backward),
/// or its time reflection about xi (forward). Numerator and denominator share one grid.
[[nodiscard]] inline std::vector<CdcRow> cdc_ratios(const DomainSpec& omega, const ParaPoint& xi,
                                                    const std::vector<double>& radii, double a,
                                                    CdcDirection dir = CdcDirection::Backward,
                                                    const CapacityGrid& grid = {}, unsigned workers = 1) {
    require(a > 0.0 && a < 1.0, "truncation parameter a must lie in (0,1)");
    require(xi.dim() == omega.dim(), "boundary point dimension mismatch");
    require(omega.on_boundary(xi), "xi is not on the boundary of the domain");
    std::vector<CdcRow> rows;
    for (double r : radii) {
        require(r > 0.0, "radii must be positive");
        const double lo = dir == CdcDirection::Backward ? xi.t - r * r : xi.t + (a * r) * (a * r);
        const double hi = dir == CdcDirection::Backward ? xi.t - (a * r) * (a * r) : xi.t + r * r;
        const auto lat = region_lattice(xi.x, r, lo, hi, grid);
        CdcRow row;
        row.r = r;
        const auto den = region_instance(lat);
        const auto num = region_instance(lat, [&](const ParaPoint& p) { return !omega.contains(p); });
        row.atoms_denominator = den.atoms.size();
        row.atoms_numerator = num.atoms.size();
        row.constraints = lat.constraints.size();
        row.denominator = thermal_capacity(den, workers).value;
        if (num.atoms.empty()) {
            row.empty_complement = true;
        } else {
            row.numerator = num.atoms.size() == den.atoms.size() ? row.denominator : thermal_capacity(num, workers).value;
            row.ratio = row.numerator / row.denominator;
        }
        rows.push_back(row);
    }
    return rows;
}

inline void write_cdc_csv(std::ostream& os, const std::vector<CdcRow>& rows) {
    os << "r,numerator,denominator,ratio,atoms_numerator,atoms_denominator,constraints,kernel,empty_complement\n";
    os.precision(17);
    for (const auto& r : rows)
        os << r.r << ',' << r.numerator << ',' << r.denominator << ',' << r.ratio << ',' << r.atoms_numerator << ','
           << r.atoms_denominator << ',' << r.constraints << ',' << r.kernel_tag << ',' << (r.empty_complement ? 1 : 0)
           << '\n';
}

/// Content proxy H^{n+s}_{p,infinity}(K) / min(diam_p K, r)^s from the capacity lower bound; 0 for a point.
[[nodiscard]] inline double heat_ball_capacity_lower(const PointCloudSet& k, double r, double s,
                                                     double delta = std::numeric_limits<double>::infinity()) {
    require(!k.empty(), "capacity lower bound needs a nonempty set");
    require(s > 0.0 && s <= 2.0, "s must lie in (0, 2]");
    require(r > 0.0, "r must be positive");
    const std::size_t n = k.dim();
    double diam = 0.0;
    for (std::size_t i = 0; i < k.samples.size(); ++i)
        for (std::size_t j = i + 1; j < k.samples.size(); ++j) diam = std::max(diam, para_dist(k.samples[i], k.samples[j]));
    if (diam == 0.0) return 0.0;
    const double content = hausdorff_content(k, static_cast<double>(n) + s, std::min(delta, 2.0 * diam));
    return content / std::pow(std::min(diam, r), s);
}

}  // namespace caloric
