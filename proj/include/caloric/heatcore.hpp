#pragma once

// Fundamental solution of a*Laplacian - d/dt, the heat-ball mean-value
// integral, and Cauchy-estimate ratios for caloric polynomials.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

#include "caloric/error.hpp"
#include "caloric/para_point.hpp"
#include "caloric/pargeo.hpp"
#include "caloric/polynomial.hpp"
#include "caloric/quadrature.hpp"

namespace caloric {

struct KernelParams {
    double a = 1.0;
    std::size_t n = 1;

    KernelParams() = default;
    KernelParams(double a_, std::size_t n_) : a(a_), n(n_) {
        require(a > 0.0 && std::isfinite(a), "diffusivity must be positive");
        require(n >= 1 && n <= kMaxSpatialDim, "spatial dimension must be in [1, 4]");
    }
};

/// Gamma_a(x,t) = (4 pi a t)^{-n/2} exp(-|x|^2 / (4 a t)) for t > 0, else 0.
[[nodiscard]] inline double gamma(const ParaPoint& q, const KernelParams& k) noexcept {
    if (!(q.t > 0.0)) return 0.0;
    const double at = k.a * q.t;
    const double x2 = q.x.dot(q.x);
    return std::pow(4.0 * std::numbers::pi * at, -0.5 * static_cast<double>(k.n)) * std::exp(-x2 / (4.0 * at));
}

[[nodiscard]] inline double gamma(const ParaPoint& q) noexcept { return gamma(q, KernelParams(1.0, q.dim())); }

/// Smallest C with Gamma_a(p) <= C pi^{-n/2} ||p||^{-n}.
///
/// By the scaling Gamma_a(delta_r p) = r^{-n} Gamma_a(p) it suffices to maximize
/// over ||p|| = 1: either t = 1, |x| <= 1 (maximum at x = 0), or |x| = 1 and
/// t = tau in (0, 1].
[[nodiscard]] inline double heat_constant(const KernelParams& k) {
    const double n = static_cast<double>(k.n);
    auto side = [&](double tau) {
        return std::pow(4.0 * std::numbers::pi * k.a * tau, -n / 2.0) * std::exp(-1.0 / (4.0 * k.a * tau));
    };
    // the side profile is unimodal in tau with peak at 1/(2 n a); search on a log scale
    const double ls = golden_section_max([&](double s) { return side(std::exp(s)); }, -40.0, 0.0, 52);
    const double best = std::max({side(std::exp(ls)), side(1.0),
                                  std::pow(4.0 * std::numbers::pi * k.a, -n / 2.0)});
    return std::pow(std::numbers::pi, n / 2.0) * best;
}

struct MeanValueOptions {
    int depth_nodes = 128;
    int radial_nodes = 64;
    int angular_nodes = 32;
    double v_max = 6.0;  ///< depth u = rho * exp(-v^2), v in (0, v_max)
};

/// Unit directions and weights summing to |S^{n-1}| for the angular factor.
[[nodiscard]] inline std::vector<std::pair<SpatialVec, double>> sphere_rule(std::size_t n, int m) {
    std::vector<std::pair<SpatialVec, double>> out;
    if (n == 1) {
        out.push_back({SpatialVec{1.0}, 1.0});
        out.push_back({SpatialVec{-1.0}, 1.0});
    } else if (n == 2) {
        for (int k = 0; k < m; ++k) {
            const double th = 2.0 * std::numbers::pi * (k + 0.5) / m;
            out.push_back({SpatialVec{std::cos(th), std::sin(th)}, 2.0 * std::numbers::pi / m});
        }
    } else if (n == 3) {
        const auto gl = gauss_legendre(m, -1.0, 1.0);
        const int mphi = 2 * m;
        for (int i = 0; i < m; ++i) {
            const double z = gl.nodes[i], s = std::sqrt(1.0 - z * z);
            for (int k = 0; k < mphi; ++k) {
                const double ph = 2.0 * std::numbers::pi * (k + 0.5) / mphi;
                out.push_back({SpatialVec{s * std::cos(ph), s * std::sin(ph), z},
                               gl.weights[i] * 2.0 * std::numbers::pi / mphi});
            }
        }
    } else {
        throw ValidationError("mean-value quadrature supports n in {1, 2, 3}");
    }
    return out;
}

/// (4 pi rho)^{-n/2} * integral over the heat ball of u(y,s) |x-y|^2 / (4 (t-s)^2).
///
/// For caloric u on E (adjoint caloric on E*) this equals u(center).
[[nodiscard]] inline double mean_value_quadrature(const std::function<double(const ParaPoint&)>& u,
                                                  const HeatBall& hb, const MeanValueOptions& opt = {}) {
    const std::size_t n = hb.center.dim();
    const double nd = static_cast<double>(n);
    const auto vq = gauss_legendre(opt.depth_nodes, 0.0, opt.v_max);
    const auto sq = gauss_legendre(opt.radial_nodes, 0.0, 1.0);
    const auto ang = sphere_rule(n, opt.angular_nodes);
    const double sign = hb.adjoint ? 1.0 : -1.0;
    double total = 0.0;
    for (std::size_t iv = 0; iv < vq.nodes.size(); ++iv) {
        const double v = vq.nodes[iv];
        const double depth = hb.rho * std::exp(-v * v);
        const double jac_u = 2.0 * v * depth;  // |du/dv|
        const double big_r = std::sqrt(2.0 * nd * depth * v * v);
        if (big_r <= 0.0) continue;
        const double s_time = hb.center.t + sign * depth;
        double shell = 0.0;
        for (std::size_t is = 0; is < sq.nodes.size(); ++is) {
            const double rr = big_r * sq.nodes[is];
            // r^{n-1} dr * r^2 / (4 u^2)
            const double radial = std::pow(rr, nd + 1.0) / (4.0 * depth * depth) * big_r * sq.weights[is];
            double ring = 0.0;
            for (const auto& [dir, w] : ang) {
                const ParaPoint q(hb.center.x + dir * rr, s_time);
                const double val = u(q);
                if (!std::isfinite(val)) throw ValidationError("mean-value integrand is not finite");
                ring += w * val;
            }
            shell += radial * ring;
        }
        total += vq.weights[iv] * jac_u * shell;
    }
    return total * std::pow(4.0 * std::numbers::pi * hb.rho, -nd / 2.0);
}

/// Ratios |D^{alpha,ell} h(0)| (R - r R)^m / sup_{C_R} |h| with m = |alpha| + 2 ell.
[[nodiscard]] inline std::vector<double> cauchy_ratio(const CaloricPolynomial& h, std::span<const int> alpha, int ell,
                                                      std::span<const double> radii, double r_fraction,
                                                      int samples_per_axis = 41) {
    require(!radii.empty(), "cauchy_ratio needs a nonempty radius grid");
    require(r_fraction > 0.0 && r_fraction < 1.0, "r_fraction must lie in (0,1)");
    require(!h.poly().is_zero(), "cauchy_ratio needs a nonzero polynomial");
    const std::size_t n = h.dim();
    require(alpha.size() == n, "multi-index length must equal the spatial dimension");
    Monomial mono;
    int m = 2 * ell;
    for (std::size_t i = 0; i < n; ++i) {
        mono.alpha[i] = static_cast<std::uint8_t>(alpha[i]);
        m += alpha[i];
    }
    mono.ell = static_cast<std::uint8_t>(ell);
    const double deriv = std::abs(derivative_at_origin(h.poly(), mono));

    // closed-cylinder sample: polar shells including the lateral surface, both time caps
    const int k = std::max(samples_per_axis, 3);
    std::vector<SpatialVec> unit;
    if (n == 1) {
        unit = {SpatialVec{1.0}, SpatialVec{-1.0}};
    } else {
        if (n <= 3)
            for (const auto& [d, w] : sphere_rule(n, n == 2 ? 4 * k : k)) unit.push_back(d);
        for (std::size_t i = 0; i < n; ++i)
            for (double s : {1.0, -1.0}) {
                SpatialVec e(n);
                e[i] = s;
                unit.push_back(e);
            }
    }
    std::vector<double> out;
    for (double big_r : radii) {
        require(big_r > 0.0, "radii must be positive");
        double sup = 0.0;
        for (int it = 0; it < k; ++it) {
            const double t = -big_r * big_r + 2.0 * big_r * big_r * it / (k - 1);
            sup = std::max(sup, std::abs(h(ParaPoint(SpatialVec(n), t))));
            for (int ir = 1; ir < k; ++ir) {
                const double rad = big_r * ir / (k - 1);
                for (const auto& d : unit) sup = std::max(sup, std::abs(h(ParaPoint(d * rad, t))));
            }
        }
        if (sup <= 0.0) throw NumericalError("h vanishes on the sampled cylinder");
        out.push_back(deriv * std::pow(big_r - r_fraction * big_r, m) / sup);
    }
    return out;
}

}  // namespace caloric
