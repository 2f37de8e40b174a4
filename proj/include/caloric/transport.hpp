#pragma once

// Kantorovich-Rubinshtein norm of signed atomic measures on a bounded open
// set, and the boundary-annihilating 1-Wasserstein distance Wb1, in which
// mass may be created or destroyed on the boundary at cost dist(., boundary).
// Costs are Euclidean; the parabolic metric plays no role here.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <queue>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "caloric/error.hpp"
#include "caloric/linprog.hpp"
#include "caloric/para_point.hpp"

namespace caloric {

class SpatialDomain {
public:
    struct Box {
        SpatialVec lo, hi;
    };
    struct Polygon {  ///< convex, counter-clockwise
        std::vector<std::array<double, 2>> vertices;
    };
    struct Interval {
        double lo = 0.0, hi = 1.0;
    };
    using Variant = std::variant<Box, Polygon, Interval>;

    static SpatialDomain box(SpatialVec lo, SpatialVec hi) {
        require(lo.size() == hi.size() && lo.size() >= 1, "box corners must have the same dimension");
        for (std::size_t i = 0; i < lo.size(); ++i) require(lo[i] < hi[i], "box needs lo < hi in every coordinate");
        return SpatialDomain(Box{std::move(lo), std::move(hi)}, lo.size());
    }
    static SpatialDomain unit_square() { return box(SpatialVec{0.0, 0.0}, SpatialVec{1.0, 1.0}); }
    static SpatialDomain interval(double lo, double hi) {
        require(lo < hi, "interval needs lo < hi");
        return SpatialDomain(Interval{lo, hi}, 1);
    }
    static SpatialDomain polygon(std::vector<std::array<double, 2>> v) {
        require(v.size() >= 3, "polygon needs at least 3 vertices");
        double area = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const auto& a = v[i];
            const auto& b = v[(i + 1) % v.size()];
            area += a[0] * b[1] - a[1] * b[0];
        }
        if (area < 0.0) std::reverse(v.begin(), v.end());
        for (std::size_t i = 0; i < v.size(); ++i) {
            const auto& a = v[i];
            const auto& b = v[(i + 1) % v.size()];
            const auto& c = v[(i + 2) % v.size()];
            const double cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
            require(cross > 0.0, "polygon must be strictly convex");
        }
        return SpatialDomain(Polygon{std::move(v)}, 2);
    }

    [[nodiscard]] std::size_t dim() const noexcept { return n_; }
    [[nodiscard]] const Variant& variant() const noexcept { return v_; }

    /// Signed distance to the boundary, positive inside; exact for points inside.
    [[nodiscard]] double boundary_distance(const SpatialVec& x) const {
        require(x.size() == n_, "point dimension does not match the domain");
        return std::visit(
            [&](const auto& d) -> double {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, Box>) {
                    double m = std::numeric_limits<double>::infinity();
                    for (std::size_t i = 0; i < n_; ++i) m = std::min({m, x[i] - d.lo[i], d.hi[i] - x[i]});
                    return m;
                } else if constexpr (std::is_same_v<T, Interval>) {
                    return std::min(x[0] - d.lo, d.hi - x[0]);
                } else {
                    double m = std::numeric_limits<double>::infinity();
                    const auto& v = d.vertices;
                    for (std::size_t i = 0; i < v.size(); ++i) {
                        const auto& a = v[i];
                        const auto& b = v[(i + 1) % v.size()];
                        const double ex = b[0] - a[0], ey = b[1] - a[1];
                        const double len = std::hypot(ex, ey);
                        m = std::min(m, (ex * (x[1] - a[1]) - ey * (x[0] - a[0])) / len);
                    }
                    return m;
                }
            },
            v_);
    }
    [[nodiscard]] bool contains(const SpatialVec& x) const { return boundary_distance(x) > 0.0; }

private:
    SpatialDomain(Variant v, std::size_t n) : v_(std::move(v)), n_(n) {}
    Variant v_;
    std::size_t n_;
};

struct SpatialAtom {
    SpatialVec x;
    double w = 0.0;
};

struct TransportInstance {
    std::vector<SpatialAtom> mu;  ///< signed weights
    SpatialDomain domain = SpatialDomain::unit_square();

    void validate() const {
        for (const auto& a : mu) {
            require(a.x.size() == domain.dim(), "atom dimension does not match the domain");
            require(std::isfinite(a.w), "atom weights must be finite");
            require(domain.contains(a.x), "atoms must lie strictly inside the domain");
        }
    }
};

struct KrResult {
    double value = 0.0;
    std::vector<double> potential;  ///< optimal phi at the atoms
};

/// max sum phi_i mu_i over |phi_i - phi_j| <= |x_i - x_j|, |phi_i| <= dist(x_i, boundary). Every such
/// vector extends to a 1-Lipschitz function on the closure vanishing on the boundary, so this is the norm.
[[nodiscard]] inline KrResult kr_norm_dual(const TransportInstance& inst) {
    inst.validate();
    const std::size_t m = inst.mu.size();
    KrResult res;
    if (m == 0) return res;
    std::vector<double> cap(m);
    for (std::size_t i = 0; i < m; ++i) cap[i] = inst.domain.boundary_distance(inst.mu[i].x);
    // g = phi + cap >= 0 puts the program in the form A g <= b, b >= 0
    LinearProgram lp(m + m * (m - 1), m);
    std::size_t row = 0;
    for (std::size_t i = 0; i < m; ++i) {
        lp.a(row, i) = 1.0;
        lp.b(row++) = 2.0 * cap[i];
    }
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            if (i == j) continue;
            lp.a(row, i) = 1.0;
            lp.a(row, j) = -1.0;
            lp.b(row++) = std::max(0.0, (inst.mu[i].x - inst.mu[j].x).norm() + cap[i] - cap[j]);
        }
    double shift = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        lp.c(i) = inst.mu[i].w;
        shift += inst.mu[i].w * cap[i];
    }
    const auto sol = solve(lp);
    if (sol.status != LpStatus::Optimal) throw NumericalError("KR dual LP did not reach optimality");
    res.potential.resize(m);
    for (std::size_t i = 0; i < m; ++i) res.potential[i] = sol.x[i] - cap[i];
    for (std::size_t i = 0; i < m; ++i) res.value += inst.mu[i].w * res.potential[i];
    return res;
}

inline constexpr std::size_t kBoundary = std::numeric_limits<std::size_t>::max();

struct PlanEntry {
    std::size_t from;  ///< mu atom or kBoundary
    std::size_t to;    ///< nu atom or kBoundary
    double flow;
    double cost;  ///< per unit
};

struct Wb1Result {
    double value = 0.0;
    std::vector<PlanEntry> plan;
    std::vector<double> phi, psi;  ///< optimal Kantorovich pair from the flow potentials
};

namespace detail {

/// Successive shortest paths with Dijkstra on reduced costs. Costs are integers (the Euclidean costs
/// rationalized at 1e-9), so potentials and optimality are exact; capacities are real.
class MinCostFlow {
public:
    explicit MinCostFlow(std::size_t nodes) : adj_(nodes) {}
    std::size_t add_arc(std::size_t u, std::size_t v, double cap, std::int64_t cost) {
        adj_[u].push_back(arcs_.size());
        arcs_.push_back({v, cap, cost});
        adj_[v].push_back(arcs_.size());
        arcs_.push_back({u, 0.0, -cost});
        return arcs_.size() - 2;
    }
    double run(std::size_t s, std::size_t t, double target, double eps) {
        const std::size_t n = adj_.size();
        pot_.assign(n, 0);
        double sent = 0.0;
        constexpr auto inf = std::numeric_limits<std::int64_t>::max();
        while (sent < target - eps) {
            std::vector<std::int64_t> dist(n, inf);
            std::vector<std::size_t> via(n, std::numeric_limits<std::size_t>::max());
            using Item = std::pair<std::int64_t, std::size_t>;
            std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
            dist[s] = 0;
            pq.push({0, s});
            while (!pq.empty()) {
                const auto [d, u] = pq.top();
                pq.pop();
                if (d != dist[u]) continue;
                for (std::size_t id : adj_[u]) {
                    const auto& a = arcs_[id];
                    if (a.cap <= eps) continue;
                    const std::int64_t nd = d + a.cost + pot_[u] - pot_[a.to];
                    if (nd < dist[a.to]) {
                        dist[a.to] = nd;
                        via[a.to] = id;
                        pq.push({nd, a.to});
                    }
                }
            }
            if (dist[t] == inf) break;
            for (std::size_t v = 0; v < n; ++v)
                if (dist[v] != inf) pot_[v] += dist[v];
            double push = target - sent;
            for (std::size_t v = t; v != s; v = arcs_[via[v] ^ 1].to) push = std::min(push, arcs_[via[v]].cap);
            for (std::size_t v = t; v != s; v = arcs_[via[v] ^ 1].to) {
                arcs_[via[v]].cap -= push;
                arcs_[via[v] ^ 1].cap += push;
            }
            sent += push;
        }
        return sent;
    }
    /// Potentials with nonnegative reduced cost on every residual arc (Bellman-Ford from a virtual root).
    [[nodiscard]] std::vector<std::int64_t> residual_potentials(double eps) const {
        const std::size_t n = adj_.size();
        std::vector<std::int64_t> p(n, 0);
        for (std::size_t round = 0; round < n; ++round) {
            bool changed = false;
            for (std::size_t u = 0; u < n; ++u)
                for (std::size_t id : adj_[u]) {
                    const auto& a = arcs_[id];
                    if (a.cap > eps && p[u] + a.cost < p[a.to]) {
                        p[a.to] = p[u] + a.cost;
                        changed = true;
                    }
                }
            if (!changed) return p;
        }
        throw NumericalError("negative residual cycle after min-cost flow");
    }
    [[nodiscard]] double flow(std::size_t arc) const { return arcs_[arc ^ 1].cap; }

private:
    struct Arc {
        std::size_t to;
        double cap;
        std::int64_t cost;
    };
    std::vector<std::vector<std::size_t>> adj_;
    std::vector<Arc> arcs_;
    std::vector<std::int64_t> pot_;
};

inline constexpr double kCostScale = 1e9;

inline std::int64_t scaled_cost(double c) { return static_cast<std::int64_t>(std::llround(c * kCostScale)); }

}  // namespace detail

/// inf over plans in Pi_b(mu, nu) of the transport cost, with a boundary node that absorbs or supplies
/// any mass at cost dist(., boundary). Weights must be nonnegative.
[[nodiscard]] inline Wb1Result wb1_primal(const std::vector<SpatialAtom>& mu, const std::vector<SpatialAtom>& nu,
                                          const SpatialDomain& domain) {
    for (const auto* side : {&mu, &nu})
        for (const auto& a : *side) {
            require(a.w >= 0.0 && std::isfinite(a.w), "Wb1 needs nonnegative finite weights");
            require(a.x.size() == domain.dim() && domain.contains(a.x), "atoms must lie strictly inside the domain");
        }
    const std::size_t m = mu.size(), k = nu.size();
    // nodes: source, sink, boundary, mu atoms, nu atoms
    const std::size_t S = 0, T = 1, B = 2, M0 = 3, N0 = 3 + m;
    detail::MinCostFlow g(3 + m + k);
    double mass_mu = 0.0, mass_nu = 0.0, scale = 0.0;
    for (const auto& a : mu) mass_mu += a.w;
    for (const auto& a : nu) mass_nu += a.w;
    scale = std::max(1.0, mass_mu + mass_nu);
    const double eps = 1e-15 * scale;
    std::vector<double> dmu(m), dnu(k);
    for (std::size_t i = 0; i < m; ++i) {
        dmu[i] = domain.boundary_distance(mu[i].x);
        g.add_arc(S, M0 + i, mu[i].w, 0);
    }
    for (std::size_t j = 0; j < k; ++j) {
        dnu[j] = domain.boundary_distance(nu[j].x);
        g.add_arc(N0 + j, T, nu[j].w, 0);
    }
    g.add_arc(S, B, mass_nu, 0);
    g.add_arc(B, T, mass_mu, 0);
    const double big = mass_mu + mass_nu;
    struct Link {
        std::size_t arc, from, to;
        double cost;
    };
    std::vector<Link> links;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            const double c = (mu[i].x - nu[j].x).norm();
            links.push_back({g.add_arc(M0 + i, N0 + j, big, detail::scaled_cost(c)), i, j, c});
        }
        links.push_back({g.add_arc(M0 + i, B, big, detail::scaled_cost(dmu[i])), i, kBoundary, dmu[i]});
    }
    for (std::size_t j = 0; j < k; ++j)
        links.push_back({g.add_arc(B, N0 + j, big, detail::scaled_cost(dnu[j])), kBoundary, j, dnu[j]});
    const double sent = g.run(S, T, mass_mu + mass_nu, eps);
    if (sent < mass_mu + mass_nu - 1e-12 * scale) throw NumericalError("Wb1 flow could not route all mass");

    Wb1Result res;
    for (const auto& l : links) {
        const double f = g.flow(l.arc);
        if (f > eps) {
            res.plan.push_back({l.from, l.to, f, l.cost});
            res.value += f * l.cost;
        }
    }
    // phi_i = p_B - p(mu_i), psi_j = p(nu_j) - p_B satisfy every pair and cap constraint
    const auto p = g.residual_potentials(eps);
    res.phi.resize(m);
    res.psi.resize(k);
    for (std::size_t i = 0; i < m; ++i) res.phi[i] = static_cast<double>(p[B] - p[M0 + i]) / detail::kCostScale;
    for (std::size_t j = 0; j < k; ++j) res.psi[j] = static_cast<double>(p[N0 + j] - p[B]) / detail::kCostScale;
    return res;
}

/// Wb1(mu+, mu-) for a signed instance; equals its KR norm.
[[nodiscard]] inline Wb1Result wb1_signed(const TransportInstance& inst) {
    inst.validate();
    std::vector<SpatialAtom> pos, neg;
    for (const auto& a : inst.mu) {
        if (a.w > 0.0) pos.push_back(a);
        else if (a.w < 0.0) neg.push_back({a.x, -a.w});
    }
    return wb1_primal(pos, neg, inst.domain);
}

struct PairCheck {
    bool feasible = true;
    double gap = 0.0;          ///< primal value minus the pair's dual value
    double dual_value = 0.0;
    double max_violation = 0.0;
    std::optional<std::pair<std::size_t, std::size_t>> violated;  ///< (i, j); kBoundary marks a cap
};

/// Checks phi(x_i) + psi(y_j) <= |x_i - y_j| and the boundary caps phi <= dist, psi <= dist.
[[nodiscard]] inline PairCheck kantorovich_pair_check(const std::vector<SpatialAtom>& mu,
                                                      const std::vector<SpatialAtom>& nu, const SpatialDomain& domain,
                                                      const std::vector<double>& phi, const std::vector<double>& psi,
                                                      double tol = 1e-9) {
    require(phi.size() == mu.size() && psi.size() == nu.size(), "one potential value per atom is required");
    PairCheck out;
    auto note = [&](double excess, std::size_t i, std::size_t j) {
        if (excess > out.max_violation) {
            out.max_violation = excess;
            if (excess > tol) {
                out.feasible = false;
                out.violated = std::pair{i, j};
            }
        }
    };
    for (std::size_t i = 0; i < mu.size(); ++i) {
        note(phi[i] - domain.boundary_distance(mu[i].x), i, kBoundary);
        for (std::size_t j = 0; j < nu.size(); ++j) note(phi[i] + psi[j] - (mu[i].x - nu[j].x).norm(), i, j);
    }
    for (std::size_t j = 0; j < nu.size(); ++j) note(psi[j] - domain.boundary_distance(nu[j].x), kBoundary, j);
    for (std::size_t i = 0; i < mu.size(); ++i) out.dual_value += phi[i] * mu[i].w;
    for (std::size_t j = 0; j < nu.size(); ++j) out.dual_value += psi[j] * nu[j].w;
    out.gap = wb1_primal(mu, nu, domain).value - out.dual_value;
    return out;
}

// ---- instance JSON {"domain":{...},"atoms":[{"x":[...],"w":...}]}

inline nlohmann::json to_json(const SpatialDomain& d) {
    return std::visit(
        [](const auto& v) -> nlohmann::json {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, SpatialDomain::Box>)
                return {{"type", "box"},
                        {"lo", std::vector<double>(v.lo.begin(), v.lo.end())},
                        {"hi", std::vector<double>(v.hi.begin(), v.hi.end())}};
            else if constexpr (std::is_same_v<T, SpatialDomain::Interval>)
                return {{"type", "interval"}, {"lo", v.lo}, {"hi", v.hi}};
            else
                return {{"type", "polygon"}, {"vertices", v.vertices}};
        },
        d.variant());
}

inline SpatialDomain spatial_domain_from_json(const nlohmann::json& j) {
    const std::string type = j.at("type").get<std::string>();
    auto vec = [](const nlohmann::json& a) { return SpatialVec(std::span<const double>(a.get<std::vector<double>>())); };
    if (type == "box") return SpatialDomain::box(vec(j.at("lo")), vec(j.at("hi")));
    if (type == "interval") return SpatialDomain::interval(j.at("lo").get<double>(), j.at("hi").get<double>());
    if (type == "polygon") return SpatialDomain::polygon(j.at("vertices").get<std::vector<std::array<double, 2>>>());
    throw ValidationError("unknown domain type '" + type + "'");
}

inline nlohmann::json to_json(const TransportInstance& inst) {
    nlohmann::json atoms = nlohmann::json::array();
    for (const auto& a : inst.mu) atoms.push_back({{"x", std::vector<double>(a.x.begin(), a.x.end())}, {"w", a.w}});
    return {{"domain", to_json(inst.domain)}, {"atoms", atoms}};
}

inline TransportInstance transport_instance_from_json(const nlohmann::json& j) {
    try {
        TransportInstance inst{{}, spatial_domain_from_json(j.at("domain"))};
        for (const auto& a : j.at("atoms")) {
            const auto x = a.at("x").get<std::vector<double>>();
            inst.mu.push_back({SpatialVec(std::span<const double>(x)), a.at("w").get<double>()});
        }
        inst.validate();
        return inst;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed transport instance: ") + e.what());
    }
}

/// Plan CSV: i,j,flow,cost with "boundary" for the boundary node.
inline void write_plan_csv(std::ostream& os, const std::vector<PlanEntry>& plan) {
    os << "i,j,flow,cost\n";
    os.precision(17);
    auto id = [](std::size_t v) { return v == kBoundary ? std::string("boundary") : std::to_string(v); };
    for (const auto& e : plan) os << id(e.from) << ',' << id(e.to) << ',' << e.flow << ',' << e.cost << '\n';
}

}  // namespace caloric
