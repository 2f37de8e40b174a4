#pragma once

// Uncapacitated transport between a set of sources and sinks with one extra
// "boundary" node that can absorb or emit any amount of mass.
//
// Solved as a min-cost flow by successive shortest paths with node
// potentials. Costs are rounded to integers at 1e-9 resolution so the
// Dijkstra potentials stay exactly consistent; masses stay real. The final
// potentials give the dual pair (phi at sources, psi at sinks) with
// phi_i + psi_j <= c_ij, phi_i <= c(i, boundary), psi_j <= c(boundary, j).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "caloric/error.hpp"

namespace caloric {

struct BoundaryTransportProblem {
    std::vector<double> supply;         ///< source masses, >= 0
    std::vector<double> demand;         ///< sink masses, >= 0
    std::vector<double> cost;           ///< row-major supply.size() x demand.size()
    std::vector<double> source_exit;    ///< cost of sending source i to the boundary
    std::vector<double> sink_entry;     ///< cost of feeding sink j from the boundary
};

inline constexpr std::size_t kBoundaryIndex = std::numeric_limits<std::size_t>::max();

struct FlowArc {
    std::size_t from;  ///< source index or kBoundaryIndex
    std::size_t to;    ///< sink index or kBoundaryIndex
    double amount;
    double unit_cost;
};

struct BoundaryTransportSolution {
    double value = 0.0;
    std::vector<FlowArc> plan;
    std::vector<double> phi;  ///< dual potential at each source
    std::vector<double> psi;  ///< dual potential at each sink
    [[nodiscard]] double dual_value(const BoundaryTransportProblem& p) const {
        double s = 0.0;
        for (std::size_t i = 0; i < phi.size(); ++i) s += phi[i] * p.supply[i];
        for (std::size_t j = 0; j < psi.size(); ++j) s += psi[j] * p.demand[j];
        return s;
    }
};

inline BoundaryTransportSolution solve_boundary_transport(const BoundaryTransportProblem& prob) {
    using Cost = std::int64_t;
    constexpr double kScale = 1e9;
    constexpr Cost kInf = std::numeric_limits<Cost>::max() / 4;

    const std::size_t np = prob.supply.size(), nq = prob.demand.size();
    require(prob.cost.size() == np * nq, "cost matrix shape mismatch");
    require(prob.source_exit.size() == np && prob.sink_entry.size() == nq, "boundary cost shape mismatch");
    for (double s : prob.supply) require(s >= 0.0 && std::isfinite(s), "negative or non-finite supply");
    for (double d : prob.demand) require(d >= 0.0 && std::isfinite(d), "negative or non-finite demand");

    auto icost = [](double c) {
        require(c >= 0.0 && std::isfinite(c), "transport costs must be finite and >= 0");
        return static_cast<Cost>(std::llround(c * kScale));
    };
    std::vector<Cost> c(np * nq), ca(np), cb(nq);
    for (std::size_t k = 0; k < c.size(); ++k) c[k] = icost(prob.cost[k]);
    for (std::size_t i = 0; i < np; ++i) ca[i] = icost(prob.source_exit[i]);
    for (std::size_t j = 0; j < nq; ++j) cb[j] = icost(prob.sink_entry[j]);

    // nodes: [0, np) sources, [np, np+nq) sinks, np+nq boundary
    const std::size_t nb = np + nq, nv = nb + 1;
    std::vector<double> excess(nv, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < np; ++i) { excess[i] = prob.supply[i]; total += prob.supply[i]; }
    for (std::size_t j = 0; j < nq; ++j) { excess[np + j] = -prob.demand[j]; total += prob.demand[j]; }
    excess[nb] = -std::accumulate(excess.begin(), excess.end() - 1, 0.0);
    const double eps = 1e-14 * std::max(1.0, total);

    std::vector<double> f(np * nq, 0.0), fa(np, 0.0), fb(nq, 0.0);
    std::vector<Cost> pot(nv, 0), dist(nv);
    std::vector<std::size_t> pred(nv);
    std::vector<char> done(nv);
    constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

    for (std::size_t guard = 0;; ++guard) {
        std::size_t s = kNone;
        for (std::size_t v = 0; v < nv; ++v)
            if (excess[v] > eps) { s = v; break; }
        if (s == kNone) break;
        if (guard > 50 * nv * nv + 1000) throw NumericalError("boundary transport did not converge");

        std::fill(dist.begin(), dist.end(), kInf);
        std::fill(done.begin(), done.end(), 0);
        std::fill(pred.begin(), pred.end(), kNone);
        dist[s] = 0;
        std::size_t t = kNone;
        for (;;) {
            std::size_t u = kNone;
            Cost best = kInf;
            for (std::size_t v = 0; v < nv; ++v)
                if (!done[v] && dist[v] < best) { best = dist[v]; u = v; }
            if (u == kNone) break;
            done[u] = 1;
            if (excess[u] < -eps) { t = u; break; }
            auto relax = [&](std::size_t v, Cost w) {
                const Cost nd = dist[u] + w + pot[u] - pot[v];
                if (!done[v] && nd < dist[v]) { dist[v] = nd; pred[v] = u; }
            };
            if (u < np) {
                for (std::size_t j = 0; j < nq; ++j) relax(np + j, c[u * nq + j]);
                relax(nb, ca[u]);
            } else if (u < nb) {
                const std::size_t j = u - np;
                for (std::size_t i = 0; i < np; ++i)
                    if (f[i * nq + j] > eps) relax(i, -c[i * nq + j]);
                if (fb[j] > eps) relax(nb, -cb[j]);
            } else {
                for (std::size_t j = 0; j < nq; ++j) relax(np + j, cb[j]);
                for (std::size_t i = 0; i < np; ++i)
                    if (fa[i] > eps) relax(i, -ca[i]);
            }
        }
        if (t == kNone) {
            // the boundary absorbs any amount, so only rounding residue can be left without a target
            if (excess[s] > 1e-9 * std::max(1.0, total)) throw NumericalError("boundary transport: no augmenting path");
            excess[s] = 0.0;
            continue;
        }
        const Cost dt = dist[t];
        for (std::size_t v = 0; v < nv; ++v) pot[v] += done[v] ? dist[v] : dt;

        // bottleneck along the path
        double amount = std::min(excess[s], -excess[t]);
        for (std::size_t v = t; v != s; v = pred[v]) {
            const std::size_t u = pred[v];
            if (u >= np && u < nb && v < np) amount = std::min(amount, f[v * nq + (u - np)]);
            else if (u >= np && u < nb && v == nb) amount = std::min(amount, fb[u - np]);
            else if (u == nb && v < np) amount = std::min(amount, fa[v]);
        }
        for (std::size_t v = t; v != s; v = pred[v]) {
            const std::size_t u = pred[v];
            if (u < np && v >= np && v < nb) f[u * nq + (v - np)] += amount;
            else if (u < np && v == nb) fa[u] += amount;
            else if (u == nb && v >= np && v < nb) fb[v - np] += amount;
            else if (u >= np && u < nb && v < np) f[v * nq + (u - np)] -= amount;
            else if (u >= np && u < nb && v == nb) fb[u - np] -= amount;
            else if (u == nb && v < np) fa[v] -= amount;
        }
        excess[s] -= amount;
        excess[t] += amount;
    }

    BoundaryTransportSolution sol;
    for (std::size_t i = 0; i < np; ++i)
        for (std::size_t j = 0; j < nq; ++j)
            if (f[i * nq + j] > eps) {
                sol.plan.push_back({i, j, f[i * nq + j], prob.cost[i * nq + j]});
                sol.value += f[i * nq + j] * prob.cost[i * nq + j];
            }
    for (std::size_t i = 0; i < np; ++i)
        if (fa[i] > eps) {
            sol.plan.push_back({i, kBoundaryIndex, fa[i], prob.source_exit[i]});
            sol.value += fa[i] * prob.source_exit[i];
        }
    for (std::size_t j = 0; j < nq; ++j)
        if (fb[j] > eps) {
            sol.plan.push_back({kBoundaryIndex, j, fb[j], prob.sink_entry[j]});
            sol.value += fb[j] * prob.sink_entry[j];
        }
    // y = -pot is dual feasible: y_u - y_v <= c_uv on every arc
    const double yb = -static_cast<double>(pot[nb]) / kScale;
    sol.phi.resize(np);
    sol.psi.resize(nq);
    for (std::size_t i = 0; i < np; ++i) sol.phi[i] = -static_cast<double>(pot[i]) / kScale - yb;
    for (std::size_t j = 0; j < nq; ++j) sol.psi[j] = yb + static_cast<double>(pot[np + j]) / kScale;
    return sol;
}

}  // namespace caloric
