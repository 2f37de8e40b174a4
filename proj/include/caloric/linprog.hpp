#pragma once

// Dense dictionary simplex for   maximize c^T x  s.t.  A x <= b, x >= 0,  b >= 0.
//
// The dictionary keeps the M x N coefficient block of the nonbasic
// variables only, so memory is M*N regardless of which variables are basic.
// The all-slack basis is feasible because b >= 0, so no phase one is needed;
// every LP in this library is brought into that form by its caller.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "caloric/error.hpp"

namespace caloric {

enum class LpStatus { Optimal, Unbounded, IterationLimit };

enum class PivotRule {
    Bland,             ///< smallest-index entering/leaving variable; never cycles, can be slow
    DantzigWithBland,  ///< largest reduced cost, Bland during runs of degenerate pivots
};

struct LpOptions {
    PivotRule rule = PivotRule::DantzigWithBland;
    double tol = 1e-11;
    std::size_t max_pivots = 5'000'000;
    std::size_t degenerate_switch = 50;
    double pivot_tol = 1e-9;  ///< pivots below pivot_tol * max(1, column max) are rejected
    double feas_tol = 1e-12;  ///< Harris relaxation of the ratio test
};

struct LpResult {
    LpStatus status = LpStatus::Optimal;
    double objective = 0.0;
    std::vector<double> x;      ///< primal values of the structural variables
    std::vector<double> duals;  ///< one per row; y >= 0 with A^T y >= c at optimum
    std::size_t pivots = 0;
};

class LinearProgram {
public:
    LinearProgram(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), a_(rows * cols, 0.0), b_(rows, 0.0), c_(cols, 0.0) {}

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }

    double& a(std::size_t i, std::size_t j) noexcept { return a_[i * cols_ + j]; }
    [[nodiscard]] double a(std::size_t i, std::size_t j) const noexcept { return a_[i * cols_ + j]; }
    double& b(std::size_t i) noexcept { return b_[i]; }
    [[nodiscard]] double b(std::size_t i) const noexcept { return b_[i]; }
    double& c(std::size_t j) noexcept { return c_[j]; }
    [[nodiscard]] double c(std::size_t j) const noexcept { return c_[j]; }

    [[nodiscard]] const std::vector<double>& matrix() const noexcept { return a_; }
    [[nodiscard]] const std::vector<double>& rhs() const noexcept { return b_; }
    [[nodiscard]] const std::vector<double>& objective() const noexcept { return c_; }

private:
    std::size_t rows_, cols_;
    std::vector<double> a_, b_, c_;
};

inline LpResult solve(const LinearProgram& lp, const LpOptions& opt = {}) {
    const std::size_t m = lp.rows(), n = lp.cols();
    for (std::size_t i = 0; i < m; ++i)
        require(lp.b(i) >= 0.0 && std::isfinite(lp.b(i)), "LP right-hand side must be finite and >= 0");

    std::vector<double> tab = lp.matrix();
    std::vector<double> rhs = lp.rhs();
    std::vector<double> red = lp.objective();
    double z = 0.0;
    // variable ids: [0, n) structural, [n, n+m) slacks
    std::vector<std::size_t> basic(m), nonbasic(n);
    for (std::size_t i = 0; i < m; ++i) basic[i] = n + i;
    for (std::size_t j = 0; j < n; ++j) nonbasic[j] = j;

    LpResult res;
    std::size_t degenerate_run = 0;
    std::vector<double> prow(n);

    for (;;) {
        const bool use_bland = opt.rule == PivotRule::Bland || degenerate_run >= opt.degenerate_switch;
        std::size_t enter = n;
        if (use_bland) {
            std::size_t best_id = std::numeric_limits<std::size_t>::max();
            for (std::size_t j = 0; j < n; ++j)
                if (red[j] > opt.tol && nonbasic[j] < best_id) {
                    best_id = nonbasic[j];
                    enter = j;
                }
        } else {
            double best = opt.tol;
            for (std::size_t j = 0; j < n; ++j)
                if (red[j] > best) {
                    best = red[j];
                    enter = j;
                }
        }
        if (enter == n) break;  // optimal

        // Harris two-pass ratio test: bound the step with rhs relaxed by feas_tol, then take the
        // largest pivot among rows within that bound (Bland: smallest basic id instead)
        double col_max = 0.0;
        for (std::size_t i = 0; i < m; ++i) col_max = std::max(col_max, tab[i * n + enter]);
        const double piv_tol = opt.pivot_tol * std::max(1.0, col_max);
        double theta = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < m; ++i) {
            const double piv = tab[i * n + enter];
            if (piv > piv_tol) theta = std::min(theta, (rhs[i] + opt.feas_tol) / piv);
        }
        std::size_t leave = m;
        double best_ratio = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < m; ++i) {
            const double piv = tab[i * n + enter];
            if (piv <= piv_tol) continue;
            const double ratio = rhs[i] / piv;
            if (ratio > theta) continue;
            const bool better = leave == m ||
                                (use_bland ? basic[i] < basic[leave] : piv > tab[leave * n + enter]);
            if (better) {
                best_ratio = ratio;
                leave = i;
            }
        }
        if (leave == m) {
            res.status = LpStatus::Unbounded;
            return res;
        }
        if (++res.pivots > opt.max_pivots) {
            res.status = LpStatus::IterationLimit;
            break;
        }
        degenerate_run = best_ratio <= 1e-14 ? degenerate_run + 1 : 0;

        // pivot on (leave, enter)
        double* row = &tab[leave * n];
        const double inv = 1.0 / row[enter];
        for (std::size_t j = 0; j < n; ++j) row[j] *= inv;
        row[enter] = inv;
        rhs[leave] *= inv;
        std::copy(row, row + n, prow.begin());
        for (std::size_t i = 0; i < m; ++i) {
            if (i == leave) continue;
            double* ri = &tab[i * n];
            const double f = ri[enter];
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) ri[j] -= f * prow[j];
            ri[enter] = -f * inv;
            rhs[i] -= f * rhs[leave];
            if (rhs[i] < 0.0) rhs[i] = 0.0;  // roundoff
        }
        const double fc = red[enter];
        for (std::size_t j = 0; j < n; ++j) red[j] -= fc * prow[j];
        red[enter] = -fc * inv;
        z += fc * rhs[leave];
        std::swap(basic[leave], nonbasic[enter]);
    }

    // iterative refinement of the basic solution: the tableau holds B^{-1} e_k in the column of each
    // nonbasic slack, and e_i for a slack basic in row i, so r -> B^{-1} r needs no factorization
    for (int round = 0; round < 2; ++round) {
        std::vector<double> val(n + m, 0.0);
        for (std::size_t i = 0; i < m; ++i) val[basic[i]] = rhs[i];
        std::vector<double> resid(m);
        for (std::size_t k = 0; k < m; ++k) {
            long double acc = lp.b(k);
            for (std::size_t j = 0; j < n; ++j) acc -= static_cast<long double>(lp.a(k, j)) * val[j];
            resid[k] = static_cast<double>(acc - val[n + k]);
        }
        std::vector<double> d(m, 0.0);
        for (std::size_t i = 0; i < m; ++i)
            if (basic[i] >= n) d[i] += resid[basic[i] - n];
        for (std::size_t j = 0; j < n; ++j)
            if (nonbasic[j] >= n) {
                const double r = resid[nonbasic[j] - n];
                if (r == 0.0) continue;
                for (std::size_t i = 0; i < m; ++i) d[i] += tab[i * n + j] * r;
            }
        for (std::size_t i = 0; i < m; ++i) rhs[i] = std::max(0.0, rhs[i] + d[i]);
    }

    res.objective = z;
    res.x.assign(n, 0.0);
    res.duals.assign(m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        if (basic[i] < n) res.x[basic[i]] = rhs[i];
    for (std::size_t j = 0; j < n; ++j)
        if (nonbasic[j] >= n) res.duals[nonbasic[j] - n] = -red[j];
    // recompute the objective from x to shed accumulated pivot roundoff
    double obj = 0.0;
    for (std::size_t j = 0; j < n; ++j) obj += lp.c(j) * res.x[j];
    res.objective = obj;
    return res;
}

}  // namespace caloric
