#pragma once

// Thin wrappers over GSL (Gauss-Legendre tables, Nelder-Mead) and Boost
// (Brent line search) with the signatures used across the library.

#include <cmath>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include <boost/math/tools/minima.hpp>
#include <gsl/gsl_integration.h>
#include <gsl/gsl_multimin.h>
#include <gsl/gsl_vector.h>

#include "caloric/error.hpp"

namespace caloric {

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// n-point Gauss-Legendre rule mapped to [a, b].
inline QuadratureRule gauss_legendre(int n, double a = -1.0, double b = 1.0) {
    require(n >= 1, "quadrature order must be positive");
    std::unique_ptr<gsl_integration_glfixed_table, decltype(&gsl_integration_glfixed_table_free)> table(
        gsl_integration_glfixed_table_alloc(static_cast<std::size_t>(n)), &gsl_integration_glfixed_table_free);
    if (!table) throw NumericalError("Gauss-Legendre table allocation failed");
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i)
        gsl_integration_glfixed_point(a, b, static_cast<std::size_t>(i), &rule.nodes[i], &rule.weights[i],
                                      table.get());
    return rule;
}

/// Argmax of a unimodal function on [a, b] (Brent's method on -f).
template <class Fn>
double golden_section_max(Fn&& f, double a, double b, int bits = 40, std::uintmax_t max_iter = 200) {
    auto r = boost::math::tools::brent_find_minima([&](double x) { return -f(x); }, a, b, bits, max_iter);
    return r.first;
}

struct NelderMeadResult {
    std::vector<double> x;
    double value = 0.0;
    std::size_t iterations = 0;
};

/// Derivative-free minimization (GSL nmsimplex2) from x0 with initial step sizes `step`.
inline NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                    std::vector<double> x0, std::vector<double> step, std::size_t max_iter = 200,
                                    double size_tol = 1e-4) {
    const std::size_t dim = x0.size();
    require(dim >= 1 && step.size() == dim, "nelder_mead: bad dimensions");
    struct Ctx {
        const std::function<double(const std::vector<double>&)>* f;
        std::vector<double> buf;
    } ctx{&f, std::vector<double>(dim)};
    gsl_multimin_function fn;
    fn.n = dim;
    fn.params = &ctx;
    fn.f = [](const gsl_vector* v, void* p) {
        auto* c = static_cast<Ctx*>(p);
        for (std::size_t i = 0; i < c->buf.size(); ++i) c->buf[i] = gsl_vector_get(v, i);
        return (*c->f)(c->buf);
    };
    std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> x(gsl_vector_alloc(dim), &gsl_vector_free);
    std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> ss(gsl_vector_alloc(dim), &gsl_vector_free);
    for (std::size_t i = 0; i < dim; ++i) {
        gsl_vector_set(x.get(), i, x0[i]);
        gsl_vector_set(ss.get(), i, step[i]);
    }
    std::unique_ptr<gsl_multimin_fminimizer, decltype(&gsl_multimin_fminimizer_free)> s(
        gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, dim), &gsl_multimin_fminimizer_free);
    gsl_multimin_fminimizer_set(s.get(), &fn, x.get(), ss.get());
    NelderMeadResult res;
    for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
        if (gsl_multimin_fminimizer_iterate(s.get())) break;
        if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s.get()), size_tol) == GSL_SUCCESS) break;
    }
    res.x.resize(dim);
    for (std::size_t i = 0; i < dim; ++i) res.x[i] = gsl_vector_get(s->x, i);
    res.value = s->fval;
    return res;
}

}  // namespace caloric
