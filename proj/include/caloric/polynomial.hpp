#pragma once

// Space-time polynomials sum c_{alpha,l} x^alpha t^l and their caloric
// (Laplacian - d/dt) and adjoint caloric (Laplacian + d/dt) subclasses.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "caloric/error.hpp"
#include "caloric/para_point.hpp"

namespace caloric {

struct Monomial {
    std::array<std::uint8_t, kMaxSpatialDim> alpha{};
    std::uint8_t ell = 0;

    [[nodiscard]] int spatial_degree() const noexcept {
        int s = 0;
        for (auto a : alpha) s += a;
        return s;
    }
    /// |alpha| + 2 l
    [[nodiscard]] int parabolic_degree() const noexcept { return spatial_degree() + 2 * ell; }

    friend auto operator<=>(const Monomial&, const Monomial&) = default;
};

class Polynomial {
public:
    using Terms = std::map<Monomial, double>;

    Polynomial() = default;
    explicit Polynomial(std::size_t n) : n_(n) {
        require(n >= 1 && n <= kMaxSpatialDim, "spatial dimension must be in [1, 4]");
    }

    [[nodiscard]] std::size_t dim() const noexcept { return n_; }
    [[nodiscard]] const Terms& terms() const noexcept { return terms_; }
    [[nodiscard]] bool is_zero() const noexcept { return terms_.empty(); }

    /// Adds c x^alpha t^ell; entries cancelling to exactly zero are removed.
    Polynomial& add(const Monomial& m, double c) {
        for (std::size_t i = n_; i < kMaxSpatialDim; ++i)
            require(m.alpha[i] == 0, "monomial exponent beyond the spatial dimension");
        if (c == 0.0) return *this;
        auto [it, inserted] = terms_.try_emplace(m, c);
        if (!inserted) {
            it->second += c;
            if (it->second == 0.0) terms_.erase(it);
        }
        return *this;
    }
    Polynomial& add(std::initializer_list<int> alpha, int ell, double c) {
        require(alpha.size() == n_, "multi-index length must equal the spatial dimension");
        Monomial m;
        std::size_t i = 0;
        for (int a : alpha) {
            require(a >= 0 && a < 256, "exponent out of range");
            m.alpha[i++] = static_cast<std::uint8_t>(a);
        }
        require(ell >= 0 && ell < 256, "time exponent out of range");
        m.ell = static_cast<std::uint8_t>(ell);
        return add(m, c);
    }

    [[nodiscard]] int parabolic_degree() const noexcept {
        int d = -1;
        for (const auto& [m, c] : terms_) d = std::max(d, m.parabolic_degree());
        return d;
    }
    [[nodiscard]] double coefficient_scale() const noexcept {
        double s = 0.0;
        for (const auto& [m, c] : terms_) s = std::max(s, std::abs(c));
        return s;
    }
    [[nodiscard]] double coefficient(const Monomial& m) const {
        auto it = terms_.find(m);
        return it == terms_.end() ? 0.0 : it->second;
    }

    [[nodiscard]] double operator()(const ParaPoint& p) const noexcept {
        double s = 0.0;
        for (const auto& [m, c] : terms_) {
            double v = c;
            for (std::size_t i = 0; i < n_; ++i)
                for (int k = 0; k < m.alpha[i]; ++k) v *= p.x[i];
            for (int k = 0; k < m.ell; ++k) v *= p.t;
            s += v;
        }
        return s;
    }

    /// d/dx_i
    [[nodiscard]] Polynomial dx(std::size_t i) const {
        Polynomial out(n_);
        for (const auto& [m, c] : terms_) {
            if (m.alpha[i] == 0) continue;
            Monomial d = m;
            --d.alpha[i];
            out.add(d, c * m.alpha[i]);
        }
        return out;
    }
    [[nodiscard]] Polynomial dt() const {
        Polynomial out(n_);
        for (const auto& [m, c] : terms_) {
            if (m.ell == 0) continue;
            Monomial d = m;
            --d.ell;
            out.add(d, c * m.ell);
        }
        return out;
    }
    [[nodiscard]] Polynomial laplacian() const {
        Polynomial out(n_);
        for (std::size_t i = 0; i < n_; ++i) out += dx(i).dx(i);
        return out;
    }

    Polynomial& operator+=(const Polynomial& o) {
        require(o.n_ == n_, "dimension mismatch");
        for (const auto& [m, c] : o.terms_) add(m, c);
        return *this;
    }
    Polynomial& operator*=(double s) {
        if (s == 0.0) { terms_.clear(); return *this; }
        for (auto& [m, c] : terms_) c *= s;
        return *this;
    }
    friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
    friend Polynomial operator-(Polynomial a, Polynomial b) { return a += (b *= -1.0); }
    friend Polynomial operator*(double s, Polynomial a) { return a *= s; }

    /// x -> h(r x, r^2 t)
    [[nodiscard]] Polynomial dilated(double r) const {
        Polynomial out(n_);
        for (const auto& [m, c] : terms_) out.add(m, c * std::pow(r, m.parabolic_degree()));
        return out;
    }

    friend bool operator==(const Polynomial& a, const Polynomial& b) {
        return a.n_ == b.n_ && a.terms_ == b.terms_;
    }

protected:
    std::size_t n_ = 0;
    Terms terms_;
};

enum class Orientation { Caloric, Adjoint };

inline std::string to_string(Orientation o) { return o == Orientation::Caloric ? "caloric" : "adjoint"; }
inline Orientation orientation_from_string(const std::string& s) {
    if (s == "caloric") return Orientation::Caloric;
    if (s == "adjoint") return Orientation::Adjoint;
    throw ValidationError("unknown orientation '" + s + "'");
}

/// H h = Lap h - dt h (caloric), H* h = Lap h + dt h (adjoint), applied symbolically.
[[nodiscard]] inline Polynomial heat_operator(const Polynomial& h, Orientation o) {
    Polynomial out = h.laplacian();
    Polynomial d = h.dt();
    if (o == Orientation::Caloric) d *= -1.0;
    return out + d;
}

class CaloricPolynomial {
public:
    CaloricPolynomial() = default;
    /// Validates that the operator of the given orientation annihilates h
    /// (up to 1e-12 relative roundoff in the coefficients).
    CaloricPolynomial(Polynomial h, Orientation o) : poly_(std::move(h)), orient_(o) {
        const Polynomial r = heat_operator(poly_, orient_);
        const double scale = std::max(1.0, poly_.coefficient_scale());
        require(r.coefficient_scale() <= 1e-12 * scale,
                "polynomial is not " + to_string(orient_) + " (operator residual nonzero)");
    }

    [[nodiscard]] const Polynomial& poly() const noexcept { return poly_; }
    [[nodiscard]] Orientation orientation() const noexcept { return orient_; }
    [[nodiscard]] std::size_t dim() const noexcept { return poly_.dim(); }
    [[nodiscard]] int degree() const noexcept { return poly_.parabolic_degree(); }
    [[nodiscard]] double operator()(const ParaPoint& p) const noexcept { return poly_(p); }

    /// h(delta_r .) stays in the same class.
    [[nodiscard]] CaloricPolynomial dilated(double r) const { return {poly_.dilated(r), orient_}; }
    [[nodiscard]] CaloricPolynomial scaled(double s) const { return {s * poly_, orient_}; }
    /// h(x, -t): swaps caloric and adjoint caloric.
    [[nodiscard]] CaloricPolynomial time_reflected() const {
        Polynomial out(dim());
        for (const auto& [m, c] : poly_.terms()) out.add(m, (m.ell % 2) ? -c : c);
        return {out, orient_ == Orientation::Caloric ? Orientation::Adjoint : Orientation::Caloric};
    }

    friend bool operator==(const CaloricPolynomial& a, const CaloricPolynomial& b) {
        return a.orient_ == b.orient_ && a.poly_ == b.poly_;
    }

private:
    Polynomial poly_;
    Orientation orient_ = Orientation::Caloric;
};

/// Symbolic application of H (or H*) per the polynomial's orientation.
[[nodiscard]] inline Polynomial apply_operator(const CaloricPolynomial& h) {
    return heat_operator(h.poly(), h.orientation());
}
/// Applies the operator of orientation `o` to an arbitrary polynomial.
[[nodiscard]] inline Polynomial apply_operator(const Polynomial& h, Orientation o) { return heat_operator(h, o); }

/// Heat polynomial with initial trace p: sum_j (+-t)^j Lap^j p / j!.
[[nodiscard]] inline CaloricPolynomial heat_extend(const Polynomial& p, Orientation o) {
    for (const auto& [m, c] : p.terms()) require(m.ell == 0, "heat_extend expects a purely spatial polynomial");
    const double sign = o == Orientation::Caloric ? 1.0 : -1.0;
    Polynomial out = p;
    Polynomial lap = p;
    double factorial = 1.0, sgn = 1.0;
    for (int j = 1;; ++j) {
        lap = lap.laplacian();
        if (lap.is_zero()) break;
        factorial *= j;
        sgn *= sign;
        for (const auto& [m, c] : lap.terms()) {
            Monomial mt = m;
            mt.ell = static_cast<std::uint8_t>(j);
            out.add(mt, sgn * c / factorial);
        }
    }
    return {out, o};
}

/// Degree-j pieces h_j with |alpha| + 2l = j, ascending in j; zero pieces omitted.
[[nodiscard]] inline std::vector<std::pair<int, CaloricPolynomial>> homogeneous_parts(const CaloricPolynomial& h) {
    std::map<int, Polynomial> parts;
    for (const auto& [m, c] : h.poly().terms()) {
        auto [it, ins] = parts.try_emplace(m.parabolic_degree(), h.dim());
        it->second.add(m, c);
    }
    std::vector<std::pair<int, CaloricPolynomial>> out;
    for (auto& [d, p] : parts) out.emplace_back(d, CaloricPolynomial(std::move(p), h.orientation()));
    return out;
}

/// Lowest-degree nonzero homogeneous part h_m.
[[nodiscard]] inline std::pair<int, CaloricPolynomial> lowest_part(const CaloricPolynomial& h) {
    auto parts = homogeneous_parts(h);
    require(!parts.empty(), "zero polynomial has no homogeneous part");
    return parts.front();
}

/// All monomial multi-indices alpha with |alpha| = k in n variables, lexicographic.
[[nodiscard]] inline std::vector<Monomial> spatial_monomials(std::size_t n, int k) {
    std::vector<Monomial> out;
    Monomial m;
    auto rec = [&](auto&& self, std::size_t i, int left) -> void {
        if (i + 1 == n) {
            m.alpha[i] = static_cast<std::uint8_t>(left);
            out.push_back(m);
            return;
        }
        for (int a = left; a >= 0; --a) {
            m.alpha[i] = static_cast<std::uint8_t>(a);
            self(self, i + 1, left - a);
        }
    };
    rec(rec, 0, k);
    return out;
}

/// Basis of homogeneous (adjoint) caloric polynomials of degree k: heat extensions of x^alpha, |alpha| = k.
[[nodiscard]] inline std::vector<CaloricPolynomial> homogeneous_basis(std::size_t n, int k, Orientation o) {
    std::vector<CaloricPolynomial> out;
    for (const auto& m : spatial_monomials(n, k)) {
        Polynomial p(n);
        p.add(m, 1.0);
        out.push_back(heat_extend(p, o));
    }
    return out;
}

/// D^{alpha,l} h evaluated at the origin = alpha! l! c_{alpha,l}.
[[nodiscard]] inline double derivative_at_origin(const Polynomial& h, const Monomial& m) {
    double f = h.coefficient(m);
    for (auto a : m.alpha)
        for (int k = 2; k <= a; ++k) f *= k;
    for (int k = 2; k <= m.ell; ++k) f *= k;
    return f;
}

// ---- JSON: {"n":..., "orientation":..., "terms":[{"alpha":[...],"ell":...,"c":...}]}

inline nlohmann::json to_json(const CaloricPolynomial& h) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& [m, c] : h.poly().terms()) {
        std::vector<int> alpha(m.alpha.begin(), m.alpha.begin() + h.dim());
        terms.push_back({{"alpha", alpha}, {"ell", static_cast<int>(m.ell)}, {"c", c}});
    }
    return {{"n", h.dim()}, {"orientation", to_string(h.orientation())}, {"terms", terms}};
}

inline CaloricPolynomial caloric_polynomial_from_json(const nlohmann::json& j) {
    require(j.is_object() && j.contains("n") && j.contains("terms"), "polynomial JSON needs 'n' and 'terms'");
    for (auto it = j.begin(); it != j.end(); ++it)
        require(it.key() == "n" || it.key() == "orientation" || it.key() == "terms",
                "unknown polynomial key '" + it.key() + "'");
    const auto n = j.at("n").get<std::size_t>();
    Polynomial p(n);
    for (const auto& term : j.at("terms")) {
        const auto alpha = term.at("alpha").get<std::vector<int>>();
        require(alpha.size() == n, "term multi-index length must equal n");
        Monomial m;
        for (std::size_t i = 0; i < n; ++i) {
            require(alpha[i] >= 0 && alpha[i] < 256, "exponent out of range");
            m.alpha[i] = static_cast<std::uint8_t>(alpha[i]);
        }
        const int ell = term.value("ell", 0);
        require(ell >= 0 && ell < 256, "time exponent out of range");
        m.ell = static_cast<std::uint8_t>(ell);
        p.add(m, term.at("c").get<double>());
    }
    const Orientation o = orientation_from_string(j.value("orientation", std::string("caloric")));
    return {p, o};
}

}  // namespace caloric
