#pragma once

// Finite weighted space-time point clouds standing in for Radon measures.

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "caloric/error.hpp"
#include "caloric/para_point.hpp"
#include "caloric/pargeo.hpp"

namespace caloric {

struct Atom {
    ParaPoint p;
    double w = 0.0;
};

class DiscreteMeasure {
public:
    DiscreteMeasure() = default;
    explicit DiscreteMeasure(bool is_signed) : signed_(is_signed) {}
    DiscreteMeasure(std::vector<Atom> atoms, bool is_signed = false) : signed_(is_signed) {
        atoms_.reserve(atoms.size());
        for (auto& a : atoms) add(a.p, a.w);
    }

    DiscreteMeasure& add(const ParaPoint& p, double w) {
        require(p.finite() && std::isfinite(w), "atom coordinates and weight must be finite");
        require(signed_ || w >= 0.0, "unsigned measure received a negative weight");
        require(atoms_.empty() || p.dim() == atoms_.front().p.dim(), "mixed spatial dimensions");
        atoms_.push_back({p, w});
        return *this;
    }
    void reserve(std::size_t k) { atoms_.reserve(k); }

    [[nodiscard]] const std::vector<Atom>& atoms() const noexcept { return atoms_; }
    [[nodiscard]] std::size_t size() const noexcept { return atoms_.size(); }
    [[nodiscard]] bool empty() const noexcept { return atoms_.empty(); }
    [[nodiscard]] bool is_signed() const noexcept { return signed_; }
    [[nodiscard]] std::size_t dim() const noexcept { return atoms_.empty() ? 0 : atoms_.front().p.dim(); }

    [[nodiscard]] double total_mass() const noexcept {
        double s = 0.0;
        for (const auto& a : atoms_) s += a.w;
        return s;
    }
    [[nodiscard]] double total_variation() const noexcept {
        double s = 0.0;
        for (const auto& a : atoms_) s += std::abs(a.w);
        return s;
    }
    /// mu(C) for an open cylinder C.
    [[nodiscard]] double mass_in(const Cylinder& c) const noexcept {
        double s = 0.0;
        for (const auto& a : atoms_)
            if (c.contains(a.p)) s += a.w;
        return s;
    }
    /// mu(C_r(center)) via the parabolic norm (open ball).
    [[nodiscard]] double mass_in_ball(const ParaPoint& center, double r) const noexcept {
        double s = 0.0;
        for (const auto& a : atoms_)
            if (para_dist(a.p, center) < r) s += a.w;
        return s;
    }
    [[nodiscard]] DiscreteMeasure scaled(double c) const {
        DiscreteMeasure out(signed_);
        out.atoms_ = atoms_;
        for (auto& a : out.atoms_) a.w *= c;
        if (!signed_) require(c >= 0.0, "negative scaling of an unsigned measure");
        return out;
    }
    DiscreteMeasure& append(const DiscreteMeasure& o) {
        for (const auto& a : o.atoms_) add(a.p, a.w);
        return *this;
    }

private:
    std::vector<Atom> atoms_;
    bool signed_ = false;
};

// ---- JSON {"signed":bool,"atoms":[{"x":[...],"t":...,"w":...}]}

inline nlohmann::json to_json(const DiscreteMeasure& m) {
    nlohmann::json atoms = nlohmann::json::array();
    for (const auto& a : m.atoms()) {
        auto j = point_to_json(a.p);
        j["w"] = a.w;
        atoms.push_back(std::move(j));
    }
    return {{"signed", m.is_signed()}, {"atoms", atoms}};
}

inline DiscreteMeasure discrete_measure_from_json(const nlohmann::json& j) {
    require(j.is_object() && j.contains("atoms"), "measure JSON needs 'atoms'");
    for (auto it = j.begin(); it != j.end(); ++it)
        require(it.key() == "signed" || it.key() == "atoms", "unknown measure key '" + it.key() + "'");
    DiscreteMeasure m(j.value("signed", false));
    for (const auto& a : j.at("atoms")) {
        require(a.contains("w"), "atom JSON needs 'w'");
        m.add(point_from_json(a), a.at("w").get<double>());
    }
    return m;
}

/// CSV with header x1,...,xn,t,w; full round-trip precision.
inline void write_csv(std::ostream& os, const DiscreteMeasure& m) {
    const std::size_t n = m.dim();
    for (std::size_t i = 0; i < n; ++i) os << 'x' << (i + 1) << ',';
    os << "t,w\n";
    os << std::setprecision(17);
    for (const auto& a : m.atoms()) {
        for (std::size_t i = 0; i < n; ++i) os << a.p.x[i] << ',';
        os << a.p.t << ',' << a.w << '\n';
    }
}

inline DiscreteMeasure read_csv(std::istream& is, bool is_signed = false) {
    std::string line;
    require(static_cast<bool>(std::getline(is, line)), "empty measure CSV");
    std::size_t cols = 1;
    for (char ch : line) cols += ch == ',';
    require(cols >= 3, "measure CSV needs columns x..., t, w");
    const std::size_t n = cols - 2;
    DiscreteMeasure m(is_signed);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::vector<double> v;
        std::string cell;
        while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
        require(v.size() == cols, "measure CSV row has the wrong number of columns");
        m.add(ParaPoint(SpatialVec(std::span<const double>(v.data(), n)), v[n]), v[n + 1]);
    }
    return m;
}

}  // namespace caloric
