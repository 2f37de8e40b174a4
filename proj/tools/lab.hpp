#pragma once

// Experiment driver behind the caloric-lab executable. Every subcommand reads
// an INI config, resolves it completely (unknown keys are rejected before any
// computation), runs one module pipeline and writes results.csv, measure.json
// and manifest.txt into the output directory.

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "caloric/capacity.hpp"
#include "caloric/domain.hpp"
#include "caloric/measure.hpp"
#include "caloric/nodal.hpp"
#include "caloric/stochastic.hpp"
#include "caloric/tangent.hpp"
#include "caloric/theta.hpp"
#include "caloric/transport.hpp"

namespace caloric::lab {

namespace fs = std::filesystem;

inline std::string sha1_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha1(), nullptr) != 1)
        throw NumericalError("SHA-1 digest failed");
    std::ostringstream os;
    for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return os.str();
}

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ValidationError("cannot read file: " + p.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

/// Shortest round-trip decimal form.
inline std::string fmt(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(trim(cur));
    return out;
}

inline double parse_double(const std::string& s, const std::string& what) {
    const std::string t = trim(s);
    double v = 0.0;
    const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size())
        throw ValidationError(what + ": expected a number, got '" + s + "'");
    return v;
}

/// Flat sectioned key-value config. Every getter records the resolved value (defaults included)
/// for the manifest; finish() rejects keys no getter asked for.
class Config {
public:
    Config() = default;
    explicit Config(const fs::path& path) : path_(path) {
        if (!fs::exists(path)) throw ValidationError("config file not found: " + path.string());
        text_ = read_file(path);
        std::istringstream is(text_);
        boost::property_tree::ptree pt;
        try {
            boost::property_tree::read_ini(is, pt);
        } catch (const boost::property_tree::ini_parser_error& e) {
            throw ValidationError("cannot parse config " + path.string() + ": " + e.message());
        }
        for (const auto& [sec, body] : pt) {
            if (body.empty()) throw ValidationError("config key '" + sec + "' must sit inside a section");
            for (const auto& [key, v] : body) values_[sec + "." + key] = trim(v.data());
        }
    }

    [[nodiscard]] const fs::path& path() const noexcept { return path_; }
    [[nodiscard]] const std::string& text() const noexcept { return text_; }
    [[nodiscard]] const std::map<std::string, std::string>& resolved() const noexcept { return resolved_; }

    [[nodiscard]] bool has(const std::string& sec, const std::string& key) const {
        return values_.count(sec + "." + key) > 0;
    }

    std::string text(const std::string& sec, const std::string& key, const std::string& def) {
        return note(sec, key, raw(sec, key).value_or(def));
    }
    std::string required(const std::string& sec, const std::string& key) {
        auto v = raw(sec, key);
        if (!v) throw ValidationError("missing config key '" + sec + "." + key + "'");
        return note(sec, key, *v);
    }
    double real(const std::string& sec, const std::string& key, double def) {
        const auto v = raw(sec, key);
        const double x = v ? parse_double(*v, "config key '" + sec + "." + key + "'") : def;
        note(sec, key, fmt(x));
        return x;
    }
    std::size_t count(const std::string& sec, const std::string& key, std::size_t def) {
        const double x = real(sec, key, static_cast<double>(def));
        if (!(x >= 0.0) || x != std::floor(x) || x > 1e15)
            throw ValidationError("config key '" + sec + "." + key + "' must be a nonnegative integer");
        return static_cast<std::size_t>(x);
    }
    bool flag(const std::string& sec, const std::string& key, bool def) {
        const auto v = raw(sec, key);
        bool b = def;
        if (v) {
            if (*v == "true" || *v == "1") b = true;
            else if (*v == "false" || *v == "0") b = false;
            else throw ValidationError("config key '" + sec + "." + key + "' must be true or false");
        }
        note(sec, key, b ? "true" : "false");
        return b;
    }
    std::vector<double> reals(const std::string& sec, const std::string& key, const std::vector<double>& def) {
        const auto v = raw(sec, key);
        std::vector<double> xs = def;
        if (v) {
            xs.clear();
            for (const auto& s : split(*v, ',')) xs.push_back(parse_double(s, "config key '" + sec + "." + key + "'"));
        }
        std::string echo;
        for (std::size_t i = 0; i < xs.size(); ++i) echo += (i ? "," : "") + fmt(xs[i]);
        note(sec, key, echo);
        return xs;
    }
    SpatialVec vec(const std::string& sec, const std::string& key, const std::vector<double>& def) {
        const auto xs = reals(sec, key, def);
        require(!xs.empty() && xs.size() <= kMaxSpatialDim,
                "config key '" + sec + "." + key + "' needs 1 to 4 coordinates");
        return SpatialVec(std::span<const double>(xs));
    }
    /// x1,...,xn,t
    ParaPoint point(const std::string& sec, const std::string& key, const std::vector<double>& def) {
        const auto xs = reals(sec, key, def);
        require(xs.size() >= 2 && xs.size() <= kMaxSpatialDim + 1,
                "config key '" + sec + "." + key + "' needs coordinates x1,...,xn,t");
        return {SpatialVec(std::span<const double>(xs.data(), xs.size() - 1)), xs.back()};
    }
    /// Points separated by ';'.
    std::vector<ParaPoint> points(const std::string& sec, const std::string& key) {
        const std::string s = required(sec, key);
        std::vector<ParaPoint> out;
        for (const auto& item : split(s, ';')) {
            if (item.empty()) continue;
            std::vector<double> xs;
            for (const auto& c : split(item, ',')) xs.push_back(parse_double(c, "config key '" + sec + "." + key + "'"));
            require(xs.size() >= 2 && xs.size() <= kMaxSpatialDim + 1, "each point needs coordinates x1,...,xn,t");
            out.emplace_back(SpatialVec(std::span<const double>(xs.data(), xs.size() - 1)), xs.back());
        }
        require(!out.empty(), "config key '" + sec + "." + key + "' lists no points");
        return out;
    }
    /// Relative paths are taken from the config file's directory.
    fs::path file(const std::string& sec, const std::string& key) {
        fs::path p = required(sec, key);
        if (p.is_relative()) p = path_.parent_path() / p;
        inputs_.push_back(p);
        return p;
    }
    [[nodiscard]] const std::vector<fs::path>& inputs() const noexcept { return inputs_; }

    void finish() const {
        for (const auto& [k, v] : values_)
            if (!used_.count(k)) throw ValidationError("unknown config key '" + k + "'");
    }

private:
    std::optional<std::string> raw(const std::string& sec, const std::string& key) {
        const std::string k = sec + "." + key;
        used_.insert(k);
        const auto it = values_.find(k);
        if (it == values_.end()) return std::nullopt;
        return it->second;
    }
    std::string note(const std::string& sec, const std::string& key, std::string v) {
        resolved_[sec + "." + key] = v;
        return v;
    }

    fs::path path_;
    std::string text_;
    std::map<std::string, std::string> values_, resolved_;
    std::set<std::string> used_;
    std::vector<fs::path> inputs_;
};

struct Context {
    std::uint64_t seed = 1;
    unsigned workers = 1;
};

struct Outputs {
    std::string results;  ///< results.csv
    nlohmann::json measure = to_json(DiscreteMeasure{});
    std::string summary;  ///< one line for stdout
};

// ---------------------------------------------------------------- config readers

/// Terms separated by ';', each a coefficient followed by factors x<i>^k or t^k, e.g. "1 x1; 0.5 x1^2; 1 t".
inline Polynomial parse_polynomial(std::size_t n, const std::string& s) {
    Polynomial p(n);
    for (const auto& term : split(s, ';')) {
        if (term.empty()) continue;
        std::istringstream is(term);
        std::string tok;
        double c = 1.0;
        Monomial m;
        bool first = true;
        while (is >> tok) {
            if (first && (std::isdigit(static_cast<unsigned char>(tok[0])) || tok[0] == '-' || tok[0] == '+' ||
                          tok[0] == '.')) {
                c = parse_double(tok, "polynomial coefficient");
                first = false;
                continue;
            }
            first = false;
            const auto caret = tok.find('^');
            const std::string base = tok.substr(0, caret);
            const int k = caret == std::string::npos
                              ? 1
                              : static_cast<int>(parse_double(tok.substr(caret + 1), "polynomial exponent"));
            require(k >= 0 && k < 256, "polynomial exponent out of range in '" + term + "'");
            if (base == "t") {
                m.ell = static_cast<std::uint8_t>(m.ell + k);
            } else {
                require(base.size() >= 2 && base[0] == 'x', "unknown polynomial factor '" + tok + "'");
                const int i = static_cast<int>(parse_double(base.substr(1), "polynomial variable index"));
                require(i >= 1 && static_cast<std::size_t>(i) <= n, "variable '" + base + "' exceeds n");
                m.alpha[i - 1] = static_cast<std::uint8_t>(m.alpha[i - 1] + k);
            }
        }
        p.add(m, c);
    }
    require(!p.is_zero(), "the polynomial is zero");
    return p;
}

inline CaloricPolynomial read_polynomial(Config& c) {
    if (c.has("polynomial", "file")) {
        const auto path = c.file("polynomial", "file");
        try {
            return caloric_polynomial_from_json(nlohmann::json::parse(read_file(path)));
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError("bad polynomial JSON " + path.string() + ": " + e.what());
        }
    }
    const std::size_t n = c.count("polynomial", "n", 2);
    const Polynomial p = parse_polynomial(n, c.required("polynomial", "terms"));
    const Orientation o = orientation_from_string(c.text("polynomial", "orientation", "caloric"));
    if (c.flag("polynomial", "heat_extend", false)) return heat_extend(p, o);
    return {p, o};
}

inline NodalResolution read_nodal(Config& c, const Context& ctx) {
    NodalResolution r;
    r.slices = c.count("nodal", "slices", r.slices);
    r.grid = c.count("nodal", "grid", r.grid);
    r.tol_grad_rel = c.real("nodal", "tol_grad_rel", r.tol_grad_rel);
    r.workers = ctx.workers;
    return r;
}

/// A measure from a file, or omega_h of a polynomial traced over [region].
struct Source {
    DiscreteMeasure measure;
    std::optional<NodalSet> nodal;
};

inline std::function<Source()> read_source(Config& c, const Context& ctx, bool polynomial_only = false) {
    if (!polynomial_only && c.has("input", "measure")) {
        const auto path = c.file("input", "measure");
        const bool is_signed = c.flag("input", "signed", false);
        return [path, is_signed] {
            Source s;
            if (path.extension() == ".csv") {
                std::ifstream in(path);
                s.measure = read_csv(in, is_signed);
            } else {
                try {
                    s.measure = discrete_measure_from_json(nlohmann::json::parse(read_file(path)));
                } catch (const nlohmann::json::exception& e) {
                    throw ValidationError("bad measure JSON " + path.string() + ": " + e.what());
                }
            }
            return s;
        };
    }
    const auto h = read_polynomial(c);
    const auto res = read_nodal(c, ctx);
    const std::size_t levels = c.count("nodal", "levels", 1);
    const auto center = c.point("region", "center", std::vector<double>(h.dim() + 1, 0.0));
    const double radius = c.real("region", "radius", 1.0);
    require(center.dim() == h.dim(), "region center dimension must match the polynomial");
    require(levels >= 1, "nodal levels must be >= 1");
    return [=] {
        Source s;
        s.nodal = levels == 1 ? nodal_trace(h, Cylinder(center, radius), res)
                              : nodal_trace_multiscale(h, center, radius, levels, res);
        s.measure = caloric_measure_from_nodal(*s.nodal);
        return s;
    };
}

inline DomainPtr read_domain(Config& c) {
    const std::string type = c.text("domain", "type", "half-space");
    DomainPtr d;
    if (type == "half-space") {
        d = DomainSpec::half_space(c.vec("domain", "normal", {1.0, 0.0}), c.real("domain", "offset", 0.0));
    } else if (type == "slab") {
        d = DomainSpec::slab(c.vec("domain", "normal", {1.0, 0.0}), c.real("domain", "lo", -1.0),
                             c.real("domain", "hi", 1.0));
    } else if (type == "time-slab") {
        d = DomainSpec::time_slab(c.count("domain", "n", 2), c.real("domain", "lo", 0.0),
                                  c.real("domain", "hi", std::numeric_limits<double>::infinity()));
    } else if (type == "box") {
        d = DomainSpec::box(c.vec("domain", "center", {0.0, 0.0}), c.real("domain", "radius", 1.0),
                            c.real("domain", "t_lo", -1.0), c.real("domain", "t_hi", 0.0));
    } else if (type == "point") {
        d = DomainSpec::point(c.point("domain", "at", {0.0, 0.0, 0.0}), c.real("domain", "tol", 0.0));
    } else if (type == "sign-set") {
        const auto h = read_polynomial(c);
        d = DomainSpec::sign_set(h, static_cast<int>(c.real("domain", "sign", 1.0)));
    } else {
        throw ValidationError("unknown domain type '" + type +
                              "' (half-space, slab, time-slab, box, point, sign-set)");
    }
    if (c.flag("domain", "complement", false)) d = DomainSpec::complement(d);
    if (c.has("domain", "t_min")) d = d->with_t_min(c.real("domain", "t_min", 0.0));
    return d;
}

inline WalkConfig read_walk(Config& c, const Context& ctx, std::size_t n_default = 10000) {
    WalkConfig w;
    w.N_walks = c.count("walk", "N", n_default);
    w.dt = c.real("walk", "dt", w.dt);
    w.max_time_depth = c.real("walk", "max_time_depth", w.max_time_depth);
    w.boundary_tol = c.real("walk", "boundary_tol", w.boundary_tol);
    w.adaptive = c.flag("walk", "adaptive", w.adaptive);
    w.kappa = c.real("walk", "kappa", w.kappa);
    w.bridge = c.flag("walk", "bridge", w.bridge);
    w.seed = ctx.seed;
    w.workers = ctx.workers;
    w.validate();
    return w;
}

inline CapacityGrid read_grid(Config& c, const std::string& sec) {
    CapacityGrid g;
    g.space_cells = c.count(sec, "space_cells", g.space_cells);
    g.time_cells = c.count(sec, "time_cells", g.time_cells);
    return g;
}

inline ConeSpec read_cone(Config& c, const std::string& sec, const std::string& key) {
    const std::string kind = c.text(sec, key, "flat");
    const int degree = static_cast<int>(c.count(sec, "degree", 1));
    const Orientation o = orientation_from_string(c.text(sec, "orientation", "caloric"));
    if (kind == "flat") return {ConeKind::Flat, 1, o};
    if (kind == "homogeneous") return ConeSpec::homogeneous(degree, o);
    if (kind == "polynomial") return ConeSpec::polynomial(degree, o);
    throw ValidationError("unknown cone kind '" + kind + "' (flat, homogeneous, polynomial)");
}

inline std::vector<double> read_radii(Config& c, const std::string& sec, const std::vector<double>& def) {
    auto r = c.reals(sec, "radii", def);
    require(!r.empty(), "config key '" + sec + ".radii' lists no radii");
    for (double x : r) require(x > 0.0, "radii must be positive");
    return r;
}

inline std::string join(const std::vector<double>& v, char sep = ';') {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? std::string(1, sep) : "") + fmt(v[i]);
    return s;
}

inline std::string csv_point(const ParaPoint& p) {
    std::string s;
    for (std::size_t i = 0; i < p.dim(); ++i) s += fmt(p.x[i]) + ",";
    return s + fmt(p.t);
}

inline std::string point_header(std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += "x" + std::to_string(i + 1) + ",";
    return s + "t";
}

// ---------------------------------------------------------------- subcommands

using Command = std::function<Outputs(Config&, const Context&)>;

inline Outputs cmd_poly_measure(Config& c, const Context& ctx) {
    const auto load = read_source(c, ctx, true);
    c.finish();
    const auto s = load();
    Outputs o;
    o.results = "atoms,mass,F1,ambiguous_cells,singular_points\n" + std::to_string(s.measure.size()) + "," +
                fmt(s.measure.total_mass()) + "," + fmt(F_r(s.measure, 1.0)) + "," +
                std::to_string(s.nodal->ambiguous_cells) + "," + std::to_string(s.nodal->singular_points) + "\n";
    o.measure = to_json(s.measure);
    o.summary = "atoms " + std::to_string(s.measure.size()) + ", F1 " + fmt(F_r(s.measure, 1.0));
    return o;
}

inline Outputs cmd_fr(Config& c, const Context& ctx) {
    const auto load = read_source(c, ctx);
    const auto radii = read_radii(c, "fr", {1.0});
    const bool has_center = c.has("fr", "center");
    const auto center = has_center ? c.point("fr", "center", {}) : ParaPoint{};
    c.finish();
    const auto s = load();
    require(!s.measure.empty(), "the measure is empty");
    Outputs o;
    o.results = "r,F_r\n";
    for (double r : radii) {
        const double f = F_r(s.measure, r, has_center ? &center : nullptr);
        o.results += fmt(r) + "," + fmt(f) + "\n";
        o.summary += "F_" + fmt(r) + " = " + fmt(f) + " ";
    }
    o.measure = to_json(s.measure);
    return o;
}

inline Outputs cmd_cone_dist(Config& c, const Context& ctx) {
    const auto load = read_source(c, ctx);
    const auto radii = read_radii(c, "cone", {1.0});
    const auto cone = read_cone(c, "cone", "kind");
    ConeSearchOptions opt;
    opt.directions = c.count("cone", "directions", opt.directions);
    opt.flat_angles = c.count("cone", "flat_angles", opt.flat_angles);
    opt.fine_cap = c.count("cone", "fine_cap", opt.fine_cap);
    opt.workers = ctx.workers;
    c.finish();
    const auto s = load();
    Outputs o;
    o.results = "r,distance,F_r,evaluations,best\n";
    for (double r : radii) {
        const auto d = cone_distance(s.measure, r, cone, opt);
        o.results += fmt(r) + "," + fmt(d.value) + "," + fmt(d.F_r_mu) + "," + std::to_string(d.evaluations) + "," +
                     join(d.best) + "\n";
        o.summary += "d_" + fmt(r) + " = " + fmt(d.value) + " ";
    }
    o.measure = to_json(s.measure);
    return o;
}

inline Outputs cmd_blowup(Config& c, const Context& ctx) {
    const auto load = read_source(c, ctx);
    const auto radii = read_radii(c, "blowup", {1.0, 0.5, 0.25});
    const auto center = c.point("blowup", "center", {});
    c.finish();
    const auto s = load();
    require(center.dim() == s.measure.dim(), "blowup center dimension must match the measure");
    const auto seq = tangent_sequence(s.measure, center, radii);
    Outputs o;
    o.results = "r,mass,F1,atoms\n";
    for (std::size_t k = 0; k < radii.size(); ++k)
        o.results += fmt(radii[k]) + "," + fmt(s.measure.mass_in_ball(center, radii[k])) + "," +
                     fmt(F_r(seq[k], 1.0)) + "," + std::to_string(seq[k].size()) + "\n";
    o.measure = to_json(seq.back());
    o.summary = "blow-ups " + std::to_string(seq.size()) + ", last F1 " + fmt(F_r(seq.back(), 1.0));
    return o;
}

inline Outputs cmd_dimension(Config& c, const Context& ctx) {
    const auto load = read_source(c, ctx);
    const auto center = c.point("dimension", "center", {});
    const double lo = c.real("dimension", "r_min", 1e-3), hi = c.real("dimension", "r_max", 1e-1);
    const std::size_t count = c.count("dimension", "count", 9);
    c.finish();
    require(lo > 0.0 && hi > lo && count >= 4, "dimension needs 0 < r_min < r_max and count >= 4");
    std::vector<double> radii;
    for (std::size_t k = 0; k < count; ++k)
        radii.push_back(lo * std::pow(hi / lo, static_cast<double>(k) / static_cast<double>(count - 1)));
    const auto s = load();
    require(center.dim() == s.measure.dim(), "dimension center must match the measure");
    const auto fit = pointwise_dimension(s.measure, center, radii);
    Outputs o;
    o.results = "r,mass,slope,intercept,residual\n";
    for (double r : radii)
        o.results += fmt(r) + "," + fmt(s.measure.mass_in_ball(center, r)) + "," + fmt(fit.slope) + "," +
                     fmt(fit.intercept) + "," + fmt(fit.residual) + "\n";
    o.measure = to_json(s.measure);
    o.summary = "slope " + fmt(fit.slope);
    return o;
}

inline Outputs cmd_capacity(Config& c, const Context& ctx) {
    const std::string shape = c.text("capacity", "shape", "rectangle");
    const auto center = c.point("capacity", "center", {0.0, 0.0, 0.0});
    const double r = c.real("capacity", "r", 1.0);
    const auto grid = read_grid(c, "capacity");
    const std::string kernel = c.text("capacity", "kernel", "gamma");
    RegionLattice lat;
    if (shape == "cylinder") {
        lat = region_lattice(Cylinder(center, r), grid);
    } else {
        const double a = c.real("capacity", "a", shape == "rectangle" ? 1.0 : 0.5);
        if (shape == "rectangle")
            lat = region_lattice(TruncatedCylinder(center, r, a, TruncatedVariant::RectangleAB,
                                                   c.real("capacity", "b", 0.5)),
                                 grid);
        else if (shape == "backward")
            lat = region_lattice(TruncatedCylinder(center, r, a, TruncatedVariant::BackwardR), grid);
        else if (shape == "forward")
            lat = region_lattice(TruncatedCylinder(center, r, a, TruncatedVariant::ForwardHat), grid);
        else
            throw ValidationError("unknown capacity shape '" + shape + "' (rectangle, backward, forward, cylinder)");
    }
    std::optional<std::pair<DomainPtr, WalkConfig>> green;
    if (kernel == "green-mc") green.emplace(read_domain(c), read_walk(c, ctx, 2000));
    else require(kernel == "gamma", "unknown capacity kernel '" + kernel + "' (gamma, green-mc)");
    c.finish();

    auto inst = region_instance(lat);
    Outputs o;
    DiscreteMeasure eq;
    if (green) {
        std::vector<ParaPoint> atoms;
        for (const auto& p : inst.atoms)
            if (green->first->contains(p)) atoms.push_back(p);
        const auto rc = relative_capacity(*green->first, atoms, inst.constraints, green->second);
        o.results = "value,lower,upper,max_std_error,atoms,constraints,kernel\n" + fmt(rc.value) + "," +
                    fmt(rc.lower) + "," + fmt(rc.upper) + "," + fmt(rc.max_std_error) + "," +
                    std::to_string(atoms.size()) + "," + std::to_string(inst.constraints.size()) + ",green-mc\n";
        o.summary = "capacity " + fmt(rc.value) + " in [" + fmt(rc.lower) + ", " + fmt(rc.upper) + "]";
    } else {
        const auto res = thermal_capacity(inst, ctx.workers);
        o.results = "value,dual_bound,max_potential,atoms,constraints,kernel\n" + fmt(res.value) + "," +
                    fmt(res.dual_bound) + "," + fmt(res.max_potential) + "," + std::to_string(inst.atoms.size()) +
                    "," + std::to_string(inst.constraints.size()) + ",gamma\n";
        for (std::size_t i = 0; i < inst.atoms.size(); ++i)
            if (res.weights[i] > 0.0) eq.add(inst.atoms[i], res.weights[i]);
        o.summary = "capacity " + fmt(res.value);
    }
    o.measure = to_json(eq);
    return o;
}

inline Outputs cmd_cdc(Config& c, const Context& ctx) {
    const auto omega = read_domain(c);
    const auto xi = c.point("cdc", "xi", std::vector<double>(omega->dim() + 1, 0.0));
    const auto radii = read_radii(c, "cdc", {0.5, 1.0});
    const double a = c.real("cdc", "a", 0.5);
    const std::string dir = c.text("cdc", "direction", "backward");
    require(dir == "backward" || dir == "forward", "cdc direction must be backward or forward");
    const auto grid = read_grid(c, "cdc");
    c.finish();
    const auto rows = cdc_ratios(*omega, xi, radii, a, dir == "backward" ? CdcDirection::Backward : CdcDirection::Forward,
                                 grid, ctx.workers);
    Outputs o;
    std::ostringstream os;
    write_cdc_csv(os, rows);
    o.results = os.str();
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& r : rows) lo = std::min(lo, r.ratio);
    o.summary = "min ratio " + fmt(lo);
    return o;
}

inline Outputs cmd_caloric_mc(Config& c, const Context& ctx) {
    const auto omega = read_domain(c);
    const auto pole = c.point("caloric_mc", "pole", {});
    const auto walk = read_walk(c, ctx);
    c.finish();
    const auto s = simulate_caloric_measure(*omega, pole, walk);
    Outputs o;
    o.results = "exits,truncated,exit_mass,truncated_mass,steps,atoms\n" + std::to_string(s.exits) + "," +
                std::to_string(s.truncated) + "," + fmt(s.exit_mass) + "," + fmt(s.truncated_mass) + "," +
                std::to_string(s.steps) + "," + std::to_string(s.measure.size()) + "\n";
    o.measure = to_json(s.measure);
    o.summary = "exit mass " + fmt(s.exit_mass) + ", truncated " + fmt(s.truncated_mass);
    return o;
}

inline Outputs cmd_green(Config& c, const Context& ctx) {
    const auto omega = read_domain(c);
    const auto pole = c.point("green", "pole", {});
    const auto queries = c.points("green", "queries");
    const auto walk = read_walk(c, ctx);
    c.finish();
    const auto est = estimate_green(*omega, pole, queries, walk);
    Outputs o;
    o.results = point_header(pole.dim()) + ",value,std_error\n";
    for (std::size_t k = 0; k < queries.size(); ++k)
        o.results += csv_point(queries[k]) + "," + fmt(est[k].value) + "," + fmt(est[k].std_error) + "\n";
    o.summary = std::to_string(queries.size()) + " Green values";
    return o;
}

inline Outputs cmd_bourgain(Config& c, const Context& ctx) {
    const auto omega = read_domain(c);
    const auto xi = c.point("bourgain", "xi", std::vector<double>(omega->dim() + 1, 0.0));
    const auto radii = read_radii(c, "bourgain", {0.5, 1.0});
    const double a = c.real("bourgain", "a", 0.5), M = c.real("bourgain", "M", 2.0);
    const std::size_t pts = c.count("bourgain", "grid_points", 3);
    const auto grid = read_grid(c, "bourgain");
    const auto walk = read_walk(c, ctx, 4000);
    c.finish();
    Outputs o;
    o.results = "r,min_hit_prob,cap_ratio,quotient,vacuous,points\n";
    double q = std::numeric_limits<double>::infinity();
    for (double r : radii) {
        const auto b = bourgain_check(*omega, xi, r, a, M, walk, pts, grid);
        o.results += fmt(r) + "," + fmt(b.min_hit_prob) + "," + fmt(b.cap_ratio) + "," + fmt(b.quotient) + "," +
                     (b.vacuous ? "1" : "0") + "," + std::to_string(b.points) + "\n";
        if (!b.vacuous) q = std::min(q, b.quotient);
    }
    o.summary = std::isfinite(q) ? "min quotient " + fmt(q) : std::string("vacuous");
    return o;
}

inline TransportInstance read_instance(Config& c) {
    const auto path = c.file("transport", "instance");
    const auto j = nlohmann::json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) throw ValidationError("bad transport JSON " + path.string());
    return transport_instance_from_json(j);
}

inline Outputs cmd_kr(Config& c, const Context&) {
    const auto inst = read_instance(c);
    c.finish();
    const auto res = kr_norm_dual(inst);
    Outputs o;
    o.results = "i,w,potential\n";
    for (std::size_t i = 0; i < inst.mu.size(); ++i)
        o.results += std::to_string(i) + "," + fmt(inst.mu[i].w) + "," + fmt(res.potential[i]) + "\n";
    o.measure = to_json(inst);
    o.summary = "kr " + fmt(res.value);
    return o;
}

inline Outputs cmd_wb1(Config& c, const Context&) {
    const auto inst = read_instance(c);
    c.finish();
    const auto res = wb1_signed(inst);
    Outputs o;
    std::ostringstream os;
    write_plan_csv(os, res.plan);
    o.results = os.str();
    o.measure = to_json(inst);
    o.summary = "wb1 " + fmt(res.value);
    return o;
}

inline Outputs cmd_two_phase(Config& c, const Context& ctx) {
    const std::string preset = c.text("two_phase", "preset", "half-space");
    require(preset == "half-space", "unknown two-phase preset '" + preset + "' (half-space)");
    const auto pole_plus = c.point("two_phase", "pole_plus", {1.0, 0.0, 1.0});
    const auto pole_minus = c.point("two_phase", "pole_minus", {-1.0, 0.0, 1.0});
    const auto radii = read_radii(c, "two_phase", {0.4, 0.2, 0.1});
    TwoPhaseOptions opt;
    opt.split = static_cast<unsigned>(c.count("two_phase", "split", 0));
    opt.level_ratio = c.real("two_phase", "level_ratio", opt.level_ratio);
    opt.slope_radii = c.count("two_phase", "slope_radii", opt.slope_radii);
    opt.cone.workers = opt.theta.workers = ctx.workers;
    const auto walk = read_walk(c, ctx, 100000);
    c.finish();
    require(pole_plus.dim() == 2 && pole_minus.dim() == 2, "the half-space preset lives in R^{2+1}");
    const auto plus = DomainSpec::half_space(SpatialVec{1.0, 0.0});
    const auto minus = DomainSpec::half_space(SpatialVec{-1.0, 0.0});
    const ParaPoint xi = ParaPoint::origin(2);
    const auto res = two_phase_blowup_experiment(*plus, *minus, pole_plus, pole_minus, xi, radii, walk, opt);
    // caloric density of a half-space on its wall: |p1| Gamma(p - xi) / tau
    const auto density = [&](const ParaPoint& p) { return std::abs(p.x[0]) * gamma(p - xi) / (p.t - xi.t); };
    const double poisson = density(pole_minus) / density(pole_plus);
    Outputs o;
    o.results =
        "r,mass_plus,mass_minus,mass_ratio,poisson_ratio,F1,cone_distance,theta,dimension_slope,atoms_plus,"
        "atoms_minus\n";
    for (const auto& r : res.records)
        o.results += fmt(r.r) + "," + fmt(r.mass_plus) + "," + fmt(r.mass_minus) + "," + fmt(r.mass_ratio) + "," +
                     fmt(poisson) + "," + fmt(r.F1) + "," + fmt(r.cone_distance) + "," + fmt(r.theta) + "," +
                     fmt(r.dimension_slope) + "," + std::to_string(r.atoms_plus) + "," +
                     std::to_string(r.atoms_minus) + "\n";
    o.measure = to_json(res.plus.measure);
    const auto& last = res.records.back();
    o.summary = "r " + fmt(last.r) + ": theta " + fmt(last.theta) + ", cone distance " + fmt(last.cone_distance) +
                ", slope " + fmt(last.dimension_slope);
    return o;
}

inline Outputs cmd_flatness(Config& c, const Context& ctx) {
    std::function<PointCloudSet()> cloud;
    if (c.has("input", "cloud")) {
        const auto path = c.file("input", "cloud");
        cloud = [path] {
            try {
                return point_cloud_from_json(nlohmann::json::parse(read_file(path)));
            } catch (const nlohmann::json::exception& e) {
                throw ValidationError("bad point cloud JSON " + path.string() + ": " + e.what());
            }
        };
    } else {
        const auto load = read_source(c, ctx, true);
        cloud = [load] { return nodal_cloud(*load().nodal); };
    }
    const auto radii = read_radii(c, "flatness", {1.0});
    const auto family = read_cone(c, "flatness", "family");
    const bool has_center = c.has("flatness", "center");
    const auto center_cfg = has_center ? c.point("flatness", "center", {}) : ParaPoint{};
    ThetaOptions opt;
    opt.normals = c.count("flatness", "normals", opt.normals);
    opt.directions = c.count("flatness", "directions", opt.directions);
    opt.workers = ctx.workers;
    c.finish();
    const auto a = cloud();
    require(!a.empty(), "the point cloud is empty");
    const ParaPoint center = has_center ? center_cfg : ParaPoint::origin(a.dim());
    Outputs o;
    o.results = "r,theta,evaluations,best\n";
    for (double r : radii) {
        const auto t = theta_flatness(a, center, r, family, opt);
        o.results += fmt(r) + "," + fmt(t.value) + "," + std::to_string(t.evaluations) + "," + join(t.best) + "\n";
        o.summary += "theta_" + fmt(r) + " = " + fmt(t.value) + " ";
    }
    return o;
}

inline Outputs cmd_vmo(Config& c, const Context& ctx) {
    // log of the Poisson kernel |grad h| against surface measure on the regular part
    const auto load = read_source(c, ctx, true);
    const auto radii = read_radii(c, "vmo", {1.0, 0.5, 0.25});
    const bool has_center = c.has("vmo", "center");
    const auto center_cfg = has_center ? c.point("vmo", "center", {}) : ParaPoint{};
    c.finish();
    const auto s = load();
    DiscreteMeasure sigma;
    std::vector<double> k;
    for (const auto& p : s.nodal->points)
        if (p.cls == NodalClass::Rx && p.weight > 0.0 && p.grad_norm > 0.0) {
            sigma.add(p.p, p.weight);
            k.push_back(p.grad_norm);
        }
    require(!sigma.empty(), "the nodal set has no regular points");
    const ParaPoint center = has_center ? center_cfg : ParaPoint::origin(sigma.dim());
    Outputs o;
    o.results = "r,ratio\n";
    for (double r : radii) {
        const double v = vmo_ratio(k, sigma, center, r);
        o.results += fmt(r) + "," + fmt(v) + "\n";
        o.summary += "ratio_" + fmt(r) + " = " + fmt(v) + " ";
    }
    o.measure = to_json(s.measure);
    return o;
}

inline const std::map<std::string, Command>& commands() {
    static const std::map<std::string, Command> table{
        {"poly-measure", cmd_poly_measure}, {"fr", cmd_fr},
        {"cone-dist", cmd_cone_dist},       {"blowup", cmd_blowup},
        {"dimension", cmd_dimension},       {"capacity", cmd_capacity},
        {"cdc", cmd_cdc},                   {"caloric-mc", cmd_caloric_mc},
        {"green", cmd_green},               {"bourgain", cmd_bourgain},
        {"kr", cmd_kr},                     {"wb1", cmd_wb1},
        {"two-phase", cmd_two_phase},       {"flatness", cmd_flatness},
        {"vmo", cmd_vmo},
    };
    return table;
}

// ---------------------------------------------------------------- driver

inline std::string manifest(const std::string& sub, const Context& ctx, const Config& cfg,
                            const std::map<std::string, std::string>& outputs) {
    std::ostringstream os;
    os << "caloric-lab manifest\n";
    os << "subcommand=" << sub << "\n";
    os << "seed=" << ctx.seed << "\n";
    os << "workers=" << ctx.workers << "\n";
    os << "config=" << cfg.path().string() << "\n";
    os << "config_sha1=" << sha1_hex(cfg.text()) << "\n";
    for (const auto& p : cfg.inputs()) os << "input=" << p.string() << " sha1=" << sha1_hex(read_file(p)) << "\n";
    os << "[resolved]\n";
    for (const auto& [k, v] : cfg.resolved()) os << k << "=" << v << "\n";
    os << "[outputs]\n";
    for (const auto& [name, bytes] : outputs) os << name << " sha1=" << sha1_hex(bytes) << "\n";
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    os << "timestamp=" << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << "\n";
    return os.str();
}

inline void write_text(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + p.string());
    out << bytes;
}

/// Exit codes: 0 success, 1 validation error, 2 numerical failure.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"caloric-lab: experiments on caloric measures, capacities and transport"};
    app.require_subcommand(1, 1);
    app.fallthrough();
    std::string config, out_dir = "caloric-out";
    Context ctx;
    app.add_option("--config", config, "INI config file")->required();
    app.add_option("--seed", ctx.seed, "random seed");
    app.add_option("--workers", ctx.workers, "worker threads")->check(CLI::Range(1u, 1024u));
    app.add_option("--out", out_dir, "output directory");
    for (const auto& [name, fn] : commands()) app.add_subcommand(name, "run the " + name + " pipeline");
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    const std::string sub = app.get_subcommands().front()->get_name();
    try {
        Config cfg{fs::path(config)};
        const Outputs o = commands().at(sub)(cfg, ctx);
        const std::map<std::string, std::string> files{{"results.csv", o.results},
                                                       {"measure.json", o.measure.dump() + "\n"}};
        fs::create_directories(out_dir);
        for (const auto& [name, bytes] : files) write_text(fs::path(out_dir) / name, bytes);
        write_text(fs::path(out_dir) / "manifest.txt", manifest(sub, ctx, cfg, files));
        out << sub << ": " << trim(o.summary) << "\n";
        return 0;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace caloric::lab
