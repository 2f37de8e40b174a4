#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "caloric/tangent.hpp"
#include "oracles.hpp"

using namespace caloric;

namespace {

ParaPoint pt(std::initializer_list<double> x, double t) { return {SpatialVec(x), t}; }

CaloricPolynomial make(std::initializer_list<std::tuple<std::initializer_list<int>, int, double>> terms) {
    Polynomial p(2);
    for (const auto& [a, l, c] : terms) p.add(a, l, c);
    return {p, Orientation::Caloric};
}

CaloricPolynomial x1() { return make({{{1, 0}, 0, 1.0}}); }
CaloricPolynomial x1x2() { return make({{{1, 1}, 0, 1.0}}); }
// x1 + eps (x1^2 + 2t) with eps = 1/2
CaloricPolynomial bent() { return make({{{1, 0}, 0, 1.0}, {{2, 0}, 0, 0.5}, {{0, 0}, 1, 1.0}}); }

DiscreteMeasure random_measure(std::size_t count, std::uint64_t seed, double scale = 1.2) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale), w(0.0, 1.0);
    DiscreteMeasure m;
    for (std::size_t i = 0; i < count; ++i) m.add(pt({u(rng), u(rng)}, u(rng) * scale), w(rng));
    return m;
}

// multiscale cell-centred sample of Lebesgue measure on C_1 (n = 2)
DiscreteMeasure volume_measure(std::size_t levels, std::size_t cells) {
    DiscreteMeasure m;
    for (std::size_t k = 0; k < levels; ++k) {
        const double r = std::pow(0.5, static_cast<double>(k));
        const double hs = 2 * r / cells, ht = 2 * r * r / cells;
        for (double a : cell_centres(-r, r, cells))
            for (double b : cell_centres(-r, r, cells))
                for (double t : cell_centres(-r * r, r * r, cells)) {
                    const ParaPoint p = pt({a, b}, t);
                    if (para_norm(p) >= r) continue;
                    if (k + 1 < levels && para_norm(p) < r / 2) continue;
                    m.add(p, hs * hs * ht);
                }
    }
    return m;
}

double exact_dist(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double r) {
    std::vector<double> mass, cap;
    std::vector<ParaPoint> pts;
    for (const auto& a : mu.atoms())
        if (para_norm(a.p) < r) { pts.push_back(a.p); mass.push_back(a.w); }
    for (const auto& a : nu.atoms())
        if (para_norm(a.p) < r) { pts.push_back(a.p); mass.push_back(-a.w); }
    for (const auto& p : pts) cap.push_back(std::max(0.0, r - para_norm(p)));
    return oracle::lipschitz_dual(mass, cap, [&](std::size_t i, std::size_t j) { return para_dist(pts[i], pts[j]); });
}

}  // namespace

// ---------------------------------------------------------------- F_r

TEST(Fr, DiracValues) {
    DiscreteMeasure d;
    d.add(ParaPoint::origin(2), 1.0);
    EXPECT_DOUBLE_EQ(F_r(d, 2.0), 2.0);
    DiscreteMeasure far;
    far.add(pt({3.0, 0.0}, 0.0), 1.0);
    EXPECT_EQ(F_r(far, 2.0), 0.0);
    DiscreteMeasure s(true);
    s.add(ParaPoint::origin(2), -1.0);
    EXPECT_THROW((void)F_r(s, 1.0), ValidationError);
}

// Layer cake on the plane {x1 = 0}: the area of {max(|x2|, sqrt|t|) <= m} is 4 m^3, so
// F_1 = int_0^1 12 m^2 (1 - m) dm = 1, and F_2 = 2^{n+k+1} F_1 = 16.
TEST(Fr, FlatMeasureLayerCake) {
    const auto w1 = caloric_measure_poly(x1(), Cylinder(ParaPoint::origin(2), 1.0), {400, 400});
    EXPECT_NEAR(F_r(w1, 1.0), 1.0, 0.01);
    const auto w2 = caloric_measure_poly(x1(), Cylinder(ParaPoint::origin(2), 2.0), {400, 400});
    EXPECT_NEAR(F_r(w2, 2.0), 16.0, 0.16);
    const FlatMeasure flat{AdmissiblePlane(SpatialVec{1.0, 0.0}, ParaPoint::origin(2)), 1.0};
    EXPECT_NEAR(F_r(flat.discretize(1.0, 300, 600), 1.0), 1.0, 0.005);
}

TEST(Fr, Sandwich) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto m = random_measure(200, seed);
        for (double r : {0.3, 0.7, 1.5}) {
            const double f = F_r(m, r);
            EXPECT_LE(r / 2 * m.mass_in_ball(ParaPoint::origin(2), r / 2), f + 1e-12);
            EXPECT_LE(f, r * m.mass_in_ball(ParaPoint::origin(2), r) + 1e-12);
        }
    }
}

TEST(Fr, ScalingUnderBlowUp) {
    const auto m = random_measure(300, 4);
    for (double r : {0.2, 0.9, 1.7})
        EXPECT_NEAR(F_r(m, r), r * F_r(blow_up(m, ParaPoint::origin(2), r, 1.0), 1.0), 1e-12);
}

TEST(Fr, HomogeneityLaw) {
    // F_{r1}(omega_h) / F_{r2}(omega_h) = (r1/r2)^{n+k+1}
    for (const auto& [h, k] : {std::pair{x1(), 1}, std::pair{x1x2(), 2}}) {
        const auto m = caloric_measure_poly(h, Cylinder(ParaPoint::origin(2), 2.0), {400, 400});
        for (double r1 : {1.0, 0.5}) {
            const double expect = std::pow(r1 / 2.0, 2 + k + 1);
            EXPECT_NEAR(F_r(m, r1) / F_r(m, 2.0), expect, 0.02 * expect) << "k=" << k << " r1=" << r1;
        }
    }
}

TEST(Fr, LowestPartComparability) {
    const auto h = bent();
    const auto hm = lowest_part(h).second;
    double prev = 10.0;
    for (double r : {0.4, 0.1, 0.025}) {
        const Cylinder c(ParaPoint::origin(2), r);
        const double ratio = F_r(caloric_measure_poly(h, c, {200, 200}), r) /
                             F_r(caloric_measure_poly(hm, c, {200, 200}), r);
        EXPECT_GE(ratio, 0.5);
        EXPECT_LE(ratio, 2.0);
        EXPECT_LE(std::abs(ratio - 1.0), prev + 1e-3);
        prev = std::abs(ratio - 1.0);
    }
    EXPECT_LT(prev, 0.05);
}

// ---------------------------------------------------------------- d_{C_r}

TEST(DistMeasures, Examples) {
    DiscreteMeasure a, b, zero;
    a.add(ParaPoint::origin(2), 1.0);
    EXPECT_NEAR(dist_measures(a, a, 1.0).value, 0.0, 1e-12);
    EXPECT_NEAR(dist_measures(a, zero, 1.0).value, 1.0, 1e-9);
    b.add(pt({0.2, 0.0}, 0.0), 1.0);
    EXPECT_NEAR(dist_measures(a, b, 1.0).value, 0.2, 1e-9);
}

TEST(DistMeasures, DistanceToZeroIsFr) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto m = random_measure(40, seed);
        for (double r : {0.5, 1.0}) EXPECT_NEAR(dist_measures(m, DiscreteMeasure{}, r).value, F_r(m, r), 1e-9);
    }
}

TEST(DistMeasures, CapNeverExceedsBoundaryDistance) {
    const auto m = random_measure(500, 2);
    for (const auto& a : m.atoms())
        EXPECT_LE(norm_cap(a.p, ParaPoint::origin(2), 1.0), boundary_distance(a.p, ParaPoint::origin(2), 1.0) + 1e-15);
    EXPECT_NEAR(boundary_distance(pt({0.0, 0.0}, 0.99), ParaPoint::origin(2), 1.0), 0.1, 1e-12);
    EXPECT_NEAR(norm_cap(pt({0.0, 0.0}, 0.99), ParaPoint::origin(2), 1.0), 1.0 - std::sqrt(0.99), 1e-12);
}

TEST(DistMeasures, MatchesDenseLipschitzProgram) {
    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
        const auto mu = random_measure(3 + seed % 9, seed), nu = random_measure(2 + seed % 7, 100 + seed);
        for (double r : {0.8, 1.3}) {
            const double v = dist_measures(mu, nu, r).value;
            EXPECT_NEAR(v, exact_dist(mu, nu, r), 1e-7) << "seed " << seed;
            EXPECT_NEAR(v, dist_measures(nu, mu, r).value, 1e-8);
        }
    }
}

TEST(DistMeasures, BinnedSolveStaysWithinCellDiameter) {
    const auto mu = random_measure(500, 3, 1.0), nu = random_measure(500, 4, 1.0);
    DistOptions wide, narrow;
    wide.cap = 100000;
    narrow.cap = 300;
    const auto exact = dist_measures(mu, nu, 1.0, wide);
    const auto binned = dist_measures(mu, nu, 1.0, narrow);
    ASSERT_TRUE(binned.binned);
    ASSERT_FALSE(exact.binned);
    // moving mass inside one cell changes each side by at most (cell diameter) x (mass)
    const double diam = binned.bin_size * std::sqrt(2.0);
    const double mass = mu.mass_in_ball(ParaPoint::origin(2), 1.0) + nu.mass_in_ball(ParaPoint::origin(2), 1.0);
    EXPECT_LE(std::abs(binned.value - exact.value), diam * mass);
}

TEST(DistMeasures, MetrizesJitterConvergence) {
    const auto mu = random_measure(150, 8, 0.9);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g(0.0, 1.0);
    double prev = 1e9;
    for (double eps : {0.1, 0.03, 0.01, 0.001}) {
        DiscreteMeasure j;
        double moved = 0.0;  // cost of the coupling that keeps every atom paired with its image
        for (const auto& a : mu.atoms()) {
            j.add(pt({a.p.x[0] + eps * g(rng), a.p.x[1] + eps * g(rng)}, a.p.t + eps * eps * g(rng)), a.w);
            moved += a.w * para_dist(a.p, j.atoms().back().p);
        }
        const double d = dist_measures(mu, j, 1.0).value;
        EXPECT_LE(d, moved + 1e-12);
        EXPECT_LT(d, prev);
        prev = d;
    }
    EXPECT_LT(prev, 0.005 * mu.total_mass());
}

TEST(DistMeasures, RejectsSignedInput) {
    DiscreteMeasure s(true);
    s.add(ParaPoint::origin(2), 1.0);
    EXPECT_THROW((void)dist_measures(s, s, 1.0), ValidationError);
}

// ---------------------------------------------------------------- cones

TEST(ConeDistance, FlatMeasureIsInTheCone) {
    const auto w = caloric_measure_poly(x1(), Cylinder(ParaPoint::origin(2), 1.0), {200, 200});
    const auto res = cone_distance(w, 1.0, ConeSpec::flat());
    EXPECT_LE(res.value, 0.02);
    ASSERT_EQ(res.best.size(), 2u);
    EXPECT_NEAR(std::abs(res.best[0]), 1.0, 0.01);
}

TEST(ConeDistance, RotatedPlaneFindsItsNormal) {
    const double th = 0.7;
    const FlatMeasure f{AdmissiblePlane(SpatialVec{std::cos(th), std::sin(th)}, ParaPoint::origin(2)), 2.5};
    const auto res = cone_distance(f.discretize(1.0, 200, 400), 1.0, ConeSpec::flat());
    EXPECT_LE(res.value, 0.02);
    EXPECT_NEAR(std::abs(res.best[0] * std::cos(th) + res.best[1] * std::sin(th)), 1.0, 1e-3);
}

// Signed test functions bound d(mu, nu) by F_1(mu) + F_1(nu) = 2 after normalization; the sharper
// bound 1 needs nonnegative test functions and fails here by a few percent on some inputs.
TEST(ConeDistance, BoundedOnCaloricMeasures) {
    ConeSearchOptions opt;
    opt.flat_angles = 32;
    opt.refine_seeds = 1;
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 6; ++trial) {
        Polynomial p(2);
        for (int deg = 1; deg <= 3; ++deg)
            for (const auto& m : spatial_monomials(2, deg)) p.add(m, u(rng));
        const auto h = heat_extend(p, Orientation::Caloric);
        const auto w = caloric_measure_poly(h, Cylinder(ParaPoint::origin(2), 1.0), {120, 120});
        if (F_r(w, 1.0) <= 0.0) continue;
        EXPECT_LE(cone_distance(w, 1.0, ConeSpec::flat(), opt).value, 2.0) << "trial " << trial;
    }
}

TEST(ConeDistance, TransverseMeasureIsFarFromPlanes) {
    // omega_{x1 x2}: two orthogonal planes, not close to any single one
    const auto w = caloric_measure_poly(x1x2(), Cylinder(ParaPoint::origin(2), 1.0), {200, 200});
    EXPECT_GT(cone_distance(w, 1.0, ConeSpec::flat()).value, 0.1);
    EXPECT_LE(cone_distance(w, 1.0, ConeSpec::homogeneous(2)).value, 0.05);
}

TEST(ConeDistance, ScaleInvarianceOfTheDefinition) {
    // d_r(mu) = d_1(T_{0,r} mu)
    const auto w = caloric_measure_poly(bent(), Cylinder(ParaPoint::origin(2), 0.5), {200, 200});
    const double a = cone_distance(w, 0.5, ConeSpec::flat()).value;
    const double b = cone_distance(blow_up(w, ParaPoint::origin(2), 0.5, 3.0), 1.0, ConeSpec::flat()).value;
    EXPECT_NEAR(a, b, 1e-9);
}

TEST(ConeDistance, TangentCollapseOfPerturbedPlane) {
    double prev = 2.0;
    for (double r : {1.0, 0.3, 0.1, 0.03}) {
        const auto w = caloric_measure_poly(bent(), Cylinder(ParaPoint::origin(2), r), {200, 200});
        const double d = cone_distance(w, r, ConeSpec::flat()).value;
        EXPECT_LT(d, prev) << "r=" << r;
        prev = d;
    }
    EXPECT_LE(prev, 0.05);
}

TEST(ConeDistance, ContinuityUnderJitter) {
    const auto w = caloric_measure_poly(bent(), Cylinder(ParaPoint::origin(2), 1.0), {120, 120});
    const double base = cone_distance(w, 1.0, ConeSpec::flat()).value;
    std::mt19937_64 rng(6);
    std::normal_distribution<double> g(0.0, 1.0);
    double prev = 1.0;
    for (double eps : {0.05, 0.01, 0.002}) {
        DiscreteMeasure j;
        for (const auto& a : w.atoms()) j.add(pt({a.p.x[0] + eps * g(rng), a.p.x[1] + eps * g(rng)}, a.p.t), a.w);
        const double gap = std::abs(cone_distance(j, 1.0, ConeSpec::flat()).value - base);
        EXPECT_LE(gap, std::max(prev, 0.01));
        prev = gap;
    }
    EXPECT_LE(prev, 0.01);
}

TEST(ConeDistance, RejectsEmptyCylinder) {
    DiscreteMeasure far;
    far.add(pt({5.0, 0.0}, 0.0), 1.0);
    EXPECT_THROW((void)cone_distance(far, 1.0, ConeSpec::flat()), ValidationError);
}

TEST(SphereDirections, UnitAndSignNormalized) {
    for (std::size_t d : {2u, 3u, 5u}) {
        const auto dirs = sphere_directions(d, 100);
        ASSERT_EQ(dirs.size(), 100u);
        for (const auto& v : dirs) {
            double s = 0.0;
            for (double x : v) s += x * x;
            EXPECT_NEAR(s, 1.0, 1e-12);
            const auto lead = std::find_if(v.begin(), v.end(), [](double x) { return x != 0.0; });
            ASSERT_NE(lead, v.end());
            EXPECT_GT(*lead, 0.0);
        }
        EXPECT_EQ(sphere_directions(d, 100), dirs);
    }
}

// ---------------------------------------------------------------- blow-ups

TEST(BlowUp, IdentityAndMass) {
    const auto m = random_measure(100, 3);
    const auto same = blow_up(m, ParaPoint::origin(2), 1.0, 1.0);
    for (std::size_t i = 0; i < m.size(); ++i) EXPECT_EQ(same.atoms()[i].p, m.atoms()[i].p);
    const ParaPoint c = pt({0.2, -0.1}, 0.05);
    for (double r : {0.3, 0.8})
        EXPECT_NEAR(blow_up(m, c, r, 1.0).mass_in_ball(ParaPoint::origin(2), 1.0), m.mass_in_ball(c, r), 1e-12);
}

TEST(BlowUp, HomogeneousCaloricMeasure) {
    const auto w = caloric_measure_from_nodal(nodal_trace_multiscale(x1x2(), ParaPoint::origin(2), 1.0, 6, {200, 200}));
    const double r = 0.5;
    const auto b = blow_up(w, ParaPoint::origin(2), r, std::pow(r, -4.0));
    for (double s : {0.3, 0.6, 1.0})
        EXPECT_NEAR(b.mass_in_ball(ParaPoint::origin(2), s), w.mass_in_ball(ParaPoint::origin(2), s),
                    0.02 * w.mass_in_ball(ParaPoint::origin(2), s));
}

TEST(TangentSequence, UnitMassAndConstancyForFlat) {
    const auto w = caloric_measure_poly(x1(), Cylinder(ParaPoint::origin(2), 1.0), {400, 400});
    const auto seq = tangent_sequence(w, ParaPoint::origin(2), {0.8, 0.4, 0.2});
    for (const auto& m : seq) EXPECT_NEAR(m.mass_in_ball(ParaPoint::origin(2), 1.0), 1.0, 1e-12);
    EXPECT_LT(dist_measures(seq[0], seq[2], 1.0).value, 0.03);
    DiscreteMeasure far;
    far.add(pt({5.0, 0.0}, 0.0), 1.0);
    EXPECT_THROW((void)tangent_sequence(far, ParaPoint::origin(2), {1.0}), NumericalError);
}

TEST(TangentSequence, PerturbedPlaneConvergesToFlat) {
    const auto flat = caloric_measure_poly(x1(), Cylinder(ParaPoint::origin(2), 1.0), {200, 200});
    const auto flat_n = flat.scaled(1.0 / flat.mass_in_ball(ParaPoint::origin(2), 1.0));
    double prev = 1e9;
    for (double r : {0.5, 0.1, 0.02}) {
        const auto w = caloric_measure_poly(bent(), Cylinder(ParaPoint::origin(2), r), {200, 200});
        const auto seq = tangent_sequence(w, ParaPoint::origin(2), {r});
        const double d = dist_measures(seq[0], flat_n, 1.0).value;
        EXPECT_LT(d, prev);
        prev = d;
    }
    EXPECT_LT(prev, 0.03);
}

TEST(Density, BoundedRatiosAtOrigin) {
    // omega_h(C_r) / r^{n+m} with h_m = x1 stays comparable to omega_{x1}(C_1) = 4
    const auto set = nodal_trace_multiscale(bent(), ParaPoint::origin(2), 0.5, 8, {120, 120});
    const auto w = caloric_measure_from_nodal(set);
    double lo = 1e9, hi = 0.0;
    for (double r : {0.4, 0.2, 0.1, 0.05, 0.02, 0.01}) {
        const double d = w.mass_in_ball(ParaPoint::origin(2), r) / std::pow(r, 3.0);
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    }
    EXPECT_LE(hi / lo, 4.0);
    EXPECT_GT(lo, 1.0);
    EXPECT_LT(hi, 16.0);
}

// ---------------------------------------------------------------- dimension, VMO

TEST(PointwiseDimension, FlatAndQuadraticCaloricMeasures) {
    const std::vector<double> radii{1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 5e-2, 1e-1};
    const auto w1 = caloric_measure_from_nodal(nodal_trace_multiscale(x1(), ParaPoint::origin(2), 0.2, 9, {100, 100}));
    const auto f1 = pointwise_dimension(w1, ParaPoint::origin(2), radii);
    EXPECT_NEAR(f1.slope, 3.0, 0.05);
    const auto w2 = caloric_measure_from_nodal(nodal_trace_multiscale(x1x2(), ParaPoint::origin(2), 0.2, 9, {100, 100}));
    const auto f2 = pointwise_dimension(w2, ParaPoint::origin(2), radii);
    EXPECT_NEAR(f2.slope, 4.0, 0.1);
}

TEST(PointwiseDimension, VolumeMeasure) {
    const auto v = volume_measure(8, 24);
    const auto f = pointwise_dimension(v, ParaPoint::origin(2), {0.01, 0.03, 0.1, 0.3, 1.0});
    EXPECT_NEAR(f.slope, 4.0, 0.05);
}

TEST(PointwiseDimension, Validation) {
    const auto m = random_measure(10, 1);
    EXPECT_THROW((void)pointwise_dimension(m, ParaPoint::origin(2), {0.1, 0.2, 0.3}), ValidationError);
    EXPECT_THROW((void)pointwise_dimension(m, ParaPoint::origin(2), {0.1, 0.2, 0.3, 0.5}), ValidationError);
    DiscreteMeasure far;
    far.add(pt({5.0, 0.0}, 0.0), 1.0);
    EXPECT_THROW((void)pointwise_dimension(far, ParaPoint::origin(2), {0.01, 0.1, 0.5, 1.0}), NumericalError);
}

TEST(VmoRatio, Examples) {
    DiscreteMeasure m;
    m.add(pt({0.1, 0.0}, 0.0), 1.0).add(pt({-0.1, 0.0}, 0.0), 1.0);
    EXPECT_NEAR(vmo_ratio({7.0, 7.0}, m, ParaPoint::origin(2), 1.0), 1.0, 1e-14);
    EXPECT_NEAR(vmo_ratio({1.0, 4.0}, m, ParaPoint::origin(2), 1.0), 1.25, 1e-14);
    EXPECT_THROW((void)vmo_ratio({1.0, -4.0}, m, ParaPoint::origin(2), 1.0), ValidationError);
}

TEST(VmoRatio, ArithmeticGeometricMean) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.01, 10.0);
    const auto m = random_measure(1000, 5, 0.5);
    std::vector<double> f(m.size());
    for (auto& v : f) v = u(rng);
    EXPECT_GE(vmo_ratio(f, m, ParaPoint::origin(2), 1.0), 1.0);
}

// ---------------------------------------------------------------- serialization

TEST(DiscreteMeasureIo, JsonAndCsvRoundTrip) {
    const auto m = random_measure(20, 9);
    const auto j = discrete_measure_from_json(to_json(m));
    std::stringstream ss;
    write_csv(ss, m);
    const auto c = read_csv(ss);
    ASSERT_EQ(j.size(), m.size());
    ASSERT_EQ(c.size(), m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        EXPECT_EQ(j.atoms()[i].p, m.atoms()[i].p);
        EXPECT_EQ(c.atoms()[i].p, m.atoms()[i].p);
        EXPECT_EQ(c.atoms()[i].w, m.atoms()[i].w);
    }
    auto bad = to_json(m);
    bad["junk"] = true;
    EXPECT_THROW((void)discrete_measure_from_json(bad), ValidationError);
}
