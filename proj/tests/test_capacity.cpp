#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "caloric/capacity.hpp"

using namespace caloric;

namespace {

TruncatedCylinder rect(double r, double a = 1.0, double b = 0.5, std::size_t n = 2) {
    return {ParaPoint::origin(n), r, a, TruncatedVariant::RectangleAB, b};
}

CapacityGrid grid(std::size_t sc, std::size_t tc) {
    CapacityGrid g;
    g.space_cells = sc;
    g.time_cells = tc;
    return g;
}

double rect_capacity(double r, std::size_t sc, std::size_t tc) {
    return thermal_capacity(region_instance(region_lattice(rect(r), grid(sc, tc)))).value;
}

}  // namespace

TEST(ThermalCapacity, EmptyAtomSetIsZero) {
    CapacityInstance inst;
    inst.constraints.push_back(ParaPoint::origin(2));
    EXPECT_EQ(thermal_capacity(inst).value, 0.0);
}

TEST(ThermalCapacity, SingleAtomClosedForm) {
    // one atom: the largest feasible weight is 1 / max_c Gamma(c - atom)
    CapacityInstance inst;
    inst.atoms.push_back(ParaPoint::origin(1));
    double worst = 0.0;
    for (double x : {-0.3, 0.1, 0.5})
        for (double t : {-0.2, 0.05, 0.3}) {
            inst.constraints.emplace_back(SpatialVec{x}, t);
            worst = std::max(worst, gamma(ParaPoint(SpatialVec{x}, t)));
        }
    EXPECT_NEAR(thermal_capacity(inst).value, 1.0 / worst, 1e-12);
}

TEST(ThermalCapacity, MatchesIndependentSolver) {
    // reference optima of the same LPs from HiGHS (scipy.optimize.linprog, method="highs")
    EXPECT_NEAR(rect_capacity(1.0, 3, 6), 11.88393732444278, 1e-7);
    EXPECT_NEAR(rect_capacity(1.0, 4, 8), 11.331206494672822, 1e-7);
    EXPECT_NEAR(rect_capacity(1.0, 5, 10), 11.856952916386637, 1e-7);
    EXPECT_NEAR(rect_capacity(2.0, 5, 10), 47.42781166870867, 1e-6);
}

TEST(ThermalCapacity, CertificateHolds) {
    const auto res = thermal_capacity(region_instance(region_lattice(rect(1.0), grid(4, 8))));
    EXPECT_LE(res.max_potential, 1.0 + 1e-12);
    EXPECT_NEAR(res.dual_bound, res.value, 1e-7 * res.value);
    for (double w : res.weights) EXPECT_GE(w, 0.0);
}

TEST(ThermalCapacity, ScaleCovariance) {
    // Gamma(delta_rho p) = rho^{-n} Gamma(p), so delta_rho-scaled grids give rho^n times the value
    const auto base = region_instance(region_lattice(rect(1.0), grid(4, 8)));
    const double v = thermal_capacity(base).value;
    for (double rho : {0.5, 2.0, 3.0}) {
        CapacityInstance s;
        for (const auto& p : base.atoms) s.atoms.push_back(dilate(p, rho));
        for (const auto& p : base.constraints) s.constraints.push_back(dilate(p, rho));
        EXPECT_NEAR(thermal_capacity(s).value, rho * rho * v, 1e-8 * rho * rho * v);
    }
}

TEST(ThermalCapacity, RectangleScalesLikeRToTheN) {
    std::vector<double> per;
    for (double r : {1.0, 2.0, 4.0}) per.push_back(rect_capacity(r, 4, 8) / (r * r));
    for (double v : per) EXPECT_NEAR(v, per.front(), 1e-8 * per.front());
    // across resolutions the normalized value moves by a few percent only
    const double fine = rect_capacity(2.0, 6, 12) / 4.0;
    EXPECT_NEAR(fine, per.front(), 0.1 * per.front());
}

TEST(ThermalCapacity, DecreasesAsConstraintsRefine) {
    const auto lat = region_lattice(rect(1.0), grid(4, 8));
    auto inst = region_instance(lat);
    const double coarse = thermal_capacity(inst).value;
    // nested refinement: keep every constraint and add a second staggered layer set
    const auto extra = region_lattice(SpatialVec{0.0, 0.0}, 1.0, -1.0 + lat.ht / 4.0, -0.25 + lat.ht / 4.0, grid(4, 8));
    for (const auto& c : extra.constraints) inst.constraints.push_back(c);
    const double fine = thermal_capacity(inst).value;
    EXPECT_LE(fine, coarse * (1.0 + 1e-12));
}

TEST(ThermalCapacity, MonotoneInTheSet) {
    const auto lat = region_lattice(rect(1.0), grid(4, 8));
    const double all = thermal_capacity(region_instance(lat)).value;
    const double half = thermal_capacity(region_instance(lat, [](const ParaPoint& p) { return p.x[0] <= 0.0; })).value;
    const double quarter = thermal_capacity(region_instance(lat, [](const ParaPoint& p) {
                                                return p.x[0] <= 0.0 && p.x[1] <= 0.0;
                                            })).value;
    EXPECT_LE(quarter, half);
    EXPECT_LE(half, all);
}

TEST(ThermalCapacity, ClosedCylinderBoundedByRToTheN) {
    std::vector<double> per;
    for (double r : {0.5, 1.0, 2.0, 4.0}) {
        const Cylinder c(ParaPoint::origin(2), r);
        per.push_back(thermal_capacity(region_instance(region_lattice(c, grid(3, 8)))).value / (r * r));
    }
    for (double v : per) EXPECT_NEAR(v, per.front(), 1e-8 * per.front());
}

TEST(ThermalCapacity, PointIsPolar) {
    // a single atom against grids refining around it: the value is 1 / max_c Gamma(c - atom), attained near
    // the staggered point (h/2, h/2, ht/2), and Gamma there grows without bound as the mesh shrinks
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t sc : {2, 4, 8, 16}) {
        const auto lat = region_lattice(rect(1.0), grid(sc, 2 * sc));
        CapacityInstance inst;
        inst.atoms.push_back(ParaPoint(SpatialVec{0.0, 0.0}, -1.0));
        inst.constraints = lat.constraints;
        const double v = thermal_capacity(inst).value;
        double worst = 0.0;
        for (const auto& c : inst.constraints) worst = std::max(worst, gamma(c - inst.atoms[0]));
        EXPECT_NEAR(v, 1.0 / worst, 1e-12 / worst);
        EXPECT_LT(v, 0.6 * prev);
        prev = v;
    }
}

TEST(ThermalCapacity, Errors) {
    CapacityInstance inst;
    inst.atoms.push_back(ParaPoint::origin(2));
    inst.constraints.emplace_back(SpatialVec{0.1, 0.0}, -1.0);  // before the atom: Gamma = 0
    EXPECT_THROW((void)thermal_capacity(inst), NumericalError);
    inst.constraints.push_back(ParaPoint::origin(2));
    EXPECT_THROW((void)thermal_capacity(inst), ValidationError);
}

TEST(CdcRatios, HalfSpaceAtLeastHalf) {
    // the lattice is symmetric under x1 -> -x1 and LP values are subadditive over atom sets
    const auto omega = DomainSpec::half_space(SpatialVec{1.0, 0.0});
    for (auto dir : {CdcDirection::Backward, CdcDirection::Forward}) {
        const auto rows = cdc_ratios(*omega, ParaPoint::origin(2), {0.1, 1.0}, 0.5, dir, grid(4, 8));
        ASSERT_EQ(rows.size(), 2u);
        for (const auto& r : rows) {
            EXPECT_GE(r.ratio, 0.5 - 1e-9);
            EXPECT_LE(r.ratio, 1.0 + 1e-12);
            EXPECT_FALSE(r.empty_complement);
        }
        EXPECT_NEAR(rows[0].ratio, rows[1].ratio, 1e-8);
    }
}

TEST(CdcRatios, TimeSlabComplementIsFull) {
    // Omega = {t > 0}: the closed backward rectangle from the origin lies in {t <= 0}
    const auto omega = DomainSpec::time_slab(2, 0.0, std::numeric_limits<double>::infinity());
    const auto rows = cdc_ratios(*omega, ParaPoint::origin(2), {0.5, 1.0}, 0.5, CdcDirection::Backward, grid(3, 6));
    for (const auto& r : rows) EXPECT_NEAR(r.ratio, 1.0, 1e-12);
}

TEST(CdcRatios, PuncturedSpaceHasEmptyComplement) {
    const auto omega = DomainSpec::complement(DomainSpec::point(ParaPoint::origin(2)));
    const auto rows = cdc_ratios(*omega, ParaPoint::origin(2), {1.0}, 0.5, CdcDirection::Backward, grid(3, 6));
    EXPECT_TRUE(rows[0].empty_complement);
    EXPECT_EQ(rows[0].ratio, 0.0);
}

TEST(CdcRatios, RequiresBoundaryPointAndWritesCsv) {
    const auto omega = DomainSpec::half_space(SpatialVec{1.0, 0.0});
    EXPECT_THROW((void)cdc_ratios(*omega, ParaPoint(SpatialVec{1.0, 0.0}, 0.0), {1.0}, 0.5), ValidationError);
    const auto rows = cdc_ratios(*omega, ParaPoint::origin(2), {1.0}, 0.5, CdcDirection::Backward, grid(2, 4));
    std::ostringstream os;
    write_cdc_csv(os, rows);
    const std::string s = os.str();
    EXPECT_EQ(s.substr(0, s.find('\n')),
              "r,numerator,denominator,ratio,atoms_numerator,atoms_denominator,constraints,kernel,empty_complement");
    EXPECT_NE(s.find(",gamma,0"), std::string::npos);
}

TEST(CapacityLowerBound, PointAndRectangles) {
    PointCloudSet single;
    single.samples.push_back(ParaPoint::origin(2));
    EXPECT_EQ(heat_ball_capacity_lower(single, 1.0, 2.0), 0.0);

    // Cap(K) >= c * proxy over a family of rectangles inside the closed unit cylinder
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (double rho : {0.5, 0.75, 1.0})
        for (auto [a, b] : {std::pair{1.0, 0.5}, std::pair{0.8, 0.3}}) {
            const auto lat = region_lattice(rect(rho, a, b), grid(3, 6));
            const double cap = thermal_capacity(region_instance(lat)).value;
            const double proxy = heat_ball_capacity_lower(PointCloudSet{lat.nodes}, 1.0, 2.0);
            ASSERT_GT(proxy, 0.0);
            lo = std::min(lo, cap / proxy);
            hi = std::max(hi, cap / proxy);
        }
    RecordProperty("capacity_over_proxy_min", std::to_string(lo));
    RecordProperty("capacity_over_proxy_max", std::to_string(hi));
    EXPECT_GT(lo, 0.0);
}

TEST(CapacityLowerBound, SubadditiveOverSeparatedPieces) {
    const auto a = region_lattice(rect(0.5), grid(2, 4));
    auto far = region_lattice(SpatialVec{3.0, 0.0}, 0.5, -0.25, -0.0625, grid(2, 4));
    PointCloudSet pa{a.nodes}, pb{far.nodes}, both{a.nodes};
    both.samples.insert(both.samples.end(), far.nodes.begin(), far.nodes.end());
    const double delta = 0.3;
    EXPECT_LE(heat_ball_capacity_lower(both, 0.5, 2.0, delta),
              heat_ball_capacity_lower(pa, 0.5, 2.0, delta) + heat_ball_capacity_lower(pb, 0.5, 2.0, delta) + 1e-12);
}
