#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "caloric/pargeo.hpp"
#include "caloric/heatcore.hpp"

using namespace caloric;

namespace {

ParaPoint pt(std::initializer_list<double> x, double t) { return {SpatialVec(x), t}; }

std::vector<ParaPoint> random_points(std::size_t n, std::size_t count, std::uint64_t seed, double scale = 2.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    std::vector<ParaPoint> out;
    for (std::size_t i = 0; i < count; ++i) {
        SpatialVec x(n);
        for (auto& v : x) v = u(rng);
        out.push_back({x, u(rng) * scale});
    }
    return out;
}

PointCloudSet plane_cloud(const SpatialVec& normal, double extent, std::size_t ns, std::size_t nt) {
    const auto basis = orthonormal_complement(normal);
    PointCloudSet a;
    for (double s : cell_centres(-extent, extent, ns))
        for (double t : cell_centres(-extent * extent, extent * extent, nt)) a.samples.push_back({basis[0] * s, t});
    return a;
}

}  // namespace

TEST(ParaNorm, ZeroAtOrigin) { EXPECT_EQ(para_norm(ParaPoint::origin(2)), 0.0); }

TEST(ParaNorm, SpatialPartDominates) { EXPECT_DOUBLE_EQ(para_norm(pt({3, 4}, -16)), 5.0); }

TEST(ParaNorm, TimePartDominates) { EXPECT_DOUBLE_EQ(para_norm(pt({0, 0}, 9)), 3.0); }

TEST(ParaNorm, HomogeneousUnderDilation) {
    for (const auto& p : random_points(2, 200, 7))
        for (double r : {0.1, 1.0, 10.0}) EXPECT_NEAR(para_norm(dilate(p, r)), r * para_norm(p), 1e-12 * r * 10);
}

TEST(Dilate, FormulaAndInverse) {
    const auto q = dilate(pt({1, 1}, 1), 2);
    EXPECT_EQ(q, pt({2, 2}, 4));
    const auto p = pt({0.3, -1.7}, 0.25);
    EXPECT_EQ(dilate(p, 1.0), p);
    const auto back = dilate(dilate(p, 3.0), 1.0 / 3.0);
    EXPECT_NEAR(back.x[0], p.x[0], 1e-15);
    EXPECT_NEAR(back.t, p.t, 1e-15);
    EXPECT_THROW((void)dilate(p, 0.0), ValidationError);
    EXPECT_THROW((void)dilate(p, -1.0), ValidationError);
}

TEST(BlowUpMap, IdentityAndInverse) {
    const auto p = pt({0.4, 0.1}, -0.3);
    const auto c = pt({1.0, -2.0}, 0.5);
    EXPECT_EQ(blow_up_map(p, ParaPoint::origin(2), 1.0), p);
    EXPECT_EQ(para_norm(blow_up_map(c, c, 0.7)), 0.0);
    const auto q = blow_down_map(blow_up_map(p, c, 0.7), c, 0.7);
    EXPECT_NEAR(q.x[0], p.x[0], 1e-14);
    EXPECT_NEAR(q.x[1], p.x[1], 1e-14);
    EXPECT_NEAR(q.t, p.t, 1e-14);
}

TEST(BlowUpMap, MapsCylinderOntoUnitCylinder) {
    const auto c = pt({1.0, -2.0}, 0.5);
    const Cylinder big(c, 0.3), unit(ParaPoint::origin(2), 1.0);
    for (const auto& p : random_points(2, 2000, 11, 0.6)) {
        const auto q = p + c;
        EXPECT_EQ(big.contains(q), unit.contains(blow_up_map(q, c, 0.3)));
    }
}

TEST(Cylinder, DirectionalVariants) {
    const Cylinder back(ParaPoint::origin(1), 1.0, TimeDirection::Backward);
    const Cylinder fwd(ParaPoint::origin(1), 1.0, TimeDirection::Forward);
    EXPECT_TRUE(back.contains(pt({0.5}, -0.5)));
    EXPECT_FALSE(back.contains(pt({0.5}, 0.5)));
    EXPECT_TRUE(fwd.contains(pt({0.5}, 0.5)));
    EXPECT_FALSE(fwd.contains(pt({0.5}, -0.5)));
    EXPECT_THROW(Cylinder(ParaPoint::origin(1), 0.0), ValidationError);
}

TEST(HeatBall, Examples) {
    const HeatBall hb(ParaPoint::origin(2), 1.0);
    EXPECT_TRUE(heat_ball_contains(hb, pt({0, 0}, -0.5)));
    EXPECT_FALSE(heat_ball_contains(hb, pt({0, 0}, -1.5)));
    // maximal slice radius sqrt(4/e) ~ 1.2131 at depth 1/e
    EXPECT_TRUE(heat_ball_contains(hb, pt({1.2, 0}, -1.0 / std::numbers::e)));
    EXPECT_FALSE(heat_ball_contains(hb, pt({1.22, 0}, -1.0 / std::numbers::e)));
    EXPECT_FALSE(heat_ball_contains(hb, pt({0, 0}, 0.0)));
    const HeatBall adj(ParaPoint::origin(2), 1.0, true);
    EXPECT_TRUE(heat_ball_contains(adj, pt({0, 0}, 0.5)));
    EXPECT_FALSE(heat_ball_contains(adj, pt({0, 0}, -0.5)));
}

TEST(HeatBall, NestedInRadius) {
    const auto pts = random_points(2, 10000, 3, 1.5);
    for (double rho1 : {0.2, 0.5}) {
        const HeatBall small(ParaPoint::origin(2), rho1), large(ParaPoint::origin(2), 2 * rho1);
        for (const auto& p : pts)
            if (heat_ball_contains(small, p)) { EXPECT_TRUE(heat_ball_contains(large, p)); }
    }
}

TEST(HeatBall, BoundingBox) {
    for (std::size_t n : {1u, 2u, 3u}) {
        const double rho = 0.7;
        const HeatBall hb(ParaPoint::origin(n), rho);
        const double rad = std::sqrt(2.0 * n * rho / std::numbers::e);
        for (const auto& p : random_points(n, 20000, 5 + n, 1.6)) {
            if (!heat_ball_contains(hb, p)) continue;
            EXPECT_LT(p.x.norm(), rad + 1e-12);
            EXPECT_GT(p.t, -rho);
            EXPECT_LT(p.t, 0.0);
        }
    }
}

TEST(HeatBall, AgreesWithKernelLevelSet) {
    const std::size_t n = 2;
    const double rho = 0.8;
    const HeatBall hb(ParaPoint::origin(n), rho);
    const double level = std::pow(4.0 * std::numbers::pi * rho, -1.0);
    int disagreements = 0;
    for (const auto& p : random_points(n, 10000, 21, 1.5)) {
        const ParaPoint lag = ParaPoint::origin(n) - p;
        const bool by_kernel = gamma(lag) > level;
        if (by_kernel != heat_ball_contains(hb, p)) ++disagreements;
    }
    EXPECT_EQ(disagreements, 0);
}

// R^-_a(xi; r) sits inside E(xi; e^{1/2n} r^2) as long as the top slice fits, i.e.
// a^2 exp(1/(2 n a^2)) <= exp(1/(2n)); a >= 1/sqrt(2n) suffices.
TEST(HeatBall, ContainsTruncatedBackwardCylinder) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t n : {1u, 2u}) {
        for (double a : {1.0 / std::sqrt(2.0 * n), 0.8}) {
            for (double r : {0.3, 1.0, 2.5}) {
                const ParaPoint xi = pt(n == 1 ? std::initializer_list<double>{0.2} : std::initializer_list<double>{0.2, -0.4}, 1.0);
                const TruncatedCylinder rc(xi, r, a);
                const HeatBall hb(xi, std::exp(1.0 / (2.0 * n)) * r * r);
                for (int k = 0; k < 4000; ++k) {
                    SpatialVec x(n);
                    do {
                        for (auto& v : x) v = (2 * u(rng) - 1) * r;
                    } while (x.norm() >= r);
                    const ParaPoint q(xi.x + x, rc.t_lo() + (rc.t_hi() - rc.t_lo()) * u(rng));
                    if (!rc.contains(q)) continue;
                    EXPECT_TRUE(heat_ball_contains(hb, q)) << "n=" << n << " a=" << a << " r=" << r << " q=" << q;
                }
            }
        }
    }
}

TEST(HeatBall, SmallTruncationEscapes) {
    // a = 0.2, n = 2: at depth (a r)^2 the slice radius sqrt(4 a^2 (1/4 + 2 log(1/a))) r ~ 0.78 r < r
    const double a = 0.2, r = 1.0;
    const HeatBall hb(ParaPoint::origin(2), std::exp(0.25) * r * r);
    const double depth = a * a * r * r * 1.0001;
    EXPECT_FALSE(heat_ball_contains(hb, pt({0.95 * r, 0.0}, -depth)));
}

TEST(TruncatedCylinder, TimeWindows) {
    const TruncatedCylinder back(ParaPoint::origin(1), 2.0, 0.5);
    EXPECT_DOUBLE_EQ(back.t_lo(), -4.0);
    EXPECT_DOUBLE_EQ(back.t_hi(), -1.0);
    const TruncatedCylinder ab(ParaPoint::origin(1), 2.0, 1.0, TruncatedVariant::RectangleAB, 0.5);
    EXPECT_DOUBLE_EQ(ab.t_lo(), -4.0);
    EXPECT_DOUBLE_EQ(ab.t_hi(), -1.0);
    EXPECT_THROW(TruncatedCylinder(ParaPoint::origin(1), 1.0, 1.5), ValidationError);
    EXPECT_THROW(TruncatedCylinder(ParaPoint::origin(1), 1.0, 0.5, TruncatedVariant::RectangleAB, 0.7),
                 ValidationError);
}

TEST(AdmissiblePlane, DistanceIgnoresTime) {
    const AdmissiblePlane v(SpatialVec{3.0, 4.0}, ParaPoint::origin(2));
    EXPECT_NEAR(v.normal.norm(), 1.0, 1e-15);
    EXPECT_NEAR(v.distance(pt({3, 4}, 100.0)), 5.0, 1e-12);
    EXPECT_NEAR(v.distance(pt({-4, 3}, -7.0)), 0.0, 1e-12);
}

TEST(PointCloud, JsonRoundTrip) {
    PointCloudSet a;
    a.samples = random_points(2, 5, 1);
    const auto b = point_cloud_from_json(to_json(a));
    ASSERT_EQ(b.samples.size(), a.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) EXPECT_EQ(a.samples[i], b.samples[i]);
}

TEST(HausdorffContent, Singleton) {
    PointCloudSet a;
    a.samples.push_back(pt({0.1, 0.2}, 0.3));
    for (double delta : {0.1, 0.01, 0.001}) EXPECT_LE(hausdorff_content(a, 3.0, delta), std::pow(2 * delta, 3.0));
    EXPECT_THROW((void)hausdorff_content(a, 0.0, 0.1), ValidationError);
    EXPECT_THROW((void)hausdorff_content(a, 4.5, 0.1), ValidationError);
}

TEST(HausdorffContent, TimeSegment) {
    // a time segment of length L has parabolic 2-content comparable to L
    for (double len : {0.5, 2.0}) {
        PointCloudSet a;
        for (double t : cell_centres(0.0, len, 4000)) a.samples.push_back(pt({0.0, 0.0}, t));
        const double c = hausdorff_content(a, 2.0, 0.05);
        EXPECT_GT(c, len / 4.0);
        EXPECT_LT(c, len * 4.0);
    }
}

TEST(HausdorffContent, PlanePatchComparableToArea) {
    const auto a = plane_cloud(SpatialVec{1.0, 0.0}, 1.0, 200, 400);
    const double area = 2.0 * 2.0;
    const double c = hausdorff_content(a, 3.0, 0.1);
    EXPECT_GT(c, area / 20.0);
    EXPECT_LT(c, area * 20.0);
}

TEST(HausdorffContent, MonotoneAndSubadditive) {
    const auto pa = plane_cloud(SpatialVec{1.0, 0.0}, 0.5, 60, 120);
    auto pb = plane_cloud(SpatialVec{0.0, 1.0}, 0.5, 60, 120);
    for (auto& p : pb.samples) p.x[0] += 3.0;
    PointCloudSet both = pa;
    both.samples.insert(both.samples.end(), pb.samples.begin(), pb.samples.end());
    const double ca = hausdorff_content(pa, 3.0, 0.05), cb = hausdorff_content(pb, 3.0, 0.05);
    EXPECT_LE(hausdorff_content(both, 3.0, 0.05), (ca + cb) * (1 + 1e-12));
    EXPECT_LE(hausdorff_content(pa, 3.0, 0.02), hausdorff_content(pa, 3.0, 0.2) * 4.0);
}
