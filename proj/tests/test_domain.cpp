#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "caloric/domain.hpp"

using namespace caloric;

namespace {

ParaPoint pt(std::initializer_list<double> x, double t) { return {SpatialVec(x), t}; }

}  // namespace

TEST(Domain, HalfSpaceAndSlab) {
    const auto h = DomainSpec::half_space(SpatialVec{2.0, 0.0}, 0.5);
    EXPECT_TRUE(h->contains(pt({0.6, -3.0}, 7.0)));
    EXPECT_FALSE(h->contains(pt({0.5, 0.0}, 0.0)));
    EXPECT_NEAR(h->depth_lower_bound(pt({1.5, 0.0}, 0.0)), 1.0, 1e-15);
    EXPECT_TRUE(h->on_boundary(pt({0.5, 4.0}, 1.0)));
    EXPECT_FALSE(h->on_boundary(pt({0.7, 0.0}, 0.0)));

    const auto s = DomainSpec::slab(SpatialVec{0.0, 1.0}, -1.0, 1.0);
    EXPECT_TRUE(s->contains(pt({9.0, 0.2}, 0.0)));
    EXPECT_FALSE(s->contains(pt({0.0, 1.0}, 0.0)));
    EXPECT_NEAR(s->depth_lower_bound(pt({0.0, 0.2}, 0.0)), 0.8, 1e-15);
    EXPECT_THROW((void)DomainSpec::slab(SpatialVec{0.0, 1.0}, 1.0, 1.0), ValidationError);
}

TEST(Domain, TimeSlabAndHorizon) {
    const auto ts = DomainSpec::time_slab(2, 0.0, 4.0);
    EXPECT_TRUE(ts->contains(pt({5.0, 5.0}, 1.0)));
    EXPECT_FALSE(ts->contains(pt({0.0, 0.0}, -1e-9)));
    EXPECT_NEAR(ts->depth_lower_bound(pt({0.0, 0.0}, 1.0)), 1.0, 1e-15);
    EXPECT_TRUE(ts->on_boundary(ParaPoint::origin(2)));

    const auto h = DomainSpec::half_space(SpatialVec{1.0, 0.0})->with_t_min(-2.0);
    EXPECT_FALSE(h->contains(pt({1.0, 0.0}, -2.5)));
    EXPECT_TRUE(h->contains(pt({1.0, 0.0}, -1.0)));
    // limited by the horizon: sqrt(1) = 1 < 3
    EXPECT_NEAR(h->depth_lower_bound(pt({3.0, 0.0}, -1.0)), 1.0, 1e-15);
}

TEST(Domain, DepthIsALowerBound) {
    const auto b = DomainSpec::box(SpatialVec{0.0, 0.0}, 1.0, -1.0, 0.0);
    for (double x : {0.0, 0.3, 0.9})
        for (double t : {-0.99, -0.5, -0.01}) {
            const ParaPoint p = pt({x, 0.0}, t);
            const double d = b->depth_lower_bound(p);
            // every point at parabolic distance < d stays inside
            for (double dx : {-1.0, 1.0})
                for (double dt : {-1.0, 1.0}) {
                    const ParaPoint q = pt({x + 0.999 * d * dx, 0.0}, t + 0.998 * d * d * dt);
                    EXPECT_TRUE(b->contains(q));
                }
        }
}

TEST(Domain, GraphSpotCheck) {
    // psi(x', t) = 0.5 |x'| + 0.5 |t|^{1/2} has Lip(1, 1/2) seminorm <= 1
    auto psi = [](const SpatialVec& xp, double t) { return 0.5 * std::abs(xp[0]) + 0.5 * std::sqrt(std::abs(t)); };
    const auto g = DomainSpec::graph(2, psi, 1.0, 0.5, 1, "cone");
    EXPECT_TRUE(g->contains(pt({0.0, 0.1}, 0.0)));
    EXPECT_FALSE(g->contains(pt({1.0, 0.4}, 0.0)));
    EXPECT_TRUE(g->on_boundary(pt({0.0, 0.0}, 0.0)));
    EXPECT_LE(DomainSpec::lipschitz_spot_check(2, psi, 0.5, 2000, 3), 1.0);
    // the same function violates a declared seminorm of 0.1
    EXPECT_THROW((void)DomainSpec::graph(2, psi, 0.1, 0.5, 1), ValidationError);
    EXPECT_THROW((void)DomainSpec::graph(1, psi, 1.0, 0.5, 1), ValidationError);
}

TEST(Domain, SignSetComplementAndPoint) {
    Polynomial p(1);
    p.add({2}, 0, 1.0).add({0}, 1, 2.0);  // x^2 + 2t
    const auto s = DomainSpec::sign_set(CaloricPolynomial(p, Orientation::Caloric), 1);
    EXPECT_TRUE(s->contains(pt({1.0}, 0.0)));
    EXPECT_FALSE(s->contains(pt({0.0}, -0.1)));
    const auto c = DomainSpec::complement(s);
    EXPECT_FALSE(c->contains(pt({1.0}, 0.0)));
    EXPECT_TRUE(c->contains(pt({0.0}, -0.1)));

    const auto hole = DomainSpec::complement(DomainSpec::point(pt({0.0, 0.0}, 0.0)));
    EXPECT_FALSE(hole->contains(ParaPoint::origin(2)));
    EXPECT_TRUE(hole->contains(pt({1e-9, 0.0}, 0.0)));
    EXPECT_TRUE(hole->on_boundary(ParaPoint::origin(2)));
    EXPECT_NEAR(hole->depth_lower_bound(pt({0.0, 0.0}, 0.25)), 0.5, 1e-15);
}

TEST(Domain, Describe) {
    EXPECT_EQ(DomainSpec::half_space(SpatialVec{1.0, 0.0})->describe(), "half-space(e=(1,0),offset=0)");
    EXPECT_EQ(DomainSpec::time_slab(1, 0.0, 1.0)->with_t_min(-1.0)->describe(), "time-slab(0,1)&t>-1");
}

TEST(Domain, ComplementAndGraphDepth) {
    const auto out = DomainSpec::complement(DomainSpec::slab(SpatialVec{1.0, 0.0}, -1.0, 1.0));
    EXPECT_TRUE(out->contains(pt({1.5, 0.0}, 0.0)));
    EXPECT_NEAR(out->depth_lower_bound(pt({1.5, 0.0}, 0.0)), 0.5, 1e-15);
    EXPECT_NEAR(out->depth_lower_bound(pt({-3.0, 0.0}, 0.0)), 2.0, 1e-15);
    const auto hs = DomainSpec::complement(DomainSpec::half_space(SpatialVec{1.0, 0.0}));
    EXPECT_NEAR(hs->depth_lower_bound(pt({-0.25, 7.0}, 1.0)), 0.25, 1e-15);

    auto psi = [](const SpatialVec& xp, double t) { return 0.5 * std::abs(xp[0]) + 0.5 * std::sqrt(std::abs(t)); };
    const auto g = DomainSpec::graph(2, psi, 1.0, 0.5, 1, "cone");
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (int k = 0; k < 200; ++k) {
        const ParaPoint p = pt({u(rng), 0.6 + u(rng)}, u(rng));
        const double d = g->depth_lower_bound(p);
        if (d <= 0.0) continue;
        for (double sx : {-1.0, 1.0})
            for (double st : {-1.0, 1.0}) {
                const ParaPoint q = pt({p.x[0] + 0.99 * d * sx, p.x[1] - 0.99 * d}, p.t + 0.98 * d * d * st);
                EXPECT_TRUE(g->contains(q));
            }
    }
}
