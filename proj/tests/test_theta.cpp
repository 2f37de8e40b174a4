#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "caloric/theta.hpp"

using namespace caloric;

namespace {

// line {s u} x R in n = 2, with u = (cos phi, sin phi), sampled over |s| <= extent, |t| <= extent^2.
// A plane point is within ds / 2 + sqrt(dt / 2) of the samples.
void add_plane(PointCloudSet& a, double phi, double extent, std::size_t ns, std::size_t nt) {
    const SpatialVec u{std::cos(phi), std::sin(phi)};
    for (std::size_t i = 0; i <= ns; ++i) {
        const double s = -extent + 2.0 * extent * static_cast<double>(i) / static_cast<double>(ns);
        for (std::size_t k = 0; k <= nt; ++k) {
            const double t = extent * extent * (-1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(nt));
            a.samples.emplace_back(u * s, t);
        }
    }
}

PointCloudSet plane_cloud(double phi) {
    PointCloudSet a;
    add_plane(a, phi, 1.2, 240, 5760);  // ds = 0.01, dt = 2.5e-4
    return a;
}

// Sigma of h1 = x1^2 + x2^2 + 4t: t = -|x|^2 / 4, sampled on geometric radii so every scale is resolved
PointCloudSet paraboloid_cloud() {
    PointCloudSet a;
    a.samples.emplace_back(SpatialVec(2), 0.0);
    for (double rho = 1e-3; rho < 4.0; rho *= 1.01)
        for (std::size_t k = 0; k < 256; ++k) {
            const double th = 2.0 * std::numbers::pi * static_cast<double>(k) / 256.0;
            a.samples.emplace_back(SpatialVec{rho * std::cos(th), rho * std::sin(th)}, -rho * rho / 4.0);
        }
    return a;
}

ParaPoint rotate(const ParaPoint& p, double a) {
    return {SpatialVec{std::cos(a) * p.x[0] - std::sin(a) * p.x[1], std::sin(a) * p.x[0] + std::cos(a) * p.x[1]}, p.t};
}

}  // namespace

TEST(Theta, AdmissiblePlaneIsFlat) {
    const auto a = plane_cloud(0.4);
    const auto res = theta_flatness(a, ParaPoint::origin(2), 1.0, ConeSpec::flat());
    EXPECT_LE(res.value, 0.005 + std::sqrt(1.25e-4) + 0.005);
    ASSERT_EQ(res.best.size(), 2u);
    // the normal of the line with direction angle 0.4
    EXPECT_NEAR(std::abs(res.best[0] * std::cos(0.4 + std::numbers::pi / 2) +
                         res.best[1] * std::sin(0.4 + std::numbers::pi / 2)),
                1.0, 2e-4);
}

TEST(Theta, TwoTransversePlanes) {
    // Theta(e) = max_i |sin(angle(e, e_i))| on the two lines; the bisector gives sin(beta / 2)
    for (double beta : {std::numbers::pi / 2, std::numbers::pi / 4, std::numbers::pi / 6}) {
        PointCloudSet a;
        add_plane(a, 0.0, 3.0, 1200, 900);
        add_plane(a, beta, 3.0, 1200, 900);
        const auto res = theta_flatness(a, ParaPoint::origin(2), 1.0, ConeSpec::flat());
        const double oracle = std::sin(beta / 2.0);
        EXPECT_GT(res.value, 0.0);
        EXPECT_NEAR(res.value, oracle, 0.05 * oracle) << "beta = " << beta;
    }
}

TEST(Theta, TwoPlanesMatchDenseNormalSweep) {
    PointCloudSet a;
    add_plane(a, 0.0, 3.0, 600, 450);
    add_plane(a, 1.1, 3.0, 600, 450);
    ThetaOptions opt;
    const auto res = theta_flatness(a, ParaPoint::origin(2), 1.0, ConeSpec::flat(), opt);
    // brute force: both sups evaluated directly over a dense sweep of normals
    double brute = 2.0;
    for (int k = 0; k < 2000; ++k) {
        const double th = std::numbers::pi * k / 2000.0;
        const SpatialVec e{std::cos(th), std::sin(th)};
        double s1 = 0.0;
        for (const auto& p : a.samples)
            if (para_norm(p) < 1.0) s1 = std::max(s1, std::abs(p.x.dot(e)));
        // distance from the plane to the two lines, attained at |z| -> 1 in space
        const SpatialVec z{-e[1], e[0]};
        const double s2 = std::min(std::abs(z.dot(SpatialVec{0.0, 1.0})),
                                   std::abs(z.dot(SpatialVec{-std::sin(1.1), std::cos(1.1)})));
        brute = std::min(brute, std::max(s1, s2));
    }
    EXPECT_NEAR(res.value, brute, 0.05 * brute);
}

TEST(Theta, CrossIsAZeroSetOfDegreeTwo) {
    PointCloudSet a;
    add_plane(a, 0.0, 1.3, 260, 3380);  // ds = 0.01, dt = 1e-3
    add_plane(a, std::numbers::pi / 2, 1.3, 260, 3380);
    ThetaOptions opt;
    opt.directions = 32;
    opt.refine_seeds = 1;
    const auto flat = theta_flatness(a, ParaPoint::origin(2), 1.0, ConeSpec::flat(), opt);
    const auto quad = theta_flatness(a, ParaPoint::origin(2), 1.0, ConeSpec::homogeneous(2, Orientation::Caloric), opt);
    EXPECT_NEAR(flat.value, std::sqrt(0.5), 0.035);
    // the traced cross has time gaps 2 (1.25)^2 / 400, i.e. sqrt(dt / 2) ~ 0.063
    EXPECT_LE(quad.value, 0.08);
}

TEST(Theta, ParaboloidIsScaleFree) {
    const auto a = paraboloid_cloud();
    std::vector<double> vals;
    for (double r : {0.1, 0.3, 1.0}) vals.push_back(theta_flatness(a, ParaPoint::origin(2), r, ConeSpec::flat()).value);
    for (double v : vals) {
        // the plane point (0, t -> 1) is sqrt(t) from Sigma, and Sigma reaches |x| -> 1 off every plane
        EXPECT_NEAR(v, 1.0, 0.02);
        EXPECT_NEAR(v, vals.back(), 0.05 * vals.back());
    }
}

TEST(Theta, RotationAndDilationInvariance) {
    PointCloudSet a;
    add_plane(a, 0.2, 3.0, 600, 450);
    add_plane(a, 1.3, 3.0, 600, 450);
    const ParaPoint c{SpatialVec{0.1, -0.05}, 0.02};
    const double base = theta_flatness(a, c, 0.8, ConeSpec::flat()).value;

    PointCloudSet rot;
    for (const auto& p : a.samples) rot.samples.push_back(rotate(p, 0.7));
    EXPECT_NEAR(theta_flatness(rot, rotate(c, 0.7), 0.8, ConeSpec::flat()).value, base, 0.02 * base);

    const double lam = 0.25;
    PointCloudSet dil;
    for (const auto& p : a.samples) dil.samples.push_back(dilate(p, lam));
    EXPECT_NEAR(theta_flatness(dil, dilate(c, lam), 0.8 * lam, ConeSpec::flat()).value, base, 1e-9);
}

TEST(Theta, BoundedByTwoAndPositiveOffFamily) {
    PointCloudSet a;
    a.samples.emplace_back(SpatialVec{0.5, 0.0}, 0.0);
    const auto res = theta_flatness(a, ParaPoint::origin(2), 1.0, ConeSpec::flat());
    EXPECT_GT(res.value, 0.9);
    EXPECT_LE(res.value, kThetaCap);
}

TEST(Theta, OneDimensionalPlane) {
    PointCloudSet a;
    for (int k = -300; k <= 300; ++k) a.samples.emplace_back(SpatialVec{0.0}, k / 100.0);
    const auto res = theta_flatness(a, ParaPoint::origin(1), 1.0, ConeSpec::flat());
    EXPECT_LE(res.value, 0.1);
}

TEST(Theta, RejectsEmptyIntersection) {
    PointCloudSet a;
    a.samples.emplace_back(SpatialVec{5.0, 0.0}, 0.0);
    EXPECT_THROW((void)theta_flatness(a, ParaPoint::origin(2), 1.0, ConeSpec::flat()), ValidationError);
    EXPECT_THROW((void)theta_flatness(PointCloudSet{}, ParaPoint::origin(2), 1.0, ConeSpec::flat()), ValidationError);
}
