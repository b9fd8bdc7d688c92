#include "eulerlab/spectral.hpp"
#include "eulerlab/spectral1d.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace eulerlab;
using eulerlab::testing::max_abs;
using eulerlab::testing::max_diff;
using eulerlab::testing::random_field;

namespace {

SpectralField2 field(const Grid2& g, double (*fn)(double, double)) { return SpectralField2::from_function(g, fn); }

}  // namespace

TEST(Grid2, RejectsOddOrTinySizes) {
    EXPECT_THROW(Grid2(7, 16), PreconditionError);
    EXPECT_THROW(Grid2(16, 6), PreconditionError);
    EXPECT_THROW(Grid2(16, 15), PreconditionError);
    EXPECT_NO_THROW(Grid2(8, 8));
}

TEST(Grid2, WavenumbersCoverHalfOpenRange) {
    Grid2 g(16, 16, 4.0 * M_PI, kTwoPi);
    EXPECT_EQ(g.mode_x(0), 0);
    EXPECT_EQ(g.mode_x(7), 7);
    EXPECT_EQ(g.mode_x(8), -8);
    EXPECT_EQ(g.mode_x(15), -1);
    EXPECT_DOUBLE_EQ(g.kx(1), 0.5);
    EXPECT_DOUBLE_EQ(g.ky(3), 3.0);
}

TEST(SpectralField2, RoundTripIsExactToRoundoff) {
    for (auto [nx, ny] : {std::pair{8, 8}, {64, 64}, {48, 128}, {256, 256}}) {
        Grid2 g(nx, ny);
        std::mt19937_64 rng(nx * 131 + ny);
        std::uniform_real_distribution<double> u(-1, 1);
        RealVec r(g.size());
        for (auto& v : r) v = u(rng);
        const auto back = SpectralField2::from_physical(g, r).to_physical();
        EXPECT_LT(max_diff(r, back) / max_abs(r), 1e-13) << nx << "x" << ny;
    }
}

TEST(SpectralField2, ParsevalMatchesPhysicalQuadrature) {
    Grid2 g(64, 32, 3.0, 5.0);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1, 1);
    RealVec r(g.size());
    for (auto& v : r) v = u(rng);
    double phys = 0.0;
    for (double v : r) phys += v * v;
    phys = std::sqrt(phys * g.dx() * g.dy());
    const auto f = SpectralField2::from_physical(g, r);
    EXPECT_NEAR(f.l2_norm() / phys, 1.0, 1e-12);
}

TEST(SpectralCalculus, SingleModeSymbols) {
    Grid2 g(32, 32);
    auto cosy = field(g, [](double, double y) { return std::cos(y); });
    EXPECT_LT(max_diff(laplacian(cosy), -1.0 * cosy), 1e-12);
    EXPECT_LT(max_diff(inv_laplacian(cosy), -1.0 * cosy), 1e-12);
    EXPECT_TRUE(inv_laplacian(cosy).mean_free());
    auto pg = perp_gradient(cosy);
    auto siny = field(g, [](double, double y) { return std::sin(y); });
    EXPECT_LT(max_diff(pg.u1, siny), 1e-14);
    EXPECT_LT(pg.u2.max_abs(), 1e-14);
}

TEST(SpectralCalculus, ZeroMapsToZero) {
    Grid2 g(16, 16);
    SpectralField2 z(g);
    for (auto op : {SpectralOp::dx, SpectralOp::dy, SpectralOp::laplacian, SpectralOp::inv_laplacian})
        EXPECT_EQ(spectral_calculus(z, op).max_abs(), 0.0);
    EXPECT_EQ(perp_gradient(z).u1.max_abs(), 0.0);
}

TEST(SpectralCalculus, InverseLaplacianRejectsMean) {
    Grid2 g(16, 16);
    auto f = field(g, [](double x, double) { return 1.0 + std::cos(x); });
    try {
        inv_laplacian(f);
        FAIL() << "expected an error";
    } catch (const PreconditionError& e) {
        EXPECT_NE(std::string(e.what()).find("nonzero mean"), std::string::npos);
    }
    EXPECT_THROW(biot_savart(f), PreconditionError);
}

TEST(BiotSavart, ShearAndTaylorGreen) {
    Grid2 g(32, 32);
    auto u = biot_savart(field(g, [](double, double y) { return std::cos(y); }));
    EXPECT_LT(max_diff(u.u1, field(g, [](double, double y) { return -std::sin(y); })), 1e-14);
    EXPECT_LT(u.u2.max_abs(), 1e-14);

    auto tg = biot_savart(field(g, [](double x, double y) { return -2.0 * std::cos(x) * std::cos(y); }));
    EXPECT_LT(max_diff(tg.u1, field(g, [](double x, double y) { return std::cos(x) * std::sin(y); })), 1e-14);
    EXPECT_LT(max_diff(tg.u2, field(g, [](double x, double y) { return -std::sin(x) * std::cos(y); })), 1e-14);
}

TEST(BiotSavart, CurlRoundTripAndDivergenceOnRandomData) {
    Grid2 g(64, 64);
    for (unsigned seed = 1; seed <= 5; ++seed) {
        auto w = random_field(g, seed, 20);
        auto u = biot_savart(w);
        EXPECT_LT(max_diff(curl(u), w), 1e-12);
        double div = 0.0;
        auto d = divergence(u);
        for (const auto& c : d.coeffs()) div = std::max(div, std::abs(c));
        EXPECT_LT(div, 1e-13 * w.l2_norm());
    }
}

TEST(Hilbert, SignConvention) {
    Grid1 g(64);
    auto s = SpectralField1::from_function(g, [](double x) { return std::sin(x); });
    auto c = SpectralField1::from_function(g, [](double x) { return std::cos(x); });
    c *= -1.0;
    EXPECT_LT(max_diff(hilbert_transform(s).to_physical(), c.to_physical()), 1e-14);
    c *= -1.0;
    EXPECT_LT(max_diff(hilbert_transform(c).to_physical(), s.to_physical()), 1e-14);
    auto one = SpectralField1::from_function(g, [](double) { return 3.0; });
    EXPECT_LT(hilbert_transform(one).max_abs(), 1e-15);
}

TEST(Hilbert, SquaresToMinusIdentityOnMeanFreePart) {
    Grid1 g(256);
    for (unsigned seed = 1; seed <= 10; ++seed) {
        auto f = eulerlab::testing::random_field1(g, seed, 60);
        auto hh = hilbert_transform(hilbert_transform(f));
        auto target = f;
        target[0] = cplx{};
        target *= -1.0;
        EXPECT_LT(max_diff(hh.to_physical(), target.to_physical()), 1e-12);
    }
}

TEST(Leray, FixesDivergenceFreeAndKillsGradients) {
    Grid2 g(32, 32);
    auto w = random_field(g, 11, 8);
    auto u = biot_savart(w);
    auto pu = leray_project(u);
    EXPECT_LT(max_diff(pu.u1, u.u1), 1e-14);
    EXPECT_LT(max_diff(pu.u2, u.u2), 1e-14);

    auto grad = gradient(field(g, [](double x, double y) { return std::cos(x) * std::cos(y); }));
    auto pg = leray_project(grad);
    EXPECT_LT(pg.u1.max_abs(), 1e-15);
    EXPECT_LT(pg.u2.max_abs(), 1e-15);
}

TEST(Leray, BuoyancyColumnHasCurlMinusDxRho) {
    Grid2 g(32, 32);
    VectorField2 v{SpectralField2(g), field(g, [](double x, double) { return -std::cos(x); })};
    auto pv = leray_project(v);
    EXPECT_LT(max_diff(curl(pv), field(g, [](double x, double) { return std::sin(x); })), 1e-14);
}

TEST(Leray, IdempotentAndRemainderIsAGradient) {
    Grid2 g(32, 32);
    for (unsigned seed = 20; seed < 25; ++seed) {
        VectorField2 v{random_field(g, seed, 10, false), random_field(g, seed + 100, 10, false)};
        auto p = leray_project(v);
        auto pp = leray_project(p);
        EXPECT_LT(max_diff(p.u1, pp.u1), 1e-13);
        EXPECT_LT(max_diff(p.u2, pp.u2), 1e-13);
        EXPECT_LT(divergence(p).max_abs(), 1e-12);
        EXPECT_LT(curl(v - p).max_abs(), 1e-12);
    }
}

TEST(Dealias, TruncatesAboveTwoThirds) {
    Grid2 g(24, 24);
    auto low = field(g, [](double x, double y) { return std::cos(8 * x) * std::sin(3 * y); });
    EXPECT_LT(max_diff(dealias(low), low), 1e-14);
    auto high = field(g, [](double x, double) { return std::cos(9 * x); });
    EXPECT_LT(dealias(high).max_abs(), 1e-14);
    auto r = random_field(g, 5, 12, false);
    EXPECT_LT(max_diff(dealias(dealias(r)), dealias(r)), 1e-15);
}

TEST(SpectralField2, PointEvaluationMatchesSampledFunction) {
    Grid2 g(16, 16, 4.0, 6.0);
    auto fn = [](double x, double y) { return std::cos(kTwoPi * x / 4.0) * std::sin(2 * kTwoPi * y / 6.0) + 0.5; };
    auto f = SpectralField2::from_function(g, fn);
    for (double x : {0.1, 1.7, 3.3})
        for (double y : {0.2, 2.5, 5.9}) EXPECT_NEAR(f.evaluate(x, y), fn(x, y), 1e-14);
}
