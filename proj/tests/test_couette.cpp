#include "eulerlab/couette.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace eulerlab;

TEST(Couette, SingleModeVerticalVelocityRatio) {
    const std::vector<CouetteMode> m{{1.0, 0.0, 1.0}};
    const double u20 = couette_linear_evolve(m, 0.0).u2_l2;
    for (double t : {0.1, 0.5, 1.0, 3.0, 10.0, 47.0, 100.0})
        EXPECT_NEAR(couette_linear_evolve(m, t).u2_l2 / u20, 1.0 / (1.0 + t * t), 1e-12) << t;
}

TEST(Couette, SingleModeHorizontalVelocityClosedForm) {
    const std::vector<CouetteMode> m{{1.0, 0.0, 1.0}};
    for (double t : {0.5, 2.0, 20.0}) EXPECT_NEAR(couette_linear_evolve(m, t).u1_l2, t / (1.0 + t * t), 1e-14);
    const auto ts = log_spaced(10.0, 100.0, 60);
    std::vector<double> u1;
    for (double t : ts) u1.push_back(couette_linear_evolve(m, t).u1_l2);
    EXPECT_NEAR(loglog_fit_slope(ts, u1), -1.0, 0.05);
}

TEST(Couette, ShearModesAreNotDamped) {
    const std::vector<CouetteMode> m{{0.0, 2.0, 0.7}};
    const auto a = couette_linear_evolve(m, 0.0);
    for (double t : {1.0, 50.0}) {
        const auto b = couette_linear_evolve(m, t);
        EXPECT_DOUBLE_EQ(b.shear_u1_l2, a.shear_u1_l2);
        EXPECT_DOUBLE_EQ(b.shear_omega_h1, a.shear_omega_h1);
        EXPECT_EQ(b.u1_l2, 0.0);
        EXPECT_EQ(b.u2_l2, 0.0);
    }
}

TEST(Couette, RandomBandLimitedDataDecayRates) {
    for (unsigned seed = 1; seed <= 20; ++seed) {
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<int> kd(1, 4);
        std::uniform_real_distribution<double> eta(-1.0, 1.0), amp(-1.0, 1.0);
        std::vector<CouetteMode> m;
        for (int i = 0; i < 8; ++i) m.push_back({double(kd(rng)) * (i % 2 ? 1 : -1), eta(rng), amp(rng)});
        const auto ts = log_spaced(10.0, 100.0, 80);
        std::vector<double> u1, u2;
        for (const auto& r : couette_series(m, ts)) {
            u1.push_back(r.u1_l2);
            u2.push_back(r.u2_l2);
        }
        EXPECT_GE(loglog_fit_slope(ts, u1), -1.1) << seed;
        EXPECT_LE(loglog_fit_slope(ts, u1), -0.9) << seed;
        EXPECT_GE(loglog_fit_slope(ts, u2), -2.1) << seed;
        EXPECT_LE(loglog_fit_slope(ts, u2), -1.9) << seed;
    }
}

TEST(Couette, VorticityH1GrowsLinearly) {
    const std::vector<CouetteMode> m{{1.0, 0.0, 1.0}};
    const auto ts = log_spaced(10.0, 100.0, 30);
    std::vector<double> h;
    for (double t : ts) h.push_back(couette_linear_evolve(m, t).omega_h1);
    EXPECT_NEAR(loglog_fit_slope(ts, h), 1.0, 0.01);
}

TEST(Couette, LogSpacedValidates) {
    EXPECT_THROW(log_spaced(0.0, 1.0, 5), PreconditionError);
    const auto t = log_spaced(1.0, 100.0, 3);
    EXPECT_NEAR(t[1], 10.0, 1e-12);
}
