#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sfg/classical.hpp"
#include "sfg/errors.hpp"

namespace sfg {
namespace {

GradientField zero_field(int rows, int cols, double h = 0.1) {
    return GradientField{GridD(rows, cols, 0.0), GridD(rows, cols, 0.0), Mask(rows, cols, 1), DepthSpace::linear, h};
}

GradientField random_field(int rows, int cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(0.0, 1.0);
    GradientField g = zero_field(rows, cols, 2.0 / (std::max(rows, cols) - 1));
    for (std::size_t i = 0; i < g.p.size(); ++i) {
        g.p[i] = d(rng);
        g.q[i] = d(rng);
    }
    return g;
}

double mean(const DepthMap& z) {
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < z.values.size(); ++i) {
        if (z.mask[i]) {
            s += z.values[i];
            ++n;
        }
    }
    return s / static_cast<double>(n);
}

TEST(Dct, ZeroFieldGivesZero) {
    const DepthMap z = integrate_dct(zero_field(8, 6));
    for (double v : z.values.values()) EXPECT_EQ(v, 0.0);
}

TEST(Dct, PlaneFromOwnStencilIsExact) {
    const CameraModel cam = oracle::ortho_camera(20, 24);
    GridD z(20, 24);
    for (int r = 0; r < 20; ++r) {
        for (int c = 0; c < 24; ++c) z(r, c) = 0.7 * cam.u_of_col(c) - 1.3 * cam.v_of_row(r);
    }
    const DepthMap out = integrate_dct(oracle::forward_diff_gradients(z, cam.cell_size()));
    EXPECT_LT(oracle::max_abs_diff_mean_aligned(out.values, z, out.mask), 1e-8);
    EXPECT_NEAR(mean(out), 0.0, 1e-12);
}

TEST(Dct, CosineModeIsExact) {
    const CameraModel cam = oracle::ortho_camera(32, 32);
    GridD z(32, 32);
    for (int r = 0; r < 32; ++r) {
        for (int c = 0; c < 32; ++c) z(r, c) = std::cos(std::numbers::pi * cam.u_of_col(c));
    }
    const DepthMap out = integrate_dct(oracle::forward_diff_gradients(z, cam.cell_size()));
    EXPECT_LT(oracle::max_abs_diff_mean_aligned(out.values, z, out.mask), 1e-6);
}

TEST(Dct, RejectsHolesAndTinyGrids) {
    GradientField g = zero_field(8, 8);
    g.mask(3, 3) = 0;
    EXPECT_THROW(integrate_dct(g), DataError);
    EXPECT_THROW(integrate_dct(zero_field(3, 8)), std::invalid_argument);
}

TEST(Dct, IsLinear) {
    const GradientField a = random_field(12, 10, 1), b = random_field(12, 10, 2);
    GradientField mix = a;
    for (std::size_t i = 0; i < mix.p.size(); ++i) {
        mix.p[i] = 2.0 * a.p[i] - 0.5 * b.p[i];
        mix.q[i] = 2.0 * a.q[i] - 0.5 * b.q[i];
    }
    const DepthMap za = integrate_dct(a), zb = integrate_dct(b), zm = integrate_dct(mix);
    for (std::size_t i = 0; i < zm.values.size(); ++i) {
        EXPECT_NEAR(zm.values[i], 2.0 * za.values[i] - 0.5 * zb.values[i], 1e-10);
    }
}

TEST(Dct, OutputIsZeroMeanAndKeepsSpace) {
    GradientField g = random_field(9, 13, 5);
    g.space = DepthSpace::log;
    const DepthMap z = integrate_dct(g);
    EXPECT_NEAR(mean(z), 0.0, 1e-12);
    EXPECT_EQ(z.space, DepthSpace::log);
}

TEST(Fft, ZeroFieldGivesZero) {
    const DepthMap z = integrate_fft(zero_field(8, 8));
    for (double v : z.values.values()) EXPECT_NEAR(v, 0.0, 1e-15);
}

TEST(Fft, PeriodicSurfaceWithSpectralDerivative) {
    const int n = 32;
    const double h = 2.0 / (n - 1);
    const double w = 2.0 * std::numbers::pi / n;
    GridD z(n, n);
    GradientField g = zero_field(n, n, h);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            z(r, c) = std::sin(w * c) * std::cos(w * r);
            g.p(r, c) = w / h * std::cos(w * c) * std::cos(w * r);
            g.q(r, c) = -w / h * std::sin(w * c) * std::sin(w * r);
        }
    }
    const DepthMap out = integrate_fft(g);
    EXPECT_LT(oracle::max_abs_diff_mean_aligned(out.values, z, out.mask), 1e-8);
}

TEST(Fft, PureCurlProjectsToZero) {
    const CameraModel cam = oracle::ortho_camera(16, 16);
    GradientField g = zero_field(16, 16, cam.cell_size());
    for (int r = 0; r < 16; ++r) {
        for (int c = 0; c < 16; ++c) {
            g.p(r, c) = -cam.v_of_row(r);
            g.q(r, c) = cam.u_of_col(c);
        }
    }
    const DepthMap out = integrate_fft(g);
    for (double v : out.values.values()) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Fft, IsLinearAndZeroMean) {
    const GradientField a = random_field(10, 14, 3), b = random_field(10, 14, 4);
    GradientField mix = a;
    for (std::size_t i = 0; i < mix.p.size(); ++i) {
        mix.p[i] = -a.p[i] + 3.0 * b.p[i];
        mix.q[i] = -a.q[i] + 3.0 * b.q[i];
    }
    const DepthMap za = integrate_fft(a), zb = integrate_fft(b), zm = integrate_fft(mix);
    for (std::size_t i = 0; i < zm.values.size(); ++i) EXPECT_NEAR(zm.values[i], -za.values[i] + 3.0 * zb.values[i], 1e-10);
    EXPECT_NEAR(mean(zm), 0.0, 1e-12);
}

TEST(DenseLsq, TwoByTwoUnitSlopes) {
    GradientField g = zero_field(2, 2, 1.0);
    for (std::size_t i = 0; i < 4; ++i) g.p[i] = g.q[i] = 1.0;
    const DenseLsqResult res = integrate_dense_lsq(g, g.mask);
    const double want[] = {-1.0, 0.0, 0.0, 1.0};
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(res.depth.values[i], want[i], 1e-12);
    EXPECT_EQ(res.components, 1);
}

TEST(DenseLsq, ZeroFieldOnArbitraryMask) {
    GradientField g = zero_field(7, 5);
    Mask m(7, 5, 1);
    m(2, 2) = m(3, 1) = m(0, 4) = 0;
    const DenseLsqResult res = integrate_dense_lsq(g, m);
    for (double v : res.depth.values.values()) EXPECT_NEAR(v, 0.0, 1e-14);
}

TEST(DenseLsq, MatchesDctOnFullMask) {
    const GradientField g = random_field(16, 16, 11);
    const DepthMap a = integrate_dct(g);
    const DenseLsqResult b = integrate_dense_lsq(g, g.mask);
    EXPECT_LT(oracle::max_abs_diff_mean_aligned(a.values, b.depth.values, g.mask), 1e-6);
}

TEST(DenseLsq, DisconnectedComponentsEachZeroMean) {
    GradientField g = random_field(6, 7, 8);
    Mask m(6, 7, 1);
    for (int r = 0; r < 6; ++r) m(r, 3) = 0;
    const DenseLsqResult res = integrate_dense_lsq(g, m);
    EXPECT_TRUE(res.disconnected());
    EXPECT_EQ(res.components, 2);
    double left = 0.0, right = 0.0;
    for (int r = 0; r < 6; ++r) {
        for (int c = 0; c < 3; ++c) left += res.depth.values(r, c);
        for (int c = 4; c < 7; ++c) right += res.depth.values(r, c);
    }
    EXPECT_NEAR(left, 0.0, 1e-10);
    EXPECT_NEAR(right, 0.0, 1e-10);
    EXPECT_NE(res.component(0, 0), res.component(0, 6));
    EXPECT_EQ(res.component(0, 3), -1);
}

TEST(DenseLsq, RejectsOversizedProblems) {
    EXPECT_THROW(integrate_dense_lsq(zero_field(65, 65), Mask(65, 65, 1)), std::invalid_argument);
    EXPECT_THROW(integrate_dense_lsq(zero_field(4, 4), Mask(4, 4, 0)), DataError);
}

}  // namespace
}  // namespace sfg
