#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sfg/errors.hpp"
#include "sfg/fnin.hpp"
#include "sfg/pyramid.hpp"

namespace sfg {
namespace {

nn::Tensor filled(int ch, int rows, int cols, std::uint64_t seed) {
    nn::Tensor t(ch, rows, cols);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(0.0, 1.0);
    for (auto& v : t.data) v = d(rng);
    return t;
}

NormalMap constant_normals(int rows, int cols, const Vec3& n) {
    return NormalMap{Grid<Vec3>(rows, cols, n), Mask(rows, cols, 1)};
}

const FninHyper kToy{2, 4, 6, 3};

TEST(Pyramid, HalvesUntilCoarsestReached) {
    const auto s = pyramid_sizes(512, 512);
    ASSERT_EQ(s.size(), 5u);
    const int want[] = {512, 256, 128, 64, 32};
    for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_EQ(s[i].first, want[i]);
        EXPECT_EQ(s[i].second, want[i]);
    }
    EXPECT_EQ(pyramid_sizes(1024, 1024).size(), 6u);
    EXPECT_EQ(pyramid_sizes(63, 200).size(), 1u);
    const auto odd = pyramid_sizes(130, 70);
    ASSERT_EQ(odd.size(), 2u);
    EXPECT_EQ(odd[1], std::make_pair(65, 35));
}

TEST(DownsampleNormals, ConstantFieldUnchanged) {
    const Vec3 n = oracle::normal_from_slope(0.3, -0.2);
    const NormalMap d = downsample_normals(constant_normals(8, 6, n));
    ASSERT_EQ(d.rows(), 4);
    ASSERT_EQ(d.cols(), 3);
    for (std::size_t i = 0; i < d.normals.size(); ++i) {
        EXPECT_LT((d.normals[i] - n).norm(), 1e-14);
        EXPECT_TRUE(d.mask[i]);
    }
}

TEST(DownsampleNormals, HandMixAndUnitNorm) {
    NormalMap n = constant_normals(2, 2, Vec3(0, 0, 1));
    n.normals(0, 1) = Vec3(1, 0, 0);
    n.normals(1, 1) = Vec3(1, 0, 0);
    const NormalMap d = downsample_normals(n);
    const double s = 1.0 / std::sqrt(2.0);
    EXPECT_NEAR(d.normals(0, 0).x(), s, 1e-15);
    EXPECT_NEAR(d.normals(0, 0).y(), 0.0, 1e-15);
    EXPECT_NEAR(d.normals(0, 0).z(), s, 1e-15);

    // Masked fine pixels do not contribute; any valid pixel keeps the block.
    n.mask(0, 0) = n.mask(1, 0) = 0;
    EXPECT_NEAR(downsample_normals(n).normals(0, 0).x(), 1.0, 1e-15);

    const NormalMap r = downsample_normals(oracle::random_normals(16, 12, 3, false));
    for (std::size_t i = 0; i < r.normals.size(); ++i) EXPECT_NEAR(r.normals[i].norm(), 1.0, 1e-12);
}

TEST(DownsampleNormals, FullyMaskedBlockStaysMasked) {
    NormalMap n = constant_normals(4, 4, Vec3(0, 0, 1));
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) n.mask(r, c) = 0;
    }
    const NormalMap d = downsample_normals(n);
    EXPECT_FALSE(d.mask(0, 0));
    EXPECT_TRUE(d.mask(0, 1));
}

TEST(UpsampleDepth, ConstantAndAffineAreExact) {
    const CameraModel coarse = oracle::ortho_camera(9, 12);
    const CameraModel fine = coarse.resized(24, 18);
    DepthMap z{GridD(9, 12, 2.5), Mask(9, 12, 1), DepthSpace::linear, true};
    const DepthMap flat = upsample_depth(z, 18, 24);
    for (double v : flat.values.values()) EXPECT_NEAR(v, 2.5, 1e-14);

    for (int r = 0; r < 9; ++r) {
        for (int c = 0; c < 12; ++c) z.values(r, c) = 1.0 + 0.3 * coarse.u_of_col(c) - 0.7 * coarse.v_of_row(r);
    }
    const DepthMap up = upsample_depth(z, 18, 24);
    for (int r = 0; r < 18; ++r) {
        for (int c = 0; c < 24; ++c) {
            EXPECT_NEAR(up.values(r, c), 1.0 + 0.3 * fine.u_of_col(c) - 0.7 * fine.v_of_row(r), 1e-12);
        }
    }
}

TEST(UpsampleDepth, MaskedRegionStaysMasked) {
    DepthMap z{GridD(8, 8, 1.0), Mask(8, 8, 1), DepthSpace::linear, true};
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) z.mask(r, c) = 0;
    }
    const DepthMap up = upsample_depth(z, 16, 16);
    for (int r = 0; r < 16; ++r) {
        for (int c = 0; c < 16; ++c) EXPECT_EQ(up.mask(r, c) != 0, r >= 8 || c >= 8) << r << "," << c;
    }
}

TEST(UpsampleGrid, AdjointPairing) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> d(0.0, 1.0);
    GridD coarse(7, 5), fine(14, 10);
    for (auto& v : coarse.values()) v = d(rng);
    for (auto& v : fine.values()) v = d(rng);
    const GridD up = upsample_grid(coarse, 14, 10);
    const GridD back = upsample_grid_adjoint(fine, 7, 5);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < up.size(); ++i) lhs += up[i] * fine[i];
    for (std::size_t i = 0; i < back.size(); ++i) rhs += back[i] * coarse[i];
    EXPECT_NEAR(lhs, rhs, 1e-10);
}

TEST(FourierLayer, ZeroLayerGivesZero) {
    FourierLayer layer{nn::Linear(3, 3), nn::SpectralWeights(2, 2, 3, 3)};
    const nn::Tensor y = fourier_layer_apply(filled(3, 8, 8, 1), layer);
    for (double v : y.data) EXPECT_EQ(v, 0.0);
}

TEST(FourierLayer, IdentityOnOnesGivesGeluOfOne) {
    FourierLayer layer{nn::Linear(2, 2), nn::SpectralWeights(2, 2, 2, 2)};
    layer.w.w(0, 0) = layer.w.w(1, 1) = 1.0;
    const nn::Tensor y = fourier_layer_apply(nn::Tensor(2, 6, 6, 1.0), layer);
    for (double v : y.data) EXPECT_NEAR(v, 0.8411919906, 1e-9);
}

TEST(FourierLayer, ZeroSpectralMatchesPixelwiseOracle) {
    FourierLayer layer{nn::Linear(3, 2), nn::SpectralWeights(2, 2, 2, 3)};
    std::mt19937_64 rng(2);
    std::normal_distribution<double> d(0.0, 1.0);
    for (auto& w : layer.w.weight) w = d(rng);
    for (auto& b : layer.w.bias) b = d(rng);
    const nn::Tensor x = filled(3, 5, 7, 3);
    const nn::Tensor y = fourier_layer_apply(x, layer);
    for (int o = 0; o < 2; ++o) {
        for (int r = 0; r < 5; ++r) {
            for (int c = 0; c < 7; ++c) {
                double a = layer.w.bias[o];
                for (int i = 0; i < 3; ++i) a += layer.w.w(o, i) * x.at(i, r, c);
                const double g = 0.5 * a * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (a + 0.044715 * a * a * a)));
                EXPECT_NEAR(y.at(o, r, c), g, 1e-14);
            }
        }
    }
}

TEST(FourierLayer, SpectralPathAddsConvolution) {
    FourierLayer layer{nn::Linear(2, 2), nn::SpectralWeights(3, 3, 2, 2)};
    std::mt19937_64 rng(4);
    std::normal_distribution<double> d(0.0, 1.0);
    for (auto& z : layer.spectral.data) z = nn::Complex(d(rng), d(rng));
    const nn::Tensor x = filled(2, 8, 8, 5);
    nn::Tensor pre;
    const nn::Tensor y = fourier_layer_apply(x, layer, &pre);
    const nn::Tensor k = oracle::circular_conv(x, layer.spectral);
    for (std::size_t i = 0; i < y.data.size(); ++i) {
        EXPECT_NEAR(pre.data[i], k.data[i], 1e-10);
        EXPECT_NEAR(y.data[i], nn::gelu(k.data[i]), 1e-10);
    }
}

TEST(FourierLayer, RejectsChannelMismatch) {
    FourierLayer layer{nn::Linear(3, 3), nn::SpectralWeights(2, 2, 3, 3)};
    EXPECT_THROW(fourier_layer_apply(filled(2, 8, 8, 1), layer), std::invalid_argument);
}

TEST(Lift, IdentityWeightsPassInputsThrough) {
    nn::Linear lift(4, 4);
    for (int i = 0; i < 4; ++i) lift.w(i, i) = 1.0;
    const nn::Tensor x = filled(4, 5, 6, 7);
    const nn::Tensor y = nn::pointwise_forward(lift, x);
    for (std::size_t i = 0; i < x.data.size(); ++i) EXPECT_EQ(y.data[i], x.data[i]);
    EXPECT_EQ(nn::pointwise_forward(nn::Linear(4, 9), nn::Tensor(4, 3, 11)).channels, 9);
}

TEST(Lift, ZeroResidualAtOriginGivesBiasOnly) {
    nn::Linear lift(4, 3);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> d(0.0, 1.0);
    for (auto& w : lift.weight) w = d(rng);
    const nn::Tensor y = nn::pointwise_forward(lift, nn::Tensor(4, 1, 1, 0.0));
    for (double v : y.data) EXPECT_EQ(v, 0.0);
}

TEST(Attention, ConstantPlaneIsDegenerateHalf) {
    const FninParams p = FninParams::random(kToy, 3);
    const DepthMap z{GridD(12, 12, 1.0), Mask(12, 12, 1), DepthSpace::linear, true};
    AttentionTrace tr;
    const GridD w = attention_weights(z, GridD(12, 12, 1.0), 0.1, p, &tr);
    EXPECT_TRUE(tr.degenerate);
    for (double d : tr.dis.values()) EXPECT_EQ(d, 0.0);
    for (double v : w.values()) EXPECT_EQ(v, 0.5);
}

TEST(Attention, RangeIsUnitIntervalAndOffMaskIsZero) {
    const FninParams p = FninParams::random(kToy, 4);
    const SyntheticSample s = oracle::two_level_step(16, 8, 0.3);
    DepthMap z = s.depth;
    z.mask(2, 3) = 0;
    AttentionTrace tr;
    const GridD w = attention_weights(z, GridD(16, 16, 1.0), s.cam.cell_size(), p, &tr);
    ASSERT_FALSE(tr.degenerate);
    double lo = 1.0, hi = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (!z.mask[i]) {
            EXPECT_EQ(w[i], 0.0);
            continue;
        }
        lo = std::min(lo, w[i]);
        hi = std::max(hi, w[i]);
    }
    EXPECT_EQ(lo, 0.0);
    EXPECT_EQ(hi, 1.0);
}

TEST(Attention, DisIsLargerNextToStep) {
    const SyntheticSample s = oracle::two_level_step(16, 8, 0.3);
    AttentionTrace tr;
    attention_weights(s.depth, GridD(16, 16, 1.0), s.cam.cell_size(), FninParams::random(kToy, 5), &tr);
    for (int r = 1; r < 15; ++r) {
        for (int c : {7, 8}) {
            for (int interior : {2, 3, 12, 13}) EXPECT_GT(tr.dis(r, c), tr.dis(r, interior));
        }
    }
}

TEST(FninForward, ShapesAndRanges) {
    const NormalMap n = oracle::random_normals(40, 36, 8, true);
    const CameraModel cam = oracle::ortho_camera(40, 36);
    const FninOutput out = fnin_forward(n, cam, FninParams::random(kToy, 6), {8});
    EXPECT_EQ(out.depth.rows(), 40);
    EXPECT_EQ(out.depth.cols(), 36);
    EXPECT_EQ(out.omega.rows(), 40);
    EXPECT_EQ(out.depth.mask, n.mask);
    for (std::size_t i = 0; i < out.omega.size(); ++i) {
        EXPECT_GE(out.omega[i], 0.0);
        EXPECT_LE(out.omega[i], 1.0);
        if (n.mask[i]) EXPECT_GT(out.depth.values[i], 0.0);
    }
}

TEST(FninForward, ZeroNetworkIsExactlyOne) {
    const NormalMap n = oracle::random_normals(64, 64, 2, true);
    const FninOutput out = fnin_forward(n, oracle::ortho_camera(64, 64), FninParams::zeros(kToy), {8}, true);
    EXPECT_EQ(out.levels.size(), 4u);
    for (double v : out.depth.values.values()) EXPECT_EQ(v, 1.0);
}

TEST(FninForward, DeterministicAcrossRuns) {
    const NormalMap n = oracle::random_normals(32, 32, 9, true);
    const CameraModel cam = oracle::ortho_camera(32, 32);
    const FninParams p = FninParams::random(kToy, 10);
    const FninOutput a = fnin_forward(n, cam, p, {8});
    const FninOutput b = fnin_forward(n, cam, p, {8});
    EXPECT_EQ(a.depth.values, b.depth.values);
    EXPECT_EQ(a.omega, b.omega);
}

TEST(FninForward, NonFiniteNamesLevelAndLayer) {
    FninParams p = FninParams::random(kToy, 11);
    p.iterative[1].w.bias[0] = std::numeric_limits<double>::infinity();
    try {
        fnin_forward(oracle::random_normals(32, 32, 1, false), oracle::ortho_camera(32, 32), p, {8});
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("level 1"), std::string::npos) << msg;
        EXPECT_NE(msg.find("iterative layer 1"), std::string::npos) << msg;
    }
}

TEST(FninForward, RejectsShapeMismatchAndBadParams) {
    const NormalMap n = oracle::random_normals(16, 16, 1, false);
    EXPECT_THROW(fnin_forward(n, oracle::ortho_camera(16, 18), FninParams::zeros(kToy)), DataError);
    FninParams p = FninParams::zeros(kToy);
    p.iterative.pop_back();
    EXPECT_THROW(fnin_forward(n, oracle::ortho_camera(16, 16), p), std::invalid_argument);
}

TEST(FninParams, ParameterCountMatchesViews) {
    const FninParams p = FninParams::random(kToy, 1);
    std::size_t total = 0;
    for (const auto& v : p.views()) total += v.count;
    EXPECT_EQ(total, p.parameter_count());
    const int d = kToy.d_v, k = kToy.k_max, c = kToy.c_a;
    const std::size_t layer = d * d + d + 2 * (2 * k - 1) * k * d * d;
    const std::size_t expect = (4 * d + d) + (d * d + d) + (d + 1) + 2 * kToy.T * layer + (9 * c + c) +
                               2 * (9 * c * c + c) + 2 * (9 * c * c + c) + (9 * c + 1);
    EXPECT_EQ(p.parameter_count(), expect);
}

}  // namespace
}  // namespace sfg
