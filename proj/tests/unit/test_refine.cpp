#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sfg/classical.hpp"
#include "sfg/errors.hpp"
#include "sfg/geometry.hpp"
#include "sfg/eval.hpp"
#include "sfg/refine.hpp"
#include "sfg/synth.hpp"

namespace sfg {
namespace {

DirectionalWeights random_weights(const Mask& m, std::uint64_t seed) {
    DirectionalWeights w = uniform_weights(m);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (GridD* g : {&w.right, &w.left, &w.top, &w.bottom}) {
        for (auto& v : g->values()) v = v > 0.0 ? U(rng) : 0.0;
    }
    return w;
}

GridD ref_field(const CameraModel& cam, std::uint64_t seed) {
    GridD z = oracle::random_smooth_field(cam, seed);
    for (auto& v : z.values()) v += 1.0;
    return z;
}

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

TEST(AttentionWeights, UnitOmegaIsOneInsideZeroAtBorders) {
    const DirectionalWeights w = directional_weights_from_attention(GridD(4, 5, 1.0), Mask(4, 5, 1));
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 5; ++c) {
            EXPECT_EQ(w.right(r, c), c + 1 < 5 ? 1.0 : 0.0);
            EXPECT_EQ(w.left(r, c), c > 0 ? 1.0 : 0.0);
            EXPECT_EQ(w.bottom(r, c), r + 1 < 4 ? 1.0 : 0.0);
            EXPECT_EQ(w.top(r, c), r > 0 ? 1.0 : 0.0);
        }
    }
}

TEST(AttentionWeights, SingleZeroReachesFacingNeighbours) {
    GridD omega(5, 5, 1.0);
    omega(2, 2) = 0.0;
    const DirectionalWeights w = directional_weights_from_attention(omega, Mask(5, 5, 1));
    EXPECT_EQ(w.right(2, 1), 0.0);
    EXPECT_EQ(w.left(2, 3), 0.0);
    EXPECT_EQ(w.bottom(1, 2), 0.0);
    EXPECT_EQ(w.top(3, 2), 0.0);
    EXPECT_EQ(w.left(2, 1), 1.0);
    EXPECT_EQ(w.right(2, 2), 1.0);
}

TEST(AttentionWeights, ZeroOmegaAndMaskedNeighbours) {
    Mask m(3, 3, 1);
    m(1, 2) = 0;
    const DirectionalWeights z = directional_weights_from_attention(GridD(3, 3, 0.0), m);
    for (const GridD* g : {&z.right, &z.left, &z.top, &z.bottom}) {
        for (double v : g->values()) EXPECT_EQ(v, 0.0);
    }
    const DirectionalWeights w = directional_weights_from_attention(GridD(3, 3, 1.0), m);
    EXPECT_EQ(w.right(1, 1), 0.0);
    EXPECT_EQ(w.top(2, 2), 0.0);
}

TEST(SigmoidWeights, FlatIsHalfAndZeroSharpnessIsHalf) {
    const SyntheticSample s = oracle::two_level_step(8, 4, 0.5);
    const GridD nz(8, 8, 1.0);
    const DirectionalWeights k0 = sigmoid_weights(s.depth, nz, 0.0, s.cam.cell_size());
    DepthMap plane = s.depth;
    for (int r = 0; r < 8; ++r) {
        for (int c = 0; c < 8; ++c) plane.values(r, c) = 1.0 + 0.2 * s.cam.u_of_col(c);
    }
    const DirectionalWeights flat = sigmoid_weights(plane, nz, 2.0, s.cam.cell_size());
    for (int r = 1; r < 7; ++r) {
        for (int c = 1; c < 7; ++c) {
            EXPECT_EQ(k0.right(r, c), 0.5);
            EXPECT_EQ(k0.top(r, c), 0.5);
            EXPECT_NEAR(flat.right(r, c), 0.5, 1e-12);
            EXPECT_NEAR(flat.bottom(r, c), 0.5, 1e-12);
        }
    }
}

TEST(SigmoidWeights, PairsSumToOneAndFavourTheSmoothSide) {
    const SyntheticSample s = oracle::two_level_step(12, 6, 0.3);
    const DirectionalWeights w = sigmoid_weights(s.depth, GridD(12, 12, 1.0), 2.0, s.cam.cell_size());
    for (int r = 1; r < 11; ++r) {
        for (int c = 1; c < 11; ++c) {
            EXPECT_NEAR(w.right(r, c) + w.left(r, c), 1.0, 1e-15);
            EXPECT_NEAR(w.top(r, c) + w.bottom(r, c), 1.0, 1e-15);
        }
        EXPECT_LT(w.right(r, 5), 0.5);  // step lies to the right
        EXPECT_LT(w.left(r, 6), 0.5);
        EXPECT_LT(w.right(r, 5), w.right(r, 3));
    }
}

TEST(SigmoidWeights, MonotoneInSharpness) {
    const SyntheticSample s = oracle::two_level_step(10, 5, 0.2);
    double prev = 0.5;
    for (double k : {0.5, 1.0, 2.0, 4.0}) {
        const double w = sigmoid_weights(s.depth, GridD(10, 10, 1.0), k, s.cam.cell_size()).right(4, 4);
        EXPECT_LT(w, prev);
        prev = w;
    }
}

TEST(Assembly, TwoByTwoMatchesDenseOracle) {
    const CameraModel cam = oracle::ortho_camera(2, 2);
    const NormalMap n{Grid<Vec3>(2, 2, Vec3(0, 0, 1)), Mask(2, 2, 1)};
    const DirectionalWeights w = uniform_weights(n.mask);
    const DepthMap zr{ref_field(cam, 1), n.mask, DepthSpace::linear, true};
    const double lambda = 0.1;
    const SparseSystem sys = assemble_system(n, cam, w, zr, lambda);
    const auto dense = oracle::dense_stage2(n, cam, w, zr.values, lambda);
    EXPECT_LT(max_abs(oracle::to_dense(sys.matrix) - dense.M), 1e-12);
    EXPECT_LT(max_abs(sys.rhs - dense.rhs), 1e-12);

    // By hand: each 4-cycle edge appears twice with weight 1/2, so the
    // data part is (1/h^2) times the cycle's graph Laplacian.
    const double s = 1.0 / (cam.cell_size() * cam.cell_size());
    Eigen::Matrix4d L;
    L << 2, -1, -1, 0, -1, 2, 0, -1, -1, 0, 2, -1, 0, -1, -1, 2;
    EXPECT_LT(max_abs(oracle::to_dense(sys.matrix) - (s * L + lambda * Eigen::Matrix4d::Identity())), 1e-12);
}

TEST(Assembly, RandomInstancesMatchDenseOracle) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const NormalMap n = oracle::random_normals(9, 11, seed, true);
        CameraModel cam = oracle::ortho_camera(9, 11);
        if (seed % 2) {
            cam.projection = Projection::perspective;
            cam.focal = 2.0;
        }
        const DirectionalWeights w = random_weights(n.mask, seed);
        const DepthMap zr{ref_field(cam, seed), n.mask, DepthSpace::linear, true};
        const SparseSystem sys = assemble_system(n, cam, w, zr, 0.05);
        GridD solve_ref = zr.values;
        if (cam.projection == Projection::perspective) {
            for (auto& v : solve_ref.values()) v = std::log(v);
        }
        const auto dense = oracle::dense_stage2(n, cam, w, solve_ref, 0.05);
        const Eigen::MatrixXd M = oracle::to_dense(sys.matrix);
        EXPECT_LT(max_abs(M - dense.M), 1e-9 * max_abs(dense.M)) << seed;
        EXPECT_LT(max_abs(M - M.transpose()), 1e-12 * max_abs(M)) << seed;
        EXPECT_LT((sys.rhs - dense.rhs).norm(), 1e-9 * dense.rhs.norm()) << seed;
        EXPECT_EQ(sys.pixel, dense.pixel);
    }
}

TEST(Assembly, ZeroWeightsReduceToProximity) {
    const NormalMap n = oracle::random_normals(6, 6, 3, false);
    const CameraModel cam = oracle::ortho_camera(6, 6);
    const DepthMap zr{ref_field(cam, 2), n.mask, DepthSpace::linear, true};
    RefineOptions opts;
    const RefineResult res = refine_with_weights(n, cam, zr, uniform_weights(n.mask, 0.0), opts);
    for (std::size_t i = 0; i < zr.values.size(); ++i) EXPECT_NEAR(res.depth.values[i], zr.values[i], 1e-12);
}

TEST(Assembly, RejectsNonPositiveLambda) {
    const NormalMap n = oracle::random_normals(4, 4, 3, false);
    const CameraModel cam = oracle::ortho_camera(4, 4);
    const DepthMap zr{GridD(4, 4, 1.0), n.mask, DepthSpace::linear, true};
    EXPECT_THROW(assemble_system(n, cam, uniform_weights(n.mask), zr, 0.0), std::invalid_argument);
}

TEST(Cg, IdentitySystemConvergesInOneIteration) {
    SparseRowMatrix I(5, 5);
    I.setIdentity();
    const Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(5, 1.0, 5.0);
    const CgReport rep = solve_cg(I, b, Eigen::VectorXd::Zero(5));
    EXPECT_TRUE(rep.converged);
    EXPECT_EQ(rep.iterations, 1);
    EXPECT_LT((rep.x - b).norm(), 1e-14);
}

TEST(Cg, WarmStartAtSolutionTakesNoIterations) {
    const NormalMap n = oracle::random_normals(10, 10, 4, true);
    const CameraModel cam = oracle::ortho_camera(10, 10);
    const SparseSystem sys =
        assemble_system(n, cam, uniform_weights(n.mask), DepthMap{ref_field(cam, 4), n.mask, DepthSpace::linear, true}, 1e-3);
    const auto dense = oracle::dense_stage2(n, cam, uniform_weights(n.mask), ref_field(cam, 4), 1e-3);
    const Eigen::VectorXd exact = oracle::dense_solve(dense.M, dense.rhs);
    const CgReport rep = solve_cg(sys.matrix, sys.rhs, exact);
    EXPECT_EQ(rep.iterations, 0);
    EXPECT_TRUE(rep.converged);
    EXPECT_LE(rep.residual, CgOptions{}.tol);
}

TEST(Cg, MatchesDenseSolveAndDecreasesObjective) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const int rows = 8 + 6 * static_cast<int>(seed), cols = 32 - 4 * static_cast<int>(seed);
        const NormalMap n = oracle::random_normals(rows, cols, seed + 10, true);
        const CameraModel cam = oracle::ortho_camera(rows, cols);
        const DirectionalWeights w = random_weights(n.mask, seed);
        const GridD zr = ref_field(cam, seed);
        const SparseSystem sys = assemble_system(n, cam, w, DepthMap{zr, n.mask, DepthSpace::linear, true}, 1e-3);
        const auto dense = oracle::dense_stage2(n, cam, w, zr, 1e-3);
        const Eigen::VectorXd exact = oracle::dense_solve(dense.M, dense.rhs);

        CgOptions opts;
        double prev = sys.objective(sys.initial);
        bool monotone = true;
        opts.on_iteration = [&](int, const Eigen::VectorXd& x) {
            const double f = sys.objective(x);
            monotone = monotone && f <= prev * (1.0 + 1e-12);
            prev = f;
        };
        const CgReport rep = solve_cg(sys, opts);
        EXPECT_TRUE(rep.converged) << seed;
        EXPECT_TRUE(monotone) << seed;
        EXPECT_LT((rep.x - exact).norm(), 1e-6 * exact.norm()) << seed;
    }
}

TEST(Cg, IterationLimitIsReported) {
    const NormalMap n = oracle::random_normals(16, 16, 5, false);
    const CameraModel cam = oracle::ortho_camera(16, 16);
    const DepthMap zr{ref_field(cam, 5), n.mask, DepthSpace::linear, true};
    RefineOptions opts;
    opts.cg.max_iter = 2;
    const SparseSystem sys = assemble_system(n, cam, uniform_weights(n.mask), zr, 1e-3);
    const CgReport rep = solve_cg(sys, opts.cg);
    EXPECT_FALSE(rep.converged);
    EXPECT_EQ(rep.iterations, 2);
    EXPECT_THROW(refine_with_weights(n, cam, zr, uniform_weights(n.mask), opts), NumericalError);
}

TEST(Cg, StagnationIsDetected) {
    // A one-iteration window demands a 10x residual drop per step, which a
    // Laplacian-dominated system cannot deliver.
    const NormalMap n = oracle::random_normals(16, 16, 6, false);
    const CameraModel cam = oracle::ortho_camera(16, 16);
    const DepthMap zr{ref_field(cam, 6), n.mask, DepthSpace::linear, true};
    RefineOptions opts;
    opts.cg.stagnation_window = 1;
    const CgReport rep = solve_cg(assemble_system(n, cam, uniform_weights(n.mask), zr, 1e-3), opts.cg);
    EXPECT_TRUE(rep.stagnated);
    EXPECT_FALSE(rep.converged);
    EXPECT_EQ(rep.iterations, 1);
    try {
        refine_with_weights(n, cam, zr, uniform_weights(n.mask), opts);
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("stagnated"), std::string::npos) << e.what();
    }
}

double worst_relative_gap(const DepthMap& a, const DepthMap& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        if (a.mask[i]) worst = std::max(worst, std::abs(a.values[i] / b.values[i] - 1.0));
    }
    return worst;
}

RefineResult refine_uniform(const SyntheticSample& s, const DepthMap& zr, double lambda) {
    RefineOptions opts;
    opts.lambda = lambda;
    return refine_with_weights(s.normals, s.cam, zr, uniform_weights(s.normals.mask), opts);
}

TEST(Cg, DefaultWindowLetsLargeGridsConverge) {
    // The residual of CG is not monotone and falls slowly at first on big
    // grids; neither may be mistaken for stagnation.
    const SyntheticSample s = synth_dataset(parse_synth_spec("ramp size=256"), 0).front();
    const DepthMap z0 = integrate_dct(gradients_from_normals(s.normals, s.cam));
    RefineOptions opts;
    opts.mode = WeightMode::sigmoid;
    const RefineResult res = refine(s.normals, s.cam, z0, nullptr, opts);
    EXPECT_TRUE(res.solver.converged);
    EXPECT_GT(res.solver.iterations, 500);
}

TEST(Refine, LargeLambdaReturnsReference) {
    const SyntheticSample s = synth_dataset(parse_synth_spec("bump size=32"), 0).front();
    DepthMap zr = integrate_dct(gradients_from_normals(s.normals, s.cam));
    for (auto& v : zr.values.values()) v += 1.0;
    EXPECT_LT(worst_relative_gap(refine_uniform(s, zr, 1e3).depth, zr), 1e-3);
}

TEST(Refine, PullTowardNormalsDecaysLikeInverseLambda) {
    const SyntheticSample s = synth_dataset(parse_synth_spec("bump size=32"), 3).front();
    const CoordGrid g = normalized_coords(s.cam);
    DepthMap zr = s.depth;
    for (std::size_t i = 0; i < zr.values.size(); ++i) zr.values[i] += 0.05 * (g.u[i] * g.u[i] - g.v[i]);
    const double d3 = worst_relative_gap(refine_uniform(s, zr, 1e3).depth, zr);
    const double d4 = worst_relative_gap(refine_uniform(s, zr, 1e4).depth, zr);
    EXPECT_GT(d3, 0.0);
    EXPECT_NEAR(d4 / d3, 0.1, 0.02);
}

TEST(Refine, SmoothSceneDoesNotLoseDctAccuracy) {
    const SyntheticSample s = synth_dataset(parse_synth_spec("sinusoid rows=48 cols=48"), 0).front();
    DepthMap zr = integrate_dct(gradients_from_normals(s.normals, s.cam));
    for (auto& v : zr.values.values()) v += 1.0;
    const RefineResult res = refine(s.normals, s.cam, zr, nullptr, RefineOptions{WeightMode::sigmoid, 1e-3, 2.0, {}});
    GridD ones(48, 48, 1.0);
    const RefineResult att = refine(s.normals, s.cam, zr, &ones);
    const double base = mae_mm(zr, s.depth, 1.0);
    ASSERT_GT(base, 0.0);
    EXPECT_LE(mae_mm(att.depth, s.depth, 1.0), base + 1e-4);
    EXPECT_LE(mae_mm(res.depth, s.depth, 1.0), base + 1e-4);
}

TEST(Refine, RecoversStepWithOracleWeights) {
    const SyntheticSample s = oracle::two_level_step(16, 8, 0.4);
    DepthMap zr = s.depth;
    for (int r = 0; r < 16; ++r) {
        for (int c = 0; c < 16; ++c) zr.values(r, c) += 0.25 + 1e-3 * ((r + c) % 2 ? 1.0 : -1.0);
    }
    DirectionalWeights w = uniform_weights(s.normals.mask);
    for (int r = 0; r < 16; ++r) {
        w.right(r, 7) = 0.0;
        w.left(r, 8) = 0.0;
    }
    const RefineResult cut = refine_with_weights(s.normals, s.cam, zr, w);
    const RefineResult smooth = refine_with_weights(s.normals, s.cam, zr, uniform_weights(s.normals.mask));
    EXPECT_LT(oracle::max_abs_diff_mean_aligned(cut.depth.values, s.depth.values, s.depth.mask), 1e-6);
    EXPECT_GT(mae_mm(smooth.depth, s.depth, 1.0), mae_mm(cut.depth, s.depth, 1.0));
}

TEST(Refine, AttentionModeRequiresOmega) {
    const SyntheticSample s = oracle::two_level_step(8, 4, 0.1);
    EXPECT_THROW(refine(s.normals, s.cam, s.depth, nullptr), std::invalid_argument);
}

TEST(MatrixMarket, WritesReadableFiles) {
    const auto dir = std::filesystem::temp_directory_path() / "sfg_mm_test";
    std::filesystem::create_directories(dir);
    const NormalMap n = oracle::random_normals(4, 5, 1, false);
    const CameraModel cam = oracle::ortho_camera(4, 5);
    const SparseSystem sys =
        assemble_system(n, cam, uniform_weights(n.mask), DepthMap{GridD(4, 5, 1.0), n.mask, DepthSpace::linear, true}, 0.5);
    write_matrix_market(sys, (dir / "m.mtx").string(), (dir / "b.mtx").string());
    std::ifstream m(dir / "m.mtx"), b(dir / "b.mtx");
    auto header = [](std::istream& in) {
        std::string line;
        std::getline(in, line);
        std::istringstream words(line);
        std::vector<std::string> out;
        for (std::string w; words >> w;) out.push_back(w);
        return out;
    };
    EXPECT_EQ(header(m), (std::vector<std::string>{"%%MatrixMarket", "matrix", "coordinate", "real", "general"}));
    long rows = 0, cols = 0, nnz = 0;
    m >> rows >> cols >> nnz;
    EXPECT_EQ(rows, 20);
    EXPECT_EQ(cols, 20);
    EXPECT_EQ(nnz, sys.matrix.nonZeros());
    EXPECT_EQ(header(b), (std::vector<std::string>{"%%MatrixMarket", "matrix", "array", "real", "general"}));
    b >> rows >> cols;
    EXPECT_EQ(rows, 20);
    EXPECT_EQ(cols, 1);
    std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace sfg
