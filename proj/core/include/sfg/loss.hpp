#pragma once

#include <cstdint>
#include <vector>

#include "sfg/fnin.hpp"

namespace sfg {

struct LossTerms {
    double value = 0.0;
    double depth_term = 0.0;   ///< mean (1 - w) |z - z_gt|
    double normal_term = 0.0;  ///< mean gamma w |n - n_gt|_1
    std::size_t count = 0;
    GridD grad_z;              ///< filled when gradients are requested
    GridD grad_omega;
    /// Per-pixel signs of the depth and normal residuals and the degenerate
    /// flag; identical signatures mean the loss is smooth between the two
    /// evaluations.
    std::vector<std::int8_t> signature;
};

/// Mean over the shared mask of (1 - w) |z - z_gt| + gamma w |n(z) - n(z_gt)|_1
/// with normals from central differences of the back-projected points.
/// Pixels where either normal is degenerate keep only the depth term. The
/// L1 subgradient at zero is taken as zero.
LossTerms detail_weighted_loss(const DepthMap& z, const DepthMap& z_gt, const GridD& omega, const CameraModel& cam,
                               double gamma, bool with_grad = false);

/// Area-downsampled ground truth, coarsest first, one entry per level.
std::vector<DepthMap> ground_truth_levels(const DepthMap& gt, std::size_t levels);

struct MultiresLoss {
    double value = 0.0;
    std::vector<double> per_level;
    std::vector<GridD> grad_z;
    std::vector<GridD> grad_omega;
    std::vector<std::int8_t> signature;
};

/// Sum of the per-level losses of a traced forward pass.
MultiresLoss multires_loss(const FninOutput& out, const std::vector<DepthMap>& gt_levels, double gamma,
                           bool with_grad = false);

}  // namespace sfg
