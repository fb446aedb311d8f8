#pragma once

#include <utility>
#include <vector>

#include "sfg/geometry.hpp"

namespace sfg {

/// Image sizes (rows, cols) from finest to coarsest. Each step halves both
/// axes, rounding up, and is taken only while the shorter side is at least
/// 2 * coarsest_min.
std::vector<std::pair<int, int>> pyramid_sizes(int rows, int cols, int coarsest_min = 32);

/// Masked 2x2 average, renormalized. A coarse pixel is valid when any of
/// its fine pixels is valid.
NormalMap downsample_normals(const NormalMap& n);

/// Masked 2x2 area average of depth values, same validity rule.
DepthMap downsample_depth(const DepthMap& z);

/// Bilinear interpolation in normalized image coordinates (linear
/// extrapolation past the outermost coarse samples). The mask is resampled
/// by nearest neighbour.
DepthMap upsample_depth(const DepthMap& z, int rows, int cols);
GridD upsample_grid(const GridD& g, int rows, int cols);

/// Adjoint of upsample_grid: scatters fine-grid values back onto the
/// coarse grid with the same interpolation weights.
GridD upsample_grid_adjoint(const GridD& fine, int coarse_rows, int coarse_cols);

}  // namespace sfg
