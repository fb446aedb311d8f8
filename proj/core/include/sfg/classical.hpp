#pragma once

#include "sfg/geometry.hpp"

namespace sfg {

/// Neumann-boundary Poisson integration by cosine transform.
///
/// Solves the forward-difference least-squares problem
/// min sum ((z[j+1] - z[j]) / h - p[j])^2 + (same along v) exactly; the
/// discrete Laplacian of that problem is diagonal in the DCT-II basis.
/// Requires a full rectangular mask of at least 4x4 pixels. The result is
/// zero-mean and shares the gradient's depth space.
DepthMap integrate_dct(const GradientField& g);

/// Frankot-Chellappa projection onto integrable fields with periodic
/// boundaries and spectral derivatives. Same preconditions as integrate_dct.
DepthMap integrate_fft(const GradientField& g);

struct DenseLsqResult {
    DepthMap depth;
    int components = 0;  ///< connected pieces of the mask, each gauge-fixed
    Grid<int> component;  ///< per-pixel component label, -1 when masked out

    bool disconnected() const { return components > 1; }
};

inline constexpr std::size_t kDenseLsqMaxPixels = 4096;

/// Small-grid oracle: dense normal-equation solve of the forward-difference
/// least-squares problem on an arbitrary mask, zero mean per component.
DenseLsqResult integrate_dense_lsq(const GradientField& g, const Mask& mask);

}  // namespace sfg
