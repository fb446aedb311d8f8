#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sfg/fnin.hpp"
#include "sfg/synth.hpp"

namespace sfg {

struct GradCheckOptions {
    double eps = 1e-5;
    int samples_per_tensor = 20;
    std::uint64_t seed = 0;
    double gamma = 0.25;
    double tolerance = 1e-3;
    /// Relative errors use max(|analytic|, |numeric|, floor) as denominator.
    /// Structurally zero gradients leave only roundoff in the numeric side,
    /// around 1e-8 at the default step, which the floor absorbs.
    double floor = 1e-4;
    ForwardOptions forward{8};
};

struct TensorCheck {
    std::string name;
    int checked = 0;
    int resampled = 0;  ///< draws rejected because the step crossed a kink
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

struct GradCheckReport {
    std::vector<TensorCheck> tensors;
    double max_rel_error = 0.0;
    std::string worst_tensor;
    std::size_t worst_index = 0;
    bool passed = false;
};

/// Loss and analytic gradient of the multi-resolution loss for one sample.
struct LossAndGrad {
    double loss = 0.0;
    FninParams grad;
    std::vector<std::int8_t> signature;
};

LossAndGrad loss_and_grad(const FninParams& params, const SyntheticSample& sample, double gamma,
                          const ForwardOptions& opts, bool with_grad = true);

/// Loss only, with the gradient written into `grad`, which must already
/// have the parameters' shape; lets callers reuse gradient storage.
double loss_with_grad(const FninParams& params, const SyntheticSample& sample, double gamma,
                      const ForwardOptions& opts, FninParams& grad);

/// Compares analytic gradients with central differences on randomly drawn
/// coordinates of every tensor. A draw whose +-eps evaluations change the
/// loss's piecewise signature (L1 signs, attention extrema) is redrawn.
GradCheckReport grad_check(const FninParams& params, const SyntheticSample& sample, const GradCheckOptions& opts);

/// Largest absolute gap between the analytic gradient and central
/// differences at each step size, over a fixed set of coordinates.
std::vector<double> fd_error_sweep(const FninParams& params, const SyntheticSample& sample,
                                   const std::vector<double>& steps, const GradCheckOptions& opts);

}  // namespace sfg
