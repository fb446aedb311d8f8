#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sfg/grid.hpp"

namespace sfg::nn {

/// Channel-major feature stack: data[(c * rows + r) * cols + col].
struct Tensor {
    int channels = 0;
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(int c, int r, int w, double fill = 0.0)
        : channels(c), rows(r), cols(w), data(static_cast<std::size_t>(c) * r * w, fill) {}

    std::size_t plane() const noexcept { return static_cast<std::size_t>(rows) * cols; }
    double* channel(int c) noexcept { return data.data() + c * plane(); }
    const double* channel(int c) const noexcept { return data.data() + c * plane(); }
    double& at(int c, int r, int w) { return data[c * plane() + static_cast<std::size_t>(r) * cols + w]; }
    const double& at(int c, int r, int w) const { return data[c * plane() + static_cast<std::size_t>(r) * cols + w]; }

    bool same_shape(const Tensor& o) const noexcept {
        return channels == o.channels && rows == o.rows && cols == o.cols;
    }
    bool all_finite() const noexcept;
};

Tensor from_grid(const GridD& g);
GridD to_grid(const Tensor& t, int channel = 0);

// GELU, tanh approximation.
double gelu(double x) noexcept;
double gelu_grad(double x) noexcept;
void gelu_inplace(std::span<double> x) noexcept;
/// grad <- grad * gelu'(pre)
void gelu_backward(std::span<const double> pre, std::span<double> grad) noexcept;

/// Dense layer shared by every pixel: out[o] = sum_i weight[o, i] in[i] + bias[o].
struct Linear {
    int in = 0;
    int out = 0;
    std::vector<double> weight;  // out x in, row-major
    std::vector<double> bias;    // out

    Linear() = default;
    Linear(int in_ch, int out_ch) : in(in_ch), out(out_ch), weight(static_cast<std::size_t>(in_ch) * out_ch), bias(out_ch) {}
    double& w(int o, int i) { return weight[static_cast<std::size_t>(o) * in + i]; }
    double w(int o, int i) const { return weight[static_cast<std::size_t>(o) * in + i]; }
};

Tensor pointwise_forward(const Linear& layer, const Tensor& x);
/// Accumulates parameter gradients into `g` (same shape as `layer`) and
/// returns d loss / d x.
Tensor pointwise_backward(const Linear& layer, const Tensor& x, const Tensor& grad_out, Linear& g);

/// 3x3 convolution with replicate padding.
struct Conv3x3 {
    int in = 0;
    int out = 0;
    std::vector<double> weight;  // out x in x 3 x 3
    std::vector<double> bias;    // out

    Conv3x3() = default;
    Conv3x3(int in_ch, int out_ch)
        : in(in_ch), out(out_ch), weight(static_cast<std::size_t>(in_ch) * out_ch * 9), bias(out_ch) {}
    double& w(int o, int i, int ky, int kx) { return weight[((static_cast<std::size_t>(o) * in + i) * 3 + ky) * 3 + kx]; }
    double w(int o, int i, int ky, int kx) const {
        return weight[((static_cast<std::size_t>(o) * in + i) * 3 + ky) * 3 + kx];
    }
};

Tensor conv_forward(const Conv3x3& layer, const Tensor& x);
Tensor conv_backward(const Conv3x3& layer, const Tensor& x, const Tensor& grad_out, Conv3x3& g);

}  // namespace sfg::nn
