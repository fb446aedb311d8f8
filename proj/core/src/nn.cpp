#include "sfg/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sfg::nn {

namespace {

constexpr double kGeluA = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluB = 0.044715;

Tensor replicate_pad(const Tensor& x) {
    Tensor p(x.channels, x.rows + 2, x.cols + 2);
    for (int c = 0; c < x.channels; ++c) {
        for (int r = 0; r < p.rows; ++r) {
            const int sr = std::clamp(r - 1, 0, x.rows - 1);
            for (int w = 0; w < p.cols; ++w) {
                const int sw = std::clamp(w - 1, 0, x.cols - 1);
                p.at(c, r, w) = x.at(c, sr, sw);
            }
        }
    }
    return p;
}

}  // namespace

bool Tensor::all_finite() const noexcept {
    return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

Tensor from_grid(const GridD& g) {
    Tensor t(1, g.rows(), g.cols());
    std::copy(g.values().begin(), g.values().end(), t.data.begin());
    return t;
}

GridD to_grid(const Tensor& t, int channel) {
    GridD g(t.rows, t.cols);
    std::copy(t.channel(channel), t.channel(channel) + t.plane(), g.data());
    return g;
}

double gelu(double x) noexcept {
    return 0.5 * x * (1.0 + std::tanh(kGeluA * (x + kGeluB * x * x * x)));
}

double gelu_grad(double x) noexcept {
    const double t = std::tanh(kGeluA * (x + kGeluB * x * x * x));
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluA * (1.0 + 3.0 * kGeluB * x * x);
}

void gelu_inplace(std::span<double> x) noexcept {
    for (auto& v : x) v = gelu(v);
}

void gelu_backward(std::span<const double> pre, std::span<double> grad) noexcept {
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= gelu_grad(pre[i]);
}

Tensor pointwise_forward(const Linear& layer, const Tensor& x) {
    if (x.channels != layer.in) throw std::invalid_argument("pointwise layer: channel mismatch");
    Tensor y(layer.out, x.rows, x.cols);
    const std::size_t n = x.plane();
    for (int o = 0; o < layer.out; ++o) {
        double* yo = y.channel(o);
        std::fill(yo, yo + n, layer.bias[o]);
        for (int i = 0; i < layer.in; ++i) {
            const double w = layer.w(o, i);
            const double* xi = x.channel(i);
            for (std::size_t p = 0; p < n; ++p) yo[p] += w * xi[p];
        }
    }
    return y;
}

Tensor pointwise_backward(const Linear& layer, const Tensor& x, const Tensor& grad_out, Linear& g) {
    Tensor gx(layer.in, x.rows, x.cols);
    const std::size_t n = x.plane();
    for (int o = 0; o < layer.out; ++o) {
        const double* go = grad_out.channel(o);
        double sb = 0.0;
        for (std::size_t p = 0; p < n; ++p) sb += go[p];
        g.bias[o] += sb;
        for (int i = 0; i < layer.in; ++i) {
            const double* xi = x.channel(i);
            double* gi = gx.channel(i);
            const double w = layer.w(o, i);
            double sw = 0.0;
            for (std::size_t p = 0; p < n; ++p) {
                sw += go[p] * xi[p];
                gi[p] += w * go[p];
            }
            g.weight[static_cast<std::size_t>(o) * layer.in + i] += sw;
        }
    }
    return gx;
}

Tensor conv_forward(const Conv3x3& layer, const Tensor& x) {
    if (x.channels != layer.in) throw std::invalid_argument("conv layer: channel mismatch");
    const Tensor xp = replicate_pad(x);
    Tensor y(layer.out, x.rows, x.cols);
    for (int o = 0; o < layer.out; ++o) {
        double* yo = y.channel(o);
        std::fill(yo, yo + y.plane(), layer.bias[o]);
        for (int i = 0; i < layer.in; ++i) {
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    const double w = layer.w(o, i, ky, kx);
                    for (int r = 0; r < x.rows; ++r) {
                        const double* src = &xp.at(i, r + ky, kx);
                        double* dst = yo + static_cast<std::size_t>(r) * x.cols;
                        for (int c = 0; c < x.cols; ++c) dst[c] += w * src[c];
                    }
                }
            }
        }
    }
    return y;
}

Tensor conv_backward(const Conv3x3& layer, const Tensor& x, const Tensor& grad_out, Conv3x3& g) {
    const Tensor xp = replicate_pad(x);
    Tensor gp(layer.in, x.rows + 2, x.cols + 2);
    for (int o = 0; o < layer.out; ++o) {
        const double* go = grad_out.channel(o);
        double sb = 0.0;
        for (std::size_t p = 0; p < grad_out.plane(); ++p) sb += go[p];
        g.bias[o] += sb;
        for (int i = 0; i < layer.in; ++i) {
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    const double w = layer.w(o, i, ky, kx);
                    double sw = 0.0;
                    for (int r = 0; r < x.rows; ++r) {
                        const double* src = &xp.at(i, r + ky, kx);
                        double* gsrc = &gp.at(i, r + ky, kx);
                        const double* gor = go + static_cast<std::size_t>(r) * x.cols;
                        for (int c = 0; c < x.cols; ++c) {
                            sw += gor[c] * src[c];
                            gsrc[c] += w * gor[c];
                        }
                    }
                    g.weight[((static_cast<std::size_t>(o) * layer.in + i) * 3 + ky) * 3 + kx] += sw;
                }
            }
        }
    }
    Tensor gx(layer.in, x.rows, x.cols);
    for (int i = 0; i < layer.in; ++i) {
        for (int r = 0; r < gp.rows; ++r) {
            const int sr = std::clamp(r - 1, 0, x.rows - 1);
            for (int w = 0; w < gp.cols; ++w) {
                const int sw = std::clamp(w - 1, 0, x.cols - 1);
                gx.at(i, sr, sw) += gp.at(i, r, w);
            }
        }
    }
    return gx;
}

}  // namespace sfg::nn
