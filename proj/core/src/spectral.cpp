#include "sfg/spectral.hpp"

#include <stdexcept>

#include "sfg/errors.hpp"
#include "sfg/fft.hpp"

namespace sfg::nn {

namespace {

struct Spectra {
    int rows = 0;
    int cols = 0;  // spectrum columns
    int channels = 0;
    std::vector<Complex> data;

    Complex* channel(int c) { return data.data() + static_cast<std::size_t>(c) * rows * cols; }
    const Complex* channel(int c) const { return data.data() + static_cast<std::size_t>(c) * rows * cols; }
};

Spectra transform(const Tensor& x) {
    const auto& plan = fft::RealFft2d::get(x.rows, x.cols);
    Spectra s{x.rows, plan.spectrum_cols(), x.channels, std::vector<Complex>(plan.spectrum_size() * x.channels)};
    for (int c = 0; c < x.channels; ++c) plan.forward(x.channel(c), s.channel(c));
    return s;
}

Tensor inverse(const Spectra& s, int cols) {
    const auto& plan = fft::RealFft2d::get(s.rows, cols);
    Tensor y(s.channels, s.rows, cols);
    const double scale = 1.0 / (static_cast<double>(s.rows) * cols);
    for (int c = 0; c < s.channels; ++c) {
        plan.inverse(s.channel(c), y.channel(c));
        double* yc = y.channel(c);
        for (std::size_t p = 0; p < y.plane(); ++p) yc[p] *= scale;
    }
    return y;
}

void check_input(const Tensor& x, int expected_channels) {
    if (x.channels != expected_channels) throw std::invalid_argument("spectral_conv: channel mismatch");
    if (x.rows < 2 || x.cols < 2) throw std::invalid_argument("spectral_conv: grid must be at least 2x2");
    if (!x.all_finite()) throw NumericalError("spectral_conv: non-finite input");
}

// Applies y(k) = sum_i M(k)_{oi} x_i(k), or the adjoint with conj(M)^T.
Spectra apply(const Spectra& in, const SpectralWeights& R, int grid_cols, bool adjoint) {
    const int out_ch = adjoint ? R.d_in : R.d_out;
    Spectra out{in.rows, in.cols, out_ch, std::vector<Complex>(static_cast<std::size_t>(in.rows) * in.cols * out_ch)};
    const int ku = SpectralWeights::clip_modes(R.k_u, grid_cols);
    const int kv = SpectralWeights::clip_modes(R.k_v, in.rows);
    for (int ky = -(kv - 1); ky < kv; ++ky) {
        const int row = ky < 0 ? ky + in.rows : ky;
        for (int kx = 0; kx < ku; ++kx) {
            const std::size_t k = static_cast<std::size_t>(row) * in.cols + kx;
            for (int o = 0; o < R.d_out; ++o) {
                for (int i = 0; i < R.d_in; ++i) {
                    const Complex m = R.effective(ky, kx, o, i);
                    if (adjoint) {
                        out.channel(i)[k] += std::conj(m) * in.channel(o)[k];
                    } else {
                        out.channel(o)[k] += m * in.channel(i)[k];
                    }
                }
            }
        }
    }
    return out;
}

}  // namespace

SpectralWeights::SpectralWeights(int ku, int kv, int out, int in)
    : k_u(ku), k_v(kv), d_out(out), d_in(in),
      data(static_cast<std::size_t>(2 * kv - 1) * ku * out * in, Complex(0.0, 0.0)) {
    if (ku < 1 || kv < 1 || out < 1 || in < 1) throw std::invalid_argument("spectral weights need positive sizes");
}

Complex SpectralWeights::effective(int ky, int kx, int o, int i) const {
    if (kx > 0) return at(ky, kx, o, i);
    return 0.5 * (at(ky, 0, o, i) + std::conj(at(-ky, 0, o, i)));
}

SpectralWeights identity_spectral(int k_u, int k_v, int d) {
    SpectralWeights R(k_u, k_v, d, d);
    for (int ky = -(k_v - 1); ky < k_v; ++ky) {
        for (int kx = 0; kx < k_u; ++kx) {
            for (int c = 0; c < d; ++c) R.at(ky, kx, c, c) = 1.0;
        }
    }
    return R;
}

Tensor spectral_conv(const Tensor& x, const SpectralWeights& R) {
    check_input(x, R.d_in);
    return inverse(apply(transform(x), R, x.cols, false), x.cols);
}

Tensor spectral_conv_backward(const Tensor& x, const SpectralWeights& R, const Tensor& grad_out,
                              std::vector<Complex>& grad_R) {
    check_input(x, R.d_in);
    if (grad_out.channels != R.d_out || grad_out.rows != x.rows || grad_out.cols != x.cols) {
        throw std::invalid_argument("spectral_conv_backward: gradient shape mismatch");
    }
    if (grad_R.size() != R.data.size()) throw std::invalid_argument("spectral_conv_backward: gradient buffer size");
    const Spectra X = transform(x);
    const Spectra G = transform(grad_out);

    const double n = static_cast<double>(x.rows) * x.cols;
    const int ku = SpectralWeights::clip_modes(R.k_u, x.cols);
    const int kv = SpectralWeights::clip_modes(R.k_v, x.rows);
    for (int ky = -(kv - 1); ky < kv; ++ky) {
        const int row = ky < 0 ? ky + x.rows : ky;
        for (int kx = 0; kx < ku; ++kx) {
            // Columns kx >= 1 stand for themselves and their mirror image.
            const double scale = (kx > 0 ? 2.0 : 1.0) / n;
            const std::size_t k = static_cast<std::size_t>(row) * X.cols + kx;
            for (int o = 0; o < R.d_out; ++o) {
                for (int i = 0; i < R.d_in; ++i) {
                    grad_R[R.index(ky, kx, o, i)] += scale * std::conj(X.channel(i)[k]) * G.channel(o)[k];
                }
            }
        }
    }
    return inverse(apply(G, R, x.cols, true), x.cols);
}

}  // namespace sfg::nn
