#pragma once

#include <complex>
#include <vector>

#include "sfg/nn.hpp"

namespace sfg::nn {

using Complex = std::complex<double>;

/// Complex multipliers for the retained low-frequency modes.
///
/// Storage is [2 k_v - 1][k_u][d_out][d_in]: the row frequency ky is signed
/// (-k_v < ky < k_v) while the column frequency kx is non-negative
/// (0 <= kx < k_u), which covers a real field's half spectrum. At kx = 0 the
/// applied multiplier is the Hermitian part 0.5 (R(ky) + conj R(-ky)), so the
/// operator always maps real fields to real fields.
struct SpectralWeights {
    int k_u = 0;
    int k_v = 0;
    int d_out = 0;
    int d_in = 0;
    std::vector<Complex> data;

    SpectralWeights() = default;
    SpectralWeights(int ku, int kv, int out, int in);

    int ky_count() const noexcept { return 2 * k_v - 1; }
    std::size_t index(int ky, int kx, int o, int i) const noexcept {
        return ((static_cast<std::size_t>(ky + k_v - 1) * k_u + kx) * d_out + o) * d_in + i;
    }
    Complex& at(int ky, int kx, int o, int i) { return data[index(ky, kx, o, i)]; }
    const Complex& at(int ky, int kx, int o, int i) const { return data[index(ky, kx, o, i)]; }

    /// Multiplier actually applied at (ky, kx >= 0).
    Complex effective(int ky, int kx, int o, int i) const;

    /// Modes kept on an n-point axis: never reaches the Nyquist bin.
    static int clip_modes(int k, int n) noexcept { return k < (n + 1) / 2 ? k : (n + 1) / 2; }
};

/// Identity multiplier on every retained mode (d_out == d_in).
SpectralWeights identity_spectral(int k_u, int k_v, int d);

Tensor spectral_conv(const Tensor& x, const SpectralWeights& R);

/// Returns d loss / d x and accumulates d loss / d R (as d/dRe + i d/dIm)
/// into `grad_R`, which must match R.data in size.
Tensor spectral_conv_backward(const Tensor& x, const SpectralWeights& R, const Tensor& grad_out,
                              std::vector<Complex>& grad_R);

}  // namespace sfg::nn
