#pragma once

#include <complex>
#include <memory>

namespace sfg::fft {

using Complex = std::complex<double>;

/// Unnormalized 2D real-to-complex DFT over a rows x cols grid (row-major).
/// Spectra hold rows x (cols / 2 + 1) coefficients; the forward transform
/// uses exp(-i k x). Instances are cached per shape and safe to share
/// between threads.
class RealFft2d {
public:
    static const RealFft2d& get(int rows, int cols);

    int rows() const noexcept { return rows_; }
    int cols() const noexcept { return cols_; }
    int spectrum_cols() const noexcept { return cols_ / 2 + 1; }
    std::size_t spectrum_size() const noexcept {
        return static_cast<std::size_t>(rows_) * static_cast<std::size_t>(spectrum_cols());
    }

    void forward(const double* in, Complex* out) const;
    /// Unnormalized inverse; `in` is left untouched.
    void inverse(const Complex* in, double* out) const;

    ~RealFft2d();
    RealFft2d(const RealFft2d&) = delete;
    RealFft2d& operator=(const RealFft2d&) = delete;

private:
    RealFft2d(int rows, int cols);
    struct Plans;
    int rows_;
    int cols_;
    std::unique_ptr<Plans> plans_;
};

/// Unnormalized 2D DCT-II (FFTW REDFT10) and its inverse up to a factor of
/// 4 * rows * cols (REDFT01).
void dct2(const double* in, double* out, int rows, int cols);
void idct2(const double* in, double* out, int rows, int cols);

}  // namespace sfg::fft
