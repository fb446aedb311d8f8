#include "sfg/fft.hpp"

#include <cstring>
#include <map>
#include <mutex>
#include <utility>
#include <vector>

#include <fftw3.h>

namespace sfg::fft {

namespace {

// The FFTW planner is not thread-safe; execution on existing plans is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

constexpr unsigned kPlanFlags = FFTW_ESTIMATE | FFTW_UNALIGNED;

}  // namespace

struct RealFft2d::Plans {
    fftw_plan forward = nullptr;
    fftw_plan inverse = nullptr;
};

RealFft2d::RealFft2d(int rows, int cols) : rows_(rows), cols_(cols), plans_(std::make_unique<Plans>()) {
    std::vector<double> real(static_cast<std::size_t>(rows) * cols);
    std::vector<Complex> spec(spectrum_size());
    auto* c = reinterpret_cast<fftw_complex*>(spec.data());
    plans_->forward = fftw_plan_dft_r2c_2d(rows, cols, real.data(), c, kPlanFlags);
    plans_->inverse = fftw_plan_dft_c2r_2d(rows, cols, c, real.data(), kPlanFlags);
}

RealFft2d::~RealFft2d() {
    std::lock_guard lock(planner_mutex());
    if (plans_->forward) fftw_destroy_plan(plans_->forward);
    if (plans_->inverse) fftw_destroy_plan(plans_->inverse);
}

const RealFft2d& RealFft2d::get(int rows, int cols) {
    // The mutex must outlive the cache, whose destructor takes it.
    std::mutex& m = planner_mutex();
    static std::map<std::pair<int, int>, std::unique_ptr<RealFft2d>> cache;
    std::lock_guard lock(m);
    auto& slot = cache[{rows, cols}];
    if (!slot) slot.reset(new RealFft2d(rows, cols));
    return *slot;
}

void RealFft2d::forward(const double* in, Complex* out) const {
    fftw_execute_dft_r2c(plans_->forward, const_cast<double*>(in), reinterpret_cast<fftw_complex*>(out));
}

void RealFft2d::inverse(const Complex* in, double* out) const {
    // c2r destroys its input, so work on a copy.
    thread_local std::vector<Complex> scratch;
    scratch.assign(in, in + spectrum_size());
    fftw_execute_dft_c2r(plans_->inverse, reinterpret_cast<fftw_complex*>(scratch.data()), out);
}

namespace {

void run_r2r(const double* in, double* out, int rows, int cols, fftw_r2r_kind kind) {
    std::vector<double> src(in, in + static_cast<std::size_t>(rows) * cols);
    fftw_plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan = fftw_plan_r2r_2d(rows, cols, src.data(), out, kind, kind, kPlanFlags);
    }
    std::memcpy(src.data(), in, src.size() * sizeof(double));
    fftw_execute(plan);
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
}

}  // namespace

void dct2(const double* in, double* out, int rows, int cols) { run_r2r(in, out, rows, cols, FFTW_REDFT10); }

void idct2(const double* in, double* out, int rows, int cols) { run_r2r(in, out, rows, cols, FFTW_REDFT01); }

}  // namespace sfg::fft
