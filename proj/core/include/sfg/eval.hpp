#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sfg/geometry.hpp"

namespace sfg {

enum class AlignMode { none, offset, scale };

AlignMode parse_align(const std::string& name);

/// Removes the gauge of `est` relative to `gt` over the shared mask:
/// offset subtracts median(est - gt), scale multiplies by median(gt / est)
/// over pixels where both are positive.
DepthMap align_depth(const DepthMap& est, const DepthMap& gt, AlignMode mode);

/// mu * mean |est - gt| over the shared mask after alignment.
double mae_mm(const DepthMap& est, const DepthMap& gt, double mu, AlignMode mode = AlignMode::offset);

/// 8-bit interleaved image.
struct Image8 {
    int rows = 0;
    int cols = 0;
    int channels = 3;
    std::vector<std::uint8_t> data;

    std::uint8_t* pixel(int r, int c) { return data.data() + (static_cast<std::size_t>(r) * cols + c) * channels; }
    const std::uint8_t* pixel(int r, int c) const {
        return data.data() + (static_cast<std::size_t>(r) * cols + c) * channels;
    }
};

/// Colour of ramp entry 0..255: dark blue through cyan, yellow and red.
std::array<std::uint8_t, 3> ramp_color(int index);

/// Ramp index of |est - gt| * mu clipped to `ceiling_mm`.
int error_ramp_index(double error_mm, double ceiling_mm);

/// Absolute-error image after alignment; masked-out pixels are black.
Image8 error_map(const DepthMap& est, const DepthMap& gt, double mu, double ceiling_mm,
                 AlignMode mode = AlignMode::offset);

struct MetricRow {
    std::string object;
    std::string method;
    double mae_mm = 0.0;
    double runtime_s = 0.0;
};

void write_metrics_csv(std::ostream& out, const std::vector<MetricRow>& rows, bool header = true);

}  // namespace sfg
