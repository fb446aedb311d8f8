#include "sfg/pyramid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sfg/errors.hpp"

namespace sfg {

namespace {

// Continuous coarse index of fine sample `i`, both grids centred and
// normalized by their longer side.
struct AxisMap {
    double scale;   // coarse index per fine index
    double offset;  // coarse index at fine index 0
};

AxisMap axis_map(int fine_n, int coarse_n, int fine_long, int coarse_long) {
    const double hf = 2.0 / (fine_long - 1);
    const double hc = 2.0 / (coarse_long - 1);
    return {hf / hc, -0.5 * (fine_n - 1) * hf / hc + 0.5 * (coarse_n - 1)};
}

struct Tap {
    int i0;
    double t;  // weight of i0 + 1
};

Tap tap(double x, int n) {
    const int i0 = std::clamp(static_cast<int>(std::floor(x)), 0, n - 2);
    return {i0, x - i0};
}

void require_resample(int rows, int cols, int target_rows, int target_cols) {
    if (rows < 2 || cols < 2) throw std::invalid_argument("upsample: source must be at least 2x2");
    if (target_rows < 2 || target_cols < 2) throw std::invalid_argument("upsample: target must be at least 2x2");
}

template <class Visit>
void for_each_tap(int rows, int cols, int target_rows, int target_cols, Visit visit) {
    const int flong = std::max(target_rows, target_cols);
    const int clong = std::max(rows, cols);
    const AxisMap mr = axis_map(target_rows, rows, flong, clong);
    const AxisMap mc = axis_map(target_cols, cols, flong, clong);
    for (int r = 0; r < target_rows; ++r) {
        const Tap tr = tap(mr.offset + mr.scale * r, rows);
        for (int c = 0; c < target_cols; ++c) {
            const Tap tc = tap(mc.offset + mc.scale * c, cols);
            visit(r, c, tr, tc);
        }
    }
}

}  // namespace

std::vector<std::pair<int, int>> pyramid_sizes(int rows, int cols, int coarsest_min) {
    if (rows < 2 || cols < 2) throw std::invalid_argument("pyramid: image must be at least 2x2");
    if (coarsest_min < 2) throw std::invalid_argument("pyramid: coarsest size must be at least 2");
    std::vector<std::pair<int, int>> sizes{{rows, cols}};
    while (std::min(rows, cols) >= 2 * coarsest_min) {
        rows = (rows + 1) / 2;
        cols = (cols + 1) / 2;
        sizes.emplace_back(rows, cols);
    }
    return sizes;
}

NormalMap downsample_normals(const NormalMap& n) {
    const int rows = (n.rows() + 1) / 2;
    const int cols = (n.cols() + 1) / 2;
    NormalMap out{Grid<Vec3>(rows, cols, Vec3::Zero()), Mask(rows, cols, 0)};
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            Vec3 sum = Vec3::Zero();
            int count = 0;
            for (int dr = 0; dr < 2; ++dr) {
                for (int dc = 0; dc < 2; ++dc) {
                    const int fr = 2 * r + dr;
                    const int fc = 2 * c + dc;
                    if (!n.mask.inside(fr, fc) || !n.mask(fr, fc)) continue;
                    sum += n.normals(fr, fc);
                    ++count;
                }
            }
            if (count == 0) continue;
            const double len = sum.norm();
            if (!(len > 0.0)) throw DataError("downsample_normals: opposing normals cancel in one block");
            out.normals(r, c) = sum / len;
            out.mask(r, c) = 1;
        }
    }
    return out;
}

DepthMap downsample_depth(const DepthMap& z) {
    const int rows = (z.rows() + 1) / 2;
    const int cols = (z.cols() + 1) / 2;
    DepthMap out{GridD(rows, cols, 0.0), Mask(rows, cols, 0), z.space, z.relative};
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            double sum = 0.0;
            int count = 0;
            for (int dr = 0; dr < 2; ++dr) {
                for (int dc = 0; dc < 2; ++dc) {
                    const int fr = 2 * r + dr;
                    const int fc = 2 * c + dc;
                    if (!z.mask.inside(fr, fc) || !z.mask(fr, fc)) continue;
                    sum += z.values(fr, fc);
                    ++count;
                }
            }
            if (count == 0) continue;
            out.values(r, c) = sum / count;
            out.mask(r, c) = 1;
        }
    }
    return out;
}

GridD upsample_grid(const GridD& g, int rows, int cols) {
    require_resample(g.rows(), g.cols(), rows, cols);
    GridD out(rows, cols);
    for_each_tap(g.rows(), g.cols(), rows, cols, [&](int r, int c, Tap tr, Tap tc) {
        const double top = std::lerp(g(tr.i0, tc.i0), g(tr.i0, tc.i0 + 1), tc.t);
        const double bottom = std::lerp(g(tr.i0 + 1, tc.i0), g(tr.i0 + 1, tc.i0 + 1), tc.t);
        out(r, c) = std::lerp(top, bottom, tr.t);
    });
    return out;
}

GridD upsample_grid_adjoint(const GridD& fine, int coarse_rows, int coarse_cols) {
    require_resample(coarse_rows, coarse_cols, fine.rows(), fine.cols());
    GridD out(coarse_rows, coarse_cols, 0.0);
    for_each_tap(coarse_rows, coarse_cols, fine.rows(), fine.cols(), [&](int r, int c, Tap tr, Tap tc) {
        const double g = fine(r, c);
        out(tr.i0, tc.i0) += (1.0 - tr.t) * (1.0 - tc.t) * g;
        out(tr.i0, tc.i0 + 1) += (1.0 - tr.t) * tc.t * g;
        out(tr.i0 + 1, tc.i0) += tr.t * (1.0 - tc.t) * g;
        out(tr.i0 + 1, tc.i0 + 1) += tr.t * tc.t * g;
    });
    return out;
}

DepthMap upsample_depth(const DepthMap& z, int rows, int cols) {
    DepthMap out{upsample_grid(z.values, rows, cols), Mask(rows, cols, 0), z.space, z.relative};
    for_each_tap(z.rows(), z.cols(), rows, cols, [&](int r, int c, Tap tr, Tap tc) {
        const int nr = tr.i0 + (tr.t >= 0.5 ? 1 : 0);
        const int nc = tc.i0 + (tc.t >= 0.5 ? 1 : 0);
        out.mask(r, c) = z.mask(std::clamp(nr, 0, z.rows() - 1), std::clamp(nc, 0, z.cols() - 1));
    });
    return out;
}

}  // namespace sfg
