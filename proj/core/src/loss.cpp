#include "sfg/loss.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Geometry>

#include "sfg/errors.hpp"
#include "sfg/pyramid.hpp"

namespace sfg {

namespace {

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

Vec3 point_derivative(const CameraModel& cam, int r, int c) {
    if (cam.projection == Projection::perspective) {
        return {cam.u_of_col(c) / cam.focal, cam.v_of_row(r) / cam.focal, 1.0};
    }
    return {0.0, 0.0, 1.0};
}

// Pushes d loss / d n at one pixel back onto the depth values.
void normal_backward(const DepthMap& z, const PointCloud& pc, const CameraModel& cam, int r, int c, const Vec3& g_n,
                     GridD& gz) {
    const double h = cam.cell_size();
    const AxisStencil su = axis_stencil(z.mask, r, c, Axis::u, h);
    const AxisStencil sv = axis_stencil(z.mask, r, c, Axis::v, h);
    Vec3 tu = Vec3::Zero();
    Vec3 tv = Vec3::Zero();
    for (int k = 0; k < su.count; ++k) tu += su.weight[k] * pc.points[su.index[k]];
    for (int k = 0; k < sv.count; ++k) tv += sv.weight[k] * pc.points[sv.index[k]];
    const Vec3 cr = tu.cross(tv);
    const double len = cr.norm();
    const Vec3 unit = cr / len;
    const double flip = cr.z() < 0.0 ? -1.0 : 1.0;
    const Vec3 g_cr = flip * (g_n - unit * unit.dot(g_n)) / len;
    const Vec3 g_tu = tv.cross(g_cr);
    const Vec3 g_tv = g_cr.cross(tu);
    const int cols = z.cols();
    auto scatter = [&](const AxisStencil& s, const Vec3& g_t) {
        for (int k = 0; k < s.count; ++k) {
            const auto idx = s.index[k];
            const int rr = static_cast<int>(idx / static_cast<std::size_t>(cols));
            const int cc = static_cast<int>(idx % static_cast<std::size_t>(cols));
            gz[idx] += s.weight[k] * g_t.dot(point_derivative(cam, rr, cc));
        }
    };
    scatter(su, g_tu);
    scatter(sv, g_tv);
}

}  // namespace

LossTerms detail_weighted_loss(const DepthMap& z, const DepthMap& z_gt, const GridD& omega, const CameraModel& cam,
                               double gamma, bool with_grad) {
    if (!z.values.same_shape(z_gt.values) || !z.values.same_shape(omega) || !z.mask.same_shape(z.values) ||
        !z_gt.mask.same_shape(z.values)) {
        throw DataError("detail_weighted_loss: shapes differ (" + shape_string(z.rows(), z.cols()) + " vs " +
                        shape_string(z_gt.rows(), z_gt.cols()) + ")");
    }
    if (z.space != DepthSpace::linear || z_gt.space != DepthSpace::linear) {
        throw std::invalid_argument("detail_weighted_loss expects linear depth");
    }
    LossTerms out;
    for (std::size_t i = 0; i < z.values.size(); ++i) out.count += (z.mask[i] && z_gt.mask[i]) ? 1 : 0;
    if (out.count == 0) throw DataError("detail_weighted_loss: empty mask");
    const double inv_n = 1.0 / static_cast<double>(out.count);

    const NormalMap n = normals_from_depth(z, cam);
    const NormalMap n_gt = normals_from_depth(z_gt, cam);
    PointCloud pc;
    if (with_grad) {
        pc = depth_to_points(z, cam);
        out.grad_z = GridD(z.rows(), z.cols(), 0.0);
        out.grad_omega = GridD(z.rows(), z.cols(), 0.0);
    }
    out.signature.reserve(out.count * 5);
    for (int r = 0; r < z.rows(); ++r) {
        for (int c = 0; c < z.cols(); ++c) {
            const std::size_t i = z.values.index(r, c);
            if (!z.mask[i] || !z_gt.mask[i]) continue;
            const double w = omega[i];
            const double dz = z.values[i] - z_gt.values[i];
            const double depth = std::abs(dz) * inv_n;
            out.depth_term += (1.0 - w) * depth;
            out.signature.push_back(static_cast<std::int8_t>(sign(dz)));
            const bool has_normals = n.mask[i] && n_gt.mask[i];
            out.signature.push_back(has_normals ? 1 : 0);
            double normal = 0.0;
            Vec3 s = Vec3::Zero();
            if (has_normals) {
                const Vec3 diff = n.normals[i] - n_gt.normals[i];
                normal = diff.lpNorm<1>() * inv_n;
                for (int k = 0; k < 3; ++k) {
                    s[k] = sign(diff[k]);
                    out.signature.push_back(static_cast<std::int8_t>(s[k]));
                }
                out.normal_term += gamma * w * normal;
            }
            if (!with_grad) continue;
            out.grad_z[i] += (1.0 - w) * sign(dz) * inv_n;
            out.grad_omega[i] = -depth + gamma * normal;
            if (has_normals && w != 0.0 && gamma != 0.0) {
                normal_backward(z, pc, cam, r, c, gamma * w * inv_n * s, out.grad_z);
            }
        }
    }
    out.value = out.depth_term + out.normal_term;
    return out;
}

std::vector<DepthMap> ground_truth_levels(const DepthMap& gt, std::size_t levels) {
    if (levels == 0) throw std::invalid_argument("ground_truth_levels: need at least one level");
    std::vector<DepthMap> out{gt};
    while (out.size() < levels) out.push_back(downsample_depth(out.back()));
    return {out.rbegin(), out.rend()};
}

MultiresLoss multires_loss(const FninOutput& out, const std::vector<DepthMap>& gt_levels, double gamma,
                           bool with_grad) {
    if (out.levels.size() != gt_levels.size()) {
        throw std::invalid_argument("multires_loss: " + std::to_string(out.levels.size()) + " levels but " +
                                    std::to_string(gt_levels.size()) + " ground truths");
    }
    MultiresLoss total;
    for (std::size_t l = 0; l < out.levels.size(); ++l) {
        const LevelTrace& tr = out.levels[l];
        const DepthMap z{tr.z, tr.normals.mask, DepthSpace::linear, true};
        LossTerms t = detail_weighted_loss(z, gt_levels[l], tr.omega, tr.cam, gamma, with_grad);
        total.value += t.value;
        total.per_level.push_back(t.value);
        total.signature.insert(total.signature.end(), t.signature.begin(), t.signature.end());
        if (with_grad) {
            total.grad_z.push_back(std::move(t.grad_z));
            total.grad_omega.push_back(std::move(t.grad_omega));
        }
    }
    return total;
}

}  // namespace sfg
