#include "sfg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Geometry>

#include "sfg/errors.hpp"

namespace sfg {

namespace {

constexpr double kSingularDenominator = 1e-8;
constexpr double kDegenerateCross = 1e-12;

void require_shape(const CameraModel& cam, int rows, int cols, const char* what) {
    if (cam.height != rows || cam.width != cols) {
        throw DataError(std::string(what) + " is " + shape_string(rows, cols) + " but camera is " +
                        shape_string(cam.height, cam.width));
    }
}

}  // namespace

void CameraModel::validate() const {
    if (width < 2 || height < 2) {
        throw std::invalid_argument("camera image must be at least 2x2, got " + shape_string(height, width));
    }
    if (!(main_distance > 0.0)) throw std::invalid_argument("main distance must be positive");
    if (projection == Projection::perspective && !(focal > 0.0)) {
        throw std::invalid_argument("perspective camera requires a positive focal length");
    }
}

double CameraModel::cell_size() const { return 2.0 / static_cast<double>(std::max(width, height) - 1); }

double CameraModel::u_of_col(int c) const { return (c - 0.5 * (width - 1)) * cell_size(); }

double CameraModel::v_of_row(int r) const { return (r - 0.5 * (height - 1)) * cell_size(); }

CameraModel CameraModel::resized(int new_width, int new_height) const {
    CameraModel out = *this;
    out.width = new_width;
    out.height = new_height;
    return out;
}

void NormalMap::validate(double tol) const {
    if (!mask.same_shape(normals)) throw DataError("normal map and mask shapes differ");
    for (std::size_t i = 0; i < normals.size(); ++i) {
        if (!mask[i]) continue;
        const Vec3& n = normals[i];
        if (!n.allFinite() || std::abs(n.norm() - 1.0) > tol) {
            throw DataError("masked-in normal at index " + std::to_string(i) + " is not unit length");
        }
        if (!(n.z() > 0.0)) {
            throw DataError("masked-in normal at index " + std::to_string(i) + " does not face the camera");
        }
    }
}

AxisStencil axis_stencil(const Mask& mask, int r, int c, Axis axis, double h) {
    AxisStencil s;
    if (!mask(r, c)) return s;
    const int dr = axis == Axis::v ? 1 : 0;
    const int dc = axis == Axis::u ? 1 : 0;
    const bool plus = mask.inside(r + dr, c + dc) && mask(r + dr, c + dc);
    const bool minus = mask.inside(r - dr, c - dc) && mask(r - dr, c - dc);
    if (plus && minus) {
        s.count = 2;
        s.index = {mask.index(r + dr, c + dc), mask.index(r - dr, c - dc)};
        s.weight = {0.5 / h, -0.5 / h};
    } else if (plus) {
        s.count = 2;
        s.index = {mask.index(r + dr, c + dc), mask.index(r, c)};
        s.weight = {1.0 / h, -1.0 / h};
    } else if (minus) {
        s.count = 2;
        s.index = {mask.index(r, c), mask.index(r - dr, c - dc)};
        s.weight = {1.0 / h, -1.0 / h};
    }
    return s;
}

CoordGrid normalized_coords(const CameraModel& cam) {
    if (cam.width < 2 || cam.height < 2) {
        throw std::invalid_argument("coordinate grid needs at least 2x2 pixels, got " +
                                    shape_string(cam.height, cam.width));
    }
    CoordGrid g{GridD(cam.height, cam.width), GridD(cam.height, cam.width)};
    for (int r = 0; r < cam.height; ++r) {
        const double v = cam.v_of_row(r);
        for (int c = 0; c < cam.width; ++c) {
            g.u(r, c) = cam.u_of_col(c);
            g.v(r, c) = v;
        }
    }
    return g;
}

GridD normal_denominator(const NormalMap& n, const CameraModel& cam) {
    require_shape(cam, n.rows(), n.cols(), "normal map");
    GridD d(n.rows(), n.cols(), 0.0);
    const bool persp = cam.projection == Projection::perspective;
    for (int r = 0; r < n.rows(); ++r) {
        for (int c = 0; c < n.cols(); ++c) {
            const Vec3& nn = n.normals(r, c);
            d(r, c) = persp ? cam.u_of_col(c) * nn.x() + cam.v_of_row(r) * nn.y() + cam.focal * nn.z() : nn.z();
        }
    }
    return d;
}

GradientField gradients_from_normals(const NormalMap& n, const CameraModel& cam) {
    cam.validate();
    const GridD denom = normal_denominator(n, cam);
    GradientField g;
    g.p = GridD(n.rows(), n.cols(), 0.0);
    g.q = GridD(n.rows(), n.cols(), 0.0);
    g.mask = Mask(n.rows(), n.cols(), 0);
    g.space = cam.solve_space();
    g.spacing = cam.cell_size();
    for (std::size_t i = 0; i < denom.size(); ++i) {
        if (!n.mask[i] || std::abs(denom[i]) < kSingularDenominator) continue;
        g.p[i] = -n.normals[i].x() / denom[i];
        g.q[i] = -n.normals[i].y() / denom[i];
        g.mask[i] = 1;
    }
    return g;
}

CentralDiffResult central_diff_gradient(const DepthMap& z, const CameraModel& cam) {
    cam.validate();
    require_shape(cam, z.rows(), z.cols(), "depth map");
    if (z.space != cam.solve_space()) {
        throw std::invalid_argument("depth space does not match the camera projection");
    }
    const double h = cam.cell_size();
    CentralDiffResult out;
    GradientField& g = out.gradient;
    g.p = GridD(z.rows(), z.cols(), 0.0);
    g.q = GridD(z.rows(), z.cols(), 0.0);
    g.mask = z.mask;
    g.space = z.space;
    g.spacing = h;
    out.isolated = Mask(z.rows(), z.cols(), 0);
    for (int r = 0; r < z.rows(); ++r) {
        for (int c = 0; c < z.cols(); ++c) {
            if (!z.mask(r, c)) continue;
            const AxisStencil su = axis_stencil(z.mask, r, c, Axis::u, h);
            const AxisStencil sv = axis_stencil(z.mask, r, c, Axis::v, h);
            for (int k = 0; k < su.count; ++k) g.p(r, c) += su.weight[k] * z.values[su.index[k]];
            for (int k = 0; k < sv.count; ++k) g.q(r, c) += sv.weight[k] * z.values[sv.index[k]];
            if (!su.valid() || !sv.valid()) out.isolated(r, c) = 1;
        }
    }
    return out;
}

PointCloud depth_to_points(const DepthMap& z, const CameraModel& cam) {
    cam.validate();
    require_shape(cam, z.rows(), z.cols(), "depth map");
    if (z.space != DepthSpace::linear) throw std::invalid_argument("depth_to_points needs linear depth");
    PointCloud pc{Grid<Vec3>(z.rows(), z.cols(), Vec3::Zero()), z.mask};
    const bool persp = cam.projection == Projection::perspective;
    for (int r = 0; r < z.rows(); ++r) {
        const double v = cam.v_of_row(r);
        for (int c = 0; c < z.cols(); ++c) {
            const double u = cam.u_of_col(c);
            const double d = z.values(r, c);
            pc.points(r, c) = persp ? Vec3(d * u / cam.focal, d * v / cam.focal, d) : Vec3(u, v, d);
        }
    }
    return pc;
}

NormalMap normals_from_depth(const DepthMap& z, const CameraModel& cam) {
    const PointCloud pc = depth_to_points(z, cam);
    const double h = cam.cell_size();
    NormalMap n{Grid<Vec3>(z.rows(), z.cols(), Vec3::Zero()), Mask(z.rows(), z.cols(), 0)};
    for (int r = 0; r < z.rows(); ++r) {
        for (int c = 0; c < z.cols(); ++c) {
            const AxisStencil su = axis_stencil(z.mask, r, c, Axis::u, h);
            const AxisStencil sv = axis_stencil(z.mask, r, c, Axis::v, h);
            if (!su.valid() || !sv.valid()) continue;
            Vec3 tu = Vec3::Zero();
            Vec3 tv = Vec3::Zero();
            for (int k = 0; k < su.count; ++k) tu += su.weight[k] * pc.points[su.index[k]];
            for (int k = 0; k < sv.count; ++k) tv += sv.weight[k] * pc.points[sv.index[k]];
            const Vec3 cr = tu.cross(tv);
            const double len = cr.norm();
            if (!(len >= kDegenerateCross)) continue;
            n.normals(r, c) = (cr.z() < 0.0 ? -cr : cr) / len;
            n.mask(r, c) = 1;
        }
    }
    return n;
}

OneSidedDiffs one_sided_diffs(const DepthMap& z, const GridD& nz) {
    if (!z.values.same_shape(nz) || !z.mask.same_shape(nz)) {
        throw DataError("one_sided_diffs: depth and normal component shapes differ");
    }
    const int rows = z.rows();
    const int cols = z.cols();
    OneSidedDiffs d{GridD(rows, cols, 0.0), GridD(rows, cols, 0.0), GridD(rows, cols, 0.0), GridD(rows, cols, 0.0),
                    Mask(rows, cols, 0),    Mask(rows, cols, 0),    Mask(rows, cols, 0),    Mask(rows, cols, 0)};
    auto one = [&](GridD& out, Mask& valid, int r, int c, int dr, int dc) {
        const int rr = r + dr;
        const int cc = c + dc;
        if (!z.mask.inside(rr, cc) || !z.mask(rr, cc)) return;
        out(r, c) = nz(r, c) * (z.values(r, c) - z.values(rr, cc));
        valid(r, c) = 1;
    };
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (!z.mask(r, c)) continue;
            one(d.u_plus, d.valid_u_plus, r, c, 0, 1);
            one(d.u_minus, d.valid_u_minus, r, c, 0, -1);
            one(d.v_plus, d.valid_v_plus, r, c, 1, 0);
            one(d.v_minus, d.valid_v_minus, r, c, -1, 0);
        }
    }
    return d;
}

DepthMap to_space(const DepthMap& z, DepthSpace space) {
    if (z.space == space) return z;
    DepthMap out = z;
    out.space = space;
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        if (space == DepthSpace::log) {
            if (z.mask[i] && !(z.values[i] > 0.0)) {
                throw DataError("log depth requested for non-positive depth at index " + std::to_string(i));
            }
            out.values[i] = z.values[i] > 0.0 ? std::log(z.values[i]) : 0.0;
        } else {
            out.values[i] = std::exp(z.values[i]);
        }
    }
    return out;
}

}  // namespace sfg
