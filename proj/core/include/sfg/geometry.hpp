#pragma once

#include <array>

#include <Eigen/Core>

#include "sfg/grid.hpp"

namespace sfg {

using Vec3 = Eigen::Vector3d;

enum class Projection { orthographic, perspective };
enum class DepthSpace { linear, log };

/// Pinhole or orthographic camera over a normalized image plane.
///
/// Pixel centres are mapped affinely so that the longer image axis spans
/// [-1, 1]; the shorter axis covers a proportional, centred sub-interval, so
/// pixels stay square. `focal` is expressed in the same normalized units.
struct CameraModel {
    Projection projection = Projection::orthographic;
    double focal = 1.0;          ///< perspective only
    double main_distance = 1.0;  ///< mu, millimetres; restores absolute depth
    int width = 0;
    int height = 0;

    /// Throws std::invalid_argument when the camera cannot be used.
    void validate() const;

    /// Spacing between adjacent pixel centres in normalized units.
    double cell_size() const;

    double u_of_col(int c) const;
    double v_of_row(int r) const;

    /// Same intrinsics over a resampled image of the given size.
    CameraModel resized(int new_width, int new_height) const;

    DepthSpace solve_space() const {
        return projection == Projection::perspective ? DepthSpace::log : DepthSpace::linear;
    }
};

struct CoordGrid {
    GridD u;
    GridD v;
};

struct NormalMap {
    Grid<Vec3> normals;
    Mask mask;

    int rows() const { return normals.rows(); }
    int cols() const { return normals.cols(); }

    /// Checks unit length (within `tol`) and n3 > 0 on masked-in pixels.
    void validate(double tol = 1e-6) const;
};

struct GradientField {
    GridD p;
    GridD q;
    Mask mask;
    DepthSpace space = DepthSpace::linear;
    double spacing = 1.0;  ///< grid spacing the gradients refer to

    int rows() const { return p.rows(); }
    int cols() const { return p.cols(); }
};

struct DepthMap {
    GridD values;
    Mask mask;
    DepthSpace space = DepthSpace::linear;
    bool relative = true;  ///< values are z / mu

    int rows() const { return values.rows(); }
    int cols() const { return values.cols(); }
};

struct PointCloud {
    Grid<Vec3> points;
    Mask mask;
};

// ---------------------------------------------------------------------------
// Finite-difference stencils shared by the geometric operators and the
// network adjoints.

enum class Axis { u, v };

/// Mask-aware first-derivative stencil at one pixel: central where both
/// neighbours are valid, one-sided where only one is, empty otherwise.
struct AxisStencil {
    int count = 0;
    std::array<std::size_t, 2> index{};
    std::array<double, 2> weight{};

    bool valid() const { return count > 0; }
};

AxisStencil axis_stencil(const Mask& mask, int r, int c, Axis axis, double h);

// ---------------------------------------------------------------------------

CoordGrid normalized_coords(const CameraModel& cam);

/// Per-pixel gradient denominator: n3 (orthographic) or u n1 + v n2 + f n3.
GridD normal_denominator(const NormalMap& n, const CameraModel& cam);

GradientField gradients_from_normals(const NormalMap& n, const CameraModel& cam);

struct CentralDiffResult {
    GradientField gradient;
    Mask isolated;  ///< masked-in pixels lacking a neighbour along some axis
};

CentralDiffResult central_diff_gradient(const DepthMap& z, const CameraModel& cam);

PointCloud depth_to_points(const DepthMap& z, const CameraModel& cam);

NormalMap normals_from_depth(const DepthMap& z, const CameraModel& cam);

/// Point-to-plane one-sided differences n_z (z(p) - z(neighbour)) in the four
/// grid directions. `u_plus` uses the right neighbour, `v_plus` the next row.
struct OneSidedDiffs {
    GridD u_plus, u_minus, v_plus, v_minus;
    Mask valid_u_plus, valid_u_minus, valid_v_plus, valid_v_minus;
};

OneSidedDiffs one_sided_diffs(const DepthMap& z, const GridD& nz);

/// Converts between linear and log depth; the mask is carried over.
DepthMap to_space(const DepthMap& z, DepthSpace space);

}  // namespace sfg
