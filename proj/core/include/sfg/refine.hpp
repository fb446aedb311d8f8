#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "sfg/geometry.hpp"

namespace sfg {

/// Per-pixel weights of the four difference constraints. `right` pairs
/// with the forward u difference, `left` with the backward one, `bottom`
/// with the forward v difference (next row) and `top` with the backward one.
struct DirectionalWeights {
    GridD right, left, top, bottom;
};

/// w_r(i,j) = omega(i,j+1), w_l(i,j) = omega(i,j-1), w_t(i,j) = omega(i-1,j),
/// w_b(i,j) = omega(i+1,j); zero where the pixel or that neighbour is
/// masked out.
DirectionalWeights directional_weights_from_attention(const GridD& omega, const Mask& mask);

/// Bilateral logistic weights from one-sided differences divided by the
/// cell size: w_r = 1 / (1 + exp(k (d_r^2 - d_l^2))), w_l = 1 - w_r, and the
/// same along v. Weights of missing neighbours are zero.
DirectionalWeights sigmoid_weights(const DepthMap& z, const GridD& nz, double k, double cell);

/// Uniform weights on every valid constraint.
DirectionalWeights uniform_weights(const Mask& mask, double value = 1.0);

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Normal equations (A^T W A + lambda I) z = A^T W b + lambda z_ref of
/// sum_rows W (a z - b)^2 + lambda |z - z_ref|^2 over the masked-in pixels,
/// which are numbered in row-major order.
struct SparseSystem {
    SparseRowMatrix matrix;
    Eigen::VectorXd rhs;
    Eigen::VectorXd initial;  ///< z_ref, the warm start
    SparseRowMatrix A;
    Eigen::VectorXd b;
    Eigen::VectorXd w;  ///< W diagonal
    double lambda = 0.0;
    std::vector<std::size_t> pixel;  ///< unknown -> flat pixel index
    Grid<int> index;                 ///< pixel -> unknown, -1 off-mask
    DepthSpace space = DepthSpace::linear;

    Eigen::Index size() const { return rhs.size(); }
    double objective(const Eigen::VectorXd& z) const;
};

/// Difference rows use n_z / h with n_z = n3 (orthographic) or
/// u n1 + v n2 + f n3 (perspective, log depth); rows whose neighbour is
/// masked out are dropped. `z_ref` is converted to the camera's solve space.
SparseSystem assemble_system(const NormalMap& n, const CameraModel& cam, const DirectionalWeights& w,
                             const DepthMap& z_ref, double lambda);

struct CgOptions {
    double tol = 1e-9;
    int max_iter = 5000;
    /// Stagnation is declared when the best residual so far fails to drop
    /// 10x within this many iterations. -1 picks max(500, 2 sqrt(n)), since
    /// Jacobi-preconditioned CG on grid problems needs O(side) iterations
    /// per decade early on; 0 disables the check.
    int stagnation_window = -1;
    /// Called with the iterate after every update.
    std::function<void(int iteration, const Eigen::VectorXd& x)> on_iteration;
};

struct CgReport {
    Eigen::VectorXd x;
    int iterations = 0;
    double residual = 0.0;  ///< |b - M x| / |b|
    bool converged = false;
    bool stagnated = false;  ///< no 10x drop of the best residual over the window
};

/// Jacobi-preconditioned conjugate gradients from `initial`.
CgReport solve_cg(const SparseRowMatrix& M, const Eigen::VectorXd& rhs, const Eigen::VectorXd& initial,
                  const CgOptions& opts = {});
CgReport solve_cg(const SparseSystem& sys, const CgOptions& opts = {});

enum class WeightMode { attention, sigmoid };

struct RefineOptions {
    WeightMode mode = WeightMode::attention;
    double lambda = 1e-3;
    double sigmoid_k = 2.0;
    CgOptions cg;
};

struct RefineResult {
    DepthMap depth;  ///< linear relative depth
    DirectionalWeights weights;
    CgReport solver;
};

/// One weighted least-squares pass. In attention mode `omega` is required.
/// Throws NumericalError when CG does not reach the tolerance.
RefineResult refine(const NormalMap& n, const CameraModel& cam, const DepthMap& z_ref, const GridD* omega,
                    const RefineOptions& opts = {});
RefineResult refine_with_weights(const NormalMap& n, const CameraModel& cam, const DepthMap& z_ref,
                                 const DirectionalWeights& w, const RefineOptions& opts = {});

/// Writes the matrix and right-hand side in Matrix Market coordinate and
/// array formats.
void write_matrix_market(const SparseSystem& sys, const std::string& matrix_path, const std::string& rhs_path);

}  // namespace sfg
