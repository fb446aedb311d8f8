#include "sfg/refine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <unsupported/Eigen/SparseExtra>

#include "sfg/errors.hpp"

namespace sfg {

namespace {

bool neighbour_ok(const Mask& mask, int r, int c, int dr, int dc) {
    return mask(r, c) && mask.inside(r + dr, c + dc) && mask(r + dr, c + dc);
}

GridD n_z(const NormalMap& n, const CameraModel& cam) {
    if (cam.projection == Projection::perspective) return normal_denominator(n, cam);
    GridD out(n.rows(), n.cols(), 0.0);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = n.normals[i].z();
    return out;
}

void require_weights(const DirectionalWeights& w, const Mask& mask) {
    for (const GridD* g : {&w.right, &w.left, &w.top, &w.bottom}) {
        if (!g->same_shape(mask)) throw DataError("directional weights do not match the mask shape");
    }
}

}  // namespace

DirectionalWeights directional_weights_from_attention(const GridD& omega, const Mask& mask) {
    if (!omega.same_shape(mask)) throw DataError("attention and mask shapes differ");
    const int rows = mask.rows();
    const int cols = mask.cols();
    DirectionalWeights w{GridD(rows, cols, 0.0), GridD(rows, cols, 0.0), GridD(rows, cols, 0.0),
                         GridD(rows, cols, 0.0)};
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (neighbour_ok(mask, r, c, 0, 1)) w.right(r, c) = omega(r, c + 1);
            if (neighbour_ok(mask, r, c, 0, -1)) w.left(r, c) = omega(r, c - 1);
            if (neighbour_ok(mask, r, c, -1, 0)) w.top(r, c) = omega(r - 1, c);
            if (neighbour_ok(mask, r, c, 1, 0)) w.bottom(r, c) = omega(r + 1, c);
        }
    }
    return w;
}

DirectionalWeights sigmoid_weights(const DepthMap& z, const GridD& nz, double k, double cell) {
    if (!(cell > 0.0)) throw std::invalid_argument("sigmoid_weights: cell size must be positive");
    const OneSidedDiffs d = one_sided_diffs(z, nz);
    const int rows = z.rows();
    const int cols = z.cols();
    DirectionalWeights w{GridD(rows, cols, 0.0), GridD(rows, cols, 0.0), GridD(rows, cols, 0.0),
                         GridD(rows, cols, 0.0)};
    auto logistic = [k](double plus, double minus) { return 1.0 / (1.0 + std::exp(k * (plus * plus - minus * minus))); };
    for (std::size_t i = 0; i < z.values.size(); ++i) {
        if (!z.mask[i]) continue;
        const double wr = logistic(d.u_plus[i] / cell, d.u_minus[i] / cell);
        const double wb = logistic(d.v_plus[i] / cell, d.v_minus[i] / cell);
        w.right[i] = d.valid_u_plus[i] ? wr : 0.0;
        w.left[i] = d.valid_u_minus[i] ? 1.0 - wr : 0.0;
        w.bottom[i] = d.valid_v_plus[i] ? wb : 0.0;
        w.top[i] = d.valid_v_minus[i] ? 1.0 - wb : 0.0;
    }
    return w;
}

DirectionalWeights uniform_weights(const Mask& mask, double value) {
    GridD ones(mask.rows(), mask.cols(), value);
    return directional_weights_from_attention(ones, mask);
}

double SparseSystem::objective(const Eigen::VectorXd& z) const {
    const Eigen::VectorXd r = A * z - b;
    return r.cwiseProduct(r).dot(w) + lambda * (z - initial).squaredNorm();
}

SparseSystem assemble_system(const NormalMap& n, const CameraModel& cam, const DirectionalWeights& w,
                             const DepthMap& z_ref, double lambda) {
    cam.validate();
    if (!(lambda > 0.0)) throw std::invalid_argument("assemble_system: lambda must be positive");
    if (n.rows() != cam.height || n.cols() != cam.width || !z_ref.values.same_shape(n.mask)) {
        throw DataError("assemble_system: normal map, depth and camera sizes differ");
    }
    require_weights(w, n.mask);
    const DepthMap zs = to_space(z_ref, cam.solve_space());
    const GridD nz = n_z(n, cam);
    const double h = cam.cell_size();

    SparseSystem sys;
    sys.lambda = lambda;
    sys.space = cam.solve_space();
    sys.index = Grid<int>(n.rows(), n.cols(), -1);
    for (int r = 0; r < n.rows(); ++r) {
        for (int c = 0; c < n.cols(); ++c) {
            if (!n.mask(r, c)) continue;
            if (!z_ref.mask(r, c)) throw DataError("assemble_system: reference depth missing at a masked-in pixel");
            sys.index(r, c) = static_cast<int>(sys.pixel.size());
            sys.pixel.push_back(n.mask.index(r, c));
        }
    }
    const auto N = static_cast<Eigen::Index>(sys.pixel.size());
    if (N == 0) throw DataError("assemble_system: empty mask");

    sys.initial.resize(N);
    for (Eigen::Index k = 0; k < N; ++k) sys.initial(k) = zs.values[sys.pixel[static_cast<std::size_t>(k)]];

    std::vector<Eigen::Triplet<double>> a_trip;
    std::vector<double> b_rows;
    std::vector<double> w_rows;
    // Row reads (n_z / h) * (z_fwd - z_back) = target.
    auto add_row = [&](int fwd, int back, double coeff, double target, double weight) {
        const auto row = static_cast<int>(b_rows.size());
        a_trip.emplace_back(row, fwd, coeff);
        a_trip.emplace_back(row, back, -coeff);
        b_rows.push_back(target);
        w_rows.push_back(0.5 * weight);
    };
    for (int r = 0; r < n.rows(); ++r) {
        for (int c = 0; c < n.cols(); ++c) {
            const int p = sys.index(r, c);
            if (p < 0) continue;
            const double coeff = nz(r, c) / h;
            const Vec3& nn = n.normals(r, c);
            if (neighbour_ok(n.mask, r, c, 0, 1)) add_row(sys.index(r, c + 1), p, coeff, -nn.x(), w.right(r, c));
            if (neighbour_ok(n.mask, r, c, 0, -1)) add_row(p, sys.index(r, c - 1), coeff, -nn.x(), w.left(r, c));
            if (neighbour_ok(n.mask, r, c, 1, 0)) add_row(sys.index(r + 1, c), p, coeff, -nn.y(), w.bottom(r, c));
            if (neighbour_ok(n.mask, r, c, -1, 0)) add_row(p, sys.index(r - 1, c), coeff, -nn.y(), w.top(r, c));
        }
    }
    const auto M = static_cast<Eigen::Index>(b_rows.size());
    sys.A.resize(M, N);
    sys.A.setFromTriplets(a_trip.begin(), a_trip.end());
    sys.b = Eigen::Map<const Eigen::VectorXd>(b_rows.data(), M);
    sys.w = Eigen::Map<const Eigen::VectorXd>(w_rows.data(), M);

    SparseRowMatrix identity(N, N);
    identity.setIdentity();
    sys.matrix = SparseRowMatrix(sys.A.transpose() * sys.w.asDiagonal() * sys.A) + lambda * identity;
    sys.rhs = sys.A.transpose() * sys.w.cwiseProduct(sys.b) + lambda * sys.initial;
    return sys;
}

CgReport solve_cg(const SparseRowMatrix& M, const Eigen::VectorXd& rhs, const Eigen::VectorXd& initial,
                  const CgOptions& opts) {
    if (M.rows() != M.cols() || M.rows() != rhs.size() || initial.size() != rhs.size()) {
        throw std::invalid_argument("solve_cg: dimension mismatch");
    }
    if (!(opts.tol > 0.0) || opts.max_iter < 0) throw std::invalid_argument("solve_cg: invalid tolerance or budget");
    CgReport rep;
    rep.x = initial;
    const double bnorm = rhs.norm() > 0.0 ? rhs.norm() : 1.0;
    Eigen::VectorXd r = rhs - M * rep.x;
    rep.residual = r.norm() / bnorm;
    if (rep.residual <= opts.tol) {
        rep.converged = true;
        return rep;
    }
    const Eigen::VectorXd diag = M.diagonal();
    if ((diag.array() <= 0.0).any()) throw NumericalError("solve_cg: matrix has a non-positive diagonal");
    const Eigen::VectorXd inv_diag = diag.cwiseInverse();

    Eigen::VectorXd z = inv_diag.cwiseProduct(r);
    Eigen::VectorXd p = z;
    double rz = r.dot(z);
    const int window = opts.stagnation_window >= 0
                           ? opts.stagnation_window
                           : std::max(500, static_cast<int>(2.0 * std::sqrt(static_cast<double>(M.rows()))));
    double checkpoint = rep.residual;
    double best = rep.residual;
    for (int it = 1; it <= opts.max_iter; ++it) {
        const Eigen::VectorXd Mp = M * p;
        const double pMp = p.dot(Mp);
        if (!(pMp > 0.0)) throw NumericalError("solve_cg: matrix is not positive definite");
        const double alpha = rz / pMp;
        rep.x += alpha * p;
        r -= alpha * Mp;
        rep.iterations = it;
        rep.residual = r.norm() / bnorm;
        if (opts.on_iteration) opts.on_iteration(it, rep.x);
        if (!std::isfinite(rep.residual)) throw NumericalError("solve_cg: residual became non-finite");
        if (rep.residual <= opts.tol) {
            rep.converged = true;
            break;
        }
        best = std::min(best, rep.residual);
        if (window > 0 && it % window == 0) {
            if (best > 0.1 * checkpoint) {
                rep.stagnated = true;
                break;
            }
            checkpoint = best;
        }
        z = inv_diag.cwiseProduct(r);
        const double rz_next = r.dot(z);
        p = z + (rz_next / rz) * p;
        rz = rz_next;
    }
    rep.residual = (rhs - M * rep.x).norm() / bnorm;
    return rep;
}

CgReport solve_cg(const SparseSystem& sys, const CgOptions& opts) {
    return solve_cg(sys.matrix, sys.rhs, sys.initial, opts);
}

RefineResult refine_with_weights(const NormalMap& n, const CameraModel& cam, const DepthMap& z_ref,
                                 const DirectionalWeights& w, const RefineOptions& opts) {
    const SparseSystem sys = assemble_system(n, cam, w, z_ref, opts.lambda);
    RefineResult out;
    out.weights = w;
    out.solver = solve_cg(sys, opts.cg);
    if (!out.solver.converged) {
        throw NumericalError(std::string("refine: conjugate gradients ") +
                             (out.solver.stagnated ? "stagnated" : "hit the iteration limit") + " after " +
                             std::to_string(out.solver.iterations) + " iterations, relative residual " +
                             std::to_string(out.solver.residual));
    }
    DepthMap z{GridD(n.rows(), n.cols(), 0.0), n.mask, sys.space, true};
    for (std::size_t k = 0; k < sys.pixel.size(); ++k) z.values[sys.pixel[k]] = out.solver.x(static_cast<Eigen::Index>(k));
    out.depth = to_space(z, DepthSpace::linear);
    for (std::size_t i = 0; i < out.depth.values.size(); ++i) {
        if (!out.depth.mask[i]) out.depth.values[i] = 0.0;
    }
    return out;
}

RefineResult refine(const NormalMap& n, const CameraModel& cam, const DepthMap& z_ref, const GridD* omega,
                    const RefineOptions& opts) {
    cam.validate();
    if (!z_ref.values.same_shape(n.mask)) throw DataError("refine: depth and normal map sizes differ");
    DirectionalWeights w;
    if (opts.mode == WeightMode::attention) {
        if (!omega) throw std::invalid_argument("refine: attention mode needs an attention map");
        w = directional_weights_from_attention(*omega, n.mask);
    } else {
        DepthMap zs = to_space(z_ref, cam.solve_space());
        zs.mask = n.mask;
        w = sigmoid_weights(zs, n_z(n, cam), opts.sigmoid_k, cam.cell_size());
    }
    return refine_with_weights(n, cam, z_ref, w, opts);
}

void write_matrix_market(const SparseSystem& sys, const std::string& matrix_path, const std::string& rhs_path) {
    const Eigen::SparseMatrix<double> col_major(sys.matrix);
    if (!Eigen::saveMarket(col_major, matrix_path)) throw DataError("cannot write " + matrix_path);
    if (!Eigen::saveMarketVector(sys.rhs, rhs_path)) throw DataError("cannot write " + rhs_path);
}

}  // namespace sfg
