#include "sfg/classical.hpp"

#include <cmath>
#include <numbers>
#include <queue>
#include <stdexcept>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "sfg/errors.hpp"
#include "sfg/fft.hpp"

namespace sfg {

namespace {

void require_full_grid(const GradientField& g, const char* who) {
    if (!g.q.same_shape(g.p) || !g.mask.same_shape(g.p)) throw DataError(std::string(who) + ": shape mismatch");
    if (g.rows() < 4 || g.cols() < 4) {
        throw std::invalid_argument(std::string(who) + ": grid must be at least 4x4, got " +
                                    shape_string(g.rows(), g.cols()));
    }
    for (auto m : g.mask.values()) {
        if (!m) throw DataError(std::string(who) + ": masked holes are not supported, use the dense or weighted solver");
    }
    for (std::size_t i = 0; i < g.p.size(); ++i) {
        if (!std::isfinite(g.p[i]) || !std::isfinite(g.q[i])) throw DataError(std::string(who) + ": non-finite gradient");
    }
}

DepthMap make_depth(const GradientField& g, GridD values, Mask mask) {
    DepthMap z;
    z.values = std::move(values);
    z.mask = std::move(mask);
    z.space = g.space;
    z.relative = true;
    return z;
}

}  // namespace

DepthMap integrate_dct(const GradientField& g) {
    require_full_grid(g, "integrate_dct");
    const int rows = g.rows();
    const int cols = g.cols();
    const double h = g.spacing;

    // h * D^T g, with D the forward difference operator.
    GridD rhs(rows, cols, 0.0);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            double s = 0.0;
            if (c + 1 < cols) s -= g.p(r, c);
            if (c > 0) s += g.p(r, c - 1);
            if (r + 1 < rows) s -= g.q(r, c);
            if (r > 0) s += g.q(r - 1, c);
            rhs(r, c) = h * s;
        }
    }

    GridD spec(rows, cols);
    fft::dct2(rhs.data(), spec.data(), rows, cols);
    for (int r = 0; r < rows; ++r) {
        const double ev = 2.0 - 2.0 * std::cos(std::numbers::pi * r / rows);
        for (int c = 0; c < cols; ++c) {
            const double eu = 2.0 - 2.0 * std::cos(std::numbers::pi * c / cols);
            spec(r, c) = (r == 0 && c == 0) ? 0.0 : spec(r, c) / (eu + ev);
        }
    }
    GridD z(rows, cols);
    fft::idct2(spec.data(), z.data(), rows, cols);
    const double norm = 1.0 / (4.0 * rows * cols);
    for (auto& v : z.values()) v *= norm;
    return make_depth(g, std::move(z), Mask(rows, cols, 1));
}

DepthMap integrate_fft(const GradientField& g) {
    require_full_grid(g, "integrate_fft");
    const int rows = g.rows();
    const int cols = g.cols();
    const auto& plan = fft::RealFft2d::get(rows, cols);
    std::vector<fft::Complex> P(plan.spectrum_size()), Q(plan.spectrum_size()), Z(plan.spectrum_size());
    plan.forward(g.p.data(), P.data());
    plan.forward(g.q.data(), Q.data());

    const double two_pi = 2.0 * std::numbers::pi;
    auto frequency = [&](int k, int n) {
        if (2 * k == n) return 0.0;  // Nyquist bin carries no usable derivative
        const int signed_k = (2 * k > n) ? k - n : k;
        return two_pi * signed_k / (n * g.spacing);
    };
    const fft::Complex I(0.0, 1.0);
    for (int r = 0; r < rows; ++r) {
        const double wv = frequency(r, rows);
        for (int c = 0; c < plan.spectrum_cols(); ++c) {
            const double wu = frequency(c, cols);
            const std::size_t i = static_cast<std::size_t>(r) * plan.spectrum_cols() + c;
            const double den = wu * wu + wv * wv;
            Z[i] = den > 0.0 ? (-I * wu * P[i] - I * wv * Q[i]) / den : fft::Complex(0.0, 0.0);
        }
    }
    GridD z(rows, cols);
    plan.inverse(Z.data(), z.data());
    const double norm = 1.0 / (static_cast<double>(rows) * cols);
    for (auto& v : z.values()) v *= norm;
    return make_depth(g, std::move(z), Mask(rows, cols, 1));
}

DenseLsqResult integrate_dense_lsq(const GradientField& g, const Mask& mask) {
    if (!mask.same_shape(g.p) || !g.q.same_shape(g.p)) throw DataError("integrate_dense_lsq: shape mismatch");
    const int rows = g.rows();
    const int cols = g.cols();

    Grid<int> index(rows, cols, -1);
    std::vector<std::size_t> pixel;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (!mask(r, c)) continue;
            index(r, c) = static_cast<int>(pixel.size());
            pixel.push_back(mask.index(r, c));
        }
    }
    const std::size_t n = pixel.size();
    if (n == 0) throw DataError("integrate_dense_lsq: empty mask");
    if (n > kDenseLsqMaxPixels) {
        throw std::invalid_argument("integrate_dense_lsq: " + std::to_string(n) + " pixels exceed the dense limit of " +
                                    std::to_string(kDenseLsqMaxPixels));
    }

    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    std::vector<std::vector<int>> adjacency(n);
    auto edge = [&](int a, int bnb, double target) {
        // residual (z_b - z_a) - h * target
        L(a, a) += 1.0;
        L(bnb, bnb) += 1.0;
        L(a, bnb) -= 1.0;
        L(bnb, a) -= 1.0;
        b(a) -= g.spacing * target;
        b(bnb) += g.spacing * target;
        adjacency[static_cast<std::size_t>(a)].push_back(bnb);
        adjacency[static_cast<std::size_t>(bnb)].push_back(a);
    };
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const int a = index(r, c);
            if (a < 0) continue;
            if (c + 1 < cols && index(r, c + 1) >= 0) edge(a, index(r, c + 1), g.p(r, c));
            if (r + 1 < rows && index(r + 1, c) >= 0) edge(a, index(r + 1, c), g.q(r, c));
        }
    }

    DenseLsqResult out;
    out.component = Grid<int>(rows, cols, -1);
    std::vector<int> label(n, -1);
    std::vector<std::vector<int>> members;
    for (std::size_t s = 0; s < n; ++s) {
        if (label[s] >= 0) continue;
        const int id = static_cast<int>(members.size());
        members.emplace_back();
        std::queue<int> todo;
        todo.push(static_cast<int>(s));
        label[s] = id;
        while (!todo.empty()) {
            const int k = todo.front();
            todo.pop();
            members.back().push_back(k);
            for (int nb : adjacency[static_cast<std::size_t>(k)]) {
                if (label[static_cast<std::size_t>(nb)] < 0) {
                    label[static_cast<std::size_t>(nb)] = id;
                    todo.push(nb);
                }
            }
        }
    }
    // Adding 1 1^T per component removes the constant null space; the
    // right-hand side is orthogonal to it, so the solution is zero-mean.
    for (const auto& comp : members) {
        for (int a : comp) {
            for (int bb : comp) L(a, bb) += 1.0;
        }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(L);
    if (llt.info() != Eigen::Success) throw NumericalError("integrate_dense_lsq: factorization failed");
    Eigen::VectorXd z = llt.solve(b);
    for (const auto& comp : members) {
        double mean = 0.0;
        for (int a : comp) mean += z(a);
        mean /= static_cast<double>(comp.size());
        for (int a : comp) z(a) -= mean;
    }

    GridD values(rows, cols, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        values[pixel[k]] = z(static_cast<Eigen::Index>(k));
        out.component[pixel[k]] = label[k];
    }
    out.components = static_cast<int>(members.size());
    out.depth = make_depth(g, std::move(values), mask);
    return out;
}

}  // namespace sfg
