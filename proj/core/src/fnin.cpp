#include "sfg/fnin.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

#include "sfg/errors.hpp"
#include "sfg/pyramid.hpp"

namespace sfg {

namespace {

constexpr double kFlatScore = 1e-8;

void add_linear_views(std::vector<ParamView>& out, const std::string& name, nn::Linear& l) {
    out.push_back({name + ".weight", {l.out, l.in}, false, l.weight.data(), l.weight.size()});
    out.push_back({name + ".bias", {l.out}, false, l.bias.data(), l.bias.size()});
}

void add_conv_views(std::vector<ParamView>& out, const std::string& name, nn::Conv3x3& c) {
    out.push_back({name + ".weight", {c.out, c.in, 3, 3}, false, c.weight.data(), c.weight.size()});
    out.push_back({name + ".bias", {c.out}, false, c.bias.data(), c.bias.size()});
}

void add_layer_views(std::vector<ParamView>& out, const std::string& name, FourierLayer& f) {
    out.push_back({name + ".w", {f.w.out, f.w.in}, false, f.w.weight.data(), f.w.weight.size()});
    out.push_back({name + ".bias", {f.w.out}, false, f.w.bias.data(), f.w.bias.size()});
    auto& s = f.spectral;
    out.push_back({name + ".spectral",
                   {s.ky_count(), s.k_u, s.d_out, s.d_in},
                   true,
                   reinterpret_cast<double*>(s.data.data()),
                   2 * s.data.size()});
}

void check_finite(const nn::Tensor& t, std::size_t level, const CameraModel& cam, const char* stage) {
    if (t.all_finite()) return;
    throw NumericalError("fnin_forward: non-finite values at level " + std::to_string(level) + " (" +
                         shape_string(cam.height, cam.width) + "), " + stage);
}

std::string layer_name(const char* net, int t) { return std::string(net) + " layer " + std::to_string(t); }

nn::Tensor add(nn::Tensor a, const nn::Tensor& b) {
    for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
    return a;
}

const nn::Conv3x3& attention_layer(const FninParams& p, int l) { return l < 3 ? p.extractor[l] : p.regressor[l - 3]; }
nn::Conv3x3& attention_layer(FninParams& p, int l) { return l < 3 ? p.extractor[l] : p.regressor[l - 3]; }
bool activated(int l) { return l != 2 && l != 5; }

void stencil_apply(const Mask& mask, const GridD& f, double h, GridD& du, GridD& dv) {
    du = GridD(f.rows(), f.cols(), 0.0);
    dv = GridD(f.rows(), f.cols(), 0.0);
    for (int r = 0; r < f.rows(); ++r) {
        for (int c = 0; c < f.cols(); ++c) {
            if (!mask(r, c)) continue;
            const AxisStencil su = axis_stencil(mask, r, c, Axis::u, h);
            const AxisStencil sv = axis_stencil(mask, r, c, Axis::v, h);
            for (int k = 0; k < su.count; ++k) du(r, c) += su.weight[k] * f[su.index[k]];
            for (int k = 0; k < sv.count; ++k) dv(r, c) += sv.weight[k] * f[sv.index[k]];
        }
    }
}

// Adds the adjoint of stencil_apply applied to (gu, gv) into `out`.
void stencil_adjoint(const Mask& mask, const GridD& gu, const GridD& gv, double h, GridD& out) {
    for (int r = 0; r < mask.rows(); ++r) {
        for (int c = 0; c < mask.cols(); ++c) {
            if (!mask(r, c)) continue;
            const AxisStencil su = axis_stencil(mask, r, c, Axis::u, h);
            const AxisStencil sv = axis_stencil(mask, r, c, Axis::v, h);
            for (int k = 0; k < su.count; ++k) out[su.index[k]] += su.weight[k] * gu(r, c);
            for (int k = 0; k < sv.count; ++k) out[sv.index[k]] += sv.weight[k] * gv(r, c);
        }
    }
}

// d loss / d z through dis = sum (n3 (z_p - z_nb))^2 / cell.
void dis_backward(const GridD& z, const Mask& mask, const GridD& n3, double cell, const GridD& gdis, GridD& gz) {
    const int dr[4] = {0, 0, 1, -1};
    const int dc[4] = {1, -1, 0, 0};
    for (int r = 0; r < z.rows(); ++r) {
        for (int c = 0; c < z.cols(); ++c) {
            if (!mask(r, c) || gdis(r, c) == 0.0) continue;
            const double k = 2.0 * n3(r, c) * n3(r, c) / cell * gdis(r, c);
            for (int d = 0; d < 4; ++d) {
                const int rr = r + dr[d];
                const int cc = c + dc[d];
                if (!mask.inside(rr, cc) || !mask(rr, cc)) continue;
                const double g = k * (z(r, c) - z(rr, cc));
                gz(r, c) += g;
                gz(rr, cc) -= g;
            }
        }
    }
}

void attention_backward(const AttentionTrace& tr, const GridD& z, const GridD& n3, double cell, const FninParams& p,
                        const GridD& grad_omega, GridD& gz, FninParams& grad) {
    if (tr.degenerate) return;
    GridD gscore(tr.score.rows(), tr.score.cols(), 0.0);
    const double smin = tr.score[tr.argmin];
    const double smax = tr.score[tr.argmax];
    const double inv = 1.0 / tr.range;
    double to_min = 0.0;
    double to_max = 0.0;
    for (std::size_t i = 0; i < gscore.size(); ++i) {
        if (!tr.mask[i]) continue;
        const double g = grad_omega[i];
        gscore[i] += g * inv;
        to_min += g * (tr.score[i] - smax) * inv * inv;
        to_max -= g * (tr.score[i] - smin) * inv * inv;
    }
    gscore[tr.argmin] += to_min;
    gscore[tr.argmax] += to_max;

    nn::Tensor x = nn::from_grid(gscore);
    for (int l = 5; l >= 0; --l) {
        if (activated(l)) nn::gelu_backward(tr.pre[l].data, x.data);
        x = nn::conv_backward(attention_layer(p, l), tr.inputs[l], x, attention_layer(grad, l));
    }
    dis_backward(z, tr.mask, n3, cell, nn::to_grid(x), gz);
}

}  // namespace

nn::Tensor fourier_layer_apply(const nn::Tensor& v, const FourierLayer& layer, nn::Tensor* pre) {
    if (v.channels != layer.w.in || layer.spectral.d_in != v.channels || layer.spectral.d_out != layer.w.out) {
        throw std::invalid_argument("fourier layer: channel mismatch");
    }
    nn::Tensor out = add(nn::pointwise_forward(layer.w, v), nn::spectral_conv(v, layer.spectral));
    if (pre) *pre = out;
    nn::gelu_inplace(out.data);
    return out;
}

FninParams FninParams::zeros(const FninHyper& h) {
    if (h.T < 1 || h.k_max < 1 || h.d_v < 1 || h.c_a < 1) {
        throw std::invalid_argument("network hyperparameters must be positive");
    }
    FninParams p;
    p.hyper = h;
    p.lift = nn::Linear(4, h.d_v);
    p.project = {nn::Linear(h.d_v, h.d_v), nn::Linear(h.d_v, 1)};
    for (auto* net : {&p.initial, &p.iterative}) {
        net->assign(static_cast<std::size_t>(h.T),
                    FourierLayer{nn::Linear(h.d_v, h.d_v), nn::SpectralWeights(h.k_max, h.k_max, h.d_v, h.d_v)});
    }
    p.extractor = {nn::Conv3x3(1, h.c_a), nn::Conv3x3(h.c_a, h.c_a), nn::Conv3x3(h.c_a, h.c_a)};
    p.regressor = {nn::Conv3x3(h.c_a, h.c_a), nn::Conv3x3(h.c_a, h.c_a), nn::Conv3x3(h.c_a, 1)};
    return p;
}

FninParams FninParams::random(const FninHyper& h, std::uint64_t seed) {
    FninParams p = zeros(h);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    auto fill = [&](std::vector<double>& v, double bound) {
        for (auto& x : v) x = bound * unit(rng);
    };
    auto linear = [&](nn::Linear& l) {
        const double b = 1.0 / std::sqrt(static_cast<double>(l.in));
        fill(l.weight, b);
        fill(l.bias, b);
    };
    auto conv = [&](nn::Conv3x3& c) {
        const double b = 1.0 / std::sqrt(9.0 * c.in);
        fill(c.weight, b);
        fill(c.bias, b);
    };
    linear(p.lift);
    for (auto& l : p.project) linear(l);
    const double spectral_scale = 1.0 / (static_cast<double>(h.d_v) * h.k_max * h.k_max);
    for (auto* net : {&p.initial, &p.iterative}) {
        for (auto& layer : *net) {
            linear(layer.w);
            for (auto& z : layer.spectral.data) {
                const double re = unit(rng);
                const double im = unit(rng);
                z = spectral_scale * nn::Complex(re, im);
            }
        }
    }
    for (auto& c : p.extractor) conv(c);
    for (auto& c : p.regressor) conv(c);
    return p;
}

std::vector<ParamView> FninParams::views() {
    std::vector<ParamView> v;
    add_linear_views(v, "lift", lift);
    add_linear_views(v, "project.0", project[0]);
    add_linear_views(v, "project.1", project[1]);
    for (std::size_t t = 0; t < initial.size(); ++t) add_layer_views(v, "initial." + std::to_string(t), initial[t]);
    for (std::size_t t = 0; t < iterative.size(); ++t) {
        add_layer_views(v, "iterative." + std::to_string(t), iterative[t]);
    }
    for (int l = 0; l < 3; ++l) add_conv_views(v, "attention.extractor." + std::to_string(l), extractor[l]);
    for (int l = 0; l < 3; ++l) add_conv_views(v, "attention.regressor." + std::to_string(l), regressor[l]);
    return v;
}

std::vector<ParamView> FninParams::views() const { return const_cast<FninParams*>(this)->views(); }

std::size_t FninParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& v : views()) n += v.count;
    return n;
}

void FninParams::validate() const {
    const FninHyper& h = hyper;
    if (h.T < 1 || h.k_max < 1 || h.d_v < 1 || h.c_a < 1) {
        throw std::invalid_argument("network hyperparameters must be positive");
    }
    auto bad = [](const std::string& name) {
        throw std::invalid_argument("tensor " + name + " has the wrong shape");
    };
    auto linear = [&](const nn::Linear& l, int in, int out, const std::string& name) {
        if (l.in != in || l.out != out || l.weight.size() != static_cast<std::size_t>(in) * out ||
            l.bias.size() != static_cast<std::size_t>(out)) {
            bad(name);
        }
    };
    auto conv = [&](const nn::Conv3x3& c, int in, int out, const std::string& name) {
        if (c.in != in || c.out != out || c.weight.size() != static_cast<std::size_t>(in) * out * 9 ||
            c.bias.size() != static_cast<std::size_t>(out)) {
            bad(name);
        }
    };
    linear(lift, 4, h.d_v, "lift");
    linear(project[0], h.d_v, h.d_v, "project.0");
    linear(project[1], h.d_v, 1, "project.1");
    for (const auto& [net, prefix] : {std::pair{&initial, "initial."}, std::pair{&iterative, "iterative."}}) {
        if (net->size() != static_cast<std::size_t>(h.T)) {
            throw std::invalid_argument(std::string("network has ") + std::to_string(net->size()) + " " + prefix +
                                        "* layers, hyperparameters imply " + std::to_string(h.T));
        }
        for (std::size_t t = 0; t < net->size(); ++t) {
            const auto& layer = (*net)[t];
            const std::string name = prefix + std::to_string(t);
            linear(layer.w, h.d_v, h.d_v, name + ".w");
            const auto& s = layer.spectral;
            if (s.k_u != h.k_max || s.k_v != h.k_max || s.d_out != h.d_v || s.d_in != h.d_v ||
                s.data.size() != static_cast<std::size_t>(2 * h.k_max - 1) * h.k_max * h.d_v * h.d_v) {
                bad(name + ".spectral");
            }
        }
    }
    conv(extractor[0], 1, h.c_a, "attention.extractor.0");
    conv(extractor[1], h.c_a, h.c_a, "attention.extractor.1");
    conv(extractor[2], h.c_a, h.c_a, "attention.extractor.2");
    conv(regressor[0], h.c_a, h.c_a, "attention.regressor.0");
    conv(regressor[1], h.c_a, h.c_a, "attention.regressor.1");
    conv(regressor[2], h.c_a, 1, "attention.regressor.2");
}

void FninParams::set_zero() {
    for (auto& v : views()) std::fill(v.data, v.data + v.count, 0.0);
}

void FninParams::accumulate(const FninParams& other) {
    auto mine = views();
    const auto theirs = other.views();
    for (std::size_t i = 0; i < mine.size(); ++i) {
        for (std::size_t k = 0; k < mine[i].count; ++k) mine[i].data[k] += theirs[i].data[k];
    }
}

void FninParams::scale(double s) {
    for (auto& v : views()) {
        for (std::size_t k = 0; k < v.count; ++k) v.data[k] *= s;
    }
}

GridD attention_weights(const DepthMap& z, const GridD& n3, double cell, const FninParams& params,
                        AttentionTrace* trace) {
    if (!z.values.same_shape(n3)) throw DataError("attention_weights: depth and n3 shapes differ");
    AttentionTrace local;
    AttentionTrace& tr = trace ? *trace : local;
    const OneSidedDiffs d = one_sided_diffs(z, n3);
    tr.mask = z.mask;
    tr.dis = GridD(z.rows(), z.cols(), 0.0);
    for (std::size_t i = 0; i < tr.dis.size(); ++i) {
        tr.dis[i] = (d.u_plus[i] * d.u_plus[i] + d.u_minus[i] * d.u_minus[i] + d.v_plus[i] * d.v_plus[i] +
                     d.v_minus[i] * d.v_minus[i]) /
                    cell;
    }
    nn::Tensor x = nn::from_grid(tr.dis);
    for (int l = 0; l < 6; ++l) {
        tr.inputs[l] = x;
        tr.pre[l] = nn::conv_forward(attention_layer(params, l), x);
        x = tr.pre[l];
        if (activated(l)) nn::gelu_inplace(x.data);
    }
    tr.score = nn::to_grid(x);

    GridD omega(z.rows(), z.cols(), 0.0);
    bool any = false;
    for (std::size_t i = 0; i < omega.size(); ++i) {
        if (!z.mask[i]) continue;
        if (!any || tr.score[i] < tr.score[tr.argmin]) tr.argmin = i;
        if (!any || tr.score[i] > tr.score[tr.argmax]) tr.argmax = i;
        any = true;
    }
    if (!any) return omega;
    tr.range = tr.score[tr.argmax] - tr.score[tr.argmin];
    tr.degenerate = !(tr.range >= kFlatScore);
    for (std::size_t i = 0; i < omega.size(); ++i) {
        if (!z.mask[i]) continue;
        omega[i] = tr.degenerate ? 0.5 : (tr.score[i] - tr.score[tr.argmin]) / tr.range;
    }
    return omega;
}

FninOutput fnin_forward(const NormalMap& n, const CameraModel& cam, const FninParams& params,
                        const ForwardOptions& opts, bool keep_trace) {
    cam.validate();
    params.validate();
    if (n.rows() != cam.height || n.cols() != cam.width) {
        throw DataError("normal map is " + shape_string(n.rows(), n.cols()) + " but camera is " +
                        shape_string(cam.height, cam.width));
    }
    if (count_valid(n.mask) == 0) throw DataError("fnin_forward: empty mask");

    const auto sizes = pyramid_sizes(n.rows(), n.cols(), opts.coarsest_min);
    std::vector<NormalMap> pyr{n};
    for (std::size_t i = 1; i < sizes.size(); ++i) pyr.push_back(downsample_normals(pyr.back()));
    std::reverse(pyr.begin(), pyr.end());

    const bool persp = cam.projection == Projection::perspective;
    FninOutput out;
    GridD s_prev;
    for (std::size_t level = 0; level < pyr.size(); ++level) {
        LevelTrace tr;
        const NormalMap& nl = pyr[level];
        const int rows = nl.rows();
        const int cols = nl.cols();
        tr.cam = cam.resized(cols, rows);
        const double h = tr.cam.cell_size();
        tr.n3 = GridD(rows, cols, 0.0);
        for (std::size_t i = 0; i < tr.n3.size(); ++i) tr.n3[i] = nl.normals[i].z();

        tr.zhat = level == 0 ? GridD(rows, cols, 0.0) : upsample_grid(s_prev, rows, cols);
        const GradientField g = gradients_from_normals(nl, tr.cam);
        tr.glog_p = g.p;
        tr.glog_q = g.q;
        if (!persp) {
            for (std::size_t i = 0; i < tr.zhat.size(); ++i) {
                const double inv_z = std::exp(-tr.zhat[i]);
                tr.glog_p[i] *= inv_z;
                tr.glog_q[i] *= inv_z;
            }
        }
        GridD du, dv;
        stencil_apply(nl.mask, tr.zhat, h, du, dv);
        const CoordGrid coords = normalized_coords(tr.cam);
        tr.lift_in = nn::Tensor(4, rows, cols);
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                if (nl.mask(r, c)) {
                    tr.lift_in.at(0, r, c) = tr.glog_p(r, c) - du(r, c);
                    tr.lift_in.at(1, r, c) = tr.glog_q(r, c) - dv(r, c);
                }
                tr.lift_in.at(2, r, c) = coords.u(r, c);
                tr.lift_in.at(3, r, c) = coords.v(r, c);
            }
        }
        check_finite(tr.lift_in, level, tr.cam, "lifting input");

        nn::Tensor v = nn::pointwise_forward(params.lift, tr.lift_in);
        check_finite(v, level, tr.cam, "lifting");
        const auto& net = level == 0 ? params.initial : params.iterative;
        const char* net_name = level == 0 ? "initial" : "iterative";
        for (int t = 0; t < params.hyper.T; ++t) {
            const FourierLayer& layer = net[static_cast<std::size_t>(t)];
            nn::Tensor pre;
            nn::Tensor next = fourier_layer_apply(v, layer, &pre);
            tr.layer_in.push_back(std::move(v));
            v = std::move(next);
            tr.layer_pre.push_back(std::move(pre));
            check_finite(v, level, tr.cam, layer_name(net_name, t).c_str());
        }
        tr.layer_in.push_back(v);
        tr.proj_pre = nn::pointwise_forward(params.project[0], v);
        tr.proj_h = tr.proj_pre;
        nn::gelu_inplace(tr.proj_h.data);
        tr.q = nn::pointwise_forward(params.project[1], tr.proj_h);
        check_finite(tr.q, level, tr.cam, "projection");

        s_prev = GridD(rows, cols);
        tr.z = GridD(rows, cols);
        for (std::size_t i = 0; i < s_prev.size(); ++i) {
            s_prev[i] = tr.zhat[i] + tr.q.data[i];
            tr.z[i] = std::exp(s_prev[i]);
            if (!std::isfinite(tr.z[i])) {
                throw NumericalError("fnin_forward: depth overflow at level " + std::to_string(level) + " (" +
                                     shape_string(rows, cols) + ")");
            }
        }
        const DepthMap zl{tr.z, nl.mask, DepthSpace::linear, true};
        tr.omega = attention_weights(zl, tr.n3, h, params, &tr.attention);
        if (!std::all_of(tr.omega.values().begin(), tr.omega.values().end(), [](double w) { return std::isfinite(w); })) {
            throw NumericalError("fnin_forward: non-finite attention at level " + std::to_string(level));
        }
        tr.normals = nl;
        if (level + 1 == pyr.size()) {
            out.depth = zl;
            out.omega = tr.omega;
        }
        if (keep_trace || level + 1 == pyr.size()) out.levels.push_back(std::move(tr));
    }
    if (!keep_trace) out.levels.clear();
    return out;
}

void fnin_backward(const FninOutput& out, const FninParams& params, const std::vector<GridD>& grad_z,
                   const std::vector<GridD>& grad_omega, FninParams& grad) {
    const std::size_t levels = out.levels.size();
    if (levels == 0) throw std::invalid_argument("fnin_backward: forward pass kept no trace");
    if (grad_z.size() != levels || grad_omega.size() != levels) {
        throw std::invalid_argument("fnin_backward: one gradient per level required");
    }
    const bool persp = out.levels.front().cam.projection == Projection::perspective;
    GridD carry;
    for (std::size_t li = levels; li-- > 0;) {
        const LevelTrace& tr = out.levels[li];
        const int rows = tr.z.rows();
        const int cols = tr.z.cols();
        const double h = tr.cam.cell_size();
        const Mask& mask = tr.normals.mask;

        GridD gz = grad_z[li];
        attention_backward(tr.attention, tr.z, tr.n3, h, params, grad_omega[li], gz, grad);

        GridD gs(rows, cols);
        for (std::size_t i = 0; i < gs.size(); ++i) gs[i] = gz[i] * tr.z[i] + (carry.empty() ? 0.0 : carry[i]);

        nn::Tensor gh = nn::pointwise_backward(params.project[1], tr.proj_h, nn::from_grid(gs), grad.project[1]);
        nn::gelu_backward(tr.proj_pre.data, gh.data);
        nn::Tensor gv = nn::pointwise_backward(params.project[0], tr.layer_in.back(), gh, grad.project[0]);

        const auto& net = li == 0 ? params.initial : params.iterative;
        auto& gnet = li == 0 ? grad.initial : grad.iterative;
        for (int t = params.hyper.T - 1; t >= 0; --t) {
            const auto ti = static_cast<std::size_t>(t);
            nn::gelu_backward(tr.layer_pre[ti].data, gv.data);
            nn::Tensor gx = nn::pointwise_backward(net[ti].w, tr.layer_in[ti], gv, gnet[ti].w);
            gv = add(std::move(gx), nn::spectral_conv_backward(tr.layer_in[ti], net[ti].spectral, gv,
                                                                 gnet[ti].spectral.data));
        }
        const nn::Tensor glift = nn::pointwise_backward(params.lift, tr.lift_in, gv, grad.lift);

        GridD gzhat = gs;
        GridD gu(rows, cols, 0.0);
        GridD gvv(rows, cols, 0.0);
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                if (!mask(r, c)) continue;
                const double gp = glift.at(0, r, c);
                const double gq = glift.at(1, r, c);
                gu(r, c) = -gp;
                gvv(r, c) = -gq;
                if (!persp) gzhat(r, c) -= gp * tr.glog_p(r, c) + gq * tr.glog_q(r, c);
            }
        }
        stencil_adjoint(mask, gu, gvv, h, gzhat);
        if (li > 0) {
            const auto& coarse = out.levels[li - 1].z;
            carry = upsample_grid_adjoint(gzhat, coarse.rows(), coarse.cols());
        }
    }
}

}  // namespace sfg
