#include "sfg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "sfg/loss.hpp"

namespace sfg {

namespace {

void append_index(std::vector<std::int8_t>& sig, std::size_t v) {
    for (int b = 0; b < 4; ++b) sig.push_back(static_cast<std::int8_t>((v >> (8 * b)) & 0xff));
}

struct Probe {
    double plus = 0.0;
    double minus = 0.0;
    bool smooth = false;
};

Probe probe(const FninParams& params, const SyntheticSample& sample, const GradCheckOptions& opts, std::size_t tensor,
            std::size_t coord, double eps, const std::vector<std::int8_t>& base_signature) {
    FninParams p = params;
    auto views = p.views();
    double* x = views[tensor].data + coord;
    const double orig = *x;
    Probe out;
    *x = orig + eps;
    const LossAndGrad up = loss_and_grad(p, sample, opts.gamma, opts.forward, false);
    *x = orig - eps;
    const LossAndGrad down = loss_and_grad(p, sample, opts.gamma, opts.forward, false);
    out.plus = up.loss;
    out.minus = down.loss;
    out.smooth = up.signature == base_signature && down.signature == base_signature;
    return out;
}

}  // namespace

LossAndGrad loss_and_grad(const FninParams& params, const SyntheticSample& sample, double gamma,
                          const ForwardOptions& opts, bool with_grad) {
    const FninOutput out = fnin_forward(sample.normals, sample.cam, params, opts, true);
    const auto gts = ground_truth_levels(sample.depth, out.levels.size());
    MultiresLoss ml = multires_loss(out, gts, gamma, with_grad);
    LossAndGrad r;
    r.loss = ml.value;
    r.signature = std::move(ml.signature);
    for (const auto& level : out.levels) {
        r.signature.push_back(level.attention.degenerate ? 1 : 0);
        append_index(r.signature, level.attention.argmin);
        append_index(r.signature, level.attention.argmax);
    }
    if (with_grad) {
        r.grad = params.zeros_like();
        fnin_backward(out, params, ml.grad_z, ml.grad_omega, r.grad);
    }
    return r;
}

double loss_with_grad(const FninParams& params, const SyntheticSample& sample, double gamma,
                      const ForwardOptions& opts, FninParams& grad) {
    const FninOutput out = fnin_forward(sample.normals, sample.cam, params, opts, true);
    const auto gts = ground_truth_levels(sample.depth, out.levels.size());
    const MultiresLoss ml = multires_loss(out, gts, gamma, true);
    grad.set_zero();
    fnin_backward(out, params, ml.grad_z, ml.grad_omega, grad);
    return ml.value;
}

GradCheckReport grad_check(const FninParams& params, const SyntheticSample& sample, const GradCheckOptions& opts) {
    if (!(opts.eps > 0.0)) throw std::invalid_argument("grad_check: step must be positive");
    const LossAndGrad base = loss_and_grad(params, sample, opts.gamma, opts.forward, true);
    const auto analytic = base.grad.views();
    const auto pviews = params.views();
    std::mt19937_64 rng(opts.seed);

    GradCheckReport report;
    for (std::size_t t = 0; t < pviews.size(); ++t) {
        TensorCheck tc;
        tc.name = pviews[t].name;
        std::uniform_int_distribution<std::size_t> pick(0, pviews[t].count - 1);
        const int max_draws = 50 * opts.samples_per_tensor;
        for (int draw = 0; draw < max_draws && tc.checked < opts.samples_per_tensor; ++draw) {
            const std::size_t k = pick(rng);
            const Probe pr = probe(params, sample, opts, t, k, opts.eps, base.signature);
            if (!pr.smooth) {
                ++tc.resampled;
                continue;
            }
            const double numeric = (pr.plus - pr.minus) / (2.0 * opts.eps);
            const double a = analytic[t].data[k];
            const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), opts.floor});
            ++tc.checked;
            if (rel >= tc.max_rel_error) {
                tc.max_rel_error = rel;
                tc.worst_index = k;
                tc.worst_analytic = a;
                tc.worst_numeric = numeric;
            }
        }
        if (tc.max_rel_error >= report.max_rel_error) {
            report.max_rel_error = tc.max_rel_error;
            report.worst_tensor = tc.name;
            report.worst_index = tc.worst_index;
        }
        report.tensors.push_back(std::move(tc));
    }
    report.passed = report.max_rel_error <= opts.tolerance &&
                    std::all_of(report.tensors.begin(), report.tensors.end(),
                                [&](const TensorCheck& c) { return c.checked >= opts.samples_per_tensor; });
    return report;
}

std::vector<double> fd_error_sweep(const FninParams& params, const SyntheticSample& sample,
                                   const std::vector<double>& steps, const GradCheckOptions& opts) {
    if (steps.empty()) return {};
    const LossAndGrad base = loss_and_grad(params, sample, opts.gamma, opts.forward, true);
    const auto analytic = base.grad.views();
    const auto pviews = params.views();
    const double widest = *std::max_element(steps.begin(), steps.end());
    std::mt19937_64 rng(opts.seed);

    std::vector<std::pair<std::size_t, std::size_t>> coords;
    for (std::size_t t = 0; t < pviews.size(); ++t) {
        std::uniform_int_distribution<std::size_t> pick(0, pviews[t].count - 1);
        for (int draw = 0; draw < 50; ++draw) {
            const std::size_t k = pick(rng);
            if (probe(params, sample, opts, t, k, widest, base.signature).smooth) {
                coords.emplace_back(t, k);
                break;
            }
        }
    }
    std::vector<double> errors;
    for (double eps : steps) {
        double worst = 0.0;
        for (const auto& [t, k] : coords) {
            const Probe pr = probe(params, sample, opts, t, k, eps, base.signature);
            const double numeric = (pr.plus - pr.minus) / (2.0 * eps);
            worst = std::max(worst, std::abs(numeric - analytic[t].data[k]));
        }
        errors.push_back(worst);
    }
    return errors;
}

}  // namespace sfg
